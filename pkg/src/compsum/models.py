"""Small differentiable score models with hand-coded gradients.

Attacks need input gradients and the trainer needs parameter gradients, so
both are explicit. All arrays are float64; batches are row-major
``(batch, dim)``.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class LinearModel:
    """Per-label affine scores ``W x + b``."""

    W: np.ndarray  # (n_labels, dim)
    b: np.ndarray  # (n_labels,)

    @property
    def n_labels(self):
        return self.W.shape[0]

    @property
    def dim(self):
        return self.W.shape[1]

    def forward(self, X):
        return X @ self.W.T + self.b

    def input_grad(self, X, dscores):
        return dscores @ self.W

    def param_grads(self, X, dscores):
        return {"W": dscores.T @ X, "b": dscores.sum(axis=0)}

    def params(self):
        return {"W": self.W, "b": self.b}

    def get_flat(self):
        return np.concatenate([self.W.ravel(), self.b])

    def set_flat(self, flat):
        nw = self.W.size
        self.W = flat[:nw].reshape(self.W.shape).copy()
        self.b = flat[nw:].copy()

    def header_dims(self):
        return [self.dim, self.n_labels]


@dataclass
class MLPModel:
    """Two-layer perceptron with tanh hidden activation."""

    W1: np.ndarray  # (dim, hidden)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (hidden, n_labels)
    b2: np.ndarray  # (n_labels,)

    @property
    def n_labels(self):
        return self.W2.shape[1]

    @property
    def dim(self):
        return self.W1.shape[0]

    @property
    def hidden(self):
        return self.W1.shape[1]

    def forward(self, X):
        return np.tanh(X @ self.W1 + self.b1) @ self.W2 + self.b2

    def _hidden_act(self, X):
        return np.tanh(X @ self.W1 + self.b1)

    def input_grad(self, X, dscores):
        Z = self._hidden_act(X)
        dZ = (dscores @ self.W2.T) * (1.0 - Z * Z)
        return dZ @ self.W1.T

    def param_grads(self, X, dscores):
        Z = self._hidden_act(X)
        dZ = (dscores @ self.W2.T) * (1.0 - Z * Z)
        return {
            "W1": X.T @ dZ,
            "b1": dZ.sum(axis=0),
            "W2": Z.T @ dscores,
            "b2": dscores.sum(axis=0),
        }

    def params(self):
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def get_flat(self):
        return np.concatenate([self.W1.ravel(), self.b1,
                               self.W2.ravel(), self.b2])

    def set_flat(self, flat):
        i = 0
        for name in ("W1", "b1", "W2", "b2"):
            arr = getattr(self, name)
            setattr(self, name, flat[i:i + arr.size].reshape(arr.shape).copy())
            i += arr.size

    def header_dims(self):
        return [self.dim, self.hidden, self.n_labels]


def init_linear(dim, n_labels, seed=0, scale=None):
    rng = np.random.default_rng(seed)
    scale = 1.0 / math.sqrt(dim) if scale is None else scale
    return LinearModel(rng.normal(scale=scale, size=(n_labels, dim)),
                       np.zeros(n_labels))


def init_mlp(dim, hidden, n_labels, seed=0):
    rng = np.random.default_rng(seed)
    return MLPModel(
        rng.normal(scale=1.0 / math.sqrt(dim), size=(dim, hidden)),
        np.zeros(hidden),
        rng.normal(scale=1.0 / math.sqrt(hidden), size=(hidden, n_labels)),
        np.zeros(n_labels),
    )


# checkpoint format: one text header line "compsum-model <kind> <dims...>",
# then all parameters as raw little-endian float64 in declaration order
_MAGIC = "compsum-model"


def save_model(model, path):
    kind = "linear" if isinstance(model, LinearModel) else "mlp"
    dims = " ".join(str(d) for d in model.header_dims())
    with open(path, "wb") as fh:
        fh.write(f"{_MAGIC} {kind} {dims}\n".encode("ascii"))
        fh.write(model.get_flat().astype("<f8").tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip().split()
        if not header or header[0] != _MAGIC:
            raise ValueError(f"bad checkpoint header in {path}")
        kind = header[1]
        dims = [int(v) for v in header[2:]]
        flat = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    if kind == "linear":
        dim, n = dims
        model = LinearModel(np.zeros((n, dim)), np.zeros(n))
    elif kind == "mlp":
        dim, hidden, n = dims
        model = MLPModel(np.zeros((dim, hidden)), np.zeros(hidden),
                         np.zeros((hidden, n)), np.zeros(n))
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    expected = model.get_flat().size
    if flat.size != expected:
        raise ValueError(f"checkpoint holds {flat.size} floats, expected {expected}")
    model.set_flat(flat)
    return model
