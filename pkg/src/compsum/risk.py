"""Conditional risks, best-in-class risks, calibration and minimizability gaps.

The closed-form best-in-class conditional risk assumes a symmetric and
complete hypothesis set; the brute-force oracle minimizes over an explicit
score box by multi-start projected gradient descent and is the independent
cross-check for every closed form in this module.

The minimizability gap (best-in-class expected risk minus the expected
pointwise infimum) is always upper bounded by the approximation error,
where the inner infimum runs over all measurable score functions instead of
the restricted set; the gap is the finer quantity and the only one
computed here.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import losses
from ._kernels import pgd_box_weighted_min
from .losses import TAU_BRANCH_TOL, check_tau

# Box half-width standing in for an unbounded (complete) score set in the
# brute-force oracle.
UNBOUNDED_BOX_LAM = 30.0

# Smoothing floor for zero probabilities when tau > 2 makes the closed-form
# exponent negative.
ZERO_PROB_EPS = 1e-12


def check_cond_dist(p, n=None):
    """Validate a conditional label distribution (sums to 1 within 1e-12)."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] < 2:
        raise ValueError("conditional distribution must be 1-D with >= 2 entries")
    if n is not None and p.shape[0] != n:
        raise ValueError(f"expected {n} labels, got {p.shape[0]}")
    if np.any(p < -1e-15):
        raise ValueError("probabilities must be nonnegative")
    if abs(p.sum() - 1.0) > 1e-12:
        raise ValueError(f"probabilities sum to {p.sum()}, not 1")
    return np.maximum(p, 0.0)


@dataclass(frozen=True)
class SupportPoint:
    """One atom of a finite-support distribution.

    ``x`` carries input features and is only required by hypothesis sets
    whose scores depend on the input (the linear family).
    """

    weight: float
    cond: np.ndarray
    x: np.ndarray | None = None


@dataclass(frozen=True)
class FiniteDistribution:
    points: tuple
    n: int

    def __post_init__(self):
        if not self.points:
            raise ValueError("distribution needs at least one support point")
        total = 0.0
        for pt in self.points:
            if pt.weight < 0:
                raise ValueError("weights must be nonnegative")
            check_cond_dist(pt.cond, self.n)
            total += pt.weight
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total}, not 1")

    @property
    def weights(self):
        return np.array([pt.weight for pt in self.points])

    @property
    def conds(self):
        return np.stack([pt.cond for pt in self.points])


def finite_distribution(weights, conds, xs=None):
    """Build a validated FiniteDistribution from arrays."""
    weights = np.asarray(weights, dtype=np.float64)
    conds = np.asarray(conds, dtype=np.float64)
    pts = []
    for k in range(len(weights)):
        x = None if xs is None else np.asarray(xs[k], dtype=np.float64)
        pts.append(SupportPoint(float(weights[k]), conds[k].copy(), x))
    return FiniteDistribution(tuple(pts), conds.shape[1])


def save_distribution(dist, path):
    """Write the tabular form: header ``weight,p1,...,pn``, one row per atom."""
    with open(path, "w") as fh:
        fh.write("weight," + ",".join(f"p{i + 1}" for i in range(dist.n)) + "\n")
        for pt in dist.points:
            row = [pt.weight] + list(pt.cond)
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_distribution(path):
    with open(path) as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if not cols or cols[0] != "weight" or len(cols) < 3:
            raise ValueError(f"bad distribution header: {header!r}")
        n = len(cols) - 1
        weights, conds = [], []
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            vals = [float(v) for v in line.split(",")]
            if len(vals) != n + 1:
                raise ValueError(f"line {line_no}: expected {n + 1} fields")
            weights.append(vals[0])
            conds.append(vals[1:])
    return finite_distribution(np.array(weights), np.array(conds))


@dataclass(frozen=True)
class HypothesisSpec:
    """Restricted hypothesis set description.

    kind ``score_box``: per input, the generated score vectors fill the box
    ``[-lam, lam]^n`` (``lam = inf`` means complete). ``label_lams`` builds a
    non-symmetric fixture with per-label half-widths. kind ``linear``:
    per-label affine scores ``w_y . x + b_y`` with every coefficient bounded
    by ``weight_bound``.
    """

    kind: str
    n: int
    lam: float = math.inf
    label_lams: tuple | None = None
    feature_dim: int = 0
    weight_bound: float = math.inf

    def __post_init__(self):
        if self.kind not in ("score_box", "linear"):
            raise ValueError(f"unknown hypothesis kind {self.kind!r}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.kind == "score_box" and not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.kind == "linear" and self.feature_dim < 1:
            raise ValueError("linear spec needs feature_dim >= 1")

    @property
    def is_symmetric(self):
        if self.kind == "score_box":
            return self.label_lams is None or len(set(self.label_lams)) == 1
        return True

    @property
    def is_complete(self):
        if self.kind == "score_box":
            return self.label_lams is None and math.isinf(self.lam)
        return False

    def box_lam(self):
        """Effective box half-width for brute-force search."""
        if self.kind != "score_box":
            raise ValueError("box_lam only applies to score_box specs")
        return UNBOUNDED_BOX_LAM if math.isinf(self.lam) else self.lam


def score_box(n, lam=math.inf):
    return HypothesisSpec("score_box", n, lam=lam)


def linear_family(n, feature_dim, weight_bound=math.inf):
    return HypothesisSpec("linear", n, feature_dim=feature_dim,
                          weight_bound=weight_bound)


@dataclass
class BruteResult:
    value: float
    scores: np.ndarray
    converged: bool


def cond_risk(scores, p, tau):
    """Conditional risk: probability-weighted loss over all labels."""
    s = losses.check_scores(scores)
    p = check_cond_dist(p, s.shape[0])
    return float(p @ losses.comp_sum_loss_all_labels(s, tau))


def cond_risk_star_closed(p, tau):
    """Best-in-class conditional risk for a symmetric complete set.

    Shannon entropy at ``tau = 1``; the power-sum form (a Renyi-entropy
    expression, with the convention ``0 ** r = 0``) for ``tau < 2``; and
    ``(1 - max(p)) / (tau - 1)`` for ``tau >= 2``. The last branch is the
    degenerate-vertex limit: in softmax coordinates the conditional risk is
    concave once the loss exponent ``tau - 1`` exceeds 1, so the infimum
    sits at a simplex vertex rather than at the interior stationary point.
    """
    p = check_cond_dist(p)
    tau = check_tau(tau)
    if abs(tau - 1.0) < TAU_BRANCH_TOL:
        nz = p[p > 0]
        return float(-(nz * np.log(nz)).sum())
    if tau >= 2.0 - TAU_BRANCH_TOL:
        return float((1.0 - p.max()) / (tau - 1.0))

    r = 1.0 / (2.0 - tau)
    with np.errstate(divide="ignore"):
        logs = np.log(p)
    terms = r * logs[np.isfinite(logs)]
    lse = _logsumexp_1d(terms)
    return float(math.expm1((2.0 - tau) * lse) / (1.0 - tau))


def cond_risk_power_sum_stationary(p, tau):
    """Stationary value of the conditional risk in the power-sum form.

    Coincides with ``cond_risk_star_closed`` for ``tau < 2`` (where the
    problem is convex in softmax coordinates); for ``tau > 2`` it is a
    stationary point but not the infimum. Exposed for diagnostics.
    """
    p = check_cond_dist(p)
    tau = check_tau(tau)
    if abs(tau - 1.0) < TAU_BRANCH_TOL:
        nz = p[p > 0]
        return float(-(nz * np.log(nz)).sum())
    if abs(tau - 2.0) < TAU_BRANCH_TOL:
        return float(1.0 - p.max())
    if tau > 2.0 and np.any(p < ZERO_PROB_EPS):
        warnings.warn(
            "zero probabilities floored at 1e-12: the power-sum exponent "
            "is negative for tau > 2",
            RuntimeWarning,
            stacklevel=2,
        )
        p = np.maximum(p, ZERO_PROB_EPS)
    r = 1.0 / (2.0 - tau)
    with np.errstate(divide="ignore"):
        logs = np.log(p)
    terms = r * logs[np.isfinite(logs)]
    lse = _logsumexp_1d(terms)
    return float(math.expm1((2.0 - tau) * lse) / (1.0 - tau))


def _logsumexp_1d(a):
    m = np.max(a)
    if not np.isfinite(m):
        return m
    return m + math.log(np.exp(a - m).sum())


def optimal_scores(p, tau, lam=UNBOUNDED_BOX_LAM):
    """Score vector attaining the complete-set conditional risk minimum.

    Proportional in exp-space to ``p ** (1 / (2 - tau))``; labels with zero
    probability sit at ``-lam``. For ``tau >= 2`` the minimizer is the
    degenerate limit: top label at ``+lam``, everything else at ``-lam``.
    """
    p = check_cond_dist(p)
    tau = check_tau(tau)
    if tau >= 2.0 - TAU_BRANCH_TOL:
        s = np.full(p.shape, -lam)
        s[losses.predict(p)] = lam
        return s
    r = 1.0 / (2.0 - tau)
    with np.errstate(divide="ignore"):
        s = r * np.log(p)
    s[~np.isfinite(s)] = -np.inf
    s -= s.max()
    return np.maximum(s, -lam)


def pgd_starts(n, lam, rng, count=8, weights=None):
    """Deterministic multi-start seeds: zeros, informative corners, random."""
    rows = [np.zeros(n)]
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64)
        hi = np.full(n, -lam)
        hi[int(np.argmax(w))] = lam
        rows.append(hi)
        lo = np.full(n, -lam)
        lo[int(np.argmin(w))] = lam
        rows.append(lo)
    while len(rows) < count:
        rows.append(rng.uniform(-lam, lam, size=n))
    return np.stack(rows[:count])


def minimize_weighted_cond_risk(c, tau, lam, *, seed=0, n_starts=8,
                                max_iter=10000, gtol=1e-10):
    """Minimize ``sum_y c[y] * loss(s, y, tau)`` over the box ``[-lam, lam]^n``.

    ``c`` may carry negative entries (used with negated coefficients to
    compute suprema). Deterministic given ``seed``.
    """
    c = np.ascontiguousarray(c, dtype=np.float64)
    tau = check_tau(tau)
    rng = np.random.default_rng(seed)
    starts = pgd_starts(c.shape[0], lam, rng, count=n_starts, weights=c)
    val, scores, conv = pgd_box_weighted_min(
        c, tau, float(lam), np.ascontiguousarray(starts), max_iter, gtol
    )
    return BruteResult(float(val), np.asarray(scores), bool(conv))


def cond_risk_star_brute(p, tau, spec, *, seed=0, n_starts=8,
                         max_iter=10000, gtol=1e-10):
    """Independent oracle: minimize the conditional risk over a score box.

    Multi-start projected gradient descent with backtracking line search;
    ``converged`` is False when any start exhausted the iteration cap before
    reaching the projected-gradient tolerance (a warning, not an error).
    """
    p = check_cond_dist(p)
    if spec.kind != "score_box":
        raise ValueError("brute-force oracle needs a score_box spec")
    return minimize_weighted_cond_risk(
        p, tau, spec.box_lam(), seed=seed, n_starts=n_starts,
        max_iter=max_iter, gtol=gtol,
    )


def cond_risk_star(p, tau, spec, **kw):
    """Closed form when the spec is complete, brute force otherwise."""
    if spec.kind == "score_box" and spec.is_complete:
        return cond_risk_star_closed(p, tau)
    if spec.kind == "score_box":
        return cond_risk_star_brute(p, tau, spec, **kw).value
    raise ValueError("pointwise best-in-class risk needs a score_box spec")


def calibration_gap(scores, p, tau, spec, **kw):
    """Conditional risk of the scores minus the best-in-class value."""
    return cond_risk(scores, p, tau) - cond_risk_star(p, tau, spec, **kw)


# ---------------------------------------------------------------------------
# minimizability gap
# ---------------------------------------------------------------------------

def _linear_point_boxes(dist, spec):
    """Per-point reachable score boxes of a bounded linear family."""
    lams = []
    for pt in dist.points:
        if pt.x is None:
            raise ValueError("linear spec needs per-point features")
        lams.append(spec.weight_bound * (np.abs(pt.x).sum() + 1.0))
    return lams


def _linear_joint_minimum(dist, spec, tau, seed, iters=4000, n_starts=6):
    """Minimize the expected risk over shared (W, b) by projected GD."""
    d, n = spec.feature_dim, spec.n
    bound = spec.weight_bound
    xs = np.stack([pt.x for pt in dist.points])
    ws = dist.weights
    conds = dist.conds
    rng = np.random.default_rng(seed)

    def risk_and_grad(theta):
        W = theta[: n * d].reshape(n, d)
        b = theta[n * d:]
        scores = xs @ W.T + b
        total = 0.0
        gW = np.zeros_like(W)
        gb = np.zeros_like(b)
        for k in range(len(ws)):
            s = scores[k]
            lse = _logsumexp_1d(s)
            sm = np.exp(s - lse)
            w_pow = np.exp(np.minimum((tau - 1.0) * (s - lse), 700.0))
            c = ws[k] * conds[k]
            total += float(c @ losses._phi_of_gap_array(np.maximum(lse - s, 0.0), tau))
            gs = sm * float(c @ w_pow) - c * w_pow
            gW += np.outer(gs, xs[k])
            gb += gs
        return total, np.concatenate([gW.ravel(), gb])

    best_val = math.inf
    for si in range(n_starts):
        theta = np.zeros(n * d + n) if si == 0 else rng.uniform(-bound, bound, n * d + n)
        if math.isinf(bound):
            theta = np.zeros(n * d + n) if si == 0 else rng.normal(size=n * d + n)
        f, g = risk_and_grad(theta)
        step = 1.0
        for _ in range(iters):
            cand = theta - step * g
            if math.isfinite(bound):
                cand = np.clip(cand, -bound, bound)
            fc, gc = risk_and_grad(cand)
            if fc <= f - 1e-12 * abs(f):
                theta, f, g = cand, fc, gc
                step = min(step * 1.5, 1e6)
            else:
                step *= 0.5
                if step < 1e-16:
                    break
        best_val = min(best_val, f)
    return best_val


def minimizability_gap(dist, spec, tau, *, seed=0, **kw):
    """Best-in-class expected risk minus the expected pointwise infimum.

    Always nonnegative (up to optimizer tolerance). For a score box the
    joint infimum decomposes per point, so the gap vanishes identically; a
    shared-score family (linear) can be strictly positive.
    """
    tau = check_tau(tau)
    if spec.kind == "score_box":
        # joint minimization over one score assignment decomposes pointwise
        per_point = [
            cond_risk_star(pt.cond, tau, spec, seed=seed + 31 * k, **kw)
            for k, pt in enumerate(dist.points)
        ]
        best_joint = sum(pt.weight * v for pt, v in zip(dist.points, per_point))
        expected_inf = sum(pt.weight * v for pt, v in zip(dist.points, per_point))
        return best_joint - expected_inf
    # linear family: joint optimization over shared weights
    lams = _linear_point_boxes(dist, spec)
    expected_inf = 0.0
    for k, pt in enumerate(dist.points):
        res = minimize_weighted_cond_risk(pt.cond, tau, lams[k], seed=seed + 31 * k)
        expected_inf += pt.weight * res.value
    best_joint = _linear_joint_minimum(dist, spec, tau, seed)
    return max(best_joint - expected_inf, 0.0) if best_joint - expected_inf > -1e-9 \
        else best_joint - expected_inf


def gap_upper_bound_deterministic(spec, tau, r_star_tau0):
    """Deterministic-label gap bound: transform difference at the two risks.

    The pointwise optimum of the sum-exponential loss over the box is
    ``exp(-2 lam) * (n - 1)``; the bound is the outer transform evaluated at
    the supplied best-in-class sum-exponential risk minus the transform at
    that optimum. Non-increasing in ``tau``.
    """
    tau = check_tau(tau)
    if spec.kind != "score_box" or math.isinf(spec.lam):
        raise ValueError("needs a score_box spec with finite lam")
    r_star_tau0 = float(r_star_tau0)
    c0 = math.exp(-2.0 * spec.lam) * (spec.n - 1)
    if r_star_tau0 < c0 - 1e-15:
        raise ValueError(
            f"r_star_tau0={r_star_tau0} below the pointwise optimum {c0}"
        )
    return float(losses.phi_tau(r_star_tau0, tau) - losses.phi_tau(c0, tau))
