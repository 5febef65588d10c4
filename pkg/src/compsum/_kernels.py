"""Hot numeric kernels.

The box-constrained multi-start projected gradient descent used by the
brute-force conditional-risk oracle (and the Monte-Carlo complexity
estimator) dominates the runtime of the verification sweeps. The kernels
are written in numba-compatible numpy; ``@jit`` compiles them when the
numba backend is enabled and leaves them as plain Python otherwise (see
``compsum._backend``).
"""

import math

import numpy as np

from ._backend import jit

# Largest exponent with a finite float64 exp(); arguments are saturated
# there so extreme score gaps degrade to the float ceiling instead of inf.
EXP_CAP = 709.0


@jit
def phi_of_gap(v, tau):
    """Outer concave transform evaluated at an inner sum of exp(v) - 1.

    ``v = logsumexp(scores) - scores[y] >= 0`` is the stable representation
    of the inner sum; the transform reduces to ``expm1((1 - tau) * v) /
    (1 - tau)`` with the log branch at tau = 1.
    """
    if abs(tau - 1.0) < 1e-9:
        return v
    a = (1.0 - tau) * v
    if a > EXP_CAP:
        a = EXP_CAP
    return math.expm1(a) / (1.0 - tau)


@jit
def weighted_cond_value(s, c, tau):
    """sum_y c[y] * loss(s, y, tau) for a single score vector ``s``."""
    n = s.shape[0]
    m = s[0]
    for j in range(1, n):
        if s[j] > m:
            m = s[j]
    t = 0.0
    for j in range(n):
        t += math.exp(s[j] - m)
    lse = m + math.log(t)
    total = 0.0
    for y in range(n):
        total += c[y] * phi_of_gap(lse - s[y], tau)
    return total


@jit
def weighted_cond_value_grad(s, c, tau, g):
    """Value of ``weighted_cond_value`` with its exact score gradient in ``g``."""
    n = s.shape[0]
    m = s[0]
    for j in range(1, n):
        if s[j] > m:
            m = s[j]
    t = 0.0
    for j in range(n):
        t += math.exp(s[j] - m)
    lse = m + math.log(t)

    total = 0.0
    dot = 0.0
    for y in range(n):
        v = lse - s[y]
        total += c[y] * phi_of_gap(v, tau)
        # d(loss)/dv at v equals exp((1 - tau) * v), saturated like the value
        a = (1.0 - tau) * v
        if a > EXP_CAP:
            a = EXP_CAP
        w = math.exp(a)
        g[y] = -c[y] * w
        dot += c[y] * w
    for j in range(n):
        g[j] += math.exp(s[j] - lse) * dot
    return total


@jit
def pgd_box_weighted_min(c, tau, lam, starts, max_iter, gtol):
    """Minimize sum_y c[y] * loss(s, y, tau) over the box [-lam, lam]^n.

    Multi-start projected gradient descent with Nesterov extrapolation,
    backtracking line search on the majorization condition, and adaptive
    restart whenever momentum raises the objective. The acceleration is
    needed because the objective flattens exponentially along the score
    spread near tau = 2, where plain projected descent converges too slowly.

    ``starts`` is a (k, n) array of initial points (clipped into the box);
    starts run sequentially and the minimum is reduced in start order, so
    the result is deterministic for a given ``starts`` array. Returns
    (best value, best scores, all starts reached the tolerance).
    """
    k, n = starts.shape
    best_x = np.empty(n)
    best_f = np.inf
    all_conv = True

    x = np.empty(n)
    xp = np.empty(n)
    y = np.empty(n)
    xn = np.empty(n)
    g = np.empty(n)

    for si in range(k):
        for j in range(n):
            v = starts[si, j]
            if v > lam:
                v = lam
            elif v < -lam:
                v = -lam
            x[j] = v
            xp[j] = v
        fx = weighted_cond_value(x, c, tau)
        t = 1.0
        step = 1.0
        conv = False
        it = 0
        f_checkpoint = fx
        while it < max_iter:
            it += 1
            # value-stall criterion: no measurable progress over a window
            # counts as converged (the gradient test below can stay above
            # tolerance at float resolution on very flat objectives)
            if it % 64 == 0:
                if f_checkpoint - fx <= 1e-15 * (1.0 + abs(fx)):
                    conv = True
                    break
                f_checkpoint = fx
            tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / tn
            for j in range(n):
                y[j] = x[j] + beta * (x[j] - xp[j])
            fy = weighted_cond_value_grad(y, c, tau, g)

            # unit-step projected-gradient stationarity at the extrapolated
            # point; once momentum has died down y ~= x and this is the
            # plain projected-gradient norm
            pg = 0.0
            for j in range(n):
                z = y[j] - g[j]
                if z > lam:
                    z = lam
                elif z < -lam:
                    z = -lam
                d = z - y[j]
                pg += d * d
            if math.sqrt(pg) <= gtol:
                conv = True
                break

            # backtrack until the quadratic majorization at y holds
            accepted = False
            fn = fy
            while step >= 1e-18:
                gd = 0.0
                dn = 0.0
                for j in range(n):
                    z = y[j] - step * g[j]
                    if z > lam:
                        z = lam
                    elif z < -lam:
                        z = -lam
                    xn[j] = z
                    d = z - y[j]
                    gd += g[j] * d
                    dn += d * d
                if dn == 0.0:
                    break
                fn = weighted_cond_value(xn, c, tau)
                if fn <= fy + gd + dn / (2.0 * step) + 1e-15 * abs(fy):
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                # no representable step improves on y: numerically stationary
                conv = True
                break

            if fn > fx:
                # momentum overshoot: drop it and retake from x next round
                t = 1.0
                for j in range(n):
                    xp[j] = x[j]
            else:
                for j in range(n):
                    xp[j] = x[j]
                    x[j] = xn[j]
                fx = fn
                t = tn
            if step < 1e8:
                step *= 1.3

        if not conv:
            all_conv = False
        if fx < best_f:
            best_f = fx
            for j in range(n):
                best_x[j] = x[j]

    return best_f, best_x, all_conv
