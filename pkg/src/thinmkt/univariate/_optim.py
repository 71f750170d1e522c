import numpy as np
from scipy.optimize import minimize

PENALTY = 1e100


def simplex_minimize(fun, x0, step=0.1, rtol=1e-8, maxiter=2000):
    """Nelder-Mead with one restart from a perturbed optimum.

    Returns ``(x, f)`` for the better of the two runs.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.size == 0:
        return x0, float(fun(x0))

    def run(start):
        simplex = [start]
        for i in range(start.size):
            v = start.copy()
            v[i] = v[i] + step if v[i] == 0 else v[i] * (1 + step) + (step * 0.1)
            simplex.append(v)
        f0 = abs(float(fun(start)))
        res = minimize(fun, start, method="Nelder-Mead",
                       options={"initial_simplex": np.array(simplex), "maxiter": maxiter,
                                "maxfev": 4 * maxiter, "xatol": rtol,
                                "fatol": rtol * max(f0, 1e-300)})
        return res.x, float(res.fun)

    x1, f1 = run(x0)
    x2, f2 = run(x1 + step * 0.5 * np.where(x1 == 0, 1.0, np.abs(x1)))
    return (x2, f2) if f2 < f1 else (x1, f1)


def roots_outside_unit_circle(coefs, sign):
    """True when ``1 + sign*(c1 z + ... + ck z^k)`` has all roots outside |z|=1."""
    coefs = np.asarray(coefs, dtype=float)
    if coefs.size == 0 or not np.any(coefs):
        return True
    # reciprocal polynomial z^k + sign*c1 z^(k-1) + ... must have roots inside
    r = np.roots(np.concatenate(([1.0], sign * coefs)))
    return bool(np.all(np.abs(r) < 1.0 - 1e-7))
