import numpy as np


def huber_weights(residuals, delta):
    """IRLS weights for the Huber loss: 1 inside ``delta``, ``delta/|r|`` outside."""
    a = np.abs(residuals)
    w = np.ones_like(a)
    out = a > delta
    w[out] = delta / a[out]
    return w


def irls(solve, residual_fn, delta, n_iter=50, tol=1e-10):
    """Iteratively reweighted least squares around a weighted solver.

    ``solve(weights)`` returns a parameter vector and ``residual_fn(params)``
    the residuals it leaves.  With ``delta=None`` a single unit-weight
    solve is returned.
    """
    params = solve(None)
    if delta is None:
        return params
    for _ in range(n_iter):
        w = huber_weights(residual_fn(params), delta)
        new = solve(w)
        if np.max(np.abs(new - params)) <= tol * (1.0 + np.max(np.abs(params))):
            return new
        params = new
    return params
