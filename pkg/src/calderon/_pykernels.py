"""Reference numpy implementations of the compiled kernels."""
import numpy as np
from scipy.special import exp1


def scaled_exp1(u):
    """Return e^u E1(u) elementwise for a complex array (principal branch)."""
    u = np.asarray(u, dtype=np.complex128)
    with np.errstate(over="ignore", invalid="ignore"):
        return np.exp(u) * exp1(u)


def tridiag_factor(lower, diag, upper):
    """LU-factor a batch of real tridiagonal systems (rows are systems).

    Returns (lower, inv_piv, upper_mod) for use with ``tridiag_solve``.
    ``lower[:, 0]`` and ``upper[:, -1]`` are ignored.
    """
    lower = np.ascontiguousarray(lower, dtype=np.float64)
    diag = np.asarray(diag, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    m, n = diag.shape
    inv_piv = np.empty((m, n))
    upper_mod = np.zeros((m, n))
    inv_piv[:, 0] = 1.0 / diag[:, 0]
    upper_mod[:, 0] = upper[:, 0] * inv_piv[:, 0]
    for i in range(1, n):
        piv = diag[:, i] - lower[:, i] * upper_mod[:, i - 1]
        inv_piv[:, i] = 1.0 / piv
        if i < n - 1:
            upper_mod[:, i] = upper[:, i] * inv_piv[:, i]
    return lower, inv_piv, upper_mod


def tridiag_solve(lower, inv_piv, upper, rhs):
    """Solve factored tridiagonal systems, one per row of ``rhs``."""
    x = np.array(rhs, dtype=np.complex128, copy=True)
    n = x.shape[1]
    x[:, 0] *= inv_piv[:, 0]
    for i in range(1, n):
        x[:, i] = (x[:, i] - lower[:, i] * x[:, i - 1]) * inv_piv[:, i]
    for i in range(n - 2, -1, -1):
        x[:, i] -= upper[:, i] * x[:, i + 1]
    return x
