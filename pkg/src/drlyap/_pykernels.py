"""Pure-numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels`` must agree with them to
floating-point roundoff.
"""

import numpy as np


def poly_eval_batch(exponents, coeffs, points):
    """Evaluate K polynomials sharing a monomial table at P points.

    exponents : (T, n) integer array, one row per monomial
    coeffs    : (T, K) float array, column k holds polynomial k
    points    : (P, n) float array
    returns   : (P, K) float array
    """
    exponents = np.asarray(exponents, dtype=np.int64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    if exponents.shape[0] == 0:
        return np.zeros((points.shape[0], coeffs.shape[1]))
    mono = np.prod(points[:, None, :] ** exponents[None, :, :], axis=2)
    return mono @ coeffs


def lie_stats(exponents, coeffs, points, xi, out=None):
    """Count points where ``a0(x) + sum_j xi_j a_j(x) > 0`` and track the max.

    ``coeffs`` has K = m + 1 columns: column 0 is the drift Lie derivative,
    column j the derivative along disturbance column j.
    """
    vals = poly_eval_batch(exponents, coeffs, points)
    vdot = vals[:, 0] + vals[:, 1:] @ np.asarray(xi, dtype=np.float64)
    if out is not None:
        out[:] = vdot
    if vdot.size == 0:
        return 0, -np.inf
    return int(np.count_nonzero(vdot > 0.0)), float(vdot.max())
