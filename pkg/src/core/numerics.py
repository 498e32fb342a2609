"""
Small dense linear algebra and signed-power primitives.

Every routine here is a pure function of its inputs. Vectors are 1-D float
numpy arrays, matrices 2-D float arrays; non-finite entries are rejected.
"""

import logging
import math

import numpy as np
from scipy import linalg

from .config import (
    SYMMETRY_TOL, JACOBI_TOL, JACOBI_MAX_SWEEPS, JACOBI_THRESHOLD_SWEEPS, SPD_RESIDUAL_TOL,
)
from .errors import ParameterError, ShapeError, NotSPDError

logger = logging.getLogger(__name__)


def _finite_array(values, name, ndim=None):
    arr = np.asarray(values, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite entries")
    return arr


def _check_alpha(alpha):
    alpha_arr = np.asarray(alpha, dtype=float)
    if not np.all(np.isfinite(alpha_arr)) or np.any(alpha_arr < 0):
        raise ParameterError(f"Signed-power exponent must be finite and >= 0, got {alpha}")
    return alpha_arr


def signed_power_unchecked(x, alpha):
    """|x|**alpha * sign(x) without validation; sign(0) = 0, so alpha = 0 gives sign(x)."""
    return np.sign(x) * np.power(np.abs(x), alpha)


def signed_power(x, alpha):
    """
    Scalar signed power.

    Args:
        x (float): Base value.
        alpha (float): Exponent, alpha >= 0.

    Returns:
        float: |x|**alpha * sign(x), with sign(0) defined as 0.
    """
    _check_alpha(alpha)
    if not math.isfinite(x):
        raise ParameterError(f"signed_power needs a finite base, got {x}")
    return float(signed_power_unchecked(float(x), float(alpha)))


def vec_signed_power(v, alpha):
    """Element-wise signed power. alpha may be a scalar or broadcast against v."""
    alpha_arr = _check_alpha(alpha)
    arr = _finite_array(v, "v")
    return signed_power_unchecked(arr, alpha_arr)


def power_sum(v, alpha):
    """Sum of |v_i|**alpha."""
    _check_alpha(alpha)
    arr = _finite_array(v, "v", ndim=1)
    return float(np.sum(np.power(np.abs(arr), float(alpha))))


def is_symmetric(m, tol=SYMMETRY_TOL):
    """True when m is square and max |m - m^T| <= tol * max(1, max |m|)."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(arr)))) if arr.size else 1.0
    return bool(np.max(np.abs(arr - arr.T), initial=0.0) <= tol * scale)


def _require_symmetric(m, name, tol):
    arr = _finite_array(m, name, ndim=2)
    if arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {arr.shape}")
    if not is_symmetric(arr, tol):
        raise ShapeError(f"{name} is not symmetric within tolerance {tol}")
    return arr


def _off_diagonal_norm(a):
    # Direct sum over the strict upper triangle; ||A||^2 - ||diag||^2 cancels to 0 near convergence
    return math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))


def symmetric_eigen(m,tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS, symmetry_tol=SYMMETRY_TOL):
    """
    Cyclic Jacobi diagonalization of a symmetric matrix.

    The first few sweeps skip rotations whose off-diagonal entry lies below a
    threshold tied to the current off-diagonal mass; later sweeps rotate every
    nonzero pair. Iteration stops once the off-diagonal Frobenius norm drops
    below tol * ||m||_F.

    Args:
        m (array-like): Square symmetric matrix.
        tol (float): Relative off-diagonal convergence tolerance.
        max_sweeps (int): Upper bound on full cyclic sweeps.
        symmetry_tol (float): Tolerance for the symmetry precondition.

    Returns:
        tuple: (eigenvalues ascending as a 1-D array, eigenvectors as columns of a 2-D array).
    """
    a = _require_symmetric(m, "M", symmetry_tol).copy()
    n = a.shape[0]
    # Symmetrize exactly so rotations act on a truly symmetric matrix
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    norm = float(np.linalg.norm(a))
    if n == 0 or norm == 0.0:
        return np.zeros(n), v

    converged = False
    for sweep in range(max_sweeps):
        off = _off_diagonal_norm(a)
        if off < tol * norm:
            converged = True
            break
        threshold = 0.2 * off / (n * n) if sweep < JACOBI_THRESHOLD_SWEEPS else 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0 or abs(apq) < threshold:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    else:
        off = _off_diagonal_norm(a)
        converged = off < tol * norm

    if not converged:
        logger.warning(f"Jacobi eigensolver stopped after {max_sweeps} sweeps without meeting tolerance {tol}")

    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues, kind='stable')
    return eigenvalues[order], v[:, order]


def largest_singular_value(m):
    """Largest singular value, computed as sqrt(lambda_max(M^T M)) with the Jacobi solver."""
    arr = _finite_array(m, "M", ndim=2)
    if arr.size == 0:
        return 0.0
    gram = arr.T @ arr
    eigenvalues, _ = symmetric_eigen(0.5 * (gram + gram.T))
    return math.sqrt(max(float(eigenvalues[-1]), 0.0))


def cholesky_factor(m, symmetry_tol=SYMMETRY_TOL):
    """Lower Cholesky factor of an SPD matrix, in scipy cho_factor form."""
    arr = _require_symmetric(m, "M", symmetry_tol)
    try:
        return linalg.cho_factor(arr, lower=True, check_finite=False)
    except linalg.LinAlgError as e:
        raise NotSPDError(f"Matrix is not symmetric positive definite: {e}") from e


def cholesky_solve(factor, b):
    """Solves M x = b given cholesky_factor(M); b may be a vector or a matrix of right-hand sides."""
    rhs = _finite_array(b, "b")
    return linalg.cho_solve(factor, rhs, check_finite=False)


def spd_solve(m, b, residual_tol=SPD_RESIDUAL_TOL):
    """
    Solves M x = b for symmetric positive definite M by Cholesky factorization
    followed by triangular solves.

    Raises:
        NotSPDError: if a non-positive pivot is met.
    """
    arr = _finite_array(m, "M", ndim=2)
    rhs = _finite_array(b, "b")
    if rhs.shape[0] != arr.shape[0]:
        raise ShapeError(f"Right-hand side has {rhs.shape[0]} rows, matrix has {arr.shape[0]}")
    x = cholesky_solve(cholesky_factor(arr), rhs)
    residual = float(np.linalg.norm(arr @ x - rhs))
    scale = float(np.linalg.norm(rhs))
    if scale > 0 and residual > residual_tol * scale:
        logger.warning(f"spd_solve residual {residual:.3e} exceeds {residual_tol:.1e} * ||b||")
    return x


def unit_sphere_grid(dim, count, seed):
    """
    Deterministic sample of points on the unit sphere in R^dim.

    The 2*dim signed axis vectors come first (always included, even when count
    is smaller), followed by normalized Gaussian draws from a seeded generator.
    For fixed (dim, seed) a smaller count yields a prefix of a larger one.

    Returns:
        numpy.ndarray: shape (max(count, 2*dim), dim), one point per row.
    """
    if dim < 1 or count < 1:
        raise ParameterError(f"unit_sphere_grid needs dim >= 1 and count >= 1, got dim={dim}, count={count}")
    axes = np.zeros((2 * dim, dim))
    for i in range(dim):
        axes[2 * i, i] = 1.0
        axes[2 * i + 1, i] = -1.0
    extra = count - 2 * dim
    if extra <= 0:
        return axes
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((extra, dim))
    norms = np.linalg.norm(draws, axis=1, keepdims=True)
    # A zero draw has probability zero; fall back to the first axis if it ever happens
    zero = norms[:, 0] == 0.0
    if np.any(zero):
        draws[zero] = axes[0]
        norms[zero] = 1.0
    return np.vstack([axes, draws / norms])
