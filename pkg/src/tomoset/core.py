"""Dense Hermitian linear algebra used everywhere else in the package.

All operators are plain complex ndarrays.  Validators canonicalize (they
return the Hermitian part after checking the deviation is within tolerance)
so downstream code can rely on exact Hermiticity.
"""
from __future__ import annotations

import numpy as np

from .config import DEFAULT

# eigenvalues this small are treated as exact zeros inside entropies
EIG_ZERO = 1e-14
# smallest eigenvalue for which a matrix logarithm is still trusted
LOG_MIN_EIG = 1e-12


def hermitian_part(a: np.ndarray) -> np.ndarray:
    """Orthogonal projection of a square matrix onto the Hermitian subspace."""
    return 0.5 * (a + a.conj().T)


def require_hermitian(a, atol: float = DEFAULT.herm_atol, name: str = "operator") -> np.ndarray:
    """Check Hermiticity within ``atol`` and return the hermitized array."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > atol:
        raise ValueError(f"{name} is not Hermitian: max deviation {dev:.3e} > {atol:.1e}")
    return hermitian_part(a)


def require_density(
    rho,
    trace_atol: float = DEFAULT.trace_atol,
    psd_tol: float = DEFAULT.psd_tol,
    name: str = "state",
) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, eigenvalues >= -psd_tol."""
    rho = require_hermitian(rho, name=name)
    tr = float(np.real(np.trace(rho)))
    if abs(tr - 1.0) > trace_atol:
        raise ValueError(f"{name} trace {tr!r} deviates from 1 by more than {trace_atol:.1e}")
    low = float(np.linalg.eigvalsh(rho)[0])
    if low < -psd_tol:
        raise ValueError(f"{name} has eigenvalue {low:.3e} below -{psd_tol:.1e}")
    return rho


def trace_inner_product(a: np.ndarray, b: np.ndarray) -> float:
    """Real Hilbert-Schmidt pairing tr(ab) of two Hermitian matrices."""
    # tr(ab) = sum_ij a_ij conj(b_ij) when b is Hermitian
    return float(np.vdot(b, a).real)


def hermitian_eigensystem(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvector columns of a Hermitian matrix."""
    return np.linalg.eigh(hermitian_part(a))


def is_positive_semidefinite(a: np.ndarray, shift: float = DEFAULT.psd_tol) -> bool:
    """Cheap positivity test: does the Cholesky factorization of a + shift*I succeed?"""
    d = a.shape[0]
    try:
        np.linalg.cholesky(hermitian_part(a) + shift * np.eye(d))
    except np.linalg.LinAlgError:
        return False
    return True


def von_neumann_entropy(rho: np.ndarray, psd_tol: float = DEFAULT.psd_tol) -> float:
    """Entropy -tr(rho log rho) in nats.

    Eigenvalues in [-psd_tol, 0) count as roundoff and clamp to zero; anything
    below -psd_tol means the input is not a state and raises.  Zero eigenvalues
    contribute nothing (the 0 log 0 = 0 convention).
    """
    w = np.linalg.eigvalsh(hermitian_part(rho))
    if w[0] < -psd_tol:
        raise ValueError(f"eigenvalue {w[0]:.3e} below -{psd_tol:.1e}; not a state")
    w = np.where(w < EIG_ZERO, 0.0, w)
    pos = w[w > 0.0]
    return float(-np.sum(pos * np.log(pos)))


def partial_transpose(a: np.ndarray, dims: tuple[int, ...], which: int) -> np.ndarray:
    """Transpose one tensor factor of a multipartite operator.

    ``dims`` lists the factor dimensions whose product is the matrix size and
    ``which`` indexes the factor to transpose, counting from zero.
    """
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    if not 0 <= which < n:
        raise ValueError(f"factor index {which} out of range for {n} factors")
    d = int(np.prod(dims))
    if a.shape != (d, d):
        raise ValueError(f"operator shape {a.shape} does not match dims {dims}")
    t = a.reshape(dims + dims)
    t = np.swapaxes(t, which, n + which)
    return np.ascontiguousarray(t.reshape(d, d))


def hilbert_schmidt_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius distance sqrt(tr((a-b)^2)) between Hermitian matrices."""
    return float(np.linalg.norm(a - b))


def matrix_log(a: np.ndarray, min_eig: float = LOG_MIN_EIG) -> np.ndarray:
    """Hermitian logarithm via the eigendecomposition.

    Refuses matrices whose smallest eigenvalue is at or below ``min_eig``:
    close to the cone boundary the logarithm blows up and any downstream
    residual would be numerically meaningless.
    """
    w, v = hermitian_eigensystem(a)
    if w[0] <= min_eig:
        raise ValueError(f"matrix_log needs eigenvalues > {min_eig:.1e}, got {w[0]:.3e}")
    return hermitian_part((v * np.log(w)) @ v.conj().T)
