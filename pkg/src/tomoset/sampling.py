"""Random draws shared by the witness generator and the experiment harness."""
from __future__ import annotations

import numpy as np

from .core import hermitian_part

ENTANGLED_PURITY_SLACK = 1e-6


def _ginibre(shape, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_wishart(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-trace positive matrix X X^dag / tr(X X^dag) with square Ginibre X.

    Full rank with probability one, so these double as generic full-rank
    states and as seeds when an operator basis needs completing.
    """
    x = _ginibre((dim, dim), rng)
    q = x @ x.conj().T
    return q / np.trace(q).real


def random_direction(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian Hermitian matrix, normalized to unit Hilbert-Schmidt norm."""
    h = hermitian_part(_ginibre((dim, dim), rng))
    return h / np.linalg.norm(h)


def reduced_purity(psi: np.ndarray, dims: tuple[int, ...]) -> float:
    """Purity of the first-factor reduced state of a bipartite pure vector."""
    da, db = dims
    m = psi.reshape(da, db)
    red = m @ m.conj().T
    return float(np.trace(red @ red).real)


def random_pure_state(
    dims: int | tuple[int, ...],
    rng: np.random.Generator,
    require_entangled: bool = False,
) -> np.ndarray:
    """Projector onto a Haar-random pure state.

    ``dims`` is either a plain dimension or a tuple of subsystem dimensions.
    With ``require_entangled`` the draw repeats until the reduced state of the
    first factor is visibly mixed (purity below 1 - 1e-6), which requires a
    bipartite ``dims``.
    """
    if isinstance(dims, (int, np.integer)):
        shape = (int(dims),)
    else:
        shape = tuple(int(d) for d in dims)
    d = int(np.prod(shape))
    if require_entangled and len(shape) != 2:
        raise ValueError("entanglement filter needs exactly two factors")
    while True:
        psi = _ginibre(d, rng)
        psi /= np.linalg.norm(psi)
        if not require_entangled:
            break
        if reduced_purity(psi, shape) < 1.0 - ENTANGLED_PURITY_SLACK:
            break
    return np.outer(psi, psi.conj())
