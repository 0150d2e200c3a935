import numpy as np
import pytest

from conftest import PHI_PLUS, PSI_MINUS
from tomoset.sampling import (
    random_direction,
    random_pure_state,
    random_wishart,
    reduced_purity,
)


def test_wishart_unit_trace_positive():
    rng = np.random.default_rng(0)
    for _ in range(300):
        d = int(rng.integers(2, 7))
        q = random_wishart(d, rng)
        assert abs(np.trace(q).real - 1.0) < 1e-12
        assert np.max(np.abs(q - q.conj().T)) < 1e-14
        assert np.linalg.eigvalsh(q)[0] > 0.0


def test_random_direction_unit_norm():
    rng = np.random.default_rng(1)
    for _ in range(200):
        h = random_direction(int(rng.integers(2, 6)), rng)
        assert abs(np.linalg.norm(h) - 1.0) < 1e-12
        assert np.max(np.abs(h - h.conj().T)) < 1e-14


def test_pure_state_is_rank_one_projector():
    rng = np.random.default_rng(2)
    for _ in range(200):
        d = int(rng.integers(2, 7))
        rho = random_pure_state(d, rng)
        assert abs(np.trace(rho).real - 1.0) < 1e-12
        assert np.allclose(rho @ rho, rho, atol=1e-12)
        w = np.linalg.eigvalsh(rho)
        assert abs(w[-1] - 1.0) < 1e-12
        assert np.all(np.abs(w[:-1]) < 1e-12)


def test_reduced_purity_reference_points():
    assert reduced_purity(PHI_PLUS, (2, 2)) == pytest.approx(0.5, abs=1e-12)
    assert reduced_purity(PSI_MINUS, (2, 2)) == pytest.approx(0.5, abs=1e-12)
    product = np.kron([1.0, 0.0], [0.0, 1.0]).astype(complex)
    assert reduced_purity(product, (2, 2)) == pytest.approx(1.0, abs=1e-12)


def test_entangled_filter_keeps_schmidt_weight():
    """Rejection sampling leaves a visibly mixed reduced state on every draw."""
    rng = np.random.default_rng(3)
    for dims in [(2, 2), (2, 3)]:
        for _ in range(150):
            rho = random_pure_state(dims, rng, require_entangled=True)
            w, v = np.linalg.eigh(rho)
            psi = v[:, -1] * np.sqrt(w[-1])
            red = psi.reshape(dims) @ psi.reshape(dims).conj().T
            schmidt_min = np.sqrt(max(0.0, float(np.linalg.eigvalsh(red)[0])))
            assert schmidt_min > 1e-4


def test_entangled_filter_needs_two_factors():
    rng = np.random.default_rng(4)
    with pytest.raises(ValueError):
        random_pure_state((2, 2, 2), rng, require_entangled=True)
    with pytest.raises(ValueError):
        random_pure_state(4, rng, require_entangled=True)


def test_haar_mean_is_maximally_mixed():
    """Monte Carlo check of unitary invariance: E[rho] = I/d within 3 SE."""
    rng = np.random.default_rng(21)
    n = 10_000
    draws = np.empty((n, 2, 2), dtype=complex)
    for i in range(n):
        draws[i] = random_pure_state(2, rng)
    mean = draws.mean(axis=0)
    target = np.eye(2) / 2.0
    for part in (np.real, np.imag):
        se = part(draws).std(axis=0, ddof=1) / np.sqrt(n)
        dev = np.abs(part(mean) - part(target))
        assert np.all(dev <= 3.0 * se + 1e-15)
