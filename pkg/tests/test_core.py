import numpy as np
import pytest

from conftest import PHI_PLUS, projector
from tomoset.config import DEFAULT
from tomoset.core import (
    hermitian_eigensystem,
    hermitian_part,
    hilbert_schmidt_distance,
    is_positive_semidefinite,
    matrix_log,
    partial_transpose,
    require_density,
    require_hermitian,
    trace_inner_product,
    von_neumann_entropy,
)


def random_hermitian(dim, rng):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return hermitian_part(a)


def test_hermitian_part_projects_and_fixes():
    a = np.array([[1.0, 2.0 + 1j], [0.0, -3.0]])
    h = hermitian_part(a)
    assert np.allclose(h, h.conj().T)
    assert np.allclose(h, np.array([[1.0, 1.0 + 0.5j], [1.0 - 0.5j, -3.0]]))
    assert np.allclose(hermitian_part(h), h)


def test_require_hermitian_rejects_asymmetry():
    with pytest.raises(ValueError):
        require_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        require_hermitian(np.zeros((2, 3)))
    out = require_hermitian(np.eye(3) + 1e-14 * np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]]))
    assert np.allclose(out, out.conj().T)


def test_require_density_gates():
    require_density(np.diag([0.5, 0.5]).astype(complex))
    with pytest.raises(ValueError):
        require_density(np.diag([0.7, 0.7]))
    with pytest.raises(ValueError):
        require_density(np.diag([1.5, -0.5]))


def test_trace_inner_product_frozen_value():
    a = np.array([[1.0, 2.0], [2.0, -1.0]], dtype=complex)
    b = np.array([[0.0, 1.0], [1.0, 3.0]], dtype=complex)
    assert trace_inner_product(a, b) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.invariants
def test_trace_inner_product_real_symmetric():
    """The pairing of Hermitian matrices is real and symmetric."""
    rng = np.random.default_rng(11)
    for _ in range(1000):
        d = int(rng.integers(2, 6))
        a = random_hermitian(d, rng)
        b = random_hermitian(d, rng)
        raw = complex(np.trace(a @ b))
        assert abs(raw.imag) < 1e-12
        assert abs(trace_inner_product(a, b) - raw.real) < 1e-10
        assert abs(trace_inner_product(a, b) - trace_inner_product(b, a)) < 1e-12


def test_hermitian_eigensystem_reconstructs():
    rng = np.random.default_rng(3)
    a = random_hermitian(4, rng)
    w, v = hermitian_eigensystem(a)
    assert np.all(np.diff(w) >= 0.0)
    assert np.allclose((v * w) @ v.conj().T, a, atol=1e-12)


def test_entropy_frozen_values():
    assert von_neumann_entropy(np.diag([0.25, 0.75])) == pytest.approx(
        0.5623351446188083, abs=1e-14
    )
    assert von_neumann_entropy(np.eye(2) / 2.0) == pytest.approx(np.log(2.0), abs=1e-14)
    assert von_neumann_entropy(np.diag([1.0, 0.0])) == 0.0
    with pytest.raises(ValueError):
        von_neumann_entropy(np.diag([1.1, -0.1]))


@pytest.mark.invariants
def test_entropy_range():
    """0 <= S(rho) <= log(d) on random states of mixed rank."""
    rng = np.random.default_rng(12)
    for _ in range(1000):
        d = int(rng.integers(2, 7))
        r = int(rng.integers(1, d + 1))
        a = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
        rho = a @ a.conj().T
        rho /= np.trace(rho).real
        s = von_neumann_entropy(rho)
        assert -1e-12 <= s <= np.log(d) + 1e-12


def test_partial_transpose_frozen_blocks():
    a = np.arange(16.0).reshape(4, 4).astype(complex)
    first = partial_transpose(a, (2, 2), 0)
    assert np.array_equal(
        first.real,
        np.array(
            [
                [0.0, 1.0, 8.0, 9.0],
                [4.0, 5.0, 12.0, 13.0],
                [2.0, 3.0, 10.0, 11.0],
                [6.0, 7.0, 14.0, 15.0],
            ]
        ),
    )
    second = partial_transpose(a, (2, 2), 1)
    assert np.array_equal(
        second.real,
        np.array(
            [
                [0.0, 4.0, 2.0, 6.0],
                [1.0, 5.0, 3.0, 7.0],
                [8.0, 12.0, 10.0, 14.0],
                [9.0, 13.0, 11.0, 15.0],
            ]
        ),
    )


def test_partial_transpose_bell_spectrum():
    """The transposed maximally entangled projector has one negative eigenvalue."""
    pt = partial_transpose(projector(PHI_PLUS), (2, 2), 1)
    w = np.linalg.eigvalsh(pt)
    assert np.allclose(w, [-0.5, 0.5, 0.5, 0.5], atol=1e-12)


def test_partial_transpose_rejects_bad_args():
    with pytest.raises(ValueError):
        partial_transpose(np.eye(4), (2, 2), 2)
    with pytest.raises(ValueError):
        partial_transpose(np.eye(3), (2, 2), 0)


@pytest.mark.invariants
def test_partial_transpose_linear_involution():
    """PT is linear, squares to the identity, and keeps trace and Hermiticity."""
    rng = np.random.default_rng(13)
    shapes = [(2, 2), (2, 3), (3, 2), (2, 2, 2)]
    for _ in range(1000):
        dims = shapes[int(rng.integers(len(shapes)))]
        which = int(rng.integers(len(dims)))
        d = int(np.prod(dims))
        a = random_hermitian(d, rng)
        b = random_hermitian(d, rng)
        x, y = rng.normal(size=2)
        pa = partial_transpose(a, dims, which)
        assert np.allclose(partial_transpose(pa, dims, which), a, atol=1e-13)
        combo = partial_transpose(x * a + y * b, dims, which)
        assert np.allclose(combo, x * pa + y * partial_transpose(b, dims, which), atol=1e-12)
        assert abs(np.trace(pa) - np.trace(a)) < 1e-12
        assert np.max(np.abs(pa - pa.conj().T)) < 1e-13


def test_hilbert_schmidt_distance_frozen():
    assert hilbert_schmidt_distance(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == pytest.approx(
        np.sqrt(2.0), abs=1e-14
    )
    assert hilbert_schmidt_distance(np.eye(3), np.eye(3)) == 0.0


@pytest.mark.invariants
def test_positivity_check_matches_eigenvalue_oracle():
    """Cholesky-based test agrees with the spectral definition off the dead zone."""
    rng = np.random.default_rng(14)
    checked = 0
    for _ in range(1000):
        d = int(rng.integers(2, 6))
        q, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
        eigs = rng.uniform(0.1, 1.0, size=d)
        u = rng.uniform()
        if u < 0.4:
            eigs[0] = rng.uniform(-3e-9, 3e-9)
        elif u < 0.6:
            eigs[0] = rng.uniform(-1e-6, 1e-6)
        elif u < 0.7:
            eigs[0] = 0.0
        elif u < 0.85:
            eigs[0] = -rng.uniform(0.1, 1.0)
        m = hermitian_part((q * eigs) @ q.conj().T)
        low = float(np.linalg.eigvalsh(m)[0])
        if abs(low + DEFAULT.psd_tol) <= 1e-10:
            continue  # either answer is acceptable this close to the threshold
        assert is_positive_semidefinite(m) == (low >= -DEFAULT.psd_tol)
        checked += 1
    assert checked > 900


def test_matrix_log_diagonal_and_roundtrip():
    out = matrix_log(np.diag([0.5, 2.0]))
    assert np.allclose(out, np.diag([np.log(0.5), np.log(2.0)]), atol=1e-14)
    rng = np.random.default_rng(4)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = a @ a.conj().T + 0.5 * np.eye(3)
    w, v = np.linalg.eigh(matrix_log(rho))
    assert np.allclose((v * np.exp(w)) @ v.conj().T, rho, atol=1e-10)


def test_matrix_log_refuses_singular_input():
    with pytest.raises(ValueError):
        matrix_log(np.diag([1.0, 0.0]))
    with pytest.raises(ValueError):
        matrix_log(np.diag([1.0, 1e-13]))
