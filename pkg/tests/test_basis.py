import numpy as np
import pytest

from conftest import PAULIS, diag_pom
from tomoset.basis import (
    Decomposition,
    build_basis,
    decompose,
    measured_projection,
    rank_of_operator_set,
)
from tomoset.core import hermitian_part
from tomoset.harness import random_pom


def haar_projective_pom(dim, rng):
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    from tomoset.likelihood import Pom

    return Pom.from_matrices([np.outer(q[:, j], q[:, j].conj()) for j in range(dim)])


def draw_pom(rng):
    d = int(rng.integers(2, 5)) if rng.uniform() < 0.9 else 4
    u = rng.uniform()
    if u < 0.15:
        return haar_projective_pom(d, rng)
    if u < 0.25 and d == 2:
        return diag_pom()
    k = int(rng.integers(2, d * d + 1))
    return random_pom(d, k, rng)


def test_rank_reference_points():
    eye = np.eye(2, dtype=complex)
    assert rank_of_operator_set([eye, 2.0 * eye]) == 1
    assert rank_of_operator_set([eye, *PAULIS]) == 4
    assert rank_of_operator_set([]) == 0
    assert rank_of_operator_set([np.zeros((2, 2))]) == 0


@pytest.mark.invariants
def test_rank_invariant_under_recombination():
    """Rescaling and invertible real mixing of the list never change the rank."""
    rng = np.random.default_rng(30)
    for _ in range(1000):
        d = int(rng.integers(2, 4))
        r = int(rng.integers(1, d * d + 1))
        free = [
            hermitian_part(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
            for _ in range(r)
        ]
        k = r + int(rng.integers(0, 3))
        coeff = rng.normal(size=(k, r))
        ops = [np.tensordot(c, np.array(free), axes=1) for c in coeff]
        base = rank_of_operator_set(ops)

        scales = rng.uniform(0.5, 2.0, size=k) * rng.choice([-1.0, 1.0], size=k)
        scaled = [s * op for s, op in zip(scales, ops)]
        assert rank_of_operator_set(scaled) == base

        while True:
            mix = rng.normal(size=(k, k))
            if abs(np.linalg.det(mix)) > 1e-3:
                break
        mixed = [np.tensordot(row, np.array(ops), axes=1) for row in mix]
        assert rank_of_operator_set(mixed) == base


@pytest.mark.invariants
def test_full_basis_gram_is_identity():
    rng = np.random.default_rng(31)
    for _ in range(1000):
        pom = draw_pom(rng)
        basis = build_basis(pom, rng)
        ops = basis.all_operators
        d = basis.dim
        assert ops.shape[0] == d * d
        vecs = ops.reshape(d * d, -1)
        gram = (vecs.conj() @ vecs.T).real
        assert np.max(np.abs(gram - np.eye(d * d))) < 1e-10


@pytest.mark.invariants
def test_outcomes_live_in_measured_block():
    """Each outcome reconstructs from the measured operators alone."""
    rng = np.random.default_rng(32)
    for _ in range(1000):
        pom = draw_pom(rng)
        basis = build_basis(pom, rng)
        for op in pom.outcomes:
            proj = measured_projection(op, basis)
            assert np.linalg.norm(op - proj) < 1e-10
            split = decompose(op, basis)
            assert split.residual < 1e-10
            if basis.n_unmeasured:
                assert np.max(np.abs(split.unmeasured)) < 1e-10


def test_block_sizes_and_identity_membership():
    rng = np.random.default_rng(33)
    pom = random_pom(3, 4, rng)
    basis = build_basis(pom, rng)
    assert basis.dim == 3
    assert basis.n_measured == 4
    assert basis.n_unmeasured == 9 - 4
    eye = np.eye(3, dtype=complex)
    assert np.linalg.norm(eye - measured_projection(eye, basis)) < 1e-8 * np.sqrt(3)


def test_projective_pom_measured_block_is_smaller():
    rng = np.random.default_rng(34)
    pom = haar_projective_pom(4, rng)
    basis = build_basis(pom, rng)
    assert basis.n_measured == 4
    assert basis.n_unmeasured == 12


def test_decompose_roundtrip_random_operator():
    rng = np.random.default_rng(35)
    pom = random_pom(3, 5, rng)
    basis = build_basis(pom, rng)
    op = hermitian_part(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    split = decompose(op, basis)
    assert isinstance(split, Decomposition)
    recon = np.tensordot(split.measured, basis.measured, axes=1)
    recon = recon + np.tensordot(split.unmeasured, basis.unmeasured, axes=1)
    assert np.linalg.norm(op - recon) < 1e-10
    assert split.residual < 1e-10


def test_build_basis_rejects_bad_shapes():
    rng = np.random.default_rng(36)
    with pytest.raises(ValueError):
        build_basis(np.zeros((2, 3)), rng)
