"""Shared builders used across the test modules."""

import numpy as np

from tomoset import CountData, Pom
from tomoset.basis import build_basis
from tomoset.harness import random_pom

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)

PHI_PLUS = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / np.sqrt(2.0)
PSI_MINUS = np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / np.sqrt(2.0)

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


def projector(vec):
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())


def diag_pom():
    """Two-outcome projective measurement along the computational axis."""
    return Pom.from_matrices([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])


def disc_data(f0=0.3):
    return CountData(
        counts=np.array([f0, 1.0 - f0]), pom=diag_pom(), exact=True
    )


def random_density(dim, rng, rank=None):
    rank = dim if rank is None else rank
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def ic_pom(dim, rng):
    """Informationally complete measurement with dim**2 outcomes."""
    return random_pom(dim, dim * dim, rng)


def model_from_state(pom, rho, rng):
    from tomoset.convexset import ConvexSetModel
    from tomoset.likelihood import probabilities

    basis = build_basis(pom, rng)
    return ConvexSetModel.from_probs(pom, basis, probabilities(rho, pom))


def bloch_coords(op):
    """Coefficients (c0, cx, cy, cz) of a 2x2 Hermitian operator."""
    c0 = np.trace(op).real / 2.0
    cv = np.array([np.trace(op @ s).real / 2.0 for s in PAULIS])
    return c0, cv


def bloch_oracle(pom, target_probs, objective, sense):
    """Closed-form linear optimum over qubit states matching the data.

    The states compatible with the measurement record form a chord of the
    Bloch ball.  Writing the objective as h0 + h.r, the optimum over the
    chord is h0 + h.r_p +/- |P h| sqrt(1 - |r_p|^2) where r_p is the
    minimum-norm solution of the linear data constraints and P projects
    onto their null space.
    """
    alphas = []
    betas = []
    for op in pom.outcomes:
        a, b = bloch_coords(op)
        alphas.append(a)
        betas.append(b)
    beta = np.array(betas)
    rhs = np.asarray(target_probs) - np.array(alphas)
    r_p, *_ = np.linalg.lstsq(beta, rhs, rcond=None)
    u, sv, vt = np.linalg.svd(beta)
    cut = sv[0] * 1e-10 if sv.size else 0.0
    rank = int(np.sum(sv > cut))
    null = vt[rank:]
    h0, hv = bloch_coords(objective)
    radial = np.sqrt(max(0.0, 1.0 - float(r_p @ r_p)))
    swing = np.linalg.norm(null @ hv) * radial
    base = h0 + float(hv @ r_p)
    return base + swing if sense == "max" else base - swing
