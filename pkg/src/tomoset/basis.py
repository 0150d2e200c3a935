"""Trace-orthonormal operator bases split into measured and unmeasured blocks.

The measured block spans the same operator subspace as the measurement
outcomes; the unmeasured block completes it to the full Hermitian space.  Any
state compatible with the recorded probabilities differs from another such
state only inside the unmeasured block, which is what makes the block split
the workhorse for exploring the set of maximum-likelihood states.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Config
from .core import hermitian_part
from .sampling import random_wishart


class BasisBuildError(RuntimeError):
    """Raised when random completion cannot produce an independent operator."""


@dataclass(frozen=True)
class OperatorBasis:
    """Stacked Hermitian basis operators, trace-orthonormal across both blocks."""

    measured: np.ndarray    # (n_measured, dim, dim)
    unmeasured: np.ndarray  # (n_unmeasured, dim, dim)

    @property
    def dim(self) -> int:
        return self.measured.shape[-1]

    @property
    def n_measured(self) -> int:
        return self.measured.shape[0]

    @property
    def n_unmeasured(self) -> int:
        return self.unmeasured.shape[0]

    @property
    def all_operators(self) -> np.ndarray:
        if self.n_unmeasured == 0:
            return self.measured
        return np.concatenate([self.measured, self.unmeasured], axis=0)


@dataclass(frozen=True)
class Decomposition:
    """Coefficients of a Hermitian operator in an OperatorBasis."""

    measured: np.ndarray
    unmeasured: np.ndarray
    residual: float


def _overlaps(stack: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Real trace inner products of every stacked operator with x."""
    if stack.shape[0] == 0:
        return np.zeros(0)
    return np.einsum("kij,ij->k", stack.conj(), x).real


def rank_of_operator_set(ops, tol: float = DEFAULT.rank_rel_tol) -> int:
    """Rank of a set of Hermitian operators under the trace inner product.

    Counts singular values of the stacked coefficient matrix above ``tol``
    times the largest one.  (A Gram-matrix variant would square the
    conditioning and lose directions near the tolerance.)
    """
    stack = np.asarray(ops, dtype=complex)
    if stack.shape[0] == 0:
        return 0
    vecs = stack.reshape(stack.shape[0], -1)
    sv = np.linalg.svd(np.column_stack([vecs.real, vecs.imag]), compute_uv=False)
    if sv[0] <= 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def _orthogonalize(x: np.ndarray, accepted: list[np.ndarray]) -> np.ndarray:
    """Project x off the accepted operators, with one re-orthogonalization pass."""
    for _ in range(2):
        for g in accepted:
            x = x - np.vdot(g, x).real * g
    return x


def build_basis(pom, rng: np.random.Generator, config: Config = DEFAULT) -> OperatorBasis:
    """Orthonormalize the measurement outcomes, then complete the basis randomly.

    Modified Gram-Schmidt over the outcomes yields the measured block; outcomes
    whose residual drops below ``config.gs_drop_tol`` (relative) are linearly
    dependent and skipped.  Random unit-trace positives seed the completion so
    the unmeasured block carries no preferred structure.  Draws that collapse
    under orthogonalization are retried up to ``config.gs_retry_budget`` times.
    """
    outcomes = np.asarray(getattr(pom, "outcomes", pom), dtype=complex)
    if outcomes.ndim != 3 or outcomes.shape[1] != outcomes.shape[2]:
        raise ValueError(f"expected stacked square outcomes, got shape {outcomes.shape}")
    d = outcomes.shape[-1]

    accepted: list[np.ndarray] = []
    for op in outcomes:
        x = hermitian_part(op)
        before = np.linalg.norm(x)
        if before == 0.0:
            continue
        x = _orthogonalize(x, accepted)
        after = np.linalg.norm(x)
        if after < config.gs_drop_tol * before:
            continue
        accepted.append(x / after)
    n_meas = len(accepted)

    failures = 0
    while len(accepted) < d * d:
        seed = random_wishart(d, rng)
        x = _orthogonalize(seed, accepted)
        norm = np.linalg.norm(x)
        if norm < config.gs_drop_tol:
            failures += 1
            if failures > config.gs_retry_budget:
                raise BasisBuildError(
                    f"no independent completion operator after {failures} draws"
                )
            continue
        accepted.append(x / norm)

    measured = np.array(accepted[:n_meas]).reshape(n_meas, d, d)
    unmeasured = np.array(accepted[n_meas:]).reshape(d * d - n_meas, d, d)
    basis = OperatorBasis(measured=measured, unmeasured=unmeasured)

    # the outcomes sum to the identity, so it must sit inside the measured block
    eye = np.eye(d, dtype=complex)
    off = np.linalg.norm(eye - measured_projection(eye, basis))
    if off > 1e-8 * np.sqrt(d):
        raise ValueError(f"identity leaks out of the measured block by {off:.3e}")
    return basis


def decompose(op: np.ndarray, basis: OperatorBasis) -> Decomposition:
    """Coefficients of a Hermitian operator in both blocks, plus the leftover."""
    a = _overlaps(basis.measured, op)
    b = _overlaps(basis.unmeasured, op)
    recon = np.tensordot(a, basis.measured, axes=1)
    if basis.n_unmeasured:
        recon = recon + np.tensordot(b, basis.unmeasured, axes=1)
    residual = float(np.linalg.norm(op - recon))
    return Decomposition(measured=a, unmeasured=b, residual=residual)


def measured_projection(op: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """Orthogonal projection of an operator onto the measured block."""
    a = _overlaps(basis.measured, op)
    return hermitian_part(np.tensordot(a, basis.measured, axes=1))
