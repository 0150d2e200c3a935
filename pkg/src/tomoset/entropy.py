"""Entropy maximization over the likelihood plateau and the full pipelines.

Once a handful of linearly independent states from the plateau is known, any
affine combination of them that stays positive is again compatible with the
data.  Maximizing the von Neumann entropy over those combinations picks the
least committal estimate.  The log-basis residual ``gamma_residual`` measures
how far the logarithm of an estimate leaks out of the measured operator
block; at the true entropy maximizer that leak vanishes.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .basis import OperatorBasis, build_basis, decompose
from .config import DEFAULT, Config
from .convexset import ConvexSetModel, InfeasibleModelError, collect_members, plateau_model
from .core import (
    hermitian_part,
    matrix_log,
    von_neumann_entropy,
)
from .likelihood import CountData, MlSolution, log_likelihood, probabilities
from .witness import WitnessReport, certify_entanglement

# Cholesky shift used when testing a combination for positivity
COMBINE_SHIFT = 1e-12
# eigenvalue floor below which the log-basis residual is not defined
GAMMA_MIN_EIG = 1e-12
# reporting floor: estimates pressed this close to the rank boundary count as
# rank-deficient and get no residual (the logarithm is dominated by the
# near-zero eigenvalue, not by the measured block)
GAMMA_REPORT_EIG = 1e-8


class PipelineError(RuntimeError):
    """An estimation stage failed; the message names the stage."""


@dataclass(frozen=True)
class MlmeResult:
    """A maximum-entropy estimate over the maximum-likelihood states."""

    estimator: np.ndarray
    entropy: float
    gamma: float | None
    log_likelihood: float
    combination: np.ndarray | None
    members: list
    ml: MlSolution | None
    report: WitnessReport | None
    seconds: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def member_count(self) -> int:
        return len(self.members)


def combine(t, members) -> np.ndarray:
    """Affine combination sum_j t_j members[j]; weights must sum to one."""
    t = np.asarray(t, dtype=float)
    stack = np.asarray(members, dtype=complex)
    if t.shape[0] != stack.shape[0]:
        raise ValueError("one weight per member is required")
    if abs(float(t.sum()) - 1.0) > 1e-12:
        raise ValueError(f"weights sum to {t.sum()!r}, not 1")
    return hermitian_part(np.tensordot(t, stack, axes=1))


def penalty_floor(dim: int) -> float:
    """Entropy surrogate assigned to combinations that leave the state cone."""
    return -2.0 * np.log(dim)


def conditional_entropy(t, members) -> float:
    """Entropy of the combination when positive, else the penalty floor.

    Positivity is judged by a Cholesky factorization with a 1e-12 shift, which
    is cheap enough to sit inside a simplex search loop.
    """
    rho = combine(t, members)
    d = rho.shape[0]
    try:
        np.linalg.cholesky(rho + COMBINE_SHIFT * np.eye(d))
    except np.linalg.LinAlgError:
        return penalty_floor(d)
    return von_neumann_entropy(rho, psd_tol=1e-9)


def _entropy_feasible(x, stack) -> tuple[float | None, np.ndarray]:
    t = np.concatenate([x, [1.0 - float(np.sum(x))]])
    rho = hermitian_part(np.tensordot(t, stack, axes=1))
    w = np.linalg.eigvalsh(rho)
    if float(w[0]) <= 1e-13:
        return None, rho
    return float(-np.sum(w * np.log(w))), rho


def _newton_polish(x, stack, max_iter: int = 80):
    """Drive the simplex-search vertex to the exact interior maximizer.

    Entropy is smooth and strictly concave on full-rank combinations, so a
    damped Newton ascent with the analytic gradient and Hessian (via the
    divided-difference derivative of the matrix logarithm) converges to
    machine precision whenever the maximizer has full rank.  Starts that sit
    on or outside the rank boundary are returned unchanged.
    """
    x = np.asarray(x, dtype=float)
    deltas = stack[:-1] - stack[-1]
    value, _ = _entropy_feasible(x, stack)
    if value is None:
        return x
    n = len(x)
    for _ in range(max_iter):
        t = np.concatenate([x, [1.0 - float(np.sum(x))]])
        rho = hermitian_part(np.tensordot(t, stack, axes=1))
        w, u = np.linalg.eigh(rho)
        if float(w[0]) <= 1e-13:
            break
        logw = np.log(w)
        conj = np.einsum("ij,njk,kl->nil", u.conj().T, deltas, u)
        grad = -np.real(np.einsum("naa,a->n", conj, logw))
        diff_w = w[:, None] - w[None, :]
        avg_w = 0.5 * (w[:, None] + w[None, :])
        near = np.abs(diff_w) < 1e-9 * avg_w
        safe = np.where(near, 1.0, diff_w)
        loewner = np.where(near, 1.0 / avg_w, (logw[:, None] - logw[None, :]) / safe)
        hess = -np.real(np.einsum("nab,ab,mba->nm", conj, loewner, conj))
        try:
            step = np.linalg.solve(-hess + 1e-14 * np.eye(n), grad)
        except np.linalg.LinAlgError:
            break
        decrement = float(grad @ step)
        if decrement <= 1e-15:
            break
        alpha = 1.0
        moved = False
        while alpha > 1e-8:
            cand_x = x + alpha * step
            cand_val, _ = _entropy_feasible(cand_x, stack)
            if cand_val is not None and cand_val >= value + 1e-4 * alpha * decrement - 1e-15:
                x, value = cand_x, cand_val
                moved = True
                break
            alpha *= 0.5
        if not moved:
            break
    return x


def maximize_entropy(
    members, config: Config = DEFAULT, x0: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Search the affine hull of the members for the maximum-entropy state.

    The weights live on the hyperplane sum(t) = 1, parametrized by the first
    m-1 coordinates.  A simplex search starts at the best member (or at the
    warm start ``x0``, given as full weights), with the dimension-adapted
    variant above ten free coordinates, and restarts on the incumbent until
    the gain drops below tolerance.  A Newton ascent then sharpens the vertex
    while the combination keeps full rank.
    """
    stack = np.asarray(members, dtype=complex)
    m0 = stack.shape[0]
    if m0 == 0:
        raise ValueError("no members to combine")
    d = stack.shape[-1]
    if m0 == 1:
        return np.ones(1), hermitian_part(stack[0])
    floor_val = penalty_floor(d)

    def full_weights(x):
        return np.concatenate([x, [1.0 - float(np.sum(x))]])

    def negative_entropy(x):
        rho = hermitian_part(np.tensordot(full_weights(x), stack, axes=1))
        try:
            np.linalg.cholesky(rho + COMBINE_SHIFT * np.eye(d))
        except np.linalg.LinAlgError:
            return -floor_val
        w = np.linalg.eigvalsh(rho)
        w = w[w > 1e-14]
        return float(np.sum(w * np.log(w)))

    if x0 is not None and len(x0) == m0:
        x = np.asarray(x0, dtype=float)[: m0 - 1]
    else:
        start_entropies = [von_neumann_entropy(hermitian_part(s)) for s in stack]
        incumbent = int(np.argmax(start_entropies))
        x = np.zeros(m0 - 1)
        if incumbent < m0 - 1:
            x[incumbent] = 1.0

    n = m0 - 1
    best_val = negative_entropy(x)
    best_x = x
    for attempt in range(max(1, config.nms_restarts)):
        simplex = np.tile(best_x, (n + 1, 1))
        for j in range(n):
            simplex[j + 1, j] += config.nms_step
        res = minimize(
            negative_entropy,
            best_x,
            method="Nelder-Mead",
            options={
                "xatol": config.nms_tol,
                "fatol": config.nms_tol,
                "adaptive": n > 10,
                "initial_simplex": simplex,
            },
        )
        gain = best_val - float(res.fun)
        if res.fun < best_val:
            best_val = float(res.fun)
            best_x = np.asarray(res.x, dtype=float)
        if attempt > 0 and gain < config.nms_tol:
            break
    # The simplex search tends to stall against the rank boundary, where the
    # entropy surface has an infinite inward slope.  The interior maximizer is
    # recovered by Newton ascents started from the vertex and from copies of
    # it blended toward the best-conditioned member and the uniform mixture.
    member_eigs = [float(np.linalg.eigvalsh(hermitian_part(s))[0]) for s in stack]
    anchor = np.zeros(n)
    if int(np.argmax(member_eigs)) < n:
        anchor[int(np.argmax(member_eigs))] = 1.0
    uniform = np.full(n, 1.0 / m0)
    starts = [best_x]
    for lam in (1e-3, 1e-1):
        starts.append((1.0 - lam) * best_x + lam * anchor)
        starts.append((1.0 - lam) * best_x + lam * uniform)
    for start in starts:
        polished = _newton_polish(start, stack)
        val = negative_entropy(polished)
        if val < best_val:
            best_val = val
            best_x = polished
    if best_val >= -floor_val - 1e-9:
        raise PipelineError("entropy search never found a positive combination")
    t = full_weights(best_x)
    return t, combine(t, stack)


def gamma_residual(rho: np.ndarray, basis: OperatorBasis, min_eig: float = GAMMA_MIN_EIG) -> float:
    """Norm of the unmeasured coefficients of log(rho).

    At an exact maximum-entropy solution the state is an exponential of
    measured operators only, so this residual tends to zero as the member
    pool saturates.  Rank-deficient states have no trustworthy logarithm and
    raise instead.
    """
    logm = matrix_log(rho, min_eig=min_eig)
    return float(np.linalg.norm(decompose(logm, basis).unmeasured))


def _gamma_or_none(rho, basis) -> float | None:
    if float(np.linalg.eigvalsh(rho)[0]) <= GAMMA_REPORT_EIG:
        return None
    return gamma_residual(rho, basis)


def sdp_mlme(
    data: CountData,
    rng: np.random.Generator,
    dims: tuple[int, ...] | None = None,
    num_witnesses: int | None = None,
    witness_kind: str = "wishart",
    config: Config = DEFAULT,
) -> MlmeResult:
    """Full estimation pipeline built on plateau optimizations.

    Stages: a model of the likelihood maximizers (fitted iteratively only
    when the raw frequencies are unattainable), boundary-state collection
    (witness-driven when subsystem ``dims`` are given, random directions
    otherwise), then entropy maximization over the members.  With
    informationally complete data the plateau is the single likelihood
    maximizer and the pipeline short-circuits to it.
    """
    started = time.perf_counter()
    try:
        model, ml = plateau_model(data, rng, config)
    except InfeasibleModelError:
        raise
    except Exception as exc:
        raise PipelineError(f"model construction failed: {exc}") from exc
    basis = model.basis

    report = None
    if basis.n_unmeasured == 0:
        estimator = model.members[0]
        members = list(model.members)
        weights = np.ones(1)
    else:
        budget = num_witnesses
        if budget is None:
            budget = config.probe_count or 4 * basis.n_unmeasured
        try:
            if dims is not None:
                report = certify_entanglement(
                    model, dims, budget, rng, config, kind=witness_kind
                )
            else:
                collect_members(model, rng, probes=budget, config=config)
        except Exception as exc:
            raise PipelineError(f"boundary collection failed: {exc}") from exc
        try:
            weights, estimator = maximize_entropy(model.members, config)
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(f"entropy maximization failed: {exc}") from exc
        members = model.members

    return MlmeResult(
        estimator=estimator,
        entropy=von_neumann_entropy(estimator),
        gamma=_gamma_or_none(estimator, basis),
        log_likelihood=log_likelihood(data.counts, probabilities(estimator, data.pom)),
        combination=weights,
        members=list(members),
        ml=ml,
        report=report,
        seconds=time.perf_counter() - started,
        diagnostics={"ml_iterations": ml.iterations if ml is not None else 0},
    )


def steepest_ascent_mlme(
    data: CountData,
    lam: float = 1e-5,
    config: Config = DEFAULT,
    rng: np.random.Generator | None = None,
) -> MlmeResult:
    """Gradient-ascent baseline on likelihood plus a small entropy reward.

    The state is kept positive by construction through rho = A^dag A / tr, and
    the functional lam * (S - log d) + sum_j f_j log p_j is climbed with a
    backtracking line search on A.  Large ``lam`` drives the estimate to the
    maximally mixed state; ``lam`` = 0 reduces to plain likelihood ascent.
    """
    started = time.perf_counter()
    pom = data.pom
    d = pom.dim
    freqs = data.frequencies
    smax = np.log(d)
    a = np.eye(d, dtype=complex) / np.sqrt(d)

    def state_of(mat):
        rho = mat.conj().T @ mat
        return hermitian_part(rho / np.trace(rho).real)

    def functional(rho):
        w = np.linalg.eigvalsh(rho)
        w = np.clip(w, 0.0, None)
        live = w > 1e-14
        entropy = float(-np.sum(w[live] * np.log(w[live])))
        probs = probabilities(rho, pom)
        ll = log_likelihood(freqs, probs)
        return lam * (entropy - smax) + ll, probs

    rho = state_of(a)
    value, probs = functional(rho)
    eta = 0.5
    iterations = 0
    grad_norm = np.inf
    for iterations in range(1, config.sa_max_iter + 1):
        w, v = np.linalg.eigh(rho)
        logw = np.log(np.maximum(w, 1e-18))
        log_rho = (v * logw) @ v.conj().T
        ratio = np.zeros_like(freqs)
        live = freqs > 0.0
        ratio[live] = freqs[live] / np.maximum(probs[live], 1e-300)
        r_op = np.tensordot(ratio, pom.outcomes, axes=1)
        g_rho = lam * (-log_rho - np.eye(d)) + r_op
        g_rho = hermitian_part(g_rho)
        shifted = g_rho - float(np.vdot(g_rho, rho).real) * np.eye(d)
        grad = a @ shifted
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= config.sa_tol * max(1.0, abs(value)):
            break
        accepted = False
        while eta > 1e-16:
            cand_a = a + eta * grad
            cand_rho = state_of(cand_a)
            cand_val, cand_probs = functional(cand_rho)
            if cand_val >= value + 1e-4 * eta * 2.0 * grad_norm**2:
                a = cand_a / np.linalg.norm(cand_a)
                rho, value, probs = cand_rho, cand_val, cand_probs
                eta = min(eta * 1.5, 1e6)
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break

    basis = None
    gamma = None
    if rng is not None:
        basis = build_basis(pom, rng, config)
        gamma = _gamma_or_none(rho, basis)
    return MlmeResult(
        estimator=rho,
        entropy=von_neumann_entropy(rho),
        gamma=gamma,
        log_likelihood=log_likelihood(data.counts, probabilities(rho, pom)),
        combination=None,
        members=[],
        ml=None,
        report=None,
        seconds=time.perf_counter() - started,
        diagnostics={"iterations": iterations, "grad_norm": grad_norm},
    )
