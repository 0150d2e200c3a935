"""Direct search for linearly independent plateau states.

Instead of optimizing linear functionals, this route walks the unmeasured
coordinates directly: a candidate state is the fixed measured part plus a
coefficient vector on the unmeasured block, so it reproduces the data by
construction and only positivity constrains the walk.  The objective is the
smallest eigenvalue of the normalized overlap matrix of members plus
candidate, which is large exactly when the candidate is far from the span of
what has already been collected.
"""
from __future__ import annotations

import time

import numpy as np

from .basis import build_basis, decompose
from .config import DEFAULT, Config, PatternSearchConfig
from .convexset import (
    ConvexSetModel,
    InfeasibleModelError,
    is_singleton,
    optimize_linear,
    plateau_model,
    try_add_member,
)
from .core import hermitian_part, von_neumann_entropy
from .entropy import (
    MlmeResult,
    PipelineError,
    _gamma_or_none,
    maximize_entropy,
)
from .likelihood import CountData, log_likelihood, probabilities
from .sampling import random_direction

__all__ = [
    "PatternSearchConfig",
    "normalized_gram",
    "overlap_floor",
    "next_independent_estimator",
    "span_convex_set",
    "ps_mlme",
]

# a candidate is accepted as feasible when Cholesky passes with this shift
_FEAS_SHIFT = DEFAULT.psd_tol


def normalized_gram(states) -> np.ndarray:
    """Matrix of pairwise overlaps tr(r_i r_j), normalized to unit diagonal."""
    stack = np.asarray(states, dtype=complex)
    vecs = stack.reshape(stack.shape[0], -1)
    gram = (vecs.conj() @ vecs.T).real
    norms = np.sqrt(np.diag(gram))
    if np.any(norms <= 0.0):
        raise ValueError("states must have nonzero Hilbert-Schmidt norm")
    return gram / np.outer(norms, norms)


def overlap_floor(gram: np.ndarray) -> float:
    """Smallest singular value of a normalized overlap matrix."""
    return float(abs(np.linalg.eigvalsh(gram)[0]))


def _poll_descent(merit, b, psc: PatternSearchConfig, deadline: float):
    """Coordinate pattern search: opportunistic polls on an adaptive mesh."""
    value = merit(b)
    mesh = psc.initial_mesh
    n = b.shape[0]
    while mesh >= psc.mesh_floor and time.monotonic() < deadline:
        improved = False
        for j in range(n):
            for s in (1.0, -1.0):
                cand = b.copy()
                cand[j] += s * mesh
                cv = merit(cand)
                if cv < value - 1e-15:
                    b, value = cand, cv
                    improved = True
                    break
            if improved:
                break
        mesh = min(mesh * psc.expansion, 1.0) if improved else mesh * psc.contraction
    return b, value


def next_independent_estimator(
    model: ConvexSetModel,
    start: np.ndarray,
    psc: PatternSearchConfig | None = None,
    config: Config = DEFAULT,
):
    """Search the unmeasured coordinates for the most independent new state.

    Maximizes the smallest overlap eigenvalue of members plus candidate under
    the positivity constraint, which enters through an augmented-Lagrangian
    penalty with growing weight.  Returns ``(state, score, seconds)`` where
    the state is the best positivity-respecting candidate seen (the start
    state in the worst case).
    """
    psc = psc or config.ps
    basis = model.basis
    n = basis.n_unmeasured
    gam = basis.unmeasured
    d = basis.dim
    eye = np.eye(d)

    mstack = np.asarray(model.members, dtype=complex)
    mvecs = mstack.reshape(mstack.shape[0], -1)
    mnorms = np.linalg.norm(mvecs, axis=1)
    base_vec = model.rho_meas.ravel()
    gvecs = gam.reshape(n, -1)
    cross_base = (mvecs.conj() @ base_vec).real
    cross_g = (mvecs.conj() @ gvecs.T).real
    base_sq = float(np.vdot(base_vec, base_vec).real)
    fixed = normalized_gram(mstack)
    m = mstack.shape[0]
    full = np.empty((m + 1, m + 1))
    full[:m, :m] = fixed
    full[m, m] = 1.0

    def score(b):
        row = cross_base + cross_g @ b
        norm_cand = np.sqrt(base_sq + float(b @ b))
        full[:m, m] = full[m, :m] = row / (mnorms * norm_cand)
        return float(abs(np.linalg.eigvalsh(full)[0]))

    def violation(b):
        rho = model.rho_meas + np.tensordot(b, gam, axes=1)
        try:
            np.linalg.cholesky(rho + _FEAS_SHIFT * eye)
            return 0.0
        except np.linalg.LinAlgError:
            return float(max(0.0, -np.linalg.eigvalsh(hermitian_part(rho))[0]))

    started = time.monotonic()
    deadline = started + psc.time_cap
    b = decompose(start, basis).unmeasured.copy()
    best_score = score(b) if violation(b) == 0.0 else -np.inf
    best_b = b.copy()

    lam_al = 0.0
    pen = psc.penalty_init
    for _ in range(max(1, psc.max_outer)):

        def merit(bb):
            nonlocal best_score, best_b
            v = violation(bb)
            s = score(bb)
            if v == 0.0 and s > best_score:
                best_score = s
                best_b = bb.copy()
            return -s + lam_al * v + 0.5 * pen * v * v

        b, _ = _poll_descent(merit, b, psc, deadline)
        v_end = violation(b)
        if v_end <= 1e-9 or time.monotonic() >= deadline:
            break
        lam_al += pen * v_end
        pen *= psc.penalty_growth

    if not np.isfinite(best_score):
        raise PipelineError("pattern search found no positivity-respecting candidate")
    state = hermitian_part(model.rho_meas + np.tensordot(best_b, gam, axes=1))
    return state, best_score, time.monotonic() - started


def span_convex_set(
    model: ConvexSetModel,
    psc: PatternSearchConfig | None = None,
    config: Config = DEFAULT,
    log: dict | None = None,
) -> list:
    """Grow the member list until new candidates stop being independent.

    Each round starts the search from the equal mixture of current members and
    keeps the candidate only while the overlap floor stays above
    ``config.indep_tol``.  Stops at the affine-dimension cap as well.
    """
    seconds = []
    scores = []
    while len(model.members) < model.member_cap:
        start = hermitian_part(np.mean(np.asarray(model.members, dtype=complex), axis=0))
        state, sc, secs = next_independent_estimator(model, start, psc, config)
        seconds.append(secs)
        scores.append(sc)
        if sc <= config.indep_tol:
            break
        model.members.append(state)
    if log is not None:
        log["candidate_seconds"] = seconds
        log["overlap_scores"] = scores
    return model.members


def ps_mlme(
    data: CountData,
    rng: np.random.Generator,
    config: Config = DEFAULT,
    psc: PatternSearchConfig | None = None,
) -> MlmeResult:
    """Estimation pipeline driven by the direct search.

    After the likelihood model and a handful of plateau probes, the model
    either collapses to a single state (returned as-is) or is spanned by
    pattern-search candidates before the entropy maximization step.
    """
    started = time.perf_counter()
    try:
        model, ml = plateau_model(data, rng, config)
    except InfeasibleModelError:
        raise
    except Exception as exc:
        raise PipelineError(f"model construction failed: {exc}") from exc
    basis = model.basis

    diagnostics: dict = {"ml_iterations": ml.iterations if ml is not None else 0}
    if basis.n_unmeasured == 0:
        estimator = model.members[0]
        members = list(model.members)
        weights = np.ones(1)
    else:
        for _ in range(2):
            h = random_direction(model.dim, rng)
            for sense in ("max", "min"):
                res = optimize_linear(h, sense, model, config)
                model.optimizers.append(res.optimizer)
                try_add_member(model, res.optimizer, config)
        if is_singleton(model, config):
            estimator = model.members[0]
            members = [model.members[0]]
            weights = np.ones(1)
            diagnostics["singleton"] = True
        else:
            span_convex_set(model, psc, config, log=diagnostics)
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
        report=None,
        seconds=time.perf_counter() - started,
        diagnostics=diagnostics,
    )
