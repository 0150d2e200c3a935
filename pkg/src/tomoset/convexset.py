"""Linear optimization over the set of maximum-likelihood states.

With incomplete data the likelihood peaks on a whole convex set of states:
everything that reproduces the maximum-likelihood probabilities and stays
positive.  Writing a candidate as the fixed measured part plus free
coefficients on the unmeasured basis block turns the probability constraints
into structure, leaving a linear objective over a spectrahedron in the
unmeasured coordinates.  That problem is solved here with a logarithmic
barrier: Newton centering along a shrinking path parameter, a duality
certificate from the barrier multiplier, and a facial-reduction fallback for
data that pins the set to a boundary face (or to a single state).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .basis import OperatorBasis, build_basis, decompose, measured_projection, rank_of_operator_set
from .config import DEFAULT, Config
from .core import hermitian_part, hilbert_schmidt_distance, require_hermitian, trace_inner_product
from .likelihood import CountData, MlSolution, Pom, ml_estimate, probabilities
from .sampling import random_direction

# eigenvalues below this at a face center are treated as exactly zero
FACE_EIG_TOL = 1e-6


class InfeasibleModelError(RuntimeError):
    """No positive state matches the target probabilities."""


class SolverStallError(RuntimeError):
    """The barrier solve could not certify the requested optimality gap."""


@dataclass(frozen=True)
class LinearOptResult:
    optimizer: np.ndarray
    value: float
    certified_gap: float
    newton_steps: int


@dataclass(frozen=True)
class _Geometry:
    """Affine chart of the feasible set after any facial reduction.

    Coordinates map as b = b0 + span @ y (span has orthonormal columns; None
    means the identity).  The reduced pencil f0 + sum_j y_j fs[j] must be PSD;
    ``center`` is strictly feasible with smallest eigenvalue ``radius``.
    ``norm_bound`` dominates |y| over the feasible set and feeds the duality
    certificate.
    """

    b0: np.ndarray
    span: np.ndarray | None
    f0: np.ndarray
    fs: np.ndarray
    center: np.ndarray
    radius: float
    norm_bound: float

    @property
    def n_free(self) -> int:
        return self.fs.shape[0]

    def lift(self, y: np.ndarray) -> np.ndarray:
        if self.span is None:
            return self.b0 + y
        return self.b0 + self.span @ y


def _pencil(f0: np.ndarray, fs: np.ndarray, x: np.ndarray) -> np.ndarray:
    f = f0 if fs.shape[0] == 0 else f0 + np.tensordot(x, fs, axes=1)
    return 0.5 * (f + f.conj().T)


def _try_factor(f: np.ndarray):
    try:
        return np.linalg.cholesky(f)
    except np.linalg.LinAlgError:
        return None


def _barrier_value(c, f0, fs, x, mu):
    """Barrier objective -c.x - mu logdet F(x), or None when x leaves the cone."""
    f = _pencil(f0, fs, x)
    chol = _try_factor(f)
    if chol is None:
        return None
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol).real)))
    return float(-(c @ x) - mu * logdet), chol


def _newton_center(c, f0, fs, x, mu, gtol, max_steps, decrement_tol=None):
    """Damped Newton descent on the barrier objective at fixed mu.

    Stops on the Euclidean gradient tolerance (used by the final stage to
    certify a duality gap) or, when ``decrement_tol`` is given, on the
    scale-invariant Newton decrement of the normalized barrier (enough for
    intermediate path stages).  Returns the final point together with the
    gradient there, so callers can assemble the certificate without
    recomputing anything.
    """
    eye = np.eye(f0.shape[0])
    ev = _barrier_value(c, f0, fs, x, mu)
    if ev is None:
        raise SolverStallError("barrier started outside the cone")
    phi, chol = ev
    steps = 0
    while True:
        linv = solve_triangular(chol, eye, lower=True)
        finv = linv.conj().T @ linv
        grad = -c - mu * np.einsum("ij,kji->k", finv, fs).real
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= gtol or steps >= max_steps:
            return x, grad, gnorm, steps
        m = np.einsum("ij,kjl->kil", finv, fs)
        hess = mu * np.einsum("kil,mli->km", m, m).real
        hess = 0.5 * (hess + hess.T)
        try:
            direction = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            direction = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        slope = float(grad @ direction)
        if not np.isfinite(slope) or slope >= 0.0:
            return x, grad, gnorm, steps
        if decrement_tol is not None and -slope <= decrement_tol**2 * mu:
            return x, grad, gnorm, steps
        # cap the step short of the cone boundary before backtracking
        delta = np.tensordot(direction, fs, axes=1)
        scaled = linv @ delta @ linv.conj().T
        lam_min = float(np.linalg.eigvalsh(0.5 * (scaled + scaled.conj().T))[0])
        alpha = 1.0 if lam_min >= -1e-14 else min(1.0, -0.99 / lam_min)
        moved = False
        while alpha >= 1e-13:
            cand = x + alpha * direction
            ev = _barrier_value(c, f0, fs, cand, mu)
            if ev is not None and ev[0] <= phi + 1e-4 * alpha * slope:
                x, (phi, chol) = cand, ev
                moved = True
                break
            alpha *= 0.5
        if not moved:
            return x, grad, gnorm, steps
        steps += 1


def _follow_path(
    c, f0, fs, x0, mu_floor, norm_bound, gtol_final,
    max_newton=400, decay=0.15, decrement_tol=0.33,
):
    """Path-following maximization of c.x over the pencil cone.

    Returns (x, value, certified_gap, newton_steps).  The gap bound combines
    the barrier multiplier with the residual of the implied dual point:
    gap <= mu * size + |grad| * (norm_bound + |x|).
    """
    r = f0.shape[0]
    mu = max(1.0, float(np.linalg.norm(c)))
    x = np.asarray(x0, dtype=float)
    total = 0
    while True:
        at_floor = mu <= mu_floor * (1.0 + 1e-12)
        if at_floor:
            x, grad, gnorm, steps = _newton_center(c, f0, fs, x, mu, gtol_final, 60)
        else:
            x, grad, gnorm, steps = _newton_center(
                c, f0, fs, x, mu, 0.0, 60, decrement_tol=decrement_tol
            )
        total += steps
        if total > max_newton:
            raise SolverStallError(f"no convergence within {max_newton} Newton steps")
        if at_floor:
            gap = mu * r + gnorm * (norm_bound + float(np.linalg.norm(x)))
            return x, float(c @ x), gap, total
        mu = max(mu * decay, mu_floor)


def _phase1(f0, fs, x_init, norm_cap, config: Config):
    """Find the most interior point: maximize the smallest pencil eigenvalue.

    Works on the extended pencil F(b) - t I with objective t, which always has
    strictly feasible points.  Returns (b_center, t_lower, t_upper), where the
    bracket comes from the attained eigenvalue and the duality certificate.
    """
    n = fs.shape[0]
    r = f0.shape[0]
    ext = np.concatenate([fs, -np.eye(r, dtype=complex)[None, :, :]], axis=0)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    lam0 = float(np.linalg.eigvalsh(_pencil(f0, fs, x_init))[0])
    x = np.concatenate([x_init, [lam0 - 0.25]])
    # feasible t' is bounded by the eigenvalue range of the pencil near optimum
    bound = norm_cap + float(np.linalg.norm(f0)) + 2.0 + np.sqrt(r)
    mu = 1.0
    mu_floor = max(config.interior_tol / (8.0 * r), 1e-12)
    best_b, best_low, best_up = x_init, lam0, np.inf
    total = 0
    while True:
        at_floor = mu <= mu_floor * (1.0 + 1e-12)
        if at_floor:
            x, grad, gnorm, steps = _newton_center(c, f0, ext, x, mu, 1e-9, 60)
        else:
            x, grad, gnorm, steps = _newton_center(
                c, f0, ext, x, mu, 0.0, 60, decrement_tol=0.33
            )
        total += steps
        if total > 600:
            raise SolverStallError("interior search stalled")
        b = x[:-1]
        t_low = float(np.linalg.eigvalsh(_pencil(f0, fs, b))[0])
        t_up = float(x[-1]) + mu * r + gnorm * (bound + float(np.linalg.norm(x)))
        if t_low > best_low:
            best_b, best_low = b, t_low
        best_up = min(best_up, t_up)
        settled = best_up - best_low <= max(0.05 * abs(best_low), 0.25 * config.interior_tol)
        if settled or at_floor or best_up < -2.0 * config.feas_tol:
            return best_b, best_low, best_up
        mu = max(mu * 0.1, mu_floor)


def _analyze(f0, fs, x_init, norm_cap, config: Config, depth=0) -> _Geometry:
    """Classify the feasible region: interior chart, reduced face, or point."""
    n = fs.shape[0]
    r = f0.shape[0]
    if depth > r + 2:
        raise SolverStallError("facial reduction failed to terminate")
    if n == 0:
        low = float(np.linalg.eigvalsh(f0)[0]) if r else 0.0
        if low < -config.feas_tol:
            raise InfeasibleModelError(f"fixed part has eigenvalue {low:.3e}")
        return _Geometry(
            b0=np.zeros(0), span=None, f0=f0, fs=fs,
            center=np.zeros(0), radius=low, norm_bound=1.0,
        )

    b_c, t_low, t_up = _phase1(f0, fs, x_init, norm_cap, config)
    if t_up < -config.feas_tol:
        raise InfeasibleModelError(
            f"no positive state matches the data (margin {t_up:.3e})"
        )
    if t_low >= config.interior_tol:
        return _Geometry(
            b0=np.zeros(n), span=None, f0=f0, fs=fs,
            center=b_c, radius=t_low, norm_bound=norm_cap + 1.0,
        )

    # Boundary face: every feasible pencil shares the kernel of the center.
    w, v = np.linalg.eigh(_pencil(f0, fs, b_c))
    kernel = v[:, w <= FACE_EIG_TOL]
    keep = v[:, w > FACE_EIG_TOL]
    if kernel.shape[1] == 0:
        return _Geometry(
            b0=np.zeros(n), span=None, f0=f0, fs=fs,
            center=b_c, radius=t_low, norm_bound=norm_cap + 1.0,
        )

    # Membership in the face is linear: F(b) must annihilate the kernel.
    cols = np.stack([(fj @ kernel).ravel() for fj in fs], axis=1)
    mat = np.concatenate([cols.real, cols.imag], axis=0)
    res0 = (_pencil(f0, fs, b_c) @ kernel).ravel()
    rhs = -np.concatenate([res0.real, res0.imag])
    shift = np.linalg.lstsq(mat, rhs, rcond=None)[0]
    b_p = b_c + shift

    u_svd, sv, vt = np.linalg.svd(mat, full_matrices=True)
    cut = (sv[0] if sv.size else 0.0) * 1e-10
    rank = int(np.sum(sv > cut))
    null = vt[rank:].T  # (n, n_y) orthonormal columns
    if null.shape[1] == 0:
        f_point = _pencil(f0, fs, b_p)
        low = float(np.linalg.eigvalsh(f_point)[0])
        if low < -config.feas_tol:
            raise InfeasibleModelError(f"face collapsed to an invalid point ({low:.3e})")
        return _Geometry(
            b0=b_p, span=np.zeros((n, 0)), f0=f_point,
            fs=np.zeros((0, r, r), dtype=complex),
            center=np.zeros(0), radius=low, norm_bound=norm_cap + 1.0,
        )

    g0 = keep.conj().T @ _pencil(f0, fs, b_p) @ keep
    gs = np.einsum("ai,kab,bj->kij", keep.conj(), fs, keep)
    gs = np.tensordot(null.T, gs, axes=1)
    y_init = null.T @ (b_c - b_p)
    sub = _analyze(
        hermitian_part(g0), gs, y_init,
        norm_cap + float(np.linalg.norm(b_p)), config, depth + 1,
    )
    b0_total = b_p + null @ sub.b0
    span_total = null if sub.span is None else null @ sub.span
    return _Geometry(
        b0=b0_total, span=span_total, f0=sub.f0, fs=sub.fs,
        center=sub.center, radius=sub.radius,
        norm_bound=norm_cap + float(np.linalg.norm(b0_total)) + 1.0,
    )


@dataclass
class ConvexSetModel:
    """The maximum-likelihood convex set, plus every boundary state found so far.

    ``members`` keeps a linearly independent selection of states from the set
    (the first entry is usually the fixed-point likelihood maximizer), while
    ``optimizers`` records every optimization result for spread diagnostics.
    """

    pom: Pom
    target_probs: np.ndarray
    basis: OperatorBasis
    rho_meas: np.ndarray
    members: list = field(default_factory=list)
    optimizers: list = field(default_factory=list)
    _geom: _Geometry | None = field(default=None, repr=False)
    _init_b: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_ml(cls, ml: MlSolution, pom: Pom, basis: OperatorBasis) -> "ConvexSetModel":
        split = decompose(ml.rho, basis)
        rho_meas = hermitian_part(np.tensordot(split.measured, basis.measured, axes=1))
        model = cls(
            pom=pom,
            target_probs=np.asarray(ml.probabilities, dtype=float),
            basis=basis,
            rho_meas=rho_meas,
            members=[ml.rho],
        )
        model._init_b = split.unmeasured
        return model

    @classmethod
    def from_probs(
        cls, pom: Pom, basis: OperatorBasis, target_probs, config: Config = DEFAULT
    ) -> "ConvexSetModel":
        target = np.asarray(target_probs, dtype=float)
        design = np.einsum("kij,mji->km", pom.outcomes, basis.measured).real
        coeff, *_ = np.linalg.lstsq(design, target, rcond=None)
        gap = float(np.max(np.abs(design @ coeff - target)))
        if gap > config.feas_tol:
            raise InfeasibleModelError(
                f"target probabilities inconsistent with the measurement ({gap:.3e})"
            )
        rho_meas = hermitian_part(np.tensordot(coeff, basis.measured, axes=1))
        return cls(pom=pom, target_probs=target, basis=basis, rho_meas=rho_meas)

    @property
    def dim(self) -> int:
        return self.pom.dim

    @property
    def member_cap(self) -> int:
        return self.basis.n_unmeasured + 1

    def geometry(self, config: Config = DEFAULT) -> _Geometry:
        if self._geom is None:
            n = self.basis.n_unmeasured
            x_init = self._init_b if self._init_b is not None else np.zeros(n)
            self._geom = _analyze(
                self.rho_meas.astype(complex), self.basis.unmeasured,
                np.asarray(x_init, dtype=float), 1.0, config,
            )
        return self._geom

    def assemble(self, b: np.ndarray) -> np.ndarray:
        rho = self.rho_meas
        if self.basis.n_unmeasured:
            rho = rho + np.tensordot(b, self.basis.unmeasured, axes=1)
        rho = hermitian_part(rho)
        w, v = np.linalg.eigh(rho)
        if -1e-6 < float(w[0]) < 0.0:
            clipped = (v * np.clip(w, 0.0, None)) @ v.conj().T
            rho = hermitian_part(clipped / np.trace(clipped).real)
        return rho


def plateau_model(
    data: CountData,
    rng: np.random.Generator,
    config: Config = DEFAULT,
    basis: OperatorBasis | None = None,
) -> tuple[ConvexSetModel, MlSolution | None]:
    """Model of the likelihood maximizers for the given counts.

    When the observed frequencies are themselves attainable (always the case
    for idealized probability records), they are the maximum-likelihood
    probabilities, so the model is built from them directly and the iterative
    fit is skipped; its first member is then a centered feasible state.  For
    unattainable frequencies the fixed-point fit supplies the target
    probabilities, and its solution is returned alongside the model.
    """
    if basis is None:
        basis = build_basis(data.pom, rng, config)
    try:
        model = ConvexSetModel.from_probs(data.pom, basis, data.frequencies, config)
        geom = model.geometry(config)
    except InfeasibleModelError:
        ml = ml_estimate(data, config)
        model = ConvexSetModel.from_ml(ml, data.pom, basis)
        return model, ml
    model.members.append(model.assemble(geom.lift(geom.center)))
    return model, None


def optimize_linear(
    objective: np.ndarray,
    sense: str,
    model: ConvexSetModel,
    config: Config = DEFAULT,
) -> LinearOptResult:
    """Maximize or minimize tr(rho * objective) over the likelihood plateau.

    The optimizer is always feasible (it never leaves the cone interior by
    more than the global slack) and ``certified_gap`` bounds its distance to
    the true optimum through the barrier duality certificate.
    """
    if sense not in ("max", "min"):
        raise ValueError(f"sense must be 'max' or 'min', not {sense!r}")
    h = require_hermitian(objective, atol=1e-9, name="objective")
    geom = model.geometry(config)
    c_b = (
        np.einsum("kij,ji->k", model.basis.unmeasured, h).real
        if model.basis.n_unmeasured
        else np.zeros(0)
    )

    if geom.n_free == 0:
        b = geom.b0
        rho = model.assemble(b)
        value = trace_inner_product(rho, h)
        return LinearOptResult(optimizer=rho, value=value, certified_gap=0.0, newton_steps=0)

    c_y = c_b if geom.span is None else geom.span.T @ c_b
    signed = c_y if sense == "max" else -c_y
    if float(np.linalg.norm(signed)) < 1e-13:
        rho = model.assemble(geom.lift(geom.center))
        return LinearOptResult(
            optimizer=rho, value=trace_inner_product(rho, h),
            certified_gap=0.0, newton_steps=0,
        )

    r = geom.f0.shape[0]
    mu_floor = config.gap_tol / (4.0 * r)
    gtol_final = config.gap_tol / (8.0 * max(1.0, geom.norm_bound))
    # a long-step schedule first; fall back to short cautious steps on trouble
    try:
        y, _, gap, steps = _follow_path(
            signed, geom.f0, geom.fs, geom.center, mu_floor, geom.norm_bound,
            gtol_final, decay=0.02, decrement_tol=0.5,
        )
    except SolverStallError:
        gap, steps = np.inf, 0
    if gap > config.gap_tol:
        y, _, gap, extra = _follow_path(
            signed, geom.f0, geom.fs, geom.center, mu_floor / 10.0, geom.norm_bound,
            gtol_final / 10.0,
        )
        steps += extra
        if gap > config.gap_tol:
            raise SolverStallError(f"certified gap {gap:.3e} above {config.gap_tol:.1e}")
    rho = model.assemble(geom.lift(y))
    value = trace_inner_product(rho, h)
    return LinearOptResult(optimizer=rho, value=value, certified_gap=gap, newton_steps=steps)


def try_add_member(model: ConvexSetModel, rho: np.ndarray, config: Config = DEFAULT) -> bool:
    """Append a state if it enlarges the span of the member list.

    The candidate must reproduce the target probabilities; independence is
    judged by the rank of the trace-overlap matrix.
    """
    drift = float(np.max(np.abs(probabilities(rho, model.pom) - model.target_probs)))
    if drift > 10.0 * config.feas_tol:
        raise ValueError(f"candidate violates the data constraints by {drift:.3e}")
    if len(model.members) >= model.member_cap:
        return False
    if not model.members:
        model.members.append(rho)
        return True
    before = rank_of_operator_set(model.members, config.rank_rel_tol)
    after = rank_of_operator_set(model.members + [rho], config.rank_rel_tol)
    if after > before:
        model.members.append(rho)
        return True
    return False


def collect_members(
    model: ConvexSetModel,
    rng: np.random.Generator,
    probes: int | None = None,
    config: Config = DEFAULT,
) -> list:
    """Grow the member list with extreme states along random directions.

    Each probe optimizes a random Hermitian direction in both senses and
    rank-screens the optimizers into the member list.  Stops at the member
    cap, after the probe budget, or once appends have stalled for a while.
    """
    n_un = model.basis.n_unmeasured
    if n_un == 0:
        return model.members
    budget = probes if probes is not None else (config.probe_count or 4 * n_un)
    stall_limit = max(4, n_un)
    stall = 0
    solves = 0
    while solves < budget:
        if len(model.members) >= model.member_cap or stall >= stall_limit:
            break
        h = random_direction(model.dim, rng)
        for sense in ("max", "min"):
            if solves >= budget:
                break
            res = optimize_linear(h, sense, model, config)
            solves += 1
            model.optimizers.append(res.optimizer)
            if try_add_member(model, res.optimizer, config):
                stall = 0
            else:
                stall += 1
    return model.members


def is_singleton(model: ConvexSetModel, config: Config = DEFAULT) -> bool:
    """True when every state seen so far is pairwise close: the set is one point."""
    if len(model.optimizers) < 2:
        raise ValueError("need at least two optimization results to judge the spread")
    pts = list(model.members) + list(model.optimizers)
    dists = [
        hilbert_schmidt_distance(pts[i], pts[j])
        for i in range(len(pts))
        for j in range(i + 1, len(pts))
    ]
    return float(np.mean(dists)) < config.singleton_tol
