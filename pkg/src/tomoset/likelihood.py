"""Measurement models, count records, and iterative likelihood maximization."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Config
from .core import require_hermitian

# probabilities at or below this are treated as zero inside logs
PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class Pom:
    """A probability-operator measurement: stacked outcomes that sum to one.

    Each outcome must be positive semidefinite within the global slack and the
    stack must resolve the identity within 1e-9.
    """

    outcomes: np.ndarray  # (n_outcomes, dim, dim)

    def __post_init__(self):
        stack = np.asarray(self.outcomes, dtype=complex)
        if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
            raise ValueError(f"expected stacked square outcomes, got {stack.shape}")
        d = stack.shape[-1]
        for k, op in enumerate(stack):
            op = require_hermitian(op, atol=1e-9, name=f"outcome {k}")
            low = float(np.linalg.eigvalsh(op)[0])
            if low < -DEFAULT.psd_tol:
                raise ValueError(f"outcome {k} has eigenvalue {low:.3e}")
            stack[k] = op
        total = stack.sum(axis=0)
        if np.max(np.abs(total - np.eye(d))) > 1e-9:
            raise ValueError("outcomes do not sum to the identity within 1e-9")
        object.__setattr__(self, "outcomes", stack)

    @property
    def dim(self) -> int:
        return self.outcomes.shape[-1]

    @property
    def n_outcomes(self) -> int:
        return self.outcomes.shape[0]

    @classmethod
    def from_matrices(cls, mats) -> "Pom":
        return cls(outcomes=np.array([np.asarray(m, dtype=complex) for m in mats]))


@dataclass(frozen=True)
class CountData:
    """Observed outcome counts for a measurement.

    ``exact`` marks idealized records whose entries are outcome probabilities
    rather than integer tallies; downstream formulas only ever use relative
    frequencies, so both kinds share one code path.
    """

    counts: np.ndarray
    pom: Pom
    exact: bool = False

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        if counts.ndim != 1 or counts.shape[0] != self.pom.n_outcomes:
            raise ValueError("counts do not match the number of outcomes")
        if np.any(counts < 0.0):
            raise ValueError("counts must be non-negative")
        if counts.sum() <= 0.0:
            raise ValueError("at least one outcome must be observed")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.total


@dataclass(frozen=True)
class MlSolution:
    """Output of the likelihood maximization."""

    rho: np.ndarray
    probabilities: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    residual: float  # Hilbert-Schmidt size of the final fixed-point update
    certificate: float  # upper bound on the remaining per-sample gain


def probabilities(rho: np.ndarray, pom: Pom) -> np.ndarray:
    """Outcome probabilities tr(rho * outcome) of a state, as a real vector."""
    return np.einsum("kij,ji->k", pom.outcomes, rho).real


def log_likelihood(data, probs: np.ndarray) -> float:
    """Sum of counts times log probabilities.

    Unobserved outcomes contribute nothing even at zero probability; an
    observed outcome with vanishing probability sends the value to -inf.
    """
    counts = np.asarray(getattr(data, "counts", data), dtype=float)
    probs = np.asarray(probs, dtype=float)
    hit = counts > 0.0
    if np.any(probs[hit] <= PROB_FLOOR):
        return float("-inf")
    return float(np.sum(counts[hit] * np.log(probs[hit])))


def _update_operator(freqs: np.ndarray, probs: np.ndarray, pom: Pom) -> np.ndarray:
    """The likelihood-gradient operator sum_j (f_j / p_j) * outcome_j."""
    ratio = np.zeros_like(freqs)
    live = freqs > 0.0
    ratio[live] = freqs[live] / np.maximum(probs[live], PROB_FLOOR)
    return np.tensordot(ratio, pom.outcomes, axes=1)


def _hermitian_basis(d: int) -> np.ndarray:
    """Trace-orthonormal Hermitian operator basis; the identity comes first."""
    ops = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for a in range(d):
        for b in range(a + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[a, b] = m[b, a] = 1.0 / np.sqrt(2.0)
            ops.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[a, b] = -1j / np.sqrt(2.0)
            m[b, a] = 1j / np.sqrt(2.0)
            ops.append(m)
    for k in range(1, d):
        diag = np.zeros(d)
        diag[:k] = 1.0
        diag[k] = -k
        ops.append(np.diag(diag).astype(complex) / np.linalg.norm(diag))
    return np.array(ops)


def ml_estimate(
    data: CountData,
    config: Config = DEFAULT,
    rho0: np.ndarray | None = None,
) -> MlSolution:
    """Maximize the measurement likelihood over density operators.

    Starting from the maximally mixed state (or ``rho0``), each sweep
    conjugates the state with the mean of the likelihood-gradient operator and
    the identity, doubling the operator power while the log-likelihood keeps
    climbing; the averaging damps the overshoot the bare gradient operator
    produces when the frequencies are exactly attainable.  A step that would
    lower the log-likelihood is diluted toward the current state instead.

    The multiplicative update preserves the rank of the iterate, so once an
    eigenvalue collapses the sweep is confined to a boundary face it can leave
    only through rounding noise, and near-degenerate likelihoods flatten the
    plain sweep to sub-rounding gains long before optimality.  Whenever a
    sweep gains less than ``config.ml_tol`` per sample, cheaper escapes are
    tried in order, each accepted only if it keeps the log-likelihood within a
    rounding-level band below its high mark and strictly shrinks the
    optimality certificate:

    * jump along the min-norm Hermitian perturbation that matches the
      observed frequencies exactly (attainable data only);
    * Newton-polish the likelihood restricted to candidate support faces --
      the current one, a slightly regularized full-rank copy, and a copy with
      near-dead eigenvalues truncated -- letting the certificate arbitrate
      which face wins;
    * re-try the conjugated step with the power amplified far beyond the
      line-search range, which shrinks the certificate even when the
      likelihood gain itself is below rounding;
    * as a last resort, mix toward the top eigenvector of the gradient
      operator, the direction the certificate singles out for ascent.

    Iteration stops when the certificate drops below ``config.ml_cert_tol``
    (by concavity no state can improve the per-sample log-likelihood by more
    than the largest eigenvalue of the gradient operator minus one), or when
    every escape fails and the sweep gain sits at the rounding floor, meaning
    no representable improvement remains; both outcomes report convergence.
    Hitting ``config.ml_max_iter`` first returns the best iterate flagged
    non-converged.
    """
    pom = data.pom
    d = pom.dim
    freqs = data.frequencies
    rho = np.eye(d, dtype=complex) / d if rho0 is None else require_hermitian(rho0)
    probs = probabilities(rho, pom)
    ll = log_likelihood(freqs, probs)
    if not np.isfinite(ll):
        raise ValueError("observed outcome has zero probability at the start state")

    hit = freqs > 0.0
    fh = freqs[hit]
    basis = _hermitian_basis(d)
    amat = np.einsum("kij,mji->km", pom.outcomes, basis).real

    def certificate_of(p: np.ndarray) -> float:
        return float(np.linalg.eigvalsh(_update_operator(freqs, p, pom))[-1]) - 1.0

    def face_newton(start: np.ndarray):
        """Newton-polish the likelihood on the support face of ``start``.

        Steps are damped until they both stay inside the face and strictly
        raise the likelihood; returns ``None`` when no ascent step exists.
        """
        ew, evec = np.linalg.eigh(start)
        keep = ew > 1e-12
        r = int(keep.sum())
        if r < 1:
            return None
        u = evec[:, keep]
        if r == 1:
            cand = np.outer(u[:, 0], u[:, 0].conj())
            cand_probs = probabilities(cand, pom)
            return cand, cand_probs, log_likelihood(freqs, cand_probs)
        face_h = np.einsum("ai,kab,bj->kij", u.conj(), pom.outcomes[hit], u)
        fb = _hermitian_basis(r)[1:]  # traceless: trace is fixed on the face
        a2h = np.einsum("kij,mji->km", face_h, fb).real
        m0 = u.conj().T @ start @ u
        m0 = 0.5 * (m0 + m0.conj().T)
        tr0 = np.trace(m0).real
        if tr0 <= 0.0:
            return None
        mcur = m0 / tr0
        pvec = np.einsum("kij,ji->k", face_h, mcur).real
        if np.any(pvec <= 0.0):
            return None
        llcur = float(fh @ np.log(pvec))
        moved_any = False
        for _ in range(12):
            grad = a2h.T @ (fh / pvec)
            hess = (a2h * (fh / pvec**2)[:, None]).T @ a2h
            dx, *_ = np.linalg.lstsq(hess, grad, rcond=None)
            if not np.all(np.isfinite(dx)) or float(grad @ dx) <= 0.0:
                break
            dm = np.tensordot(dx, fb, axes=1)
            dp = np.einsum("kij,ji->k", face_h, dm).real
            t = 1.0
            moved = False
            while t >= 1e-5:
                ptry = pvec + t * dp
                if ptry.min() > 0.0:
                    lltry = float(fh @ np.log(ptry))
                    if lltry > llcur:
                        mtry = mcur + t * dm
                        if np.linalg.eigvalsh(mtry)[0] >= -1e-15:
                            mcur = 0.5 * (mtry + mtry.conj().T)
                            pvec, llcur = ptry, lltry
                            moved = moved_any = True
                            break
                t *= 0.5
            if not moved:
                break
        if not moved_any:
            return None
        cand = u @ mcur @ u.conj().T
        cand = 0.5 * (cand + cand.conj().T)
        tr = np.trace(cand).real
        if tr <= 0.0:
            return None
        cand = cand / tr
        cand_probs = probabilities(cand, pom)
        return cand, cand_probs, log_likelihood(freqs, cand_probs)

    iterations = 0
    residual = np.inf
    certificate = np.inf
    converged = False
    top_ll = ll
    last_newton = -10
    for iterations in range(1, config.ml_max_iter + 1):
        r = _update_operator(freqs, probs, pom)
        w, v = np.linalg.eigh(r)
        certificate = float(w[-1]) - 1.0
        if certificate <= config.ml_cert_tol:
            converged = True
            break

        half_w = 0.5 * (w + 1.0)

        def conjugated(power: float):
            op = (v * half_w**power) @ v.conj().T
            cand = op @ rho @ op
            tr = np.trace(cand).real
            if not np.isfinite(tr) or tr <= 0.0:
                return None
            cand = cand / tr
            cand_probs = probabilities(cand, pom)
            return cand, cand_probs, log_likelihood(freqs, cand_probs)

        # amplify the averaged operator while the likelihood keeps climbing
        best = conjugated(1.0)
        if best is None:
            best = (rho, probs, ll)
        power = 2.0
        while power <= 1024.0:
            trial = conjugated(power)
            if trial is None or trial[2] <= best[2]:
                break
            best = trial
            power *= 2.0

        if best[2] < ll:
            # dilute toward the current state when even unit power overshoots
            eps = 0.5
            stepped = best[0]
            while eps >= 1e-8:
                cand = (1.0 - eps) * rho + eps * stepped
                cand_probs = probabilities(cand, pom)
                cand_ll = log_likelihood(freqs, cand_probs)
                if cand_ll >= ll:
                    best = (cand, cand_probs, cand_ll)
                    break
                eps *= 0.5

        floor = 4e-15 * (abs(ll) + 1.0)
        gain = best[2] - ll
        if gain <= config.ml_tol * (abs(ll) + 1.0):
            # the plain sweep has stalled; accepted escapes may tie the
            # likelihood within a rounding-level band of its high mark but
            # must strictly shrink the certificate
            band = 5e-13 * (abs(top_ll) + 1.0)
            low = max(ll - floor, top_ll - band)
            accepted = None

            # exactly attainable frequencies: jump onto the manifold p = f
            coef, *_ = np.linalg.lstsq(amat, freqs - probs, rcond=None)
            delta = np.tensordot(coef, basis, axes=1)
            t = 1.0
            while t >= 1e-4:
                cand = rho + t * delta
                if float(np.linalg.eigvalsh(cand)[0]) >= -1e-14:
                    cand_probs = probabilities(cand, pom)
                    cand_ll = log_likelihood(freqs, cand_probs)
                    if cand_ll >= low and certificate_of(cand_probs) < certificate:
                        accepted = (cand, cand_probs, cand_ll)
                    break
                t *= 0.5

            if accepted is None and (gain <= floor or iterations - last_newton >= 4):
                last_newton = iterations
                # Newton-polish candidate support faces: the current one, a
                # regularized full-rank copy (a collapsed eigenvalue must not
                # pin the search to a face that excludes the optimum), and a
                # truncated copy (shedding mass along a direction whose
                # gradient eigenvalue is below one raises the likelihood)
                ew = np.linalg.eigvalsh(rho)
                starts = [rho, (1.0 - 1e-3) * rho + (1e-3 / d) * np.eye(d, dtype=complex)]
                if ((ew < 1e-2) & (ew > 1e-12)).any() and (ew >= 1e-2).any():
                    eww, evec = np.linalg.eigh(rho)
                    kept = eww >= 1e-2
                    trunc = (evec[:, kept] * eww[kept]) @ evec[:, kept].conj().T
                    starts.append(trunc / np.trace(trunc).real)
                best_cert = certificate
                for start in starts:
                    cand = face_newton(start)
                    if cand is not None and cand[2] >= low:
                        c = certificate_of(cand[1])
                        if c < best_cert:
                            accepted = cand
                            best_cert = c
            if accepted is None:
                # push the conjugation power far beyond the line-search range:
                # overshoot in the live block costs less than rounding while
                # the amplification still drains near-dead eigenvalues
                min_half = float(half_w[0])
                cap = 2.0**24
                if 0.0 < min_half < 1.0:
                    cap = min(cap, 600.0 / abs(np.log(min_half)))
                chosen_cert = certificate
                power = 1.0
                while power <= cap:
                    cand = conjugated(power)
                    if cand is None or cand[2] < low:
                        break
                    c = certificate_of(cand[1])
                    if c < chosen_cert:
                        accepted = cand
                        chosen_cert = c
                    power *= 2.0

            if accepted is None and gain <= floor:
                # last resort: mix toward the certified ascent direction
                vt = v[:, -1]
                kick = np.outer(vt, vt.conj())
                eps = 0.5
                found = None
                while eps >= 1e-12:
                    cand = (1.0 - eps) * rho + eps * kick
                    cand_probs = probabilities(cand, pom)
                    cand_ll = log_likelihood(freqs, cand_probs)
                    if cand_ll - ll > floor and (found is None or cand_ll > found[2]):
                        found = (cand, cand_probs, cand_ll)
                    eps *= 0.5
                accepted = found

            if accepted is not None:
                best = accepted
            elif gain <= floor:
                # no searched direction yields a representable improvement:
                # the iterate maximizes the likelihood to working precision
                converged = True
                break

        residual = float(np.linalg.norm(best[0] - rho))
        rho, probs, ll = best
        # keep the iterate strictly inside the cone: the multiplicative update
        # can never regrow an eigenvalue that underflowed to exact zero, and a
        # prematurely dead direction can hide a higher-likelihood interior
        # optimum; the mixing cost is orders of magnitude below rounding
        ew_min = float(np.linalg.eigvalsh(rho)[0])
        if ew_min < 1e-11:
            eta = d * (1e-11 - ew_min) / (1.0 - d * ew_min)
            rho = (1.0 - eta) * rho + (eta / d) * np.eye(d, dtype=complex)
            probs = probabilities(rho, pom)
            ll = log_likelihood(freqs, probs)
        if ll > top_ll:
            top_ll = ll

        if iterations % 100 == 0:
            trace = float(np.trace(rho).real)
            low_eig = float(np.linalg.eigvalsh(rho)[0])
            if abs(trace - 1.0) > 1e-9 or low_eig < -config.psd_tol:
                raise ArithmeticError(
                    f"iterate left the state space (trace {trace:.12f}, min eig {low_eig:.3e})"
                )

    return MlSolution(
        rho=rho,
        probabilities=probs,
        log_likelihood=ll * data.total,
        iterations=iterations,
        converged=converged,
        residual=residual,
        certificate=certificate,
    )
