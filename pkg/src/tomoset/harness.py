"""Reproducible experiment drivers: random instances, trial loops, CSV output.

Every trial derives its own generator from the root seed and the trial key,
so single trials can be replayed in isolation and full runs are bit-stable
regardless of execution order.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import build_basis, rank_of_operator_set
from .config import DEFAULT, Config
from .convexset import plateau_model
from .core import hilbert_schmidt_distance
from .entropy import maximize_entropy, steepest_ascent_mlme, _gamma_or_none
from .gramsearch import ps_mlme
from .likelihood import CountData, Pom, log_likelihood, probabilities
from .sampling import random_pure_state, random_wishart
from .witness import certify_entanglement

__all__ = [
    "ExperimentSpec",
    "TrialRecord",
    "trial_rng",
    "random_pure_state",
    "random_product_state",
    "random_pom",
    "sample_counts",
    "revalidate_estimator",
    "run_fig1",
    "run_fig2",
]


@dataclass(frozen=True)
class ExperimentSpec:
    """Knobs for the canned experiment drivers, sized for a desk run."""

    seed: int = 7
    num_states: int = 20
    num_witnesses: int = 500
    outcomes: int = 8
    exact: bool = True
    shots: int = 10000
    member_counts: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9)
    dims_list: tuple[int, ...] = (3, 4, 6, 8)
    states_per_dim: int = 10
    sa_lambda: float = 1e-5


@dataclass
class TrialRecord:
    """Per-trial outcomes; unused fields stay None for the other experiment."""

    index: int
    dim: int
    gamma_by_members: dict = field(default_factory=dict)
    hs_by_members: dict = field(default_factory=dict)
    members_found: int | None = None
    detected_at: int | None = None
    hs_to_ascent: float | None = None
    gamma_ps: float | None = None
    gamma_ascent: float | None = None
    seconds_ps: float | None = None
    seconds_ascent: float | None = None
    max_candidate_seconds: float | None = None


def trial_rng(*key: int) -> np.random.Generator:
    """Independent generator for a trial key, replayable in isolation."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def random_product_state(dims: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Projector onto an uncorrelated product of Haar-random pure factors."""
    out = np.ones((1, 1), dtype=complex)
    for d in dims:
        out = np.kron(out, random_pure_state(int(d), rng))
    return out


def random_pom(dim: int, n_outcomes: int, rng: np.random.Generator, config: Config = DEFAULT) -> Pom:
    """Random measurement with exactly ``n_outcomes`` independent outcomes.

    Positive seeds are squashed through the inverse square root of their sum,
    which enforces the completeness relation; degenerate draws (dependent
    outcomes) are thrown away and repeated.
    """
    if n_outcomes < 1 or n_outcomes > dim * dim:
        raise ValueError(f"outcome count {n_outcomes} out of range for dimension {dim}")
    for _ in range(100):
        seeds = np.array([random_wishart(dim, rng) for _ in range(n_outcomes)])
        total = seeds.sum(axis=0)
        w, v = np.linalg.eigh(total)
        inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
        outcomes = np.einsum("ij,kjl,lm->kim", inv_sqrt, seeds, inv_sqrt)
        if rank_of_operator_set(outcomes, config.rank_rel_tol) == n_outcomes:
            return Pom(outcomes=outcomes)
    raise RuntimeError("could not draw an independent outcome set")


def sample_counts(
    state: np.ndarray,
    pom: Pom,
    shots: int,
    rng: np.random.Generator,
    exact: bool = False,
) -> CountData:
    """Multinomial counts from a state, or its exact outcome probabilities."""
    p = probabilities(state, pom)
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    if exact:
        return CountData(counts=p, pom=pom, exact=True)
    return CountData(counts=rng.multinomial(int(shots), p).astype(float), pom=pom)


def revalidate_estimator(
    rho: np.ndarray,
    data: CountData,
    target_probs: np.ndarray,
    config: Config = DEFAULT,
) -> None:
    """Feasibility gate applied to every estimator before it is recorded.

    Checks positivity, unit trace, outcome-probability residual against the
    fitted target, and that the likelihood is not measurably below the
    target's.  Raises ``ValueError`` naming the failed check.
    """
    if float(np.linalg.eigvalsh(rho)[0]) < -config.psd_tol:
        raise ValueError("recorded estimator is not positive semidefinite")
    if abs(float(np.trace(rho).real) - 1.0) > 1e-9:
        raise ValueError("recorded estimator does not have unit trace")
    p = probabilities(rho, data.pom)
    residual = float(np.max(np.abs(p - target_probs)))
    if residual > 1e-6:
        raise ValueError(f"constraint residual {residual:.3g} exceeds 1e-6")
    gap = log_likelihood(data.frequencies, target_probs) - log_likelihood(data.frequencies, p)
    if gap > 1e-5:
        raise ValueError(f"likelihood falls {gap:.3g} below the fitted value")


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.12g}"
    return x


def run_fig1(
    spec: ExperimentSpec,
    out_dir: str | Path | None = None,
    config: Config = DEFAULT,
) -> tuple[list[TrialRecord], dict]:
    """Witness-driven study on random entangled two-qubit states.

    For each trial: an entangled pure state, a random eight-outcome
    measurement, a stream of partially transposed entangled-pure witnesses,
    and the entropy maximizer over every member-count prefix.  Produces the
    log-residual curve against member count, the cumulative detection ratio
    against witness count, and the distance to the ascent baseline.
    """
    pom_rng = trial_rng(spec.seed, 1)
    pom = random_pom(4, spec.outcomes, pom_rng, config)
    basis = build_basis(pom, pom_rng, config)

    records: list[TrialRecord] = []
    failures: list[dict] = []
    for k in range(spec.num_states):
        rng = trial_rng(spec.seed, 1, k)
        rec = TrialRecord(index=k, dim=4)
        stage = "draw"
        try:
            state = random_pure_state((2, 2), rng, require_entangled=True)
            data = sample_counts(state, pom, spec.shots, rng, exact=spec.exact)
            stage = "model"
            model, _ = plateau_model(data, rng, config, basis=basis)
            stage = "witnesses"
            report = certify_entanglement(
                model, (2, 2), spec.num_witnesses, rng, config, kind="entangled_pure"
            )
            rec.members_found = len(model.members)
            rec.detected_at = report.detected_at()
            stage = "ascent"
            ascent = steepest_ascent_mlme(data, lam=spec.sa_lambda, config=config, rng=rng)
            rec.gamma_ascent = ascent.gamma
            rec.seconds_ascent = ascent.seconds
            stage = "entropy"
            rho = None
            prev_t = None
            for m in spec.member_counts:
                take = min(m, len(model.members))
                x0 = None
                if prev_t is not None and take >= len(prev_t):
                    x0 = np.concatenate([prev_t, np.zeros(take - len(prev_t))])
                prev_t, rho = maximize_entropy(model.members[:take], config, x0=x0)
                rec.gamma_by_members[m] = _gamma_or_none(rho, basis)
                rec.hs_by_members[m] = hilbert_schmidt_distance(rho, ascent.estimator)
            rec.hs_to_ascent = rec.hs_by_members[max(spec.member_counts)]
            stage = "revalidate"
            revalidate_estimator(rho, data, model.target_probs, config)
        except Exception as exc:
            failures.append({"trial": k, "stage": stage, "error": str(exc)})
            continue
        records.append(rec)

    counts = list(spec.member_counts)
    gamma_rows = []
    for rec in records:
        for m in counts:
            gamma_rows.append(
                (rec.index, m, rec.gamma_by_members.get(m), rec.hs_by_members.get(m))
            )

    def mean_over(getter):
        means = []
        for m in counts:
            vals = [getter(rec, m) for rec in records]
            vals = [v for v in vals if v is not None]
            means.append(float(np.mean(vals)) if vals else float("nan"))
        return means

    mean_gamma = mean_over(lambda rec, m: rec.gamma_by_members.get(m))
    mean_hs = mean_over(lambda rec, m: rec.hs_by_members.get(m))

    ratio = []
    for w in range(1, spec.num_witnesses + 1):
        hits = sum(1 for rec in records if rec.detected_at is not None and rec.detected_at <= w)
        ratio.append(hits / max(1, len(records)))

    summary = {
        "seed": spec.seed,
        "num_states": spec.num_states,
        "member_counts": counts,
        "mean_gamma": mean_gamma,
        "mean_hs_by_members": mean_hs,
        "witness_counts": list(range(1, spec.num_witnesses + 1)),
        "detection_ratio": ratio,
        "mean_hs_to_ascent": float(np.mean([r.hs_to_ascent for r in records])),
        "failures": failures,
    }

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(
            out / "fig1_gamma.csv",
            ["trial", "member_count", "gamma", "hs_to_ascent"],
            gamma_rows,
        )
        _write_csv(
            out / "fig1_detection.csv",
            ["witness_count", "detection_ratio"],
            list(zip(summary["witness_counts"], ratio)),
        )
        _write_csv(
            out / "fig1_trials.csv",
            ["trial", "members_found", "detected_at", "hs_to_ascent", "gamma_ascent"],
            [
                (r.index, r.members_found, r.detected_at, r.hs_to_ascent, r.gamma_ascent)
                for r in records
            ],
        )
        _write_csv(
            out / "fig1_failures.csv",
            ["trial", "stage", "error"],
            [(f["trial"], f["stage"], f["error"]) for f in failures],
        )
        plot = {
            "gamma_curve": {
                "x": counts,
                "y": mean_gamma,
                "xlabel": "independent estimators",
                "ylabel": "mean log-basis residual",
            },
            "detection_curve": {
                "x": summary["witness_counts"],
                "y": ratio,
                "xlabel": "witnesses evaluated",
                "ylabel": "detection ratio",
            },
            "distance_curve": {
                "x": counts,
                "y": mean_hs,
                "xlabel": "independent estimators",
                "ylabel": "mean distance to ascent baseline",
            },
            "seed": spec.seed,
        }
        (out / "fig1_plot.json").write_text(json.dumps(plot) + "\n")
    return records, summary


def run_fig2(
    spec: ExperimentSpec,
    out_dir: str | Path | None = None,
    config: Config = DEFAULT,
) -> tuple[list[TrialRecord], dict]:
    """Direct search against the ascent baseline across dimensions.

    Full-rank random states, measurements with floor(d^2/2) outcomes, exact
    probabilities.  Records the log-residuals and wall times of both
    estimators for every dimension in the schedule.
    """
    records: list[TrialRecord] = []
    failures: list[dict] = []
    for d in spec.dims_list:
        n_out = (d * d) // 2
        for k in range(spec.states_per_dim):
            rng = trial_rng(spec.seed, 2, d, k)
            stage = "draw"
            try:
                state = random_wishart(d, rng)
                pom = random_pom(d, n_out, rng, config)
                data = sample_counts(state, pom, 0, rng, exact=True)

                stage = "search"
                started = time.perf_counter()
                ps = ps_mlme(data, rng, config)
                ps_seconds = time.perf_counter() - started
                stage = "ascent"
                ascent = steepest_ascent_mlme(data, lam=spec.sa_lambda, config=config, rng=rng)
                stage = "revalidate"
                revalidate_estimator(ps.estimator, data, data.frequencies, config)
            except Exception as exc:
                failures.append({"dim": d, "trial": k, "stage": stage, "error": str(exc)})
                continue

            cand_secs = ps.diagnostics.get("candidate_seconds", [])
            records.append(
                TrialRecord(
                    index=k,
                    dim=d,
                    gamma_ps=ps.gamma,
                    gamma_ascent=ascent.gamma,
                    seconds_ps=ps_seconds,
                    seconds_ascent=ascent.seconds,
                    members_found=ps.member_count,
                    max_candidate_seconds=max(cand_secs) if cand_secs else 0.0,
                )
            )

    summary: dict = {
        "seed": spec.seed,
        "dims": list(spec.dims_list),
        "per_dim": {},
        "failures": failures,
    }
    for d in spec.dims_list:
        sub = [r for r in records if r.dim == d]
        if not sub:
            summary["per_dim"][d] = None
            continue
        g_ps = [r.gamma_ps for r in sub if r.gamma_ps is not None]
        g_sa = [r.gamma_ascent for r in sub if r.gamma_ascent is not None]
        summary["per_dim"][d] = {
            "mean_gamma_ps": float(np.mean(g_ps)) if g_ps else float("nan"),
            "mean_gamma_ascent": float(np.mean(g_sa)) if g_sa else float("nan"),
            "mean_seconds_ps": float(np.mean([r.seconds_ps for r in sub])),
            "mean_seconds_ascent": float(np.mean([r.seconds_ascent for r in sub])),
            "max_candidate_seconds": max(r.max_candidate_seconds for r in sub),
        }

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(
            out / "fig2_trials.csv",
            [
                "dim", "trial", "gamma_ps", "gamma_ascent",
                "seconds_ps", "seconds_ascent", "members_found", "max_candidate_seconds",
            ],
            [
                (
                    r.dim, r.index, r.gamma_ps, r.gamma_ascent,
                    r.seconds_ps, r.seconds_ascent, r.members_found, r.max_candidate_seconds,
                )
                for r in records
            ],
        )
        _write_csv(
            out / "fig2_failures.csv",
            ["dim", "trial", "stage", "error"],
            [(f["dim"], f["trial"], f["stage"], f["error"]) for f in failures],
        )

        def column(name):
            return [
                summary["per_dim"][d][name] if summary["per_dim"][d] else None
                for d in spec.dims_list
            ]

        plot = {
            "gamma_by_dim": {
                "x": list(spec.dims_list),
                "search": column("mean_gamma_ps"),
                "ascent": column("mean_gamma_ascent"),
                "xlabel": "dimension",
                "ylabel": "mean log-basis residual",
            },
            "seconds_by_dim": {
                "x": list(spec.dims_list),
                "search": column("mean_seconds_ps"),
                "ascent": column("mean_seconds_ascent"),
                "xlabel": "dimension",
                "ylabel": "mean seconds",
            },
            "seed": spec.seed,
        }
        (out / "fig2_plot.json").write_text(json.dumps(plot) + "\n")
    return records, summary
