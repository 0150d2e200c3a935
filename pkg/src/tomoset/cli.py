"""Command line front end.

Verbs mirror the stages of the pipeline: simulate data, run the likelihood
fit, map out the solution set, stream witnesses over it, or run one of the
three complete estimators.  ``fig1`` and ``fig2`` drive the canned studies.

File-producing verbs take explicit ``--out`` / ``--report`` paths; when a path
is omitted the file lands in ``--out-dir`` under a default name.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .basis import build_basis
from .config import DEFAULT, Config
from .convexset import (
    ConvexSetModel,
    collect_members,
    is_singleton,
    plateau_model,
    try_add_member,
)
from .entropy import sdp_mlme, steepest_ascent_mlme
from .gramsearch import ps_mlme
from .harness import (
    ExperimentSpec,
    random_pom,
    random_product_state,
    run_fig1,
    run_fig2,
    sample_counts,
    trial_rng,
)
from .likelihood import Pom, ml_estimate
from .sampling import random_pure_state, random_wishart
from .witness import certify_entanglement


def _parse_dims(text: str) -> tuple[int, ...]:
    dims = tuple(int(part) for part in text.replace("x", ",").split(",") if part)
    if not dims or any(d < 2 for d in dims):
        raise argparse.ArgumentTypeError(f"bad dimension list: {text!r}")
    return dims


def _load_config(args) -> Config:
    if getattr(args, "config", None):
        return Config.from_file(args.config)
    return DEFAULT


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _out_path(args, attr: str, default_name: str) -> Path:
    given = getattr(args, attr, None)
    if given:
        return Path(given)
    return _out_dir(args) / default_name


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _load_data(args):
    """Counts plus measurement; an explicit --pom overrides the file reference."""
    pom = io.load_pom(args.pom) if getattr(args, "pom", None) else None
    return io.load_counts(args.data, pom=pom)


def _cmd_simulate(args) -> int:
    config = _load_config(args)
    rng = trial_rng(args.seed, 0)
    dims = _parse_dims(args.dims)
    dim = int(np.prod(dims))
    if args.kind == "wishart":
        state = random_wishart(dim, rng)
    elif args.kind == "pure":
        state = random_pure_state(dims, rng)
    elif args.kind == "entangled":
        state = random_pure_state(dims, rng, require_entangled=True)
    else:
        state = random_product_state(dims, rng)
    pom = random_pom(dim, args.outcomes, rng, config)
    data = sample_counts(state, pom, args.shots, rng, exact=args.shots == 0)

    out = _out_dir(args)
    io.save_matrix(out / "true_state.json", state)
    io.save_pom(out / "pom.json", pom)
    io.save_counts(out / "counts.json", data, "pom.json")
    mode = "exact probabilities" if data.exact else f"{args.shots} shots"
    print(f"simulate: dim {dim}, {args.outcomes} outcomes, {mode} -> {out}")
    return 0


def _cmd_estimate(args) -> int:
    config = _load_config(args)
    data = _load_data(args)
    ml = ml_estimate(data, config)
    out = _out_path(args, "out", "ml.json")
    # self-contained: embeds the measurement so `boundary --model` needs no
    # other files
    _write_json(
        out,
        {
            "rho": io.matrix_to_doc(ml.rho),
            "probabilities": list(ml.probabilities),
            "log_likelihood": ml.log_likelihood,
            "iterations": ml.iterations,
            "converged": ml.converged,
            "residual": ml.residual,
            "pom": {
                "dim": data.pom.dim,
                "outcomes": [io.matrix_to_doc(op) for op in data.pom.outcomes],
            },
            "exact": bool(data.exact),
        },
    )
    print(
        f"estimate: logL {ml.log_likelihood:.10g}, {ml.iterations} iterations, "
        f"residual {ml.residual:.3e} -> {out}"
    )
    return 0


def _load_model(path, rng, config: Config) -> ConvexSetModel:
    """Rebuild a solution-set model from an `estimate` output file."""
    doc = json.loads(Path(path).read_text())
    mats = [
        io.matrix_from_doc(m, name=f"{path} outcome {k}")
        for k, m in enumerate(doc["pom"]["outcomes"])
    ]
    pom = Pom.from_matrices(mats)
    basis = build_basis(pom, rng, config)
    probs = np.asarray(doc["probabilities"], dtype=float)
    model = ConvexSetModel.from_probs(pom, basis, probs, config)
    rho = io.matrix_from_doc(doc["rho"], name="fitted state")
    try_add_member(model, rho, config)
    return model


def _cmd_boundary(args) -> int:
    config = _load_config(args)
    rng = trial_rng(args.seed, 3)
    model = _load_model(args.model, rng, config)
    collect_members(model, rng, probes=args.count, config=config)
    unique = len(model.optimizers) >= 2 and is_singleton(model, config)
    out = _out_path(args, "out", "members.json")
    _write_json(
        out,
        {
            "members": [io.matrix_to_doc(m) for m in model.members],
            "optimizer_count": len(model.optimizers),
            "singleton": unique,
        },
    )
    label = "a single state" if unique else f"{len(model.members)} independent members"
    print(f"boundary: {label} -> {out}")
    return 0


def _cmd_certify(args) -> int:
    config = _load_config(args)
    data = _load_data(args)
    rng = trial_rng(args.seed, 2)
    model, _ = plateau_model(data, rng, config)
    dims = _parse_dims(args.dims)
    report = certify_entanglement(
        model, dims, args.witnesses, rng, config, kind=args.kind
    )
    out = _out_path(args, "report", "report.json")
    _write_json(
        out,
        {
            "verdict": report.verdict,
            "detected_at": report.detected_at(),
            "margin": report.margin,
            "failures": report.failures,
            "witnesses": [
                {
                    "index": entry.index,
                    "max_value": entry.max_value,
                    "member_index": entry.member_index,
                }
                for entry in report.entries
            ],
        },
    )
    verdict = "entangled" if report.verdict else "not certified"
    print(f"certify: {verdict} after {report.witness_count} witnesses -> {out}")
    return 0


def _estimator_doc(result) -> dict:
    doc = {
        "estimator": io.matrix_to_doc(result.estimator),
        "entropy": result.entropy,
        "gamma": result.gamma,
        "log_likelihood": result.log_likelihood,
        "member_count": result.member_count,
        "seconds": result.seconds,
    }
    if result.combination is not None:
        doc["combination"] = list(np.asarray(result.combination, dtype=float))
    return doc


def _cmd_mlme_sdp(args) -> int:
    config = _load_config(args)
    data = _load_data(args)
    rng = trial_rng(args.seed, 4)
    dims = _parse_dims(args.dims) if args.dims else None
    result = sdp_mlme(
        data,
        rng,
        dims=dims,
        num_witnesses=args.witnesses,
        witness_kind=args.kind,
        config=config,
    )
    out = _out_path(args, "out", "est.json")
    _write_json(out, _estimator_doc(result))
    rep = _out_path(args, "report", "rep.json")
    payload = {"diagnostics": result.diagnostics}
    if result.report is not None:
        payload.update(
            verdict=result.report.verdict,
            detected_at=result.report.detected_at(),
            failures=result.report.failures,
            max_values=list(result.report.max_values),
        )
    _write_json(rep, payload)
    print(
        f"mlme-sdp: entropy {result.entropy:.6f}, gamma {result.gamma}, "
        f"{result.member_count} members -> {out}"
    )
    return 0


def _cmd_mlme_ps(args) -> int:
    config = _load_config(args)
    data = _load_data(args)
    rng = trial_rng(args.seed, 5)
    psc = None
    if args.time_cap is not None:
        psc = dataclasses.replace(config.ps, time_cap=args.time_cap)
    result = ps_mlme(data, rng, config, psc=psc)
    out = _out_path(args, "out", "est.json")
    _write_json(out, _estimator_doc(result))
    print(
        f"mlme-ps: entropy {result.entropy:.6f}, gamma {result.gamma}, "
        f"{result.member_count} members -> {out}"
    )
    return 0


def _cmd_mlme_sa(args) -> int:
    config = _load_config(args)
    data = _load_data(args)
    rng = trial_rng(args.seed, 6)
    result = steepest_ascent_mlme(data, lam=args.lam, config=config, rng=rng)
    out = _out_path(args, "out", "est.json")
    _write_json(out, _estimator_doc(result))
    print(f"mlme-sa: entropy {result.entropy:.6f}, gamma {result.gamma} -> {out}")
    return 0


def _cmd_fig1(args) -> int:
    config = _load_config(args)
    spec = ExperimentSpec(
        seed=args.seed,
        num_states=args.states,
        num_witnesses=args.witnesses,
    )
    out = _out_dir(args)
    _, summary = run_fig1(spec, out, config)
    print(
        f"fig1: {spec.num_states} states, final detection ratio "
        f"{summary['detection_ratio'][-1]:.2f} -> {out}"
    )
    return 0


def _cmd_fig2(args) -> int:
    config = _load_config(args)
    spec = ExperimentSpec(
        seed=args.seed,
        dims_list=tuple(int(d) for d in args.dim_list.split(",")),
        states_per_dim=args.per_dim,
    )
    out = _out_dir(args)
    _, summary = run_fig2(spec, out, config)
    dims = ", ".join(str(d) for d in spec.dims_list)
    print(f"fig2: dimensions {dims}, {spec.states_per_dim} states each -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=7)
    shared.add_argument("--config", help="JSON file with tolerance overrides")
    shared.add_argument("--out-dir", default="out")

    parser = argparse.ArgumentParser(
        prog="tomoset",
        description="State reconstruction over the full maximum-likelihood set.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def data_flags(p, pom_required=False):
        p.add_argument("--data", required=True, help="counts JSON file")
        p.add_argument(
            "--pom",
            required=pom_required,
            help="measurement JSON file (otherwise taken from the counts file)",
        )

    p = sub.add_parser(
        "simulate",
        parents=[shared],
        help="draw a state and measurement, sample data",
    )
    p.add_argument("--dims", default="2,2", help="subsystem dimensions, e.g. 2,2 or 3")
    p.add_argument("--outcomes", type=int, default=8)
    p.add_argument("--shots", type=int, default=0, help="0 records exact probabilities")
    p.add_argument(
        "--kind",
        choices=["wishart", "pure", "entangled", "product"],
        default="entangled",
    )
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", parents=[shared], help="maximum-likelihood fit")
    data_flags(p)
    p.add_argument("--out", help="output file (default <out-dir>/ml.json)")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser(
        "boundary",
        parents=[shared],
        help="collect extreme members of the solution set",
    )
    p.add_argument("--model", required=True, help="ml.json from an estimate run")
    p.add_argument("--count", type=int, default=None, help="number of probe directions")
    p.add_argument("--out", help="output file (default <out-dir>/members.json)")
    p.set_defaults(func=_cmd_boundary)

    p = sub.add_parser(
        "certify",
        parents=[shared],
        help="stream entanglement witnesses over the set",
    )
    data_flags(p)
    p.add_argument("--dims", default="2,2")
    p.add_argument("--witnesses", type=int, default=500)
    p.add_argument("--kind", choices=["wishart", "entangled_pure"], default="wishart")
    p.add_argument("--report", help="output file (default <out-dir>/report.json)")
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("mlme-sdp", parents=[shared], help="barrier-solver pipeline")
    data_flags(p)
    p.add_argument("--dims", default=None, help="enable witnesses, e.g. 2,2")
    p.add_argument("--witnesses", type=int, default=None)
    p.add_argument("--kind", choices=["wishart", "entangled_pure"], default="wishart")
    p.add_argument("--out", help="output file (default <out-dir>/est.json)")
    p.add_argument("--report", help="witness report file (default <out-dir>/rep.json)")
    p.set_defaults(func=_cmd_mlme_sdp)

    p = sub.add_parser("mlme-ps", parents=[shared], help="direct-search pipeline")
    data_flags(p)
    p.add_argument(
        "--time-cap",
        type=float,
        default=None,
        help="seconds per search candidate (default from config)",
    )
    p.add_argument("--out", help="output file (default <out-dir>/est.json)")
    p.set_defaults(func=_cmd_mlme_ps)

    p = sub.add_parser("mlme-sa", parents=[shared], help="gradient-ascent baseline")
    data_flags(p)
    p.add_argument("--lam", type=float, default=1e-5)
    p.add_argument("--out", help="output file (default <out-dir>/est.json)")
    p.set_defaults(func=_cmd_mlme_sa)

    p = sub.add_parser("fig1", parents=[shared], help="two-qubit witness study")
    p.add_argument("--states", type=int, default=20)
    p.add_argument("--witnesses", type=int, default=500)
    p.set_defaults(func=_cmd_fig1)

    p = sub.add_parser("fig2", parents=[shared], help="search-versus-ascent study")
    p.add_argument("--dim-list", default="3,4,6,8")
    p.add_argument("--per-dim", type=int, default=10)
    p.set_defaults(func=_cmd_fig2)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
