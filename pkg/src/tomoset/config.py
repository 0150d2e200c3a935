"""Run-wide tunables with a JSON round trip, so CLI runs can pin every knob."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class PatternSearchConfig:
    """Mesh and penalty knobs for the direct search over unmeasured coordinates.

    The search polls coordinate directions on a shrinking mesh; positivity of
    the candidate state is enforced through an augmented-Lagrangian penalty.
    ``time_cap`` bounds the wall-clock seconds spent on one candidate.
    """

    initial_mesh: float = 0.1
    expansion: float = 2.0
    contraction: float = 0.5
    mesh_floor: float = 1e-6
    time_cap: float = 5.0
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    max_outer: int = 4


@dataclass(frozen=True)
class Config:
    """Numerical tolerances and iteration budgets shared across the package.

    Every tolerance named in the public contracts lives here so a single JSON
    file can reproduce a run exactly.  ``psd_tol`` is the one global slack used
    whenever a matrix is tested for positivity.
    """

    # operator hygiene
    herm_atol: float = 1e-12
    trace_atol: float = 1e-9
    psd_tol: float = 1e-9

    # operator-basis construction
    rank_rel_tol: float = 1e-8
    gs_drop_tol: float = 1e-8
    gs_retry_budget: int = 100

    # likelihood maximization: ml_tol is the per-sample gain level below which
    # a plain fixed-point sweep counts as stalled and the plateau-escape moves
    # engage; ml_cert_tol is the optimality-certificate stop
    ml_tol: float = 1e-10
    ml_cert_tol: float = 1e-12
    ml_max_iter: int = 50000

    # linear optimization over the likelihood plateau
    gap_tol: float = 1e-6
    feas_tol: float = 1e-7
    interior_tol: float = 1e-7
    singleton_tol: float = 1e-6

    # entanglement certification; margin sits a decade above the solver gap
    verdict_margin: float = 1e-5

    # boundary-state collection (0 means 4 * unmeasured dimension)
    probe_count: int = 0

    # simplex entropy maximization
    nms_tol: float = 1e-8
    nms_restarts: int = 5
    nms_step: float = 0.1

    # steepest-ascent baseline
    sa_tol: float = 1e-8
    sa_max_iter: int = 20000

    # linear-independence cutoff for the normalized overlap spectrum
    indep_tol: float = 1e-6

    ps: PatternSearchConfig = field(default_factory=PatternSearchConfig)

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        data = dict(data)
        ps = data.pop("ps", None)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        if ps is not None:
            cfg = cfg.replace(ps=PatternSearchConfig(**ps))
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "Config":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


DEFAULT = Config()
