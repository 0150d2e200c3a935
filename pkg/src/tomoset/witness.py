"""Entanglement certification over the likelihood plateau.

A positive operator partially transposed on one factor is a decomposable
witness: separable states keep tr(rho W) >= 0, so a negative maximum over the
whole set of maximum-likelihood states certifies that every state compatible
with the data is entangled.  The maximum comes from the plateau optimizer in
:mod:`tomoset.convexset`; a verdict fires only when it clears a margin safely
above the solver's certified gap.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Config
from .convexset import (
    ConvexSetModel,
    InfeasibleModelError,
    SolverStallError,
    optimize_linear,
    try_add_member,
)
from .core import partial_transpose, require_hermitian
from .sampling import random_pure_state, random_wishart

__all__ = [
    "WitnessEntry",
    "WitnessReport",
    "random_wishart",
    "decomposable_witness",
    "certify_entanglement",
]


@dataclass(frozen=True)
class WitnessEntry:
    index: int
    max_value: float
    member_index: int | None


@dataclass(frozen=True)
class WitnessReport:
    """Outcome of a batch of witness optimizations over one model."""

    entries: tuple[WitnessEntry, ...]
    verdict: bool
    margin: float
    failures: int

    @property
    def witness_count(self) -> int:
        return len(self.entries)

    @property
    def max_values(self) -> np.ndarray:
        return np.array([e.max_value for e in self.entries])

    def detected_at(self) -> int | None:
        """1-based index of the first conclusive witness, None if none fired."""
        for k, entry in enumerate(self.entries):
            if entry.max_value < -self.margin:
                return k + 1
        return None


def decomposable_witness(q: np.ndarray, dims: tuple[int, ...], which: int | None = None) -> np.ndarray:
    """Partial transpose of a positive unit-trace seed on one tensor factor.

    By default the last factor is transposed.  The result is Hermitian but in
    general indefinite; its negative directions are what the certification
    pipeline hunts for.
    """
    q = require_hermitian(q, atol=1e-9, name="witness seed")
    tr = float(np.trace(q).real)
    if abs(tr - 1.0) > 1e-9:
        raise ValueError(f"witness seed must have unit trace, got {tr!r}")
    if float(np.linalg.eigvalsh(q)[0]) < -DEFAULT.psd_tol:
        raise ValueError("witness seed must be positive semidefinite")
    if which is None:
        which = len(dims) - 1
    return partial_transpose(q, tuple(dims), which)


def _draw_seed(kind: str, dims: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    d = int(np.prod(dims))
    if kind == "wishart":
        return random_wishart(d, rng)
    if kind == "entangled_pure":
        return random_pure_state(dims, rng, require_entangled=True)
    raise ValueError(f"unknown witness seed kind {kind!r}")


def certify_entanglement(
    model: ConvexSetModel,
    dims: tuple[int, ...],
    num_witnesses: int,
    rng: np.random.Generator,
    config: Config = DEFAULT,
    which: int | None = None,
    kind: str = "wishart",
    seeds=None,
) -> WitnessReport:
    """Run a stream of random decomposable witnesses against the model.

    Each witness is maximized over the plateau; only the max sense feeds the
    verdict, and each optimizer is rank-screened into the model's member list
    as a free by-product.  ``seeds`` can supply explicit witness seeds instead
    of random draws.  Witness solves that fail are counted and skipped.
    """
    entries = []
    failures = 0
    for k in range(num_witnesses):
        q = seeds[k] if seeds is not None else _draw_seed(kind, dims, rng)
        w = decomposable_witness(q, dims, which)
        try:
            res = optimize_linear(w, "max", model, config)
        except (SolverStallError, InfeasibleModelError):
            failures += 1
            continue
        model.optimizers.append(res.optimizer)
        member_index = None
        if try_add_member(model, res.optimizer, config):
            member_index = len(model.members) - 1
        entries.append(WitnessEntry(index=k, max_value=res.value, member_index=member_index))
    verdict = any(e.max_value < -config.verdict_margin for e in entries)
    return WitnessReport(
        entries=tuple(entries),
        verdict=verdict,
        margin=config.verdict_margin,
        failures=failures,
    )
