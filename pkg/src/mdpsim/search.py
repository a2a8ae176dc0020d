"""Store-distance threshold selection by simulated IPC.

Two strategies over an integer threshold range: exhaustive evaluation
(the correctness oracle) and a bracketing ternary search that assumes
the IPC-vs-threshold curve is quasi-unimodal. Both return every probed
point; the winner is the probed threshold with the best geometric-mean
IPC, smallest threshold on ties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .core import CoreConfig, simulate
from .predictors import PredictorConfig
from .profiler import StoreDistanceProfile, label_loads
from .trace import Trace


def geomean(values: list[float]) -> float:
    """Geometric mean; rejects non-positive inputs."""
    if not values:
        raise ValueError("geomean of an empty sequence")
    for v in values:
        if v <= 0:
            raise ValueError(f"geomean requires positive values, got {v}")
    return math.exp(math.fsum(math.log(v) for v in values) / len(values))


@dataclass(frozen=True)
class SearchResult:
    best_threshold: int
    evaluated: tuple[tuple[int, float], ...]
    train_set: tuple[str, ...] = ()


def _best_probed(probes: dict[int, float]) -> int:
    return max(sorted(probes), key=lambda t: probes[t])


def exhaustive_search(fn: Callable[[int], float], lo: int, hi: int
                      ) -> tuple[int, dict[int, float]]:
    """Evaluate every threshold in [lo, hi]; the true argmax."""
    if lo > hi:
        raise ValueError(f"empty range [{lo}, {hi}]")
    probes = {t: fn(t) for t in range(lo, hi + 1)}
    return _best_probed(probes), probes


def bracket_search(fn: Callable[[int], float], lo: int, hi: int
                   ) -> tuple[int, dict[int, float]]:
    """Ternary search for quasi-unimodal objectives.

    Shrinks [lo, hi] with paired probes, sweeps the final bracket, and
    returns the best threshold among everything probed. Matches
    exhaustive_search exactly when the objective is unimodal.
    """
    if lo > hi:
        raise ValueError(f"empty range [{lo}, {hi}]")
    probes: dict[int, float] = {}

    def probe(t: int) -> float:
        if t not in probes:
            probes[t] = fn(t)
        return probes[t]

    while hi - lo > 2:
        m1 = lo + (hi - lo) // 3
        m2 = hi - (hi - lo) // 3
        if probe(m1) < probe(m2):
            lo = m1 + 1
        else:
            hi = m2 - 1
    for t in range(lo, hi + 1):
        probe(t)
    return _best_probed(probes), probes


def search_threshold(traces: list[Trace], profile: StoreDistanceProfile,
                     cfg: CoreConfig, mdp_cfg: PredictorConfig,
                     lo: int, hi: int, mode: str = "exhaustive",
                     confidence: float = 0.95) -> SearchResult:
    """Pick the labelling threshold with the best geomean IPC over the
    train traces."""
    if not traces:
        raise ValueError("need at least one train trace")
    if lo < 1 or lo > hi:
        raise ValueError(f"bad threshold range [{lo}, {hi}]")
    if mode not in ("exhaustive", "binary"):
        raise ValueError(f"unknown search mode {mode!r}")

    def objective(threshold: int) -> float:
        labels = label_loads(profile, threshold, confidence)
        ipcs = [simulate(t, cfg, mdp_cfg.build(t), labels).ipc for t in traces]
        return geomean(ipcs)

    search = exhaustive_search if mode == "exhaustive" else bracket_search
    best, probes = search(objective, lo, hi)
    return SearchResult(
        best_threshold=best,
        evaluated=tuple(sorted(probes.items())),
        train_set=tuple(t.name for t in traces),
    )
