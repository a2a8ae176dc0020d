"""Store-distance profiling, load labelling, and label-set comparison.

A load's store distance is the 1-based position, scanning previously
executed stores youngest first, of the first store whose byte range
overlaps the load's; infinity if no prior store overlaps. Profiling
aggregates those distances per static load PC; loads whose selected
distance clears a threshold are labelled to bypass the memory
dependence predictor.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .trace import KIND_LOAD, KIND_STORE, Trace

INF = math.inf

# Distances at or above the cap share one bucket; any practical
# labelling threshold sits far below it.
OVERFLOW_DISTANCE = 1 << 16

PROFILE_HEADER = "#mdp-profile v1"
LABELS_HEADER = "#mdp-labels v1"

Distance = float  # finite int-valued distances or math.inf


@dataclass
class StoreDistanceProfile:
    """Per-static-load histograms of observed store distances."""

    per_pc: dict[int, Counter] = field(default_factory=dict)
    source: str = ""

    def record(self, pc: int, distance: Distance) -> None:
        if distance is not INF and distance >= OVERFLOW_DISTANCE:
            distance = OVERFLOW_DISTANCE
        self.per_pc.setdefault(pc, Counter())[distance] += 1

    def total_executions(self, pc: int) -> int:
        return sum(self.per_pc[pc].values()) if pc in self.per_pc else 0

    def pcs(self) -> set[int]:
        return set(self.per_pc)

    def __eq__(self, other):
        return isinstance(other, StoreDistanceProfile) and self.per_pc == other.per_pc


@dataclass(frozen=True)
class LabelSet:
    """Static load PCs marked to bypass the predictor."""

    labelled: frozenset[int]
    threshold: int
    source: str = ""

    def __contains__(self, pc: int) -> bool:
        return pc in self.labelled


@dataclass(frozen=True)
class ProfileComparison:
    """Label agreement between a train profile and a reference profile.

    Counts partition the static loads of the reference profile: matched
    labels (tp), matched non-labels (tn), train-only labels (fp),
    reference-only labels (fn), and loads the train run never saw
    (missing).
    """

    tp: int
    tn: int
    fp: int
    fn: int
    missing: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn + self.missing

    def percentages(self) -> dict[str, float]:
        total = self.total or 1
        return {k: 100.0 * getattr(self, k) / total
                for k in ("tp", "tn", "fp", "fn", "missing")}

    def format_line(self) -> str:
        pct = self.percentages()
        return (f"TP {pct['tp']:.2f}% TN {pct['tn']:.2f}% FP {pct['fp']:.2f}% "
                f"FN {pct['fn']:.2f}% Missing {pct['missing']:.2f}%")


def store_distance_oracle(t: Trace, load_index: int) -> Distance:
    """Brute-force store distance of the load at event index load_index.

    Ground truth for all distance computations: scans earlier stores
    youngest first and returns the 1-based index of the first byte
    overlap, or infinity when none exists.
    """
    if not 0 <= load_index < len(t.events):
        raise ValueError(f"event index {load_index} out of range")
    load = t.events[load_index]
    if load.kind != KIND_LOAD:
        raise ValueError(f"event at index {load_index} is {load.kind}, not a load")
    distance = 0
    for i in range(load_index - 1, -1, -1):
        ev = t.events[i]
        if ev.kind != KIND_STORE:
            continue
        distance += 1
        if ev.overlaps(load):
            return distance
    return INF


def profile_trace(t: Trace) -> StoreDistanceProfile:
    """Single streaming pass recording every dynamic load's distance.

    Tracks a global store counter and the ordinal of the last store to
    each byte; a load's distance is the counter minus the youngest
    overlapping ordinal plus one. Matches store_distance_oracle exactly.
    """
    profile = StoreDistanceProfile(source=t.name)
    last_writer: dict[int, int] = {}
    store_count = 0
    for ev in t.events:
        if ev.kind == KIND_STORE:
            store_count += 1
            for b in ev.byte_range():
                last_writer[b] = store_count
        elif ev.kind == KIND_LOAD:
            youngest = 0
            for b in ev.byte_range():
                s = last_writer.get(b, 0)
                if s > youngest:
                    youngest = s
            profile.record(ev.pc, store_count - youngest + 1 if youngest else INF)
    return profile


def merge_profiles(profiles: list[StoreDistanceProfile]) -> StoreDistanceProfile:
    """Pointwise histogram sum; commutative and associative."""
    merged = StoreDistanceProfile(source="+".join(p.source for p in profiles if p.source))
    for p in profiles:
        for pc, hist in p.per_pc.items():
            merged.per_pc.setdefault(pc, Counter()).update(hist)
    return merged


def select_distance(hist: Counter, confidence: float = 0.95) -> Distance:
    """Representative distance for one load's histogram.

    Returns the distance observed in at least `confidence` of the
    executions if one exists, otherwise conservatively the shortest
    observed distance (infinity counts as longer than any finite one).
    """
    if not hist:
        raise ValueError("empty distance histogram")
    total = sum(hist.values())
    dominant = [d for d, c in hist.items() if c / total >= confidence]
    if dominant:
        # Highest count wins; ties prefer the shorter distance.
        return max(dominant, key=lambda d: (hist[d], -d))
    return min(hist)


def label_loads(profile: StoreDistanceProfile, threshold: int,
                confidence: float = 0.95) -> LabelSet:
    """Label every profiled load whose selected distance is >= threshold.

    Infinite distances satisfy any threshold; loads absent from the
    profile are never labelled.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    labelled = frozenset(pc for pc, hist in profile.per_pc.items()
                         if select_distance(hist, confidence) >= threshold)
    return LabelSet(labelled=labelled, threshold=threshold, source=profile.source)


def compare_label_sets(train_labels: LabelSet, train_profile: StoreDistanceProfile,
                       ref_labels: LabelSet, ref_profile: StoreDistanceProfile
                       ) -> ProfileComparison:
    """Categorize every static load of the reference profile by label
    agreement with the train profile."""
    if train_labels.threshold != ref_labels.threshold:
        raise ValueError(f"threshold mismatch: train={train_labels.threshold} "
                         f"ref={ref_labels.threshold}")
    tp = tn = fp = fn = missing = 0
    train_pcs = train_profile.pcs()
    for pc in ref_profile.pcs():
        if pc not in train_pcs:
            missing += 1
        else:
            in_train = pc in train_labels.labelled
            in_ref = pc in ref_labels.labelled
            if in_train and in_ref:
                tp += 1
            elif in_train:
                fp += 1
            elif in_ref:
                fn += 1
            else:
                tn += 1
    return ProfileComparison(tp=tp, tn=tn, fp=fp, fn=fn, missing=missing)


def _format_distance(d: Distance) -> str:
    return "inf" if math.isinf(d) else str(int(d))


def _parse_distance(s: str) -> Distance:
    return INF if s == "inf" else int(s)


def format_profile(profile: StoreDistanceProfile) -> str:
    """Canonical profile file: one line per PC, sorted, inf last."""
    lines = [PROFILE_HEADER]
    for pc in sorted(profile.per_pc):
        hist = profile.per_pc[pc]
        total = sum(hist.values())
        buckets = " ".join(f"dist:{_format_distance(d)}={hist[d]}"
                           for d in sorted(hist))
        lines.append(f"pc={pc:#x} total={total} {buckets}")
    return "\n".join(lines) + "\n"


def parse_profile(text: str, source: str = "") -> StoreDistanceProfile:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(PROFILE_HEADER):
        raise ValueError(f"missing profile header {PROFILE_HEADER!r}")
    profile = StoreDistanceProfile(source=source)
    for line in lines[1:]:
        if not line.strip() or line.startswith("#"):
            continue
        tokens = line.split()
        fields = dict(tok.partition("=")[::2] for tok in tokens)
        pc = int(fields["pc"], 16)
        hist = Counter()
        for tok in tokens:
            if tok.startswith("dist:"):
                d, _, c = tok[len("dist:"):].partition("=")
                hist[_parse_distance(d)] = int(c)
        if sum(hist.values()) != int(fields["total"]):
            raise ValueError(f"profile line total mismatch for pc={pc:#x}")
        profile.per_pc[pc] = hist
    return profile


def format_labels(labels: LabelSet) -> str:
    """Canonical label file: threshold header then sorted hex PCs."""
    lines = [f"{LABELS_HEADER} threshold={labels.threshold}"]
    lines.extend(f"{pc:#x}" for pc in sorted(labels.labelled))
    return "\n".join(lines) + "\n"


def parse_labels(text: str, source: str = "") -> LabelSet:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(LABELS_HEADER):
        raise ValueError(f"missing labels header {LABELS_HEADER!r}")
    rest = lines[0][len(LABELS_HEADER):].strip()
    if not rest.startswith("threshold="):
        raise ValueError("labels header missing threshold")
    threshold = int(rest[len("threshold="):])
    pcs = frozenset(int(line, 16) for line in lines[1:]
                    if line.strip() and not line.startswith("#"))
    return LabelSet(labelled=pcs, threshold=threshold, source=source)
