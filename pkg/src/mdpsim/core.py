"""Cycle-based out-of-order core model.

Pipeline contract, per cycle:

  1. stores whose address resolves this cycle execute: they leave the
     predictor's in-flight set, release loads waiting on them, account
     false dependencies, and search the load queue for younger issued
     loads that consumed stale data (flush + retrain on a hit);
  2. instructions commit in program order, up to the fetch width;
  3. up to issue_width ready instructions issue, oldest first - a load
     is ready once its operand timer elapsed and every predicted store
     has executed; issuing loads record, per byte, the youngest resolved
     older store they read from (unresolved stores are speculatively
     ignored);
  4. up to fetch_width instructions dispatch in program order into
     ROB/IQ and LQ/SQ, stopping at any full structure; every unlabelled
     memory op consumes one predictor read port and dispatch blocks for
     the cycle once ports run out (port usage resets every cycle).

Operand readiness is a fixed one-cycle delay after dispatch; the
per-kind execution latencies then apply from issue: loads complete
after exec_latency_load, store addresses resolve after
exec_latency_store_addr, everything else takes exec_latency_other.
Loads complete at fixed latency; there is no cache model.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

from .predictors import BypassWrapper, MdpInterface, PredictorConfig
from .trace import KIND_BRANCH, KIND_LOAD, KIND_STORE, Trace, TraceEvent

GHR_MASK = (1 << 64) - 1


class ConfigError(ValueError):
    """Inconsistent core configuration."""


class SimInternalError(RuntimeError):
    """A simulator invariant broke mid-run."""


@dataclass(frozen=True)
class CoreConfig:
    rob: int = 128
    iq: int = 77
    lq: int = 38
    sq: int = 22
    fetch_width: int = 4
    issue_width: int = 8
    mdp_read_ports: int = 0  # 0 = unlimited
    exec_latency_load: int = 3
    exec_latency_store_addr: int = 16
    exec_latency_other: int = 1
    flush_penalty: int = 10
    name: str = "custom"

    def validate(self) -> None:
        for f in ("rob", "iq", "lq", "sq", "fetch_width", "issue_width"):
            if getattr(self, f) < 1:
                raise ConfigError(f"{f} must be >= 1")
        if self.mdp_read_ports < 0:
            raise ConfigError("mdp_read_ports must be >= 0")
        if self.lq > self.rob or self.sq > self.rob:
            raise ConfigError("lq and sq cannot exceed rob")
        for f in ("exec_latency_load", "exec_latency_store_addr",
                  "exec_latency_other"):
            if getattr(self, f) < 1:
                raise ConfigError(f"{f} must be >= 1")
        if self.flush_penalty < 0:
            raise ConfigError("flush_penalty must be >= 0")


@dataclass(frozen=True)
class Preset:
    """A named core size plus its predictor and labelling threshold."""

    core: CoreConfig
    predictor: PredictorConfig
    threshold: int


PRESETS: dict[str, Preset] = {
    "small": Preset(
        core=CoreConfig(rob=128, iq=77, lq=38, sq=22, fetch_width=4,
                        issue_width=8, name="small"),
        predictor=PredictorConfig(kind="xs_storesets", ssit_entries=64,
                                  lfst_entries=32, slots=2,
                                  clear_period=125_000),
        threshold=8),
    "medium": Preset(
        core=CoreConfig(rob=256, iq=154, lq=77, sq=54, fetch_width=6,
                        issue_width=8, name="medium"),
        predictor=PredictorConfig(kind="xs_storesets", ssit_entries=256,
                                  lfst_entries=128, slots=2,
                                  clear_period=125_000),
        threshold=13),
    "large": Preset(
        core=CoreConfig(rob=512, iq=308, lq=154, sq=108, fetch_width=8,
                        issue_width=12, name="large"),
        predictor=PredictorConfig(kind="phast", phast_rows=128, phast_assoc=4,
                                  phast_tag_bits=16),
        threshold=51),
}


@dataclass
class SimReport:
    trace: str = ""
    predictor: str = ""
    core: str = ""
    ssit: int = 0
    lfst: int = 0
    ports: int = 0
    threshold: int | None = None
    cycles: int = 0
    instructions: int = 0
    ipc: float = 0.0
    mdp_queries: int = 0
    mdp_queries_per_ki: float = 0.0
    false_deps: int = 0
    false_deps_per_ki: float = 0.0
    violations: int = 0
    violations_per_mi: float = 0.0
    flushes: int = 0
    bypassed_loads: int = 0

    def to_kv(self) -> str:
        """Flat key=value text block."""
        pairs = [
            ("trace", self.trace), ("predictor", self.predictor),
            ("core", self.core), ("ssit", self.ssit), ("lfst", self.lfst),
            ("ports", self.ports),
            ("threshold", "" if self.threshold is None else self.threshold),
            ("cycles", self.cycles), ("instructions", self.instructions),
            ("ipc", f"{self.ipc:.6f}"),
            ("queries_per_ki", f"{self.mdp_queries_per_ki:.6f}"),
            ("false_deps_per_ki", f"{self.false_deps_per_ki:.6f}"),
            ("violations_per_mi", f"{self.violations_per_mi:.6f}"),
            ("flushes", self.flushes), ("bypassed", self.bypassed_loads),
        ]
        return "\n".join(f"{k}={v}" for k, v in pairs) + "\n"

    def csv_row(self) -> list[str]:
        """Fixed column order shared with the experiment runner."""
        return [
            self.trace, self.predictor, str(self.ssit), str(self.lfst),
            str(self.ports),
            "" if self.threshold is None else str(self.threshold),
            str(self.cycles), str(self.instructions), f"{self.ipc:.6f}",
            f"{self.mdp_queries_per_ki:.6f}", f"{self.false_deps_per_ki:.6f}",
            f"{self.violations_per_mi:.6f}", str(self.flushes),
            str(self.bypassed_loads),
        ]


CSV_COLUMNS = ["trace", "predictor", "ssit", "lfst", "ports", "threshold",
               "cycles", "instructions", "ipc", "queries_per_ki",
               "false_deps_per_ki", "violations_per_mi", "flushes", "bypassed"]


@dataclass(frozen=True)
class DeltaReport:
    ipc_pct: float
    queries_per_ki_pct: float
    false_deps_per_ki_pct: float
    violations_per_mi_pct: float


def _pct_change(base: float, new: float) -> float:
    if base == 0:
        return 0.0 if new == 0 else float("inf")
    return (new - base) / base * 100.0


def compare_runs(base: SimReport, pg: SimReport) -> DeltaReport:
    """Percent change of the headline metrics between two runs of the
    same trace on the same core."""
    if base.trace != pg.trace or base.core != pg.core or base.ports != pg.ports:
        raise ValueError("reports come from different traces or core configs")
    return DeltaReport(
        ipc_pct=_pct_change(base.ipc, pg.ipc),
        queries_per_ki_pct=_pct_change(base.mdp_queries_per_ki,
                                       pg.mdp_queries_per_ki),
        false_deps_per_ki_pct=_pct_change(base.false_deps_per_ki,
                                          pg.false_deps_per_ki),
        violations_per_mi_pct=_pct_change(base.violations_per_mi,
                                          pg.violations_per_mi),
    )


class _Instr:
    """In-flight instruction state."""

    __slots__ = ("ev", "idx", "labelled", "ghr_before", "dispatch_cycle",
                 "issue_cycle", "done_cycle", "wait_for", "pending_waits",
                 "byte_sources", "resolved", "killed")

    def __init__(self, ev: TraceEvent, idx: int, labelled: bool,
                 ghr_before: int, cycle: int):
        self.ev = ev
        self.idx = idx
        self.labelled = labelled
        self.ghr_before = ghr_before
        self.dispatch_cycle = cycle
        self.issue_cycle: int | None = None
        self.done_cycle: int | None = None
        self.wait_for: frozenset[int] = frozenset()
        self.pending_waits: set[int] = set()
        self.byte_sources: dict[int, int] = {}
        self.resolved = False
        self.killed = False


class _Simulator:
    def __init__(self, trace: Trace, cfg: CoreConfig, mdp: MdpInterface,
                 labels):
        self.trace = trace
        self.events = trace.events
        self.cfg = cfg
        self.mdp = BypassWrapper(mdp, labels) if labels is not None else mdp
        self.inner = mdp
        self.labels = labels
        self.cycle = 0
        self.cursor = 0
        self.committed = 0
        self.commit_cursor = 0
        self.stall_until = 0
        self.ghr = 0
        self.rob: deque[_Instr] = deque()
        self.lq: deque[_Instr] = deque()
        self.sq: deque[_Instr] = deque()
        self.waiting: list[_Instr] = []
        self.resolve_at: dict[int, list[_Instr]] = {}
        self.executed_stores: set[int] = set()
        self.violations = 0
        self.false_deps = 0
        self.flushes = 0

    # -- store resolution ---------------------------------------------------

    def _resolve_store(self, store: _Instr) -> None:
        store.resolved = True
        seq = store.ev.seq
        self.executed_stores.add(seq)
        self.mdp.store_executed(seq)
        # False-dependency accounting and predictor feedback for loads
        # still gated on this store.
        for load in self.lq:
            if seq in load.pending_waits:
                overlap = load.ev.overlaps(store.ev)
                if not overlap:
                    self.false_deps += 1
                self.mdp.prediction_feedback(load.ev.pc, load.ghr_before,
                                             overlap)
        # Memory order violation: a younger issued load read some byte
        # from an older source than this store.
        victim = None
        for load in self.lq:
            if load.idx <= store.idx or load.issue_cycle is None:
                continue
            if not load.ev.overlaps(store.ev):
                continue
            lo = max(load.ev.addr, store.ev.addr)
            hi = min(load.ev.addr + load.ev.size, store.ev.addr + store.ev.size)
            if any(load.byte_sources.get(b, -1) < seq for b in range(lo, hi)):
                victim = load
                break  # LQ is in program order; first hit is the oldest
        if victim is not None:
            self.violations += 1
            self.mdp.train_violation(victim.ev.pc, store.ev.pc,
                                     victim.ghr_before)
            self._flush_from(victim)

    def _flush_from(self, load: _Instr) -> None:
        """Squash the violating load and everything younger, then
        re-dispatch from the trace."""
        self.flushes += 1
        flush_idx = load.idx
        self.ghr = load.ghr_before
        while self.rob and self.rob[-1].idx >= flush_idx:
            instr = self.rob.pop()
            instr.killed = True
            if instr.ev.kind == KIND_STORE:
                # Remove squashed stores from predictor in-flight state.
                self.mdp.store_executed(instr.ev.seq)
                self.executed_stores.discard(instr.ev.seq)
        while self.lq and self.lq[-1].killed:
            self.lq.pop()
        while self.sq and self.sq[-1].killed:
            self.sq.pop()
        self.waiting = [i for i in self.waiting if not i.killed]
        self.cursor = flush_idx
        self.stall_until = self.cycle + self.cfg.flush_penalty

    # -- pipeline stages ----------------------------------------------------

    def _do_completions(self) -> None:
        pending = self.resolve_at.pop(self.cycle, None)
        if not pending:
            return
        for store in pending:
            if not store.killed:
                self._resolve_store(store)

    def _do_commit(self) -> None:
        done = 0
        while self.rob and done < self.cfg.fetch_width:
            head = self.rob[0]
            if head.done_cycle is None or head.done_cycle > self.cycle:
                break
            if head.idx != self.commit_cursor:
                raise SimInternalError(
                    f"commit order broken: idx {head.idx} expected "
                    f"{self.commit_cursor}")
            self.rob.popleft()
            if head.ev.kind == KIND_LOAD:
                self.lq.popleft()
            elif head.ev.kind == KIND_STORE:
                self.sq.popleft()
            self.commit_cursor += 1
            self.committed += 1
            done += 1

    def _load_ready(self, instr: _Instr) -> bool:
        if not instr.pending_waits:
            return True
        instr.pending_waits -= self.executed_stores
        return not instr.pending_waits

    def _record_byte_sources(self, load: _Instr) -> None:
        """Youngest resolved older store per byte; unresolved older
        stores are speculatively ignored."""
        need = set(load.ev.byte_range())
        sources = {}
        for store in reversed(self.sq):
            if store.idx > load.idx:
                continue
            if not store.resolved:
                continue
            for b in store.ev.byte_range():
                if b in need:
                    need.discard(b)
                    sources[b] = store.ev.seq
            if not need:
                break
        load.byte_sources = sources

    def _do_issue(self) -> None:
        issued = 0
        remaining: list[_Instr] = []
        for instr in self.waiting:
            if issued >= self.cfg.issue_width:
                remaining.append(instr)
                continue
            if instr.dispatch_cycle >= self.cycle:
                remaining.append(instr)
                continue
            if instr.ev.kind == KIND_LOAD and not self._load_ready(instr):
                remaining.append(instr)
                continue
            instr.issue_cycle = self.cycle
            issued += 1
            kind = instr.ev.kind
            if kind == KIND_LOAD:
                self._record_byte_sources(instr)
                instr.done_cycle = self.cycle + self.cfg.exec_latency_load
            elif kind == KIND_STORE:
                instr.done_cycle = self.cycle + self.cfg.exec_latency_store_addr
                self.resolve_at.setdefault(instr.done_cycle, []).append(instr)
            else:
                instr.done_cycle = self.cycle + self.cfg.exec_latency_other
        self.waiting = remaining

    def _labelled(self, pc: int) -> bool:
        return self.labels is not None and pc in self.labels.labelled

    def _do_dispatch(self) -> None:
        if self.cycle < self.stall_until:
            return
        cfg = self.cfg
        dispatched = 0
        ports_used = 0
        while dispatched < cfg.fetch_width and self.cursor < len(self.events):
            ev = self.events[self.cursor]
            if len(self.rob) >= cfg.rob or len(self.waiting) >= cfg.iq:
                break
            if ev.kind == KIND_LOAD and len(self.lq) >= cfg.lq:
                break
            if ev.kind == KIND_STORE and len(self.sq) >= cfg.sq:
                break
            labelled = ev.kind == KIND_LOAD and self._labelled(ev.pc)
            if ev.is_mem() and not labelled and cfg.mdp_read_ports > 0:
                if ports_used >= cfg.mdp_read_ports:
                    break  # out of predictor read ports this cycle
                ports_used += 1
            instr = _Instr(ev, self.cursor, labelled, self.ghr, self.cycle)
            if ev.kind == KIND_LOAD:
                pred = self.mdp.query_load(ev.pc, self.ghr, ev.seq)
                instr.wait_for = pred.wait_for
                instr.pending_waits = set(pred.wait_for)
                self.lq.append(instr)
            elif ev.kind == KIND_STORE:
                self.mdp.register_store(ev.pc, ev.seq)
                self.sq.append(instr)
            elif ev.kind == KIND_BRANCH:
                self.ghr = ((self.ghr << 1) | (1 if ev.taken else 0)) & GHR_MASK
            if ev.is_mem():
                self.mdp.tick(1)
            self.rob.append(instr)
            self.waiting.append(instr)
            self.cursor += 1
            dispatched += 1

    def run(self) -> SimReport:
        n = len(self.events)
        limit = 10_000 + 200 * n
        while self.committed < n:
            self._do_completions()
            self._do_commit()
            self._do_issue()
            self._do_dispatch()
            self.cycle += 1
            if self.cycle > limit:
                raise SimInternalError("simulation exceeded cycle limit")
        return self._report()

    def _report(self) -> SimReport:
        stats = self.mdp.stats()
        instructions = self.committed
        cycles = self.cycle
        ki = instructions / 1000.0
        mi = instructions / 1_000_000.0
        return SimReport(
            trace=self.trace.name,
            predictor=self.mdp.name,
            core=self.cfg.name,
            ssit=getattr(self.inner, "ssit_entries", 0),
            lfst=getattr(self.inner, "lfst_entries", 0),
            ports=self.cfg.mdp_read_ports,
            threshold=self.labels.threshold if self.labels is not None else None,
            cycles=cycles,
            instructions=instructions,
            ipc=instructions / cycles,
            mdp_queries=stats.queries,
            mdp_queries_per_ki=stats.queries / ki,
            false_deps=self.false_deps,
            false_deps_per_ki=self.false_deps / ki,
            violations=self.violations,
            violations_per_mi=self.violations / mi,
            flushes=self.flushes,
            bypassed_loads=stats.bypassed,
        )


def simulate(trace: Trace, cfg: CoreConfig, mdp: MdpInterface,
             labels=None) -> SimReport:
    """Run the trace to completion and return the statistics report.

    labels, when given, wraps the predictor so labelled loads bypass
    queries, consume no read ports, and never train on violation; their
    violations still flush and re-execute as normal.
    """
    cfg.validate()
    if not trace.events:
        raise ConfigError("cannot simulate an empty trace")
    trace.validate()
    return _Simulator(trace, cfg, mdp, labels).run()


def preset_core(name: str, **overrides) -> CoreConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown core preset {name!r} "
                          f"(choose from {sorted(PRESETS)})")
    cfg = PRESETS[name].core
    return replace(cfg, **overrides) if overrides else cfg
