"""Memory dependence predictors behind a single query/train interface.

Implemented predictors:

  * StoreSets      - SSID tables (SSIT) plus a last-fetched-store table
                     (LFST). slots=1 gives the classic single-store
                     variant; slots>=2 keeps several recent stores per
                     LFST row and evicts FIFO.
  * Phast          - tagged tables over a geometric series of branch
                     history lengths; the longest-history hit wins.
  * OraclePredictor- replays ground-truth dependencies from the trace.
  * NeverPredictor - always predicts memory independent.
  * BypassWrapper  - label-aware shim: labelled load PCs skip the inner
                     predictor entirely and never train it.

Store identities are the dynamic sequence numbers the simulator assigns
at dispatch. A store is registered when dispatched and removed via
store_executed() once its address resolves (or it is squashed), so
predictions only ever name in-flight stores.
"""

from __future__ import annotations

from dataclasses import dataclass, field


def fold_xor(value: int, bits: int) -> int:
    """Fold an integer down to `bits` bits by XOR-ing bit groups."""
    if bits <= 0:
        return 0
    mask = (1 << bits) - 1
    out = 0
    v = value
    while v:
        out ^= v & mask
        v >>= bits
    return out


@dataclass(frozen=True)
class Prediction:
    """Stores a load is predicted to depend on; empty means independent."""

    wait_for: frozenset[int] = frozenset()

    def is_independent(self) -> bool:
        return not self.wait_for


EMPTY_PREDICTION = Prediction()


@dataclass
class MdpStats:
    queries: int = 0
    predictions_made: int = 0
    bypassed: int = 0


class MdpInterface:
    """Common predictor surface used by the core model.

    query_load must never mutate prediction tables (statistics aside);
    train_violation is the only table-allocating entry point for the
    Store Sets variants. The optional seq argument carries the dynamic
    identity of the querying load; only the oracle needs it.
    """

    name = "mdp"

    def query_load(self, pc: int, ghr: int = 0, seq: int | None = None) -> Prediction:
        raise NotImplementedError

    def register_store(self, pc: int, seq: int) -> None:
        raise NotImplementedError

    def store_executed(self, seq: int) -> None:
        raise NotImplementedError

    def train_violation(self, load_pc: int, store_pc: int, ghr: int = 0) -> None:
        raise NotImplementedError

    def prediction_feedback(self, load_pc: int, ghr: int, correct: bool) -> None:
        """Outcome feedback for a waited-on store; default no-op."""

    def tick(self, memory_ops: int = 1) -> None:
        """Advance the issued-memory-op counter (cyclic clears hook here)."""

    def stats(self) -> MdpStats:
        raise NotImplementedError

    def table_population(self) -> dict[str, int]:
        """Occupancy counters, used to verify training suppression."""
        return {}


class NeverPredictor(MdpInterface):
    """Predicts every load memory independent."""

    name = "never"

    def __init__(self):
        self._stats = MdpStats()

    def query_load(self, pc, ghr=0, seq=None):
        self._stats.queries += 1
        return EMPTY_PREDICTION

    def register_store(self, pc, seq):
        pass

    def store_executed(self, seq):
        pass

    def train_violation(self, load_pc, store_pc, ghr=0):
        pass

    def stats(self):
        return self._stats


class StoreSets(MdpInterface):
    """SSIT/LFST dependence predictor with multi-slot LFST rows.

    The SSIT is indexed by folded-XOR of the PC. Loads and stores that
    violate are merged into one store set: fresh id if neither has one,
    copy if exactly one has, minimum of the two otherwise. The tables
    are fully cleared every clear_period issued memory operations.
    """

    name = "storesets"

    def __init__(self, ssit_entries: int = 64, lfst_entries: int = 32,
                 slots: int = 1, clear_period: int = 125_000):
        if ssit_entries < 1 or lfst_entries < 1 or slots < 1 or clear_period < 1:
            raise ValueError("StoreSets parameters must be >= 1")
        self.ssit_entries = ssit_entries
        self.lfst_entries = lfst_entries
        self.slots = slots
        self.clear_period = clear_period
        self.index_bits = max(1, (ssit_entries - 1).bit_length())
        self.ssit: list[int | None] = [None] * ssit_entries
        # Each LFST row holds up to `slots` in-flight store seqs, oldest first.
        self.lfst: list[list[int]] = [[] for _ in range(lfst_entries)]
        self.ops_since_clear = 0
        self.next_ssid = 0
        self._stats = MdpStats()

    def ssit_index(self, pc: int) -> int:
        return fold_xor(pc, self.index_bits) % self.ssit_entries

    def _alloc_ssid(self) -> int:
        ssid = self.next_ssid
        self.next_ssid = (self.next_ssid + 1) % (1 << 20)
        return ssid

    def query_load(self, pc, ghr=0, seq=None):
        self._stats.queries += 1
        ssid = self.ssit[self.ssit_index(pc)]
        if ssid is None:
            return EMPTY_PREDICTION
        row = self.lfst[ssid % self.lfst_entries]
        if not row:
            return EMPTY_PREDICTION
        self._stats.predictions_made += 1
        return Prediction(frozenset(row))

    def register_store(self, pc, seq):
        ssid = self.ssit[self.ssit_index(pc)]
        if ssid is None:
            return
        row = self.lfst[ssid % self.lfst_entries]
        row.append(seq)
        if len(row) > self.slots:
            row.pop(0)

    def store_executed(self, seq):
        for row in self.lfst:
            if seq in row:
                row.remove(seq)

    def train_violation(self, load_pc, store_pc, ghr=0):
        li = self.ssit_index(load_pc)
        si = self.ssit_index(store_pc)
        lid, sid = self.ssit[li], self.ssit[si]
        if lid is None and sid is None:
            ssid = self._alloc_ssid()
            self.ssit[li] = self.ssit[si] = ssid
        elif lid is None:
            self.ssit[li] = sid
        elif sid is None:
            self.ssit[si] = lid
        else:
            self.ssit[li] = self.ssit[si] = min(lid, sid)

    def tick(self, memory_ops=1):
        self.ops_since_clear += memory_ops
        if self.ops_since_clear >= self.clear_period:
            self.ssit = [None] * self.ssit_entries
            self.lfst = [[] for _ in range(self.lfst_entries)]
            self.ops_since_clear = 0

    def stats(self):
        return self._stats

    def table_population(self):
        return {
            "ssit": sum(1 for e in self.ssit if e is not None),
            "lfst": sum(len(row) for row in self.lfst),
        }


def xs_storesets(ssit_entries: int = 64, lfst_entries: int = 32,
                 slots: int = 2, clear_period: int = 125_000) -> StoreSets:
    """Multi-slot Store Sets variant (2 slots by default)."""
    p = StoreSets(ssit_entries, lfst_entries, slots, clear_period)
    p.name = "xs_storesets"
    return p


@dataclass
class _PhastWay:
    tag: int
    store_pc: int
    useful: int = 0


class Phast(MdpInterface):
    """Tagged predictor over a geometric series of branch history lengths.

    Each history length owns a rows x assoc table; entries are keyed by
    a folded (pc, history) tag. Queries search all lengths and take the
    longest-history hit, translating its stored store PC to the youngest
    in-flight store with that PC. Violations allocate in the shortest
    non-hitting table, evicting the least-useful way.
    """

    name = "phast"

    def __init__(self, rows: int = 128, assoc: int = 4, tag_bits: int = 16,
                 history_lengths: tuple[int, ...] = (2, 8, 32, 128)):
        if rows < 1 or assoc < 1 or tag_bits < 1:
            raise ValueError("Phast parameters must be >= 1")
        if list(history_lengths) != sorted(set(history_lengths)):
            raise ValueError("history lengths must be strictly increasing")
        self.rows = rows
        self.assoc = assoc
        self.tag_bits = tag_bits
        self.history_lengths = tuple(history_lengths)
        self.row_bits = max(1, (rows - 1).bit_length())
        self.tables: list[list[list[_PhastWay | None]]] = [
            [[None] * assoc for _ in range(rows)] for _ in history_lengths]
        # In-flight stores by PC, seqs in ascending (dispatch) order.
        self._inflight: dict[int, list[int]] = {}
        self._seq_pc: dict[int, int] = {}
        self._stats = MdpStats()

    def _key(self, table_i: int, pc: int, ghr: int) -> tuple[int, int]:
        hist = ghr & ((1 << self.history_lengths[table_i]) - 1)
        idx = (fold_xor(pc, self.row_bits) ^ fold_xor(hist, self.row_bits)) % self.rows
        tag = fold_xor(pc ^ (hist << 1), self.tag_bits)
        return idx, tag

    def _lookup(self, table_i: int, pc: int, ghr: int) -> _PhastWay | None:
        idx, tag = self._key(table_i, pc, ghr)
        for way in self.tables[table_i][idx]:
            if way is not None and way.tag == tag:
                return way
        return None

    def query_load(self, pc, ghr=0, seq=None):
        self._stats.queries += 1
        for i in reversed(range(len(self.history_lengths))):
            way = self._lookup(i, pc, ghr)
            if way is None:
                continue
            live = self._inflight.get(way.store_pc)
            if live:
                self._stats.predictions_made += 1
                return Prediction(frozenset((live[-1],)))
            return EMPTY_PREDICTION
        return EMPTY_PREDICTION

    def register_store(self, pc, seq):
        self._inflight.setdefault(pc, []).append(seq)
        self._seq_pc[seq] = pc

    def store_executed(self, seq):
        pc = self._seq_pc.pop(seq, None)
        if pc is None:
            return
        live = self._inflight.get(pc)
        if live and seq in live:
            live.remove(seq)
            if not live:
                del self._inflight[pc]

    def train_violation(self, load_pc, store_pc, ghr=0):
        last_hit = None
        for i, _length in enumerate(self.history_lengths):
            way = self._lookup(i, load_pc, ghr)
            if way is not None:
                last_hit = way
                continue
            idx, tag = self._key(i, load_pc, ghr)
            ways = self.tables[i][idx]
            victim = None
            for w, way_slot in enumerate(ways):
                if way_slot is None:
                    victim = w
                    break
            if victim is None:
                victim = min(range(self.assoc), key=lambda w: (ways[w].useful, w))
            ways[victim] = _PhastWay(tag=tag, store_pc=store_pc)
            return
        # Every length already hits this context: refresh the longest entry.
        if last_hit is not None:
            last_hit.store_pc = store_pc

    def prediction_feedback(self, load_pc, ghr, correct):
        for i in reversed(range(len(self.history_lengths))):
            way = self._lookup(i, load_pc, ghr)
            if way is not None:
                if correct:
                    way.useful = min(3, way.useful + 1)
                else:
                    way.useful = max(0, way.useful - 1)
                return

    def stats(self):
        return self._stats

    def table_population(self):
        count = sum(1 for table in self.tables for st in table
                    for way in st if way is not None)
        return {"ways": count}


class OraclePredictor(MdpInterface):
    """Ground-truth predictor built from the full trace.

    For each dynamic load it precomputes the set of stores that are the
    youngest prior writer of at least one byte the load reads. A query
    returns whichever of those stores are still in flight, so loads wait
    for exactly their true producers and nothing else.
    """

    name = "oracle"

    def __init__(self, trace):
        self._stats = MdpStats()
        self._inflight: set[int] = set()
        self._deps: dict[int, frozenset[int]] = {}
        last_writer: dict[int, int] = {}
        for ev in trace.events:
            if ev.kind == "S":
                for b in ev.byte_range():
                    last_writer[b] = ev.seq
            elif ev.kind == "L":
                src = {last_writer[b] for b in ev.byte_range() if b in last_writer}
                if src:
                    self._deps[ev.seq] = frozenset(src)

    def query_load(self, pc, ghr=0, seq=None):
        self._stats.queries += 1
        if seq is None:
            return EMPTY_PREDICTION
        wait = self._deps.get(seq, frozenset()) & self._inflight
        if wait:
            self._stats.predictions_made += 1
            return Prediction(frozenset(wait))
        return EMPTY_PREDICTION

    def register_store(self, pc, seq):
        self._inflight.add(seq)

    def store_executed(self, seq):
        self._inflight.discard(seq)

    def train_violation(self, load_pc, store_pc, ghr=0):
        pass

    def stats(self):
        return self._stats


class BypassWrapper(MdpInterface):
    """Label-aware front end for any predictor.

    Labelled load PCs neither query nor train the inner predictor: the
    query returns an empty prediction and increments the bypass counter,
    and violation training for a labelled load is dropped so no table
    entry is ever created on its behalf. Everything else delegates.
    """

    def __init__(self, inner: MdpInterface, labels):
        self.inner = inner
        self.labels = labels
        self.name = inner.name
        self._bypassed = 0

    def _labelled(self, pc: int) -> bool:
        return pc in self.labels.labelled

    def query_load(self, pc, ghr=0, seq=None):
        if self._labelled(pc):
            self._bypassed += 1
            return EMPTY_PREDICTION
        return self.inner.query_load(pc, ghr, seq)

    def register_store(self, pc, seq):
        self.inner.register_store(pc, seq)

    def store_executed(self, seq):
        self.inner.store_executed(seq)

    def train_violation(self, load_pc, store_pc, ghr=0):
        if self._labelled(load_pc):
            return
        self.inner.train_violation(load_pc, store_pc, ghr)

    def prediction_feedback(self, load_pc, ghr, correct):
        if self._labelled(load_pc):
            return
        self.inner.prediction_feedback(load_pc, ghr, correct)

    def tick(self, memory_ops=1):
        self.inner.tick(memory_ops)

    def stats(self):
        inner = self.inner.stats()
        return MdpStats(queries=inner.queries,
                        predictions_made=inner.predictions_made,
                        bypassed=self._bypassed)

    def table_population(self):
        return self.inner.table_population()


@dataclass
class PredictorConfig:
    """Factory description for a predictor instance."""

    kind: str = "xs_storesets"
    ssit_entries: int = 64
    lfst_entries: int = 32
    slots: int = 2
    clear_period: int = 125_000
    phast_rows: int = 128
    phast_assoc: int = 4
    phast_tag_bits: int = 16
    phast_lengths: tuple[int, ...] = (2, 8, 32, 128)

    def build(self, trace=None) -> MdpInterface:
        if self.kind == "storesets":
            return StoreSets(self.ssit_entries, self.lfst_entries, 1,
                             self.clear_period)
        if self.kind == "xs_storesets":
            return xs_storesets(self.ssit_entries, self.lfst_entries,
                                self.slots, self.clear_period)
        if self.kind == "phast":
            return Phast(self.phast_rows, self.phast_assoc,
                         self.phast_tag_bits, self.phast_lengths)
        if self.kind == "oracle":
            if trace is None:
                raise ValueError("oracle predictor needs the trace")
            return OraclePredictor(trace)
        if self.kind == "never":
            return NeverPredictor()
        raise ValueError(f"unknown predictor kind {self.kind!r}")

    def scaled(self, ssit_entries: int) -> "PredictorConfig":
        """Same config at another SSIT size; LFST keeps the 2:1 ratio."""
        from dataclasses import replace
        return replace(self, ssit_entries=ssit_entries,
                       lfst_entries=max(1, ssit_entries // 2))
