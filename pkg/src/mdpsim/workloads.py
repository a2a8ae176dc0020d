"""Synthetic workload generators.

Each generator is a pure function of its parameters and seed. Address
regions are chosen so that the intended dependency structure holds by
construction: source regions are never stored to, pad stores never
alias, and distinct generators use disjoint PC and address windows so
mixed traces keep every per-generator property.

The alias storm engineers its PCs against the folded-XOR table index:
a storm PC is a dependent-chain PC XORed with a mask whose fold is zero
at the small table widths and nonzero at the large ones (folding is
linear over XOR, and shifting a mask left preserves which widths fold
to zero). Storm accesses therefore collide with predictor entries that
dependent code trains when tables are small, and stop colliding as the
table grows.
"""

from __future__ import annotations

import random

from .predictors import fold_xor
from .trace import (KIND_BRANCH, KIND_LOAD, KIND_OTHER, KIND_STORE, Trace,
                    TraceEvent)

# Disjoint PC windows per generator.
_PIXEL_PC_BASE = 0x1000
_CHAIN_PC_BASE = 0x2000
_STORM_PC_BASE = 0x3000

# The chain PCs that storm accesses are engineered to alias with.
_CHAIN_ELEMENTS = 8


def _chain_store_pc(i: int) -> int:
    return _CHAIN_PC_BASE + i * 0x10


def _chain_pad_pc(i: int) -> int:
    return _CHAIN_PC_BASE + i * 0x10 + 0x4


def _chain_load_pc(i: int) -> int:
    return _CHAIN_PC_BASE + i * 0x10 + 0x8


_TRAINED_PCS = tuple(_chain_store_pc(i) for i in range(_CHAIN_ELEMENTS)) + \
    tuple(_chain_load_pc(i) for i in range(_CHAIN_ELEMENTS))

# Table widths a predictor sweep exercises (16..1024 entries).
_TABLE_BITS = range(4, 11)

# Alias mask base patterns: bit sets whose folded-XOR is zero at
# exactly the widths up to the tier size and nonzero above it.
_ALIAS_PATTERNS = {
    64: (1 << 0) | (1 << 1) | (1 << 25) | (1 << 36),
    32: (1 << 0) | (1 << 1) | (1 << 5) | (1 << 16),
    16: (1 << 0) | (1 << 4),
}
_TIER_BITS = {16: (4,), 32: (4, 5), 64: (4, 5, 6)}


def _clean_at(pc: int, bits: int) -> bool:
    idx = fold_xor(pc, bits)
    return all(idx != fold_xor(t, bits) for t in _TRAINED_PCS)


def _alias_pc(target: int, tier: int, used: set[int],
              start_shift: int = 0) -> int:
    """A fresh PC that shares `target`'s table index at widths up to
    `tier` entries and avoids every trained index above it."""
    pattern = _ALIAS_PATTERNS[tier]
    for shift in range(start_shift, 64 - pattern.bit_length()):
        pc = target ^ (pattern << shift)
        if pc in used:
            continue
        if all(_clean_at(pc, b) for b in _TABLE_BITS
               if b not in _TIER_BITS[tier]):
            used.add(pc)
            return pc
    raise ValueError(f"alias mask pool exhausted for tier {tier}")


def _clean_pc(base: int, used: set[int]) -> int:
    """A fresh PC avoiding every trained index at 32 entries and up.

    At 16 entries the trained PCs cover the whole table, so nothing can
    avoid them there.
    """
    for k in range(4096):
        pc = base + k * 2
        if pc not in used and all(_clean_at(pc, b) for b in range(5, 11)):
            used.add(pc)
            return pc
    raise ValueError("clean PC pool exhausted")

# Disjoint address regions per generator.
_PIXEL_SRC1 = 0x100000
_PIXEL_SRC2 = 0x140000
_PIXEL_DST = 0x180000
_CHAIN_TARGETS = 0x400000
_CHAIN_PADS = 0x500000
_STORM_LOAD_REGION = 0x600000
_STORM_STORE_REGION = 0x700000
_RANDOM_REGION = 0x800000


class _Emitter:
    """Accumulates events with automatic sequence numbering."""

    def __init__(self):
        self.events: list[TraceEvent] = []

    def load(self, pc, addr, size):
        self.events.append(TraceEvent(seq=len(self.events), pc=pc,
                                      kind=KIND_LOAD, addr=addr, size=size))

    def store(self, pc, addr, size):
        self.events.append(TraceEvent(seq=len(self.events), pc=pc,
                                      kind=KIND_STORE, addr=addr, size=size))

    def branch(self, pc, taken):
        self.events.append(TraceEvent(seq=len(self.events), pc=pc,
                                      kind=KIND_BRANCH, taken=taken))

    def other(self, pc):
        self.events.append(TraceEvent(seq=len(self.events), pc=pc,
                                      kind=KIND_OTHER))


def gen_pixel_avg(i_width: int, i_height: int, n_variants: int,
                  seed: int = 0) -> Trace:
    """Nested averaging loop: two byte loads from read-only source rows
    and one byte store to a destination row per inner iteration.

    The loop body rotates through n_variants PC sets, mimicking a kernel
    compiled into several specialized copies. Source loads never observe
    a prior store; the destination is never loaded back. The memory PCs
    ride the small-table alias tiers, so once dependent code has trained
    a small predictor, these loads get falsely coupled to in-flight
    stores; tables of 128 entries and up keep them apart.
    """
    if i_width < 1 or i_height < 1 or n_variants < 1:
        raise ValueError("pixel_avg dimensions and variant count must be >= 1")
    rng = random.Random(seed)
    jitter = rng.randrange(256) * 0x100
    src1, src2, dst = _PIXEL_SRC1 + jitter, _PIXEL_SRC2 + jitter, _PIXEL_DST + jitter
    used: set[int] = set()
    variant_pcs = []
    for v in range(n_variants):
        e = v % _CHAIN_ELEMENTS
        variant_pcs.append((
            _alias_pc(_chain_load_pc(e), 64, used, start_shift=12),
            _alias_pc(_chain_load_pc(e), 64, used, start_shift=12),
            _alias_pc(_chain_store_pc(e), 64, used, start_shift=12),
        ))
    em = _Emitter()
    for y in range(i_height):
        for x in range(i_width):
            v = (y * i_width + x) % n_variants
            load1_pc, load2_pc, store_pc = variant_pcs[v]
            em.load(load1_pc, src1 + x, 1)
            em.load(load2_pc, src2 + x, 1)
            em.other(_PIXEL_PC_BASE + v * 0x40 + 0x8)
            em.store(store_pc, dst + x, 1)
            em.branch(_PIXEL_PC_BASE + v * 0x40 + 0x10, taken=x < i_width - 1)
        em.branch(_PIXEL_PC_BASE + 0x800, taken=y < i_height - 1)
    return Trace(name=f"pixel_avg_w{i_width}_h{i_height}_v{n_variants}_s{seed}",
                 events=em.events)


def gen_dependent_chain(n: int, distance: int, seed: int = 0) -> Trace:
    """n store/load pairs where every load's store distance is exactly
    `distance`, padded with stores to fresh never-reloaded addresses.
    """
    if n < 1 or distance < 1:
        raise ValueError("chain length and distance must be >= 1")
    rng = random.Random(seed)
    base = _CHAIN_TARGETS + rng.randrange(256) * 0x100
    pad_base = _CHAIN_PADS + rng.randrange(256) * 0x100
    em = _Emitter()
    pad_no = 0
    for i in range(n):
        target = base + i * 0x10
        em.store(_chain_store_pc(i), target, 4)
        for _ in range(distance - 1):
            em.store(_chain_pad_pc(i), pad_base + pad_no * 0x10, 4)
            pad_no += 1
        em.load(_chain_load_pc(i), target, 4)
    return Trace(name=f"chain_n{n}_d{distance}_s{seed}", events=em.events)


def gen_alias_storm(n_static_loads: int, n_static_stores: int, seed: int = 0,
                    rounds: int = 16) -> Trace:
    """Many independent static loads and stores over disjoint regions.

    Loads read a region that is never written, so every load has
    infinite store distance. Three quarters of the static PCs alias the
    dependent-chain PCs at 16, 32, or 64 table entries respectively
    (and none above); the rest avoid them at every width. Standalone,
    with nothing training the predictor, the storm behaves exactly like
    independent code.
    """
    if n_static_loads < 1 or n_static_stores < 1 or rounds < 1:
        raise ValueError("storm counts must be >= 1")
    rng = random.Random(seed)
    used: set[int] = set()
    load_pcs = []
    for j in range(n_static_loads):
        tier = (64, 32, 16, 0)[j % 4]
        if tier:
            target = _chain_load_pc((j // 4) % _CHAIN_ELEMENTS)
            load_pcs.append(_alias_pc(target, tier, used))
        else:
            load_pcs.append(_clean_pc(_STORM_PC_BASE, used))
    store_pcs = []
    for j in range(n_static_stores):
        if j % 2 == 0:
            target = _chain_store_pc((j // 2) % _CHAIN_ELEMENTS)
            store_pcs.append(_alias_pc(target, 64, used))
        else:
            store_pcs.append(_clean_pc(_STORM_PC_BASE + 0x2000, used))
    em = _Emitter()
    ops = ([("L", i) for i in range(n_static_loads)]
           + [("S", j) for j in range(n_static_stores)])
    for r in range(rounds):
        rng.shuffle(ops)
        for kind, i in ops:
            if kind == "L":
                em.load(load_pcs[i], _STORM_LOAD_REGION + i * 8, 4)
            else:
                em.store(store_pcs[i], _STORM_STORE_REGION + i * 8, 4)
        em.branch(_STORM_PC_BASE + 0x7FC, taken=r < rounds - 1)
    return Trace(name=f"storm_l{n_static_loads}_s{n_static_stores}_s{seed}",
                 events=em.events)


def gen_random_trace(n_events: int, seed: int = 0, pc_pool: int = 24,
                     addr_pool: int = 48) -> Trace:
    """Unstructured random trace over a small PC and address pool.

    Addresses are unaligned on purpose so partial overlaps exercise
    byte-granularity dependence checks.
    """
    if n_events < 0:
        raise ValueError("n_events must be >= 0")
    rng = random.Random(seed)
    em = _Emitter()
    for _ in range(n_events):
        roll = rng.random()
        pc = _RANDOM_REGION // 0x100 + rng.randrange(pc_pool) * 4
        if roll < 0.35:
            em.load(pc, _RANDOM_REGION + rng.randrange(addr_pool),
                    rng.choice((1, 2, 4, 8)))
        elif roll < 0.60:
            em.store(pc + 2, _RANDOM_REGION + rng.randrange(addr_pool),
                     rng.choice((1, 2, 4, 8)))
        elif roll < 0.75:
            em.branch(pc + 1, taken=rng.random() < 0.5)
        else:
            em.other(pc + 3)
    return Trace(name=f"random_n{n_events}_s{seed}", events=em.events)


def gen_pressure_mix(seed: int = 0, i_width: int = 48, i_height: int = 8,
                     n_variants: int = 3, storm_loads: int = 48,
                     storm_stores: int = 24, storm_rounds: int = 30,
                     chain_n: int = 8, chain_distance: int = 2) -> Trace:
    """Interleaved pixel_avg + alias_storm stream with a few genuinely
    dependent store/load pairs sprinkled in.

    The dependent pairs violate once each and train the predictor; after
    that, small tables falsely predict the storm and pixel loads against
    unrelated in-flight stores while large tables keep them apart. The
    dependent pairs stay contiguous so their short store distance (and
    hence their unlabelled status) survives the interleaving.
    """
    pixel = gen_pixel_avg(i_width, i_height, n_variants, seed).events
    storm = gen_alias_storm(storm_loads, storm_stores, seed + 1,
                            rounds=storm_rounds).events
    chain = gen_dependent_chain(chain_n, chain_distance, seed + 2).events
    block_len = chain_distance + 1
    chain_blocks = [chain[i:i + block_len]
                    for i in range(0, len(chain), block_len)]

    em = _Emitter()

    def emit(ev: TraceEvent) -> None:
        em.events.append(TraceEvent(seq=len(em.events), pc=ev.pc, kind=ev.kind,
                                    addr=ev.addr, size=ev.size, taken=ev.taken))

    pi = si = 0
    pixel_chunk, storm_chunk = 4, 10
    turn = 0
    while pi < len(pixel) or si < len(storm) or chain_blocks:
        # A dependent pair every few chunks until they run out.
        if chain_blocks and turn % 4 == 1:
            for ev in chain_blocks.pop(0):
                emit(ev)
        if turn % 2 == 0 and pi < len(pixel):
            for ev in pixel[pi:pi + pixel_chunk]:
                emit(ev)
            pi += pixel_chunk
        elif si < len(storm):
            for ev in storm[si:si + storm_chunk]:
                emit(ev)
            si += storm_chunk
        elif pi < len(pixel):
            for ev in pixel[pi:pi + pixel_chunk]:
                emit(ev)
            pi += pixel_chunk
        turn += 1
    return Trace(name=f"pressure_mix_s{seed}", events=em.events)


# Spec name -> (generator, {spec key: keyword argument}, required keys).
GENERATORS = {
    "pixel_avg": (gen_pixel_avg,
                  {"width": "i_width", "height": "i_height",
                   "variants": "n_variants", "seed": "seed"},
                  ("width", "height", "variants")),
    "chain": (gen_dependent_chain,
              {"n": "n", "distance": "distance", "seed": "seed"},
              ("n", "distance")),
    "alias_storm": (gen_alias_storm,
                    {"loads": "n_static_loads", "stores": "n_static_stores",
                     "seed": "seed", "rounds": "rounds"},
                    ("loads", "stores")),
    "random": (gen_random_trace,
               {"n": "n_events", "seed": "seed", "pc_pool": "pc_pool",
                "addr_pool": "addr_pool"},
               ("n",)),
    "mix": (gen_pressure_mix,
            {"seed": "seed", "width": "i_width", "height": "i_height",
             "variants": "n_variants", "storm_loads": "storm_loads",
             "storm_stores": "storm_stores", "storm_rounds": "storm_rounds",
             "chain_n": "chain_n", "chain_distance": "chain_distance"},
            ()),
}


def parse_generator_spec(spec: str, default_seed: int = 0) -> Trace:
    """Build a trace from a `kind:key=value,...` spec string."""
    kind, _, rest = spec.partition(":")
    if kind not in GENERATORS:
        raise ValueError(f"unknown generator {kind!r} "
                         f"(choose from {sorted(GENERATORS)})")
    fn, param_map, required = GENERATORS[kind]
    kwargs: dict[str, int] = {}
    if rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            key = key.strip()
            if key not in param_map or not eq:
                raise ValueError(f"generator {kind!r} has no parameter {key!r} "
                                 f"(choose from {sorted(param_map)})")
            try:
                kwargs[param_map[key]] = int(val)
            except ValueError:
                raise ValueError(f"bad value for {key!r} in spec {spec!r}") from None
    for key in required:
        if param_map[key] not in kwargs:
            raise ValueError(f"generator {kind!r} requires {key!r}")
    kwargs.setdefault("seed", default_seed)
    return fn(**kwargs)
