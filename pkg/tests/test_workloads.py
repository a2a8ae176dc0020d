"""Synthetic workload generator tests."""

import pytest

from mdpsim.core import PRESETS, simulate
from mdpsim.predictors import NeverPredictor, OraclePredictor, StoreSets
from mdpsim.profiler import INF, profile_trace, store_distance_oracle
from mdpsim.trace import KIND_LOAD, KIND_STORE, serialize_trace
from mdpsim.workloads import (gen_alias_storm, gen_dependent_chain,
                              gen_pixel_avg, gen_pressure_mix,
                              gen_random_trace, parse_generator_spec)


def mem_kinds(trace):
    return [ev.kind for ev in trace.events if ev.is_mem()]


class TestPixelAvg:
    def test_single_iteration_memory_ops(self):
        t = gen_pixel_avg(1, 1, 1, seed=0)
        assert mem_kinds(t) == [KIND_LOAD, KIND_LOAD, KIND_STORE]
        assert any(ev.kind == "B" for ev in t.events)

    def test_source_loads_have_infinite_distance(self):
        t = gen_pixel_avg(6, 3, 2, seed=1)
        for i in t.loads():
            assert store_distance_oracle(t, i) == INF

    def test_stores_never_reloaded(self):
        t = gen_pixel_avg(5, 4, 3, seed=2)
        stored = set()
        loaded = set()
        for ev in t.events:
            if ev.kind == KIND_STORE:
                stored.update(ev.byte_range())
            elif ev.kind == KIND_LOAD:
                loaded.update(ev.byte_range())
        assert stored and loaded
        assert not (stored & loaded)

    def test_variants_use_distinct_pcs(self):
        t = gen_pixel_avg(4, 3, 3, seed=0)
        load_pcs = {ev.pc for ev in t.events if ev.kind == KIND_LOAD}
        store_pcs = {ev.pc for ev in t.events if ev.kind == KIND_STORE}
        assert len(load_pcs) == 6
        assert len(store_pcs) == 3

    def test_deterministic(self):
        a = serialize_trace(gen_pixel_avg(4, 2, 2, seed=7))
        b = serialize_trace(gen_pixel_avg(4, 2, 2, seed=7))
        assert a == b

    def test_rejects_zero_dimensions(self):
        with pytest.raises(ValueError):
            gen_pixel_avg(0, 1, 1, seed=0)
        with pytest.raises(ValueError):
            gen_pixel_avg(1, 1, 0, seed=0)


class TestDependentChain:
    def test_adjacent_pair(self):
        t = gen_dependent_chain(1, 1, seed=0)
        assert mem_kinds(t) == [KIND_STORE, KIND_LOAD]
        assert t.events[0].addr == t.events[1].addr

    @pytest.mark.parametrize("n,distance", [(1, 1), (5, 1), (4, 2), (3, 7)])
    def test_every_load_distance_is_exact(self, n, distance):
        t = gen_dependent_chain(n, distance, seed=3)
        loads = t.loads()
        assert len(loads) == n
        for i in loads:
            assert store_distance_oracle(t, i) == distance

    def test_distance_beyond_sq_leaves_nothing_in_flight(self):
        cfg = PRESETS["small"].core
        t = gen_dependent_chain(4, cfg.sq + 8, seed=1)
        mdp = OraclePredictor(t)
        report = simulate(t, cfg, mdp)
        assert mdp.stats().predictions_made == 0
        assert report.violations == 0
        assert report.false_deps == 0


class TestAliasStorm:
    def test_loads_never_alias_stores(self):
        t = gen_alias_storm(12, 8, seed=4, rounds=6)
        stored = set()
        for ev in t.events:
            if ev.kind == KIND_STORE:
                stored.update(ev.byte_range())
        for ev in t.events:
            if ev.kind == KIND_LOAD:
                assert not (stored & set(ev.byte_range()))

    def test_minimal_storm_behaves_like_empty_table(self):
        t = gen_alias_storm(1, 1, seed=0, rounds=4)
        mdp = StoreSets(64, 32, 2)
        report = simulate(t, PRESETS["small"].core, mdp)
        never = simulate(t, PRESETS["small"].core, NeverPredictor())
        assert mdp.stats().predictions_made == 0
        assert (report.ipc, report.violations, report.false_deps) == \
               (never.ipc, never.violations, never.false_deps)

    def test_collision_rate_higher_at_small_table(self):
        from mdpsim.predictors import fold_xor
        t = gen_alias_storm(24, 12, seed=5, rounds=1)
        pcs = sorted({ev.pc for ev in t.events if ev.is_mem()})

        def collisions(bits):
            indexes = [fold_xor(pc, bits) for pc in pcs]
            return len(indexes) - len(set(indexes))

        assert collisions(6) > collisions(10)

    def test_deterministic(self):
        a = serialize_trace(gen_alias_storm(8, 4, seed=6, rounds=3))
        b = serialize_trace(gen_alias_storm(8, 4, seed=6, rounds=3))
        assert a == b


class TestPressureMix:
    def test_valid_and_deterministic(self):
        a = gen_pressure_mix(seed=11)
        b = gen_pressure_mix(seed=11)
        a.validate()
        assert a == b

    def test_contains_dependent_and_independent_loads(self):
        t = gen_pressure_mix(seed=2, chain_n=4, chain_distance=2)
        profile = profile_trace(t)
        hists = profile.per_pc.values()
        assert any(set(h) == {2} for h in hists)
        assert any(set(h) == {INF} for h in hists)

    def test_chain_blocks_stay_contiguous(self):
        t = gen_pressure_mix(seed=2, chain_n=4, chain_distance=3)
        profile = profile_trace(t)
        finite = [h for h in profile.per_pc.values() if INF not in h]
        assert finite and all(set(h) == {3} for h in finite)


class TestRandomTrace:
    def test_valid_and_seq_ordered(self):
        t = gen_random_trace(500, seed=0)
        t.validate()

    def test_deterministic(self):
        assert gen_random_trace(200, seed=3) == gen_random_trace(200, seed=3)
        assert gen_random_trace(200, seed=3) != gen_random_trace(200, seed=4)


class TestGeneratorSpec:
    def test_named_parameters(self):
        t = parse_generator_spec("pixel_avg:width=2,height=1,variants=1,seed=5")
        assert t == gen_pixel_avg(2, 1, 1, seed=5)

    def test_default_seed_injected(self):
        t = parse_generator_spec("chain:n=2,distance=1", default_seed=9)
        assert t == gen_dependent_chain(2, 1, seed=9)

    @pytest.mark.parametrize("spec", [
        "nosuch:loads=1",
        "chain:bogus=1",
        "chain:n=1",            # missing required distance
        "chain:n=x,distance=1",
    ])
    def test_bad_specs_rejected(self, spec):
        with pytest.raises(ValueError):
            parse_generator_spec(spec)
