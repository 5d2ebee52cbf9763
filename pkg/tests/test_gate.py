import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiedge import (LRModel, Mode, Policy, SynthConfig, exit_fractions,
                    generate_synthetic, route, route_trace)

from conftest import make_record, make_trace, random_trace

ACCEPT_ALL = LRModel(weights=(0.0, 0.0), bias=5.0)
OFFLOAD_ALL = LRModel(weights=(0.0, 0.0), bias=-5.0)
# Accepts iff top1 >= 0.5 (sharp boundary).
TOP1_GATE = LRModel(weights=(200.0, 0.0), bias=-100.0)


class TestRoute:
    def test_confident_sample_exits_early(self):
        rec = make_record(0, 1, [[0.17, 0.83], [0.5, 0.5]], 1)
        policy = Policy(mode=Mode.EE, thresholds=(0.69,))
        r = route(rec, policy)
        assert r.exit_taken == 0
        assert not r.offloaded
        assert not r.lr_invoked
        assert r.final_label == 1

    def test_disabled_branch_reduces_ee_hi_to_hi(self):
        rec = make_record(0, 1, [[0.9, 0.1], [0.45, 0.55]], 0)
        ee_hi = route(rec, Policy(mode=Mode.EE_HI, thresholds=(1.5,)), OFFLOAD_ALL)
        hi = route(rec, Policy(mode=Mode.HI), OFFLOAD_ALL)
        assert ee_hi == hi
        assert ee_hi.exit_taken == 1
        assert ee_hi.offloaded
        assert ee_hi.final_label == 0

    def test_remote_always_offloads(self):
        rec = make_record(0, 1, [[0.9, 0.1]], 0)
        r = route(rec, Policy(mode=Mode.REMOTE))
        assert r.offloaded
        assert r.final_label == 0
        assert not r.lr_invoked

    def test_on_device_keeps_final_argmax(self):
        rec = make_record(0, 1, [[0.2, 0.8], [0.7, 0.3]], 1)
        r = route(rec, Policy(mode=Mode.ON_DEVICE))
        assert r.exit_taken == 1
        assert r.final_label == 0
        assert not r.offloaded

    def test_threshold_tie_accepts(self):
        rec = make_record(0, 0, [[0.7, 0.3], [1.0, 0.0]], 0)
        r = route(rec, Policy(mode=Mode.EE, thresholds=(0.7,)))
        assert r.exit_taken == 0

    def test_hi_without_model_is_an_error(self):
        rec = make_record(0, 0, [[1.0, 0.0]], 0)
        with pytest.raises(ValueError, match="requires"):
            route(rec, Policy(mode=Mode.HI))

    def test_wrong_threshold_count_is_an_error(self):
        rec = make_record(0, 0, [[0.6, 0.4], [0.6, 0.4]], 0)
        with pytest.raises(ValueError, match="thresholds"):
            route(rec, Policy(mode=Mode.EE, thresholds=(0.5, 0.5)))

    def test_lr_reads_final_exit_not_branch(self):
        # Branch is unconfident (no early exit); final is confident, so the
        # top1-gating model accepts even though the branch would offload.
        rec = make_record(0, 0, [[0.4, 0.3, 0.3], [0.9, 0.05, 0.05]], 0)
        r = route(rec, Policy(mode=Mode.EE_HI, thresholds=(0.95,)), TOP1_GATE)
        assert r.exit_taken == 1
        assert not r.offloaded
        assert r.lr_invoked


class TestRouteTrace:
    def test_matches_per_sample_route(self):
        rng = np.random.default_rng(0)
        trace = random_trace(rng, n=300, num_classes=5, num_exits=3)
        for mode, thresholds, model in [
            (Mode.ON_DEVICE, (), None),
            (Mode.REMOTE, (), None),
            (Mode.EE, (0.6, 0.8), None),
            (Mode.HI, (), TOP1_GATE),
            (Mode.EE_HI, (0.55, 0.9), TOP1_GATE),
        ]:
            policy = Policy(mode=mode, thresholds=thresholds)
            batch = route_trace(trace, policy, model)
            for i, rec in enumerate(trace.records()):
                assert batch[i] == route(rec, policy, model), (mode, i)

    def test_offload_only_from_final_exit(self):
        rng = np.random.default_rng(1)
        trace = random_trace(rng, n=200, num_exits=3)
        batch = route_trace(trace, Policy(mode=Mode.EE_HI, thresholds=(0.5, 0.5)),
                            OFFLOAD_ALL)
        last = trace.num_exits - 1
        assert np.all(batch.exit_taken[batch.offloaded] == last)


class TestExitFractions:
    def test_remote_mass_at_final(self):
        rng = np.random.default_rng(2)
        trace = random_trace(rng, n=64, num_exits=2)
        stats = exit_fractions(trace, Policy(mode=Mode.REMOTE))
        assert stats.eta_exit == (0.0, 1.0)
        assert stats.eta_off == 1.0

    def test_zero_thresholds_drain_first_branch(self):
        rng = np.random.default_rng(3)
        trace = random_trace(rng, n=64, num_exits=3)
        stats = exit_fractions(trace, Policy(mode=Mode.EE, thresholds=(0.0, 0.0)))
        assert stats.eta_exit == (1.0, 0.0, 0.0)
        assert stats.eta_off == 0.0

    def test_brute_force_count_agreement(self):
        cfg = SynthConfig(num_samples=1000, num_classes=6, num_exits=2,
                          exit_accuracies=(0.6, 0.85), server_accuracy=0.95,
                          separation=2.0, seed=13)
        trace = generate_synthetic(cfg)
        stats = exit_fractions(trace, Policy(mode=Mode.EE_HI, thresholds=(0.8,)),
                               ACCEPT_ALL)
        direct = int(np.sum(trace.confidences[:, 0] >= 0.8))
        assert stats.exit_counts[0] == direct
        assert stats.eta_exit[0] == direct / len(trace)

    def test_counts_sum_to_n(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            trace = random_trace(rng, n=int(rng.integers(2, 200)),
                                 num_exits=int(rng.integers(1, 4)))
            thresholds = tuple(rng.uniform(0, 1.1, size=trace.num_exits - 1))
            stats = exit_fractions(trace, Policy(mode=Mode.EE_HI, thresholds=thresholds),
                                   TOP1_GATE)
            assert sum(stats.exit_counts) == stats.num_samples
            assert stats.offload_count <= stats.exit_counts[-1]


class TestCascadeProperties:
    @given(seed=st.integers(min_value=0, max_value=10**6),
           dim=st.integers(min_value=0, max_value=1),
           low=st.floats(min_value=0.0, max_value=1.05),
           bump=st.floats(min_value=0.0, max_value=0.5))
    @settings(max_examples=40, deadline=None)
    def test_raising_threshold_pushes_mass_deeper(self, seed, dim, low, bump):
        rng = np.random.default_rng(seed)
        trace = random_trace(rng, n=80, num_exits=3)
        base = [0.7, 0.7]
        hi = list(base)
        base[dim], hi[dim] = low, low + bump
        s_lo = exit_fractions(trace, Policy(mode=Mode.EE_HI, thresholds=tuple(base)),
                              TOP1_GATE)
        s_hi = exit_fractions(trace, Policy(mode=Mode.EE_HI, thresholds=tuple(hi)),
                              TOP1_GATE)
        assert s_hi.eta_exit[dim] <= s_lo.eta_exit[dim]
        deeper_lo = sum(s_lo.eta_exit[dim + 1:])
        deeper_hi = sum(s_hi.eta_exit[dim + 1:])
        assert deeper_hi >= deeper_lo - 1e-12
        assert s_hi.eta_off >= s_lo.eta_off

    def test_all_disabled_equals_on_device_and_hi(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            trace = random_trace(rng, n=60, num_exits=3)
            disabled = (1.5, 1.5)
            ee = route_trace(trace, Policy(mode=Mode.EE, thresholds=disabled))
            od = route_trace(trace, Policy(mode=Mode.ON_DEVICE))
            for i in range(len(trace)):
                assert ee[i] == od[i]
            eehi = route_trace(trace, Policy(mode=Mode.EE_HI, thresholds=disabled),
                               TOP1_GATE)
            hi = route_trace(trace, Policy(mode=Mode.HI), TOP1_GATE)
            for i in range(len(trace)):
                assert eehi[i] == hi[i]


class TestPolicySerialization:
    def test_round_trip(self):
        policy = Policy(mode=Mode.EE_HI, thresholds=(0.69, 0.84))
        assert Policy.from_json(policy.to_json()) == policy

    def test_mode_parse_accepts_underscores(self):
        assert Mode.parse("EE_HI") == Mode.EE_HI
        assert Mode.parse("on-device") == Mode.ON_DEVICE

    def test_mode_parse_rejects_unknown(self):
        with pytest.raises(ValueError):
            Mode.parse("offload-everything")

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            Policy(mode=Mode.EE, thresholds=(-0.1,))
