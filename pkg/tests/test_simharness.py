import json
import math

import numpy as np
import pytest

from macvlc.channel import builtin_channel
from macvlc.decoders import DecoderConfig, TrialRecord, run_trial
from macvlc.infomeasures import ProductInput, WalkKind, info_triple, max_increment
from macvlc.schemes import Codebook, SchemeSpec
from macvlc.simharness import (
    ExperimentConfig,
    concentration_check,
    entropy_slack_check,
    experiment_json,
    records_to_csv,
    run_experiment,
    run_trials,
    summarize,
    trial_seed,
    wald_check,
)

CH = builtin_channel("noisy_adder", 0.1)
TRIPLE = info_triple(CH, ProductInput.uniform(CH))


def cfg(rule="joint", m1=8, m2=8, trials=200, seed=0, workers=1, eps=0.2, scheme_seed=1):
    return ExperimentConfig(CH, SchemeSpec("random", m1, m2, seed=scheme_seed), DecoderConfig(eps, rule),
                            trials, seed, workers)


def walk_record(n, score):
    return TrialRecord(n, n, (1, 1), (1, 1), False, False, (n,), (score,))


class TestRunExperiment:
    def test_single_trivial_trial(self):
        s = run_experiment(cfg(m1=1, m2=1, trials=1))
        assert s.pe_hat == 0.0
        assert s.rate1_nats == 0.0 and s.rate2_nats == 0.0
        assert s.trials_used == 1

    def test_worker_count_invariance(self):
        a = run_experiment(cfg("combined", trials=60, workers=1))
        b = run_experiment(cfg("combined", trials=60, workers=3))
        assert a == b
        assert experiment_json(cfg("combined", trials=60), a) == experiment_json(cfg("combined", trials=60), b)

    def test_trial_replay(self):
        c = cfg(trials=30, seed=17)
        recs = run_trials(c)
        rng = np.random.default_rng(trial_seed(17, 12))
        truth = (int(rng.integers(1, 9)), int(rng.integers(1, 9)))
        assert recs[12].truth == truth

    def test_equal_time_rules_ratio_one(self):
        for rule in ("joint", "combined"):
            s = run_experiment(cfg(rule, trials=50))
            assert s.r1_hat == 1.0 and s.r2_hat == 1.0

    def test_summary_invariants(self):
        s = run_experiment(cfg("successive", trials=200))
        assert 0 <= s.pe_hat <= 1
        assert s.pe_ci[0] <= s.pe_hat <= s.pe_ci[1]
        assert s.en_min.mean <= min(s.en1.mean, s.en2.mean) + 1e-12
        assert 0 < s.r1_hat <= 1 and 0 < s.r2_hat <= 1
        assert s.rate1_bits == pytest.approx(s.rate1_nats / math.log(2))

    def test_genie_side_time_zero(self):
        s = run_experiment(cfg("genie_cond_user1", trials=20))
        assert s.en2.mean == 0.0
        assert s.rate2_nats is None

    def test_rates_relabel_invariant(self):
        class Permuted(Codebook):
            def symbols(self, messages, positions):
                return super().symbols((np.asarray(messages) * 5 + 3) % self.m, positions)

        for t in range(40):
            truth = (1 + t % 8, 1 + (3 * t) % 8)
            base = run_trial(CH, Codebook(8, [0.5, 0.5], t, 1), Codebook(8, [0.5, 0.5], t, 2), truth,
                             DecoderConfig(0.2), t)
            rel = run_trial(CH, Permuted(8, [0.5, 0.5], t, 1), Permuted(8, [0.5, 0.5], t, 2),
                            (_preimage(truth[0]), _preimage(truth[1])),
                            DecoderConfig(0.2), t)
            assert (rel.n1, rel.n2) == (base.n1, base.n2)

    def test_capped_warning(self):
        c = ExperimentConfig(CH, SchemeSpec("random", 64, 64), DecoderConfig(0.2, max_steps=3), 20, 0)
        with pytest.warns(RuntimeWarning):
            s = run_experiment(c)
        assert s.capped_fraction == 1.0 and s.pe_hat == 1.0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            cfg(trials=0)
        with pytest.raises(ValueError):
            cfg(workers=0)
        with pytest.raises(ValueError):
            cfg(seed=-1)

    def test_union_bound_coverage(self):
        # the Wilson interval should not sit above the union bound in more than 1 of 20 meta-runs
        bound = 16**-0.2
        covered = 0
        for rep in range(20):
            s = run_experiment(cfg("genie_cond_user1", 16, 2, trials=100, seed=1000 + rep, scheme_seed=rep))
            covered += s.pe_ci[0] <= bound
        assert covered >= 19

    def test_combined_rate_prediction(self):
        s = run_experiment(cfg("combined", 64, 64, trials=400))
        assert s.rate1_nats + s.rate2_nats >= 0.8 * TRIPLE.i12 / 1.2


class TestOutputs:
    def test_json_fields(self):
        c = cfg(trials=10)
        doc = json.loads(experiment_json(c, run_experiment(c)))
        summ = doc["summary"]
        for key in ("pe_hat", "pe_ci", "en1", "en2", "en_min", "r1_hat", "r2_hat", "rate1_nats", "rate1_bits",
                    "capped_fraction", "trials_used", "units"):
            assert key in summ
        assert summ["units"]["rate1_bits"] == "bits/use"
        assert doc["config"]["decoder"]["rule"] == "joint"

    def test_records_csv(self):
        recs = run_trials(cfg(trials=3))
        lines = records_to_csv(recs).splitlines()
        assert lines[0] == "trial,n1,n2,error,capped"
        assert len(lines) == 4
        assert lines[1].startswith("0,")


class TestConcatSimulation:
    def spec(self, kind, **kw):
        base = {"type": kind, "m1": 256, "m2": 256, "seed": 3, "phase1_rates_bits": [0.6, 0.25], "epsilon": 0.01}
        base.update(kw)
        return SchemeSpec.from_json(base)

    def test_user1_first_order(self):
        c = ExperimentConfig(CH, self.spec("concat"), DecoderConfig(0.2), 100, 0)
        recs = run_trials(c)
        assert all(r.n1 < r.n2 for r in recs)

    def test_user2_first_order(self):
        c = ExperimentConfig(CH, self.spec("concat", order="v2", phase1_rates_bits=[0.25, 0.6]), DecoderConfig(0.2),
                             100, 0)
        assert all(r.n2 < r.n1 for r in run_trials(c))

    def test_mixture_weights(self):
        s1 = run_experiment(ExperimentConfig(CH, self.spec("mixed", **{"lambda": 1.0}), DecoderConfig(0.2), 100, 0))
        s0 = run_experiment(ExperimentConfig(CH, self.spec("mixed", **{"lambda": 0.0}), DecoderConfig(0.2), 100, 0))
        assert s1.rate1_nats > s0.rate1_nats
        assert s1.rate2_nats < s0.rate2_nats
        assert s1.pe_hat < 0.3 and s0.pe_hat < 0.3

    def test_mixture_deterministic(self):
        c = ExperimentConfig(CH, self.spec("mixed", **{"lambda": 0.5}), DecoderConfig(0.2), 40, 9)
        assert run_experiment(c) == run_experiment(c)

    def test_missing_rates(self):
        spec = SchemeSpec("concat", 16, 16)
        with pytest.raises(ValueError):
            run_trials(ExperimentConfig(CH, spec, DecoderConfig(0.2), 1, 0))


class TestWald:
    def test_constant_walk(self):
        c, thr = 0.3, 1.0
        n = math.ceil(thr / c)
        rep = wald_check([walk_record(n, n * c)] * 5, c, thr, max_increment=c)
        assert rep["gap"] == pytest.approx(n * c - thr, abs=1e-12)
        assert rep["residual"] == pytest.approx(0.0, abs=1e-12)
        assert rep["passed"]

    def test_genie_passes(self):
        recs = run_trials(cfg("genie_cond_user1", 64, 2, trials=2000))
        thr = 1.2 * math.log(64)
        inp = ProductInput.uniform(CH)
        rep = wald_check(recs, TRIPLE.i1, thr, max_increment(CH, inp, WalkKind.COND_CORRECT_GIVEN_X2))
        assert rep["passed"]

    def test_overshoot_share_shrinks(self):
        small = run_trials(cfg("genie_cond_user1", 2, 2, trials=2000, seed=1))
        big = run_trials(cfg("genie_cond_user1", 1024, 2, trials=2000, seed=2))
        t_small, t_big = 1.2 * math.log(2), 1.2 * math.log(1024)
        a = wald_check(small, TRIPLE.i1, t_small)
        b = wald_check(big, TRIPLE.i1, t_big)
        assert b["gap_over_threshold"] * 5 <= a["gap_over_threshold"]

    def test_no_samples(self):
        with pytest.raises(ValueError):
            wald_check([TrialRecord(1, 1, (1, 1), (1, 1), False, False)], 0.1, 1.0)


class TestConcentration:
    def test_deterministic(self):
        recs = [walk_record(7, 1.0)] * 10
        assert concentration_check(recs, 0.01) == 0.0

    def test_huge_eps(self):
        recs = run_trials(cfg("genie_cond_user1", 8, 2, trials=100))
        assert concentration_check(recs, 1e9) == 0.0

    def test_tail_shrinks_with_threshold(self):
        small = run_trials(cfg("genie_cond_user1", 8, 1, trials=1500, seed=3))
        big = run_trials(cfg("genie_cond_user1", 8**4, 1, trials=1500, seed=4))
        assert concentration_check(big, 0.2) < concentration_check(small, 0.2)

    def test_eps_positive(self):
        with pytest.raises(ValueError):
            concentration_check([walk_record(1, 1.0)], 0.0)


class TestEntropySlack:
    def test_deterministic(self):
        rep = entropy_slack_check([walk_record(9, 1.0)] * 1000)
        assert rep["entropy_plug_in"] == 0.0
        assert rep["bound"] == pytest.approx(1 + math.log(9))
        assert rep["passed"]

    def test_geometric_near_tight(self):
        p = 0.05
        rng = np.random.default_rng(0)
        n = rng.geometric(p, size=20_000)
        rep = entropy_slack_check([walk_record(int(v), 0.0) for v in n])
        h_geo = (-(1 - p) * math.log(1 - p) - p * math.log(p)) / p
        assert rep["entropy"] == pytest.approx(h_geo, abs=0.05)
        assert rep["passed"]
        assert rep["bound"] - h_geo < 0.05

    def test_genie_records(self):
        recs = run_trials(cfg("genie_cond_user1", 64, 2, trials=1000))
        assert entropy_slack_check(recs)["passed"]

    def test_needs_records(self):
        with pytest.raises(ValueError):
            entropy_slack_check([walk_record(1, 1.0)] * 10)


def test_summarize_counts():
    recs = [TrialRecord(3, 5, (1, 1), (1, 1), False, False), TrialRecord(4, 4, (2, 1), (1, 1), True, False)]
    s = summarize(recs, 4, 4)
    assert s.errors == 1 and s.pe_hat == 0.5
    assert s.en1.mean == 3.5 and s.en_min.mean == 3.5
    assert s.rate1_nats == pytest.approx(math.log(4) / 3.5)


def _preimage(w):
    """Message whose permuted index is the original ``w``'s index."""
    for v in range(1, 9):
        if ((v - 1) * 5 + 3) % 8 == w - 1:
            return v
    raise AssertionError
