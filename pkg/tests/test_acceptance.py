"""Acceptance criteria 1 to 9, each at its stated tolerance.

Every test carries a ``criterion`` mark; ``conftest.py`` prints one
PASS/FAIL line per criterion at the end of the run.
"""

import csv
import io
import math
import time

import numpy as np
import pytest
from scipy.special import logsumexp

from macvlc.channel import builtin_channel, validate_channel
from macvlc.cli import main
from macvlc.decoders import DecoderConfig
from macvlc.errors import NonNegativeDrift
from macvlc.infomeasures import (
    ProductInput,
    WalkKind,
    channel_summary,
    chernoff_root,
    drift,
    increment_law,
    info_triple,
)
from macvlc.regions import (
    RegionQuery,
    block_capacity_region,
    eq1_boundary,
    hausdorff,
    outer_region,
    rectangle_region,
    region_corners,
    timeshare_rates,
)
from macvlc.schemes import SchemeSpec
from macvlc.simharness import (
    ExperimentConfig,
    concentration_check,
    entropy_slack_check,
    experiment_json,
    run_experiment,
    run_trials,
)

LN2 = math.log(2)
NOISY = builtin_channel("noisy_adder", 0.1)
EPS = 0.2
UNIT = [WalkKind.JOINT_BOTH_WRONG, WalkKind.COND_WRONG_GIVEN_X2, WalkKind.COND_WRONG_GIVEN_X1]
PARTIAL = [WalkKind.JOINT_W1_WRONG, WalkKind.JOINT_W2_WRONG]


def noisy_cfg(rule, m1=64, m2=64, trials=10_000, seed=0, workers=1):
    return ExperimentConfig(NOISY, SchemeSpec("random", m1, m2, seed=seed), DecoderConfig(EPS, rule), trials, seed,
                            workers)


@pytest.fixture(scope="module")
def noisy_triple():
    return info_triple(NOISY, ProductInput.uniform(NOISY))


def grid_root(values, weights):
    """Positive zero of the log-MGF on a dense grid, refined by one secant step."""
    finite = np.isfinite(values)
    v, lw = values[finite], np.log(weights[finite])

    def phi(lam):
        return logsumexp(lam[:, None] * v + lw, axis=-1)

    hi = 1.0
    while phi(np.array([hi]))[0] <= 0:
        hi *= 2
    lam = np.linspace(hi * 1e-7, hi, 400_001)
    f = phi(lam)
    k = int(np.flatnonzero((f[:-1] < 0) & (f[1:] >= 0))[0])
    a, b = lam[k], lam[k + 1]
    return a - f[k] * (b - a) / (f[k + 1] - f[k])


@pytest.mark.criterion(1)
def test_c1_capacity_oracle(record_property):
    t0 = time.perf_counter()
    adder = builtin_channel("adder")
    summ = channel_summary(adder)
    tri = info_triple(adder, ProductInput.uniform(adder))
    elapsed = time.perf_counter() - t0
    # closed form: each user alone sees a noiseless binary channel; the sum has law (1/4, 1/2, 1/4)
    h_sum = 1.5
    expected = {"C1": 1.0, "C2": 1.0, "I1": 1.0, "I2": 1.0, "I12": h_sum}
    got = {"C1": summ.c1 / LN2, "C2": summ.c2 / LN2, "I1": tri.i1 / LN2, "I2": tri.i2 / LN2, "I12": tri.i12 / LN2}
    worst = max(abs(got[k] - expected[k]) for k in expected)
    record_property("detail", f"max err {worst:.2e} bits, {elapsed:.3f}s")
    assert worst <= 1e-4
    assert elapsed < 1.0


@pytest.mark.criterion(2)
def test_c2_chernoff_roots(record_property):
    rng = np.random.default_rng(20240601)
    instances = []
    for _ in range(20):
        k1, k2, ky = (int(v) for v in rng.integers(2, 4, size=3))
        ch = validate_channel(rng.dirichlet(np.ones(ky), size=(k1, k2)))
        instances.append((ch, ProductInput(rng.dirichlet(np.ones(k1)), rng.dirichlet(np.ones(k2)))))
    t0 = time.perf_counter()
    unit = [chernoff_root(ch, inp, kind) for ch, inp in instances for kind in UNIT]
    partial = []
    for ch, inp in instances:
        for kind in PARTIAL:
            if drift(ch, inp, kind) < 0:
                partial.append((ch, inp, kind, chernoff_root(ch, inp, kind)))
            else:
                with pytest.raises(NonNegativeDrift):
                    chernoff_root(ch, inp, kind)
    elapsed = time.perf_counter() - t0
    unit_err = max(abs(r - 1.0) for r in unit)
    part_err = max((abs(r - grid_root(*increment_law(ch, inp, k))) for ch, inp, k, r in partial), default=0.0)
    record_property("detail", f"unit err {unit_err:.1e}, {len(partial)} partial roots err {part_err:.1e}, "
                              f"{elapsed:.2f}s")
    assert unit_err <= 1e-9
    assert partial, "no instance with a negative partial-mismatch drift"
    assert part_err <= 1e-6
    assert elapsed < 5.0


@pytest.mark.criterion(3)
def test_c3_region_endpoints(record_property):
    adder = builtin_channel("adder")
    t0 = time.perf_counter()
    rmac = block_capacity_region(adder, grid=101)
    full = outer_region(adder, RegionQuery(1.0, 1.0, 1.0), grid=101)
    none = outer_region(adder, RegionQuery(0.0, 0.0), grid=101)
    elapsed = time.perf_counter() - t0
    d_full = hausdorff(full, rmac)
    d_none = hausdorff(none, rectangle_region(channel_summary(adder)))
    record_property("detail", f"hausdorff {d_full:.1e} / {d_none:.1e} nats, {elapsed:.2f}s")
    assert d_full <= 1e-6 and d_none <= 1e-6
    assert elapsed < 10.0


@pytest.mark.criterion(4)
def test_c4_equal_ratio_boundary(record_property):
    adder = builtin_channel("adder")
    summ = channel_summary(adder)
    corners = region_corners(adder, summ)
    ends = eq1_boundary(summ, corners, [0.0, 1.0]).curve[:, 1:] / LN2
    np.testing.assert_allclose(ends, [[2 / 3, 1.0], [1.0, 2 / 3]], atol=1e-12)
    ps = np.linspace(0, 1, 101)
    curve = eq1_boundary(summ, corners, ps).curve[:, 1:]
    gaps = {}
    for eps in (0.05, 0.01, 0.001):
        ts = np.array([timeshare_rates(summ, corners, p, summ.c1, summ.c2, eps) for p in ps])
        assert np.all(ts <= curve + 1e-12)
        gaps[eps] = float(np.abs(curve - ts).max())
        assert gaps[eps] <= 10 * eps
    record_property("detail", "max gap " + ", ".join(f"{g / e:.2f}eps" for e, g in gaps.items()))


@pytest.fixture(scope="module")
def joint_run():
    t0 = time.perf_counter()
    summary = run_experiment(noisy_cfg("joint"))
    return summary, time.perf_counter() - t0


@pytest.mark.criterion(5)
def test_c5_wald_stopping_time(joint_run, noisy_triple, record_property):
    summary, elapsed = joint_run
    predicted = (1 + EPS) * math.log(64 * 64) / noisy_triple.i12
    rel = summary.en_min.mean / predicted - 1
    record_property("detail", f"E[N] {summary.en_min.mean:.3f} vs {predicted:.3f} ({rel:+.1%}), {elapsed:.1f}s")
    assert abs(rel) <= 0.10
    assert elapsed < 120.0


@pytest.fixture(scope="module")
def combined_run():
    return run_experiment(noisy_cfg("combined"), return_records=True)


@pytest.mark.criterion(6)
def test_c6_combined_error_bound(combined_run, record_property):
    summary, records = combined_run
    bound = (64 * 64) ** -EPS + 2 * 64**-EPS
    width = summary.pe_ci[1] - summary.pe_ci[0]
    late = [r for r in records if r.n_max > max(r.truth_times)]
    record_property("detail", f"Pe {summary.pe_hat:.4f} vs bound {bound:.4f} + 3x{width:.4f}, "
                              f"{len(late)} trials after the truth walks")
    assert summary.pe_hat <= bound + 3 * width
    assert len(records) == 10_000 and not late


def _sweep(decoder, ratios, base, trials):
    buf = io.StringIO()
    grid = ",".join(repr(float(r)) for r in ratios)
    code = main(["sweep", "noisy_adder:0.1", "--decoder", decoder, "--m-ratio-grid", grid, "--m-base", str(base),
                 "--trials", str(trials), "--epsilon", str(EPS)], out=buf)
    assert code == 0
    return list(csv.DictReader(io.StringIO(buf.getvalue())))


@pytest.mark.criterion(7)
def test_c7_achievability_sweep(noisy_triple, record_property):
    t = noisy_triple
    rho = t.i1 / t.marginal2
    details = []
    for row in _sweep("combined", [1.0, rho], 16, 1000):
        lm1, lm2 = math.log(int(row["M1"])), math.log(int(row["M2"]))
        n_pred = (1 + EPS) * max((lm1 + lm2) / t.i12, lm1 / t.i1, lm2 / t.i2)
        pred = np.array([lm1, lm2]) / n_pred
        got = np.array([float(row["rate1_nats"]), float(row["rate2_nats"])])
        ratio = got / pred
        details.append(f"ratio {float(row['logM1_over_logM2']):.3f}: {ratio[0]:.3f}/{ratio[1]:.3f}")
        assert np.all(np.abs(ratio - 1) <= 0.15)
    row = _sweep("successive", [1.0], 64, 1000)[0]
    floor = 0.85 * np.array([t.marginal1, t.marginal2]) / (1 + EPS)
    got = np.array([float(row["rate1_nats"]), float(row["rate2_nats"])])
    details.append(f"successive {got[0] / floor[0] * 0.85:.3f}/{got[1] / floor[1] * 0.85:.3f} of target")
    record_property("detail", ", ".join(details))
    assert np.all(got >= floor)


SIM_RULES = ["joint", "combined", "successive", "successive_ic", "genie_cond_user1", "genie_cond_user2"]


@pytest.mark.criterion(8)
def test_c8_diagnostics(record_property):
    # 2 -> 16 messages per user scales every log-M threshold by 4
    tails = []
    for rule in SIM_RULES:
        small = run_trials(noisy_cfg(rule, 2, 2, trials=2000, seed=11))
        big = run_trials(noisy_cfg(rule, 16, 16, trials=2000, seed=12))
        a, b = concentration_check(small, 0.2), concentration_check(big, 0.2)
        tails.append(f"{rule} {a:.3f}->{b:.3f}")
        assert b < a, rule
        for recs in (small, big):
            slack = entropy_slack_check(recs)
            assert slack["passed"], (rule, slack)
    record_property("detail", "tails " + ", ".join(tails))


@pytest.mark.criterion(9)
@pytest.mark.filterwarnings("ignore:.*hit max_steps")  # wrong first decisions under interference cancellation
def test_c9_determinism(record_property):
    outputs = {}
    for rule in ("combined", "successive_ic"):
        for workers in (1, 2, 3):
            cfg = noisy_cfg(rule, 16, 16, trials=300, seed=42, workers=workers)
            outputs[(rule, workers)] = experiment_json(cfg, run_experiment(cfg))
    for rule in ("combined", "successive_ic"):
        assert len({outputs[(rule, w)] for w in (1, 2, 3)}) == 1, rule
    spec = {"type": "mixed", "m1": 64, "m2": 64, "seed": 5, "lambda": 0.5, "phase1_rates_bits": [0.6, 0.25],
            "epsilon": 0.01}
    runs = []
    for workers in (1, 2):
        cfg = ExperimentConfig(NOISY, SchemeSpec.from_json(spec), DecoderConfig(EPS), 200, 7, workers)
        runs.append(experiment_json(cfg, run_experiment(cfg)))
    assert runs[0] == runs[1]
    record_property("detail", "JSON identical across 1/2/3 workers")
