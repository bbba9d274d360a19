"""Monte Carlo experiments: error rates, expected decoding times, receiver-side rates.

Trial ``i`` draws everything (message pair, codebook keys, channel noise)
from ``SeedSequence(master_seed, spawn_key=(i,))``, so any trial can be
replayed alone and summaries do not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import binomtest

from .channel import McChannel, channel_to_json
from .decoders import DecoderConfig, Rule, TrialRecord, run_combined, run_genie_conditional, run_trial
from .infomeasures import ProductInput, channel_summary
from .regions import lemma_slack
from .schemes import Codebook, Order, SchemeSpec, build_concat

__all__ = [
    "ExperimentConfig",
    "Estimate",
    "SimSummary",
    "run_trials",
    "summarize",
    "run_experiment",
    "trial_seed",
    "wald_check",
    "concentration_check",
    "entropy_slack_check",
    "records_to_csv",
]

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ExperimentConfig:
    channel: McChannel
    scheme: SchemeSpec
    decoder: DecoderConfig
    trials: int
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float

    @classmethod
    def of(cls, values) -> "Estimate":
        v = np.asarray(values, dtype=float)
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        return cls(float(v.mean()), se)


@dataclass(frozen=True)
class SimSummary:
    """Aggregates over trials. Rates are ``ln M / E[N]``; ``None`` where ``E[N] = 0``."""

    trials_used: int
    errors: int
    pe_hat: float
    pe_ci: tuple[float, float]
    en1: Estimate
    en2: Estimate
    en_min: Estimate
    r1_hat: float | None
    r2_hat: float | None
    rate1_nats: float | None
    rate2_nats: float | None
    capped_fraction: float

    @property
    def rate1_bits(self) -> float | None:
        return None if self.rate1_nats is None else self.rate1_nats / LN2

    @property
    def rate2_bits(self) -> float | None:
        return None if self.rate2_nats is None else self.rate2_nats / LN2

    def to_json(self) -> dict:
        out = asdict(self)
        out["pe_ci"] = list(self.pe_ci)
        out["rate1_bits"] = self.rate1_bits
        out["rate2_bits"] = self.rate2_bits
        out["units"] = {
            "en1": "channel uses",
            "en2": "channel uses",
            "en_min": "channel uses",
            "rate1_nats": "nats/use",
            "rate2_nats": "nats/use",
            "rate1_bits": "bits/use",
            "rate2_bits": "bits/use",
        }
        return out


def trial_seed(master_seed: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(trial,))


def _codebook_key(scheme_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence(scheme_seed, spawn_key=(trial,)).generate_state(1, np.uint64)[0])


def _scheme_pmfs(ch: McChannel, scheme: SchemeSpec):
    p1 = scheme.p1 if scheme.p1 is not None else np.full(ch.x1_size, 1.0 / ch.x1_size)
    p2 = scheme.p2 if scheme.p2 is not None else np.full(ch.x2_size, 1.0 / ch.x2_size)
    inp = ProductInput(p1, p2)
    return inp.p1, inp.p2


def _concat_parts(ch: McChannel, scheme: SchemeSpec):
    """Nominal concatenated codes for a ``concat``/``mixed`` scheme file."""
    if scheme.phase1_rates_bits is None or scheme.epsilon is None:
        raise ValueError(f"{scheme.type} scheme needs phase1_rates_bits and epsilon")
    summ = channel_summary(ch)
    r1s, r2s = (r * LN2 for r in scheme.phase1_rates_bits)
    eps = scheme.epsilon
    v1 = build_concat(scheme.m1, scheme.m2, (r1s, r2s), summ.c2, eps, Order.V1, summ.c2_letter)
    v2 = build_concat(scheme.m1, scheme.m2, (r1s, r2s), summ.c1, eps, Order.V2, summ.c1_letter)
    return summ, v1, v2


def _split(m_total: int, first_share: float) -> tuple[int, int]:
    """Split a message set into a phase-1 part of about ``exp(first_share)`` and the rest."""
    head = int(min(max(round(math.exp(first_share)), 1), m_total))
    return head, -(-m_total // head)


def _run_concat_trial(ch, scheme, dec, order, trial, rng, summ, truth):
    """One concatenated-code transmission decoded phase by phase.

    Phase 1 carries the first user's whole message and part of the other
    one, decoded with the combined rule. Phase 2 carries the remainder
    while the first user sends its fixed letter; it is decoded by the
    conditional rule with that letter known.
    """
    p1, p2 = _scheme_pmfs(ch, scheme)
    w1, w2 = truth
    lm1, lm2 = math.log(scheme.m1), math.log(scheme.m2)
    r1s, r2s = (r * LN2 for r in scheme.phase1_rates_bits)
    key = _codebook_key(scheme.seed, trial)
    if order is Order.V1:
        head, tail = _split(scheme.m2, r2s * lm1 / r1s)
        wa, wb = divmod(w2 - 1, tail)
        m_first = (scheme.m1, head)
        t_first = (w1, wa + 1)
    else:
        head, tail = _split(scheme.m1, r1s * lm2 / r2s)
        wa, wb = divmod(w1 - 1, tail)
        m_first = (head, scheme.m2)
        t_first = (wa + 1, w2)
    cb1 = Codebook(m_first[0], p1, key, 1)
    cb2 = Codebook(m_first[1], p2, key, 2)
    r1 = run_combined(ch, cb1, cb2, t_first, DecoderConfig(dec.epsilon, Rule.COMBINED, dec.max_steps), rng)
    n_first = r1.n1
    ok = not r1.error
    capped = r1.capped
    if tail > 1:
        key2 = _codebook_key(scheme.seed ^ 0x5A5A5A5A, trial)
        if order is Order.V1:
            fixed = summ.c2_argmax
            cbf = Codebook(1, fixed.p1, key2, 1)
            cbs = Codebook(tail, fixed.p2, key2, 2)
            r2 = run_genie_conditional(ch, cbf, cbs, (1, wb + 1), 1,
                                       DecoderConfig(dec.epsilon, Rule.GENIE_COND_USER2, dec.max_steps), rng)
            n_second = r2.n2
        else:
            fixed = summ.c1_argmax
            cbs = Codebook(tail, fixed.p1, key2, 1)
            cbf = Codebook(1, fixed.p2, key2, 2)
            r2 = run_genie_conditional(ch, cbs, cbf, (wb + 1, 1), 2,
                                       DecoderConfig(dec.epsilon, Rule.GENIE_COND_USER1, dec.max_steps), rng)
            n_second = r2.n1
        ok = ok and not r2.error
        capped = capped or r2.capped
    else:
        n_second = 0
    if order is Order.V1:
        n1, n2 = n_first, n_first + n_second
    else:
        n1, n2 = n_first + n_second, n_first
    decoded = truth if ok else (None, None)
    return TrialRecord(n1, n2, decoded, truth, not ok, capped)


def _one_trial(cfg: ExperimentConfig, trial: int, summ=None) -> TrialRecord:
    rng = np.random.default_rng(trial_seed(cfg.master_seed, trial))
    sch = cfg.scheme
    truth = (int(rng.integers(1, sch.m1 + 1)), int(rng.integers(1, sch.m2 + 1)))
    if sch.type == "random":
        p1, p2 = _scheme_pmfs(cfg.channel, sch)
        key = _codebook_key(sch.seed, trial)
        cb1, cb2 = Codebook(sch.m1, p1, key, 1), Codebook(sch.m2, p2, key, 2)
        return run_trial(cfg.channel, cb1, cb2, truth, cfg.decoder, rng)
    if summ is None:
        summ = channel_summary(cfg.channel)
    if sch.type == "concat":
        order = Order(sch.extra.get("order", "v1"))
    else:
        lam = 1.0 if sch.lam is None else float(sch.lam)
        order = Order.V1 if rng.random() < lam else Order.V2
    return _run_concat_trial(cfg.channel, sch, cfg.decoder, order, trial, rng, summ, truth)


def _run_range(cfg: ExperimentConfig, start: int, stop: int) -> list[TrialRecord]:
    summ = None
    if cfg.scheme.type != "random":
        if cfg.scheme.phase1_rates_bits is None or cfg.scheme.epsilon is None:
            raise ValueError(f"{cfg.scheme.type} scheme needs phase1_rates_bits and epsilon")
        summ = channel_summary(cfg.channel)
    return [_one_trial(cfg, i, summ) for i in range(start, stop)]


def run_trials(cfg: ExperimentConfig) -> list[TrialRecord]:
    """All trial records, in trial order."""
    if cfg.workers == 1 or cfg.trials < 2:
        return _run_range(cfg, 0, cfg.trials)
    chunks = min(cfg.trials, cfg.workers * 4)
    bounds = np.linspace(0, cfg.trials, chunks + 1).astype(int)
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        futs = [pool.submit(_run_range, cfg, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        out: list[TrialRecord] = []
        for f in futs:
            out.extend(f.result())
    return out


def summarize(records: list[TrialRecord], m1: int, m2: int) -> SimSummary:
    n = len(records)
    errors = sum(r.error for r in records)
    ci = binomtest(errors, n).proportion_ci(confidence_level=0.95, method="wilson")
    en1 = Estimate.of([r.n1 for r in records])
    en2 = Estimate.of([r.n2 for r in records])
    en_min = Estimate.of([r.n_min for r in records])

    def ratio(a, b):
        return a / b if b > 0 else None

    return SimSummary(
        trials_used=n,
        errors=int(errors),
        pe_hat=errors / n,
        pe_ci=(float(ci.low), float(ci.high)),
        en1=en1,
        en2=en2,
        en_min=en_min,
        r1_hat=ratio(en_min.mean, en1.mean),
        r2_hat=ratio(en_min.mean, en2.mean),
        rate1_nats=ratio(math.log(m1), en1.mean),
        rate2_nats=ratio(math.log(m2), en2.mean),
        capped_fraction=sum(r.capped for r in records) / n,
    )


def run_experiment(cfg: ExperimentConfig, return_records: bool = False):
    """Run all trials and summarize; optionally also return the records."""
    records = run_trials(cfg)
    summary = summarize(records, cfg.scheme.m1, cfg.scheme.m2)
    if summary.capped_fraction > 0.01:
        warnings.warn(f"{summary.capped_fraction:.1%} of trials hit max_steps", RuntimeWarning, stacklevel=2)
    return (summary, records) if return_records else summary


def experiment_json(cfg: ExperimentConfig, summary: SimSummary) -> str:
    """Summary plus config echo, serialized deterministically."""
    doc = {
        "config": {
            "channel": {"name": cfg.channel.name, **channel_to_json(cfg.channel)},
            "scheme": cfg.scheme.to_json(),
            "decoder": {
                "rule": cfg.decoder.rule.value,
                "epsilon": cfg.decoder.epsilon,
                "max_steps": cfg.decoder.max_steps,
            },
            "trials": cfg.trials,
            "master_seed": cfg.master_seed,
        },
        "summary": summary.to_json(),
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def records_to_csv(records: list[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "n1", "n2", "error", "capped"])
    for i, r in enumerate(records):
        w.writerow([i, r.n1, r.n2, int(r.error), int(r.capped)])
    return buf.getvalue()


# diagnostics

def _walk_samples(records, family: int):
    pairs = [
        (r.truth_times[family], r.truth_scores[family])
        for r in records
        if len(r.truth_times) > family and r.truth_times[family] is not None
    ]
    if not pairs:
        raise ValueError("no record carries a crossing of this walk family")
    times, scores = (np.asarray(v, dtype=float) for v in zip(*pairs))
    return times, scores


def wald_check(records: list[TrialRecord], drift: float, threshold: float,
               max_increment: float = math.inf, family: int = 0) -> dict:
    """Wald's identity on the true-message walk of one family.

    ``gap = drift * E[N] - threshold`` is the overshoot implied by Wald's
    identity; it must lie in ``[0, max_increment]``. ``residual =
    E[S(N)] - drift * E[N]`` must vanish. Both are judged at 3 stderr.
    """
    times, scores = _walk_samples(records, family)
    n = times.size
    en = float(times.mean())
    se = lambda v: float(np.std(v, ddof=1) / math.sqrt(n)) if n > 1 else 0.0  # noqa: E731
    mean_score = float(scores.mean())
    gap = drift * en - threshold
    gap_se = abs(drift) * se(times)
    residual = mean_score - drift * en
    residual_se = se(scores - drift * times)
    gap_ok = -3 * gap_se - 1e-12 <= gap <= max_increment + 3 * gap_se + 1e-12
    residual_ok = abs(residual) <= 3 * residual_se + 1e-9
    return {
        "samples": n,
        "mean_final_score": mean_score,
        "drift_times_en": drift * en,
        "en": en,
        "gap": gap,
        "gap_stderr": gap_se,
        "gap_over_threshold": gap / threshold if threshold > 0 else math.inf,
        "residual": residual,
        "residual_stderr": residual_se,
        "passed": bool(gap_ok and residual_ok),
    }


def _times(records, field: str):
    # capped trials are censored, their N is the step cap rather than a stopping time
    n = np.asarray([getattr(r, field) for r in records if not r.capped], dtype=float)
    if n.size == 0:
        raise ValueError("no uncapped records")
    return n


def concentration_check(records: list[TrialRecord], eps_star: float, field: str = "n_max") -> float:
    """Empirical ``Pr(|N - E[N]| > eps_star * E[N])``."""
    if not eps_star > 0:
        raise ValueError("eps_star must be positive")
    n = _times(records, field)
    mean = n.mean()
    return float(np.mean(np.abs(n - mean) > eps_star * mean))


def entropy_slack_check(records: list[TrialRecord], field: str = "n_max", min_records: int = 1000) -> dict:
    """Empirical entropy of the stopping time against ``1 + ln E[N]`` (nats).

    The plug-in entropy gets the Miller–Madow bias correction; the check
    allows 3 standard errors of the estimate on top of the bound.
    """
    n = _times(records, field)
    if n.size < min_records:
        raise ValueError(f"need at least {min_records} records, got {n.size}")
    _, counts = np.unique(n, return_counts=True)
    p = counts / n.size
    plug_in = float(-(p * np.log(p)).sum())
    h_mm = plug_in + (counts.size - 1) / (2 * n.size)
    surprisal = -np.log(p)
    se = float(math.sqrt(max((p * surprisal**2).sum() - plug_in**2, 0.0) / n.size))
    bound = lemma_slack(float(n.mean()))
    return {
        "entropy": h_mm,
        "entropy_plug_in": plug_in,
        "stderr": se,
        "bound": bound,
        "passed": bool(h_mm <= bound + 3 * se),
    }
