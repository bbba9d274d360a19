"""Sequential random-walk decoders for random variable-length codes.

Every hypothesis carries a score ``S(n) = sum_i Z_i`` of per-letter
log-likelihood ratios and the decoder stops once a score reaches its
threshold ``(1 + eps) ln M``. Scores are updated a block of channel uses
at a time; accumulation is strictly sequential, so results do not depend
on the block length.

Message indices are 1-based in the public API.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .channel import McChannel, sample_outputs
from .errors import DegenerateOutput
from .infomeasures import ProductInput, WalkKind, drift
from .schemes import Codebook

__all__ = [
    "Rule",
    "DecoderConfig",
    "TrialRecord",
    "WalkModel",
    "walk_increment",
    "default_max_steps",
    "run_joint",
    "run_genie_conditional",
    "run_combined",
    "run_successive",
    "run_trial",
]

_MAX_BLOCK_CELLS = 1 << 22
_FIRST_BLOCK = 16
_MAX_BLOCK = 256


class Rule(enum.Enum):
    JOINT = "joint"
    GENIE_COND_USER1 = "genie_cond_user1"  # decode user 1, user 2's message known
    GENIE_COND_USER2 = "genie_cond_user2"
    COMBINED = "combined"
    SUCCESSIVE = "successive"
    SUCCESSIVE_IC = "successive_ic"


@dataclass(frozen=True)
class DecoderConfig:
    epsilon: float
    rule: Rule = Rule.JOINT
    max_steps: int | None = None  # None: derived from the drifts, see default_max_steps

    def __post_init__(self):
        object.__setattr__(self, "rule", Rule(self.rule))
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one decoding trial.

    ``truth_times``/``truth_scores`` describe the walks of the transmitted
    message, one per walk family of the rule, each followed until its own
    threshold crossing (``None`` if it never crossed within the cap).
    Families: joint ``(joint,)``; genie ``(conditional,)``; combined
    ``(joint, cond. on w2, cond. on w1)``; successive rules
    ``(user 1, user 2)`` treating the other user as noise.
    """

    n1: int
    n2: int
    decoded: tuple[int | None, int | None]
    truth: tuple[int, int]
    error: bool
    capped: bool
    truth_times: tuple[int | None, ...] = ()
    truth_scores: tuple[float | None, ...] = ()

    @property
    def n_min(self) -> int:
        return min(self.n1, self.n2)

    @property
    def n_max(self) -> int:
        return max(self.n1, self.n2)


class WalkModel:
    """Log-probability tables used by the increments.

    Denominators marginalize the unknown user's symbol under the declared
    codebook input laws.
    """

    def __init__(self, ch: McChannel, p1, p2):
        self.ch = ch
        self.inp = ProductInput(p1, p2)
        w = ch.transition
        py_x1 = np.einsum("b,aby->ay", self.inp.p2, w)
        py_x2 = np.einsum("a,aby->by", self.inp.p1, w)
        py = self.inp.p1 @ py_x1
        with np.errstate(divide="ignore"):
            self.log_w = np.log(w)
            self.log_py = np.log(py)
            self.log_py_x1 = np.log(py_x1)
            self.log_py_x2 = np.log(py_x2)

    @classmethod
    def for_codebooks(cls, ch: McChannel, cb1: Codebook, cb2: Codebook) -> "WalkModel":
        return cls(ch, cb1.input_pmf, cb2.input_pmf)


def _ratio(num, den):
    """``num - den`` in log domain; a zero numerator eliminates the hypothesis."""
    den_dead = np.isneginf(den)
    if not den_dead.any():
        return num - den
    dead = np.isneginf(num)
    if np.any(den_dead & ~dead):
        raise DegenerateOutput("output has zero probability under the reference law")
    with np.errstate(invalid="ignore"):
        return np.where(dead, -np.inf, num - den)


def walk_increment(ch: McChannel, cb1: Codebook, cb2: Codebook, hypothesis, y: int, i: int,
                   kind: str = "joint") -> float:
    """One increment ``Z_i`` (nats) for a hypothesis at 1-based position ``i``.

    ``kind``: ``joint`` ``ln p(y|x1,x2)/p(y)``; ``cond_given_x2``
    ``ln p(y|x1,x2)/p(y|x2)``; ``cond_given_x1``; ``single_user1``
    ``ln p(y|x1)/p(y)``; ``single_user2``. ``hypothesis`` is ``(w1, w2)``;
    the single-user kinds ignore the other entry.
    """
    m = WalkModel.for_codebooks(ch, cb1, cb2)
    w1, w2 = hypothesis
    if not np.isfinite(m.log_py[y]):
        raise DegenerateOutput(f"output {y} is impossible under the model")
    x1 = int(cb1.symbols([w1 - 1], [i - 1])[0, 0]) if w1 is not None else None
    x2 = int(cb2.symbols([w2 - 1], [i - 1])[0, 0]) if w2 is not None else None
    if kind == "joint":
        num, den = m.log_w[x1, x2, y], m.log_py[y]
    elif kind == "cond_given_x2":
        num, den = m.log_w[x1, x2, y], m.log_py_x2[x2, y]
    elif kind == "cond_given_x1":
        num, den = m.log_w[x1, x2, y], m.log_py_x1[x1, y]
    elif kind == "single_user1":
        num, den = m.log_py_x1[x1, y], m.log_py[y]
    elif kind == "single_user2":
        num, den = m.log_py_x2[x2, y], m.log_py[y]
    else:
        raise ValueError(f"unknown increment kind {kind!r}")
    return float(_ratio(np.asarray(num), np.asarray(den)))


def _thresholds(eps: float, m1: int, m2: int):
    return (1 + eps) * math.log(m1 * m2), (1 + eps) * math.log(m1), (1 + eps) * math.log(m2)


def default_max_steps(model: WalkModel, rule: Rule, m1: int, m2: int, eps: float) -> int:
    """``50 * threshold / drift`` for the slowest walk family of the rule, at least 1000."""
    t12, t1, t2 = _thresholds(eps, m1, m2)
    ch, inp = model.ch, model.inp
    families = {
        Rule.JOINT: [(t12, WalkKind.JOINT_CORRECT)],
        Rule.GENIE_COND_USER1: [(t1, WalkKind.COND_CORRECT_GIVEN_X2)],
        Rule.GENIE_COND_USER2: [(t2, WalkKind.COND_CORRECT_GIVEN_X1)],
        Rule.COMBINED: [
            (t12, WalkKind.JOINT_CORRECT),
            (t1, WalkKind.COND_CORRECT_GIVEN_X2),
            (t2, WalkKind.COND_CORRECT_GIVEN_X1),
        ],
        Rule.SUCCESSIVE: [(t1, WalkKind.SINGLE_CORRECT_USER1), (t2, WalkKind.SINGLE_CORRECT_USER2)],
        Rule.SUCCESSIVE_IC: [(t1, WalkKind.SINGLE_CORRECT_USER1), (t2, WalkKind.SINGLE_CORRECT_USER2)],
    }[rule]
    worst = 0.0
    for thr, kind in families:
        d = drift(ch, inp, kind)
        if thr <= 0:
            continue
        if d <= 1e-12:
            return 100_000
        worst = max(worst, thr / d)
    return max(int(math.ceil(50 * worst)), 1000)


class _Trial:
    """Channel outputs for one transmission, generated on demand and cached."""

    def __init__(self, ch: McChannel, cb1: Codebook, cb2: Codebook, truth, rng: np.random.Generator):
        self.ch, self.cb1, self.cb2 = ch, cb1, cb2
        self.w1, self.w2 = truth
        if not (1 <= self.w1 <= cb1.m and 1 <= self.w2 <= cb2.m):
            raise ValueError(f"truth {truth} outside message sets")
        self.rng = rng
        self.y = np.empty(0, dtype=np.int64)

    def outputs(self, start: int, length: int) -> NDArray[np.int64]:
        end = start + length
        if end > self.y.size:
            pos = np.arange(self.y.size, end)
            x1 = self.cb1.symbols([self.w1 - 1], pos)[0]
            x2 = self.cb2.symbols([self.w2 - 1], pos)[0]
            self.y = np.concatenate([self.y, sample_outputs(self.ch, x1, x2, self.rng)])
        return self.y[start:end]


def _accumulate(prev, z):
    """Sequential running sums of ``z`` along the last axis starting from ``prev``."""
    full = np.concatenate([np.asarray(prev, dtype=float)[..., None], z], axis=-1)
    return np.cumsum(full, axis=-1)[..., 1:]


def _block_len(t: int, walks: int, remaining: int) -> int:
    cap = max(1, min(_MAX_BLOCK, _MAX_BLOCK_CELLS // max(walks, 1)))
    want = _FIRST_BLOCK if t == 0 else min(max(t, _FIRST_BLOCK), _MAX_BLOCK)
    return max(1, min(want, cap, remaining))


# increments over blocks: x1 (A, L), x2 (B, L), y (L)

def _z_joint(m: WalkModel, x1, x2, y):
    return _ratio(m.log_w[x1[:, None, :], x2[None, :, :], y], m.log_py[y])


def _z_cond_given_x2(m: WalkModel, x1, x2, y):
    return _ratio(m.log_w[x1[:, None, :], x2[None, :, :], y], m.log_py_x2[x2, y][None, :, :])


def _z_cond_given_x1(m: WalkModel, x1, x2, y):
    return _ratio(m.log_w[x1[:, None, :], x2[None, :, :], y], m.log_py_x1[x1, y][:, None, :])


def _z_single1(m: WalkModel, x1, y):
    return _ratio(m.log_py_x1[x1, y], m.log_py[y])


def _z_single2(m: WalkModel, x2, y):
    return _ratio(m.log_py_x2[x2, y], m.log_py[y])


class _TruthWalk:
    """Tracks one family's true-message walk until it crosses its threshold."""

    def __init__(self, threshold: float):
        self.threshold = threshold
        self.score = 0.0
        self.time: int | None = None
        self.final: float | None = None

    @property
    def done(self) -> bool:
        return self.time is not None

    def feed(self, t0: int, scores) -> None:
        """``scores`` are this walk's running scores at positions ``t0+1 ..``."""
        if self.done:
            return
        hit = np.flatnonzero(scores >= self.threshold)
        if hit.size:
            k = int(hit[0])
            self.time = t0 + k + 1
            self.final = float(scores[k])
        self.score = float(scores[-1])


def _first_true(mask_steps) -> int | None:
    idx = np.flatnonzero(mask_steps)
    return int(idx[0]) if idx.size else None


def _setup(ch, cb1, cb2, truth, cfg, rng, rule):
    # the entry point fixes the rule; the config only selects cancellation
    ic = rule is Rule.SUCCESSIVE and cfg.rule is Rule.SUCCESSIVE_IC
    cfg = DecoderConfig(cfg.epsilon, Rule.SUCCESSIVE_IC if ic else rule, cfg.max_steps)
    model = WalkModel.for_codebooks(ch, cb1, cb2)
    if model.inp.p1.size != ch.x1_size or model.inp.p2.size != ch.x2_size:
        raise ValueError("codebook alphabets do not match the channel")
    max_steps = cfg.max_steps or default_max_steps(model, cfg.rule, cb1.m, cb2.m, cfg.epsilon)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return cfg, model, max_steps, _Trial(ch, cb1, cb2, tuple(truth), rng)


def _finish_truth(trial: _Trial, model: WalkModel, walks, zfuncs, t: int, max_steps: int):
    """Continue the true-message walks after the decision until they cross."""
    w1, w2 = trial.w1 - 1, trial.w2 - 1
    while t < max_steps and not all(w.done for w in walks):
        L = _block_len(t, 1, max_steps - t)
        y = trial.outputs(t, L)
        pos = np.arange(t, t + L)
        x1 = trial.cb1.symbols([w1], pos)
        x2 = trial.cb2.symbols([w2], pos)
        for walk, zf in zip(walks, zfuncs):
            if not walk.done:
                z = zf(model, x1, x2, y).reshape(L)
                walk.feed(t, _accumulate(walk.score, z))
        t += L


def _record(n1, n2, decoded, truth, capped, walks):
    error = capped or tuple(decoded) != tuple(truth)
    return TrialRecord(
        n1=int(n1),
        n2=int(n2),
        decoded=tuple(decoded),
        truth=tuple(truth),
        error=bool(error),
        capped=bool(capped),
        truth_times=tuple(w.time for w in walks),
        truth_scores=tuple(w.final for w in walks),
    )


def run_joint(ch: McChannel, cb1: Codebook, cb2: Codebook, truth, cfg: DecoderConfig, rng=None) -> TrialRecord:
    """Stop when any of the ``M1 M2`` joint walks reaches ``(1+eps) ln(M1 M2)``."""
    cfg, model, max_steps, trial = _setup(ch, cb1, cb2, truth, cfg, rng, Rule.JOINT)
    m1, m2 = cb1.m, cb2.m
    thr = _thresholds(cfg.epsilon, m1, m2)[0]
    tw = _TruthWalk(thr)
    w1, w2 = trial.w1 - 1, trial.w2 - 1
    score = np.zeros((m1, m2))
    t = 0
    while t < max_steps:
        L = _block_len(t, m1 * m2, max_steps - t)
        y = trial.outputs(t, L)
        s = _accumulate(score, _z_joint(model, cb1.block(t, L), cb2.block(t, L), y))
        tw.feed(t, s[w1, w2])
        hit = (s >= thr).reshape(m1 * m2, L)
        k = _first_true(hit.any(axis=0))
        if k is not None:
            flat = int(np.argmax(hit[:, k]))
            n = t + k + 1
            dec = (flat // m2 + 1, flat % m2 + 1)
            _finish_truth(trial, model, [tw], [_z_joint], t + L, max_steps)
            return _record(n, n, dec, (trial.w1, trial.w2), False, [tw])
        score = s[..., -1]
        t += L
    return _record(max_steps, max_steps, (None, None), (trial.w1, trial.w2), True, [tw])


def run_genie_conditional(ch: McChannel, cb1: Codebook, cb2: Codebook, truth, known_side: int,
                          cfg: DecoderConfig, rng=None) -> TrialRecord:
    """Decode one user with the other user's message revealed.

    The known side is reported with decoding time 0 and its true message.
    """
    if known_side not in (1, 2):
        raise ValueError("known_side must be 1 or 2")
    rule = Rule.GENIE_COND_USER1 if known_side == 2 else Rule.GENIE_COND_USER2
    cfg, model, max_steps, trial = _setup(ch, cb1, cb2, truth, cfg, rng, rule)
    truth = (trial.w1, trial.w2)
    _, t1, t2 = _thresholds(cfg.epsilon, cb1.m, cb2.m)
    if known_side == 2:
        m, thr, own, zf = cb1.m, t1, trial.w1 - 1, _z_cond_given_x2
    else:
        m, thr, own, zf = cb2.m, t2, trial.w2 - 1, _z_cond_given_x1
    tw = _TruthWalk(thr)
    score = np.zeros(m)
    t = 0
    while t < max_steps:
        L = _block_len(t, m, max_steps - t)
        y = trial.outputs(t, L)
        pos = np.arange(t, t + L)
        if known_side == 2:
            z = zf(model, cb1.block(t, L), cb2.symbols([trial.w2 - 1], pos), y)[:, 0, :]
        else:
            z = zf(model, cb1.symbols([trial.w1 - 1], pos), cb2.block(t, L), y)[0]
        s = _accumulate(score, z)
        tw.feed(t, s[own])
        hit = s >= thr
        k = _first_true(hit.any(axis=0))
        if k is not None:
            w_hat = int(np.argmax(hit[:, k])) + 1
            n = t + k + 1
            _finish_truth(trial, model, [tw], [zf], t + L, max_steps)
            if known_side == 2:
                return _record(n, 0, (w_hat, trial.w2), truth, False, [tw])
            return _record(0, n, (trial.w1, w_hat), truth, False, [tw])
        score = s[:, -1]
        t += L
    if known_side == 2:
        return _record(max_steps, 0, (None, trial.w2), truth, True, [tw])
    return _record(0, max_steps, (trial.w1, None), truth, True, [tw])


def run_combined(ch: McChannel, cb1: Codebook, cb2: Codebook, truth, cfg: DecoderConfig, rng=None) -> TrialRecord:
    """Joint and both conditional rules in parallel over all message pairs.

    A pair is declared once each of its three walks has reached its
    threshold at some time up to now; ties go to the lexicographically
    smallest pair.
    """
    cfg, model, max_steps, trial = _setup(ch, cb1, cb2, truth, cfg, rng, Rule.COMBINED)
    truth = (trial.w1, trial.w2)
    m1, m2 = cb1.m, cb2.m
    thr = _thresholds(cfg.epsilon, m1, m2)
    zfs = (_z_joint, _z_cond_given_x2, _z_cond_given_x1)
    walks = [_TruthWalk(th) for th in thr]
    w1, w2 = trial.w1 - 1, trial.w2 - 1
    scores = [np.zeros((m1, m2)) for _ in range(3)]
    crossed = [np.zeros((m1, m2), dtype=bool) for _ in range(3)]
    t = 0
    while t < max_steps:
        L = _block_len(t, 3 * m1 * m2, max_steps - t)
        y = trial.outputs(t, L)
        x1, x2 = cb1.block(t, L), cb2.block(t, L)
        num = model.log_w[x1[:, None, :], x2[None, :, :], y]
        zs = (
            _ratio(num, model.log_py[y]),
            _ratio(num, model.log_py_x2[x2, y][None, :, :]),
            _ratio(num, model.log_py_x1[x1, y][:, None, :]),
        )
        all3 = None
        for f in range(3):
            s = _accumulate(scores[f], zs[f])
            walks[f].feed(t, s[w1, w2])
            c = np.logical_or.accumulate(s >= thr[f], axis=-1) | crossed[f][..., None]
            all3 = c if all3 is None else all3 & c
            scores[f] = s[..., -1]
            crossed[f] = c[..., -1]
        flat = all3.reshape(m1 * m2, L)
        k = _first_true(flat.any(axis=0))
        if k is not None:
            idx = int(np.argmax(flat[:, k]))
            n = t + k + 1
            _finish_truth(trial, model, walks, zfs, t + L, max_steps)
            return _record(n, n, (idx // m2 + 1, idx % m2 + 1), truth, False, walks)
        t += L
    return _record(max_steps, max_steps, (None, None), truth, True, walks)


def _single_walks(trial: _Trial, model: WalkModel, walks, max_steps: int) -> None:
    """Follow both true-message single-user walks from the start."""
    score = [0.0, 0.0]
    t = 0
    while t < max_steps and not all(w.done for w in walks):
        L = _block_len(t, 1, max_steps - t)
        y = trial.outputs(t, L)
        pos = np.arange(t, t + L)
        z = (
            _z_single1(model, trial.cb1.symbols([trial.w1 - 1], pos), y)[0],
            _z_single2(model, trial.cb2.symbols([trial.w2 - 1], pos), y)[0],
        )
        for u in (0, 1):
            if not walks[u].done:
                s = _accumulate(score[u], z[u])
                walks[u].feed(t, s)
                score[u] = float(s[-1])
        t += L


def run_successive(ch: McChannel, cb1: Codebook, cb2: Codebook, truth, cfg: DecoderConfig, rng=None) -> TrialRecord:
    """Single-user decoding of each message, treating the other user as noise.

    With ``Rule.SUCCESSIVE_IC``, once one message is decoded at time ``t``
    the other user's walks continue from ``t + 1`` with increments
    conditioned on the decoded codeword, keeping their accumulated scores.
    """
    cfg, model, max_steps, trial = _setup(ch, cb1, cb2, truth, cfg, rng, Rule.SUCCESSIVE)
    truth = (trial.w1, trial.w2)
    ic = cfg.rule is Rule.SUCCESSIVE_IC
    cbs = (cb1, cb2)
    _, t1, t2 = _thresholds(cfg.epsilon, cb1.m, cb2.m)
    thr = (t1, t2)
    score = [np.zeros(cb1.m), np.zeros(cb2.m)]
    done_at: list[int | None] = [None, None]
    decoded: list[int | None] = [None, None]
    t = 0
    while t < max_steps and None in done_at:
        live = [u for u in (0, 1) if done_at[u] is None]
        L = _block_len(t, sum(cbs[u].m for u in live), max_steps - t)
        y = trial.outputs(t, L)
        pos = np.arange(t, t + L)
        blk, first = {}, {}
        for u in live:
            own = cbs[u].block(t, L)
            v = 1 - u
            if ic and decoded[v] is not None:
                other = cbs[v].symbols([decoded[v] - 1], pos)
                if u == 0:
                    z = _z_cond_given_x2(model, own, other, y)[:, 0, :]
                else:
                    z = _z_cond_given_x1(model, other, own, y)[0]
            else:
                z = _z_single1(model, own, y) if u == 0 else _z_single2(model, own, y)
            blk[u] = _accumulate(score[u], z)
            first[u] = _first_true((blk[u] >= thr[u]).any(axis=0))
        events = [k for k in first.values() if k is not None]
        # stop the block at the first decision; with cancellation the other
        # user's increments change right after it
        k = min(events) if events else L - 1
        for u in live:
            if first[u] == k:
                decoded[u] = int(np.argmax(blk[u][:, k] >= thr[u])) + 1
                done_at[u] = t + k + 1
            score[u] = blk[u][:, k]
        t += k + 1
        pending = [u for u in (0, 1) if done_at[u] is None]
        if pending and all(np.all(np.isneginf(score[u])) for u in pending):
            # every remaining hypothesis is eliminated: nothing can decode any more
            break
    capped = None in done_at
    n = [d if d is not None else max_steps for d in done_at]
    walks = [_TruthWalk(t1), _TruthWalk(t2)]
    _single_walks(trial, model, walks, max_steps)
    return _record(n[0], n[1], decoded, truth, capped, walks)


def run_trial(ch: McChannel, cb1: Codebook, cb2: Codebook, truth, cfg: DecoderConfig, rng=None) -> TrialRecord:
    """Dispatch on ``cfg.rule``."""
    rule = Rule(cfg.rule)
    if rule is Rule.JOINT:
        return run_joint(ch, cb1, cb2, truth, cfg, rng)
    if rule is Rule.GENIE_COND_USER1:
        return run_genie_conditional(ch, cb1, cb2, truth, 2, cfg, rng)
    if rule is Rule.GENIE_COND_USER2:
        return run_genie_conditional(ch, cb1, cb2, truth, 1, cfg, rng)
    if rule is Rule.COMBINED:
        return run_combined(ch, cb1, cb2, truth, cfg, rng)
    return run_successive(ch, cb1, cb2, truth, cfg, rng)
