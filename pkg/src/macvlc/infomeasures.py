"""Information quantities of a two-user channel under product inputs.

All values are in nats. Besides the mutual informations this module
describes the per-letter increments of every random walk the sequential
decoders run, both for the transmitted message and for the wrong ones,
and finds the positive root of their log moment generating functions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

from .channel import McChannel
from .errors import NoConvergence, NonNegativeDrift, NoPositiveRoot

PMF_TOL = 1e-12

__all__ = [
    "ProductInput",
    "TimeSharedInput",
    "InfoTriple",
    "WalkKind",
    "ChannelSummary",
    "info_triple",
    "info_triple_timeshared",
    "info_triples_grid",
    "single_user_capacity",
    "channel_summary",
    "increment_law",
    "drift",
    "max_increment",
    "log_mgf",
    "chernoff_root",
    "lambda_condition_check",
    "output_marginals",
]


def _check_pmf(p: ArrayLike, what: str) -> NDArray[np.float64]:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{what} must be a non-empty 1-d pmf")
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > PMF_TOL:
        raise ValueError(f"{what} is not a pmf: {arr}")
    return arr


@dataclass(frozen=True, eq=False)
class ProductInput:
    """Independent input laws ``p(x1) p(x2)``."""

    p1: NDArray[np.float64]
    p2: NDArray[np.float64]

    def __post_init__(self):
        for name in ("p1", "p2"):
            arr = _check_pmf(getattr(self, name), name).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(cls, ch: McChannel) -> "ProductInput":
        return cls(np.full(ch.x1_size, 1.0 / ch.x1_size), np.full(ch.x2_size, 1.0 / ch.x2_size))

    def check_against(self, ch: McChannel) -> None:
        if self.p1.size != ch.x1_size or self.p2.size != ch.x2_size:
            raise ValueError(
                f"input sizes ({self.p1.size}, {self.p2.size}) do not match channel "
                f"({ch.x1_size}, {ch.x2_size})"
            )


@dataclass(frozen=True)
class TimeSharedInput:
    """Mixture of at most two product inputs selected by ``Q``."""

    weights: tuple[float, ...]
    components: tuple[ProductInput, ...]

    def __post_init__(self):
        w = _check_pmf(self.weights, "weights")
        if len(self.components) != w.size or w.size not in (1, 2):
            raise ValueError("time sharing needs one or two components matching the weights")
        object.__setattr__(self, "weights", tuple(float(v) for v in w))
        object.__setattr__(self, "components", tuple(self.components))


@dataclass(frozen=True)
class InfoTriple:
    """``(I(X1;Y|X2), I(X2;Y|X1), I(X1,X2;Y))`` in nats."""

    i1: float
    i2: float
    i12: float

    @property
    def marginal1(self) -> float:
        """``I(X1;Y) = I(X1,X2;Y) - I(X2;Y|X1)``."""
        return self.i12 - self.i2

    @property
    def marginal2(self) -> float:
        return self.i12 - self.i1

    def scaled(self, factor: float) -> "InfoTriple":
        return InfoTriple(self.i1 * factor, self.i2 * factor, self.i12 * factor)


@dataclass(frozen=True)
class ChannelSummary:
    """Single-link capacities ``C1``, ``C2`` (nats) and inputs achieving them."""

    c1: float
    c2: float
    c1_argmax: ProductInput
    c2_argmax: ProductInput

    @property
    def c1_letter(self) -> int:
        """The fixed letter of user 2 at which ``C1`` is attained."""
        return int(np.argmax(self.c1_argmax.p2))

    @property
    def c2_letter(self) -> int:
        return int(np.argmax(self.c2_argmax.p1))


class WalkKind(enum.Enum):
    JOINT_CORRECT = "joint_correct"
    JOINT_BOTH_WRONG = "joint_both_wrong"
    JOINT_W1_WRONG = "joint_w1_wrong"
    JOINT_W2_WRONG = "joint_w2_wrong"
    COND_CORRECT_GIVEN_X2 = "cond_correct_given_x2"
    COND_WRONG_GIVEN_X2 = "cond_wrong_given_x2"
    COND_CORRECT_GIVEN_X1 = "cond_correct_given_x1"
    COND_WRONG_GIVEN_X1 = "cond_wrong_given_x1"
    SINGLE_CORRECT_USER1 = "single_correct_user1"
    SINGLE_WRONG_USER1 = "single_wrong_user1"
    SINGLE_CORRECT_USER2 = "single_correct_user2"
    SINGLE_WRONG_USER2 = "single_wrong_user2"

    @property
    def is_wrong(self) -> bool:
        return "wrong" in self.value


def _xlogy_ratio(weight, num, den):
    """Elementwise ``weight * ln(num / den)`` with ``0 * anything = 0``."""
    weight, num, den = np.broadcast_arrays(weight, num, den)
    out = np.zeros(weight.shape)
    mask = weight > 0
    out[mask] = weight[mask] * np.log(num[mask] / den[mask])
    return out


def output_marginals(ch: McChannel, inp: ProductInput):
    """Return ``p(y)``, ``p(y|x1)`` (shape x1,y) and ``p(y|x2)`` (shape x2,y)."""
    w = ch.transition
    py_x1 = np.einsum("b,aby->ay", inp.p2, w)
    py_x2 = np.einsum("a,aby->by", inp.p1, w)
    py = inp.p1 @ py_x1
    return py, py_x1, py_x2


def info_triple(ch: McChannel, inp: ProductInput) -> InfoTriple:
    """Exact finite-sum mutual informations for a product input."""
    inp.check_against(ch)
    w = ch.transition
    py, py_x1, py_x2 = output_marginals(ch, inp)
    joint = inp.p1[:, None, None] * inp.p2[None, :, None] * w
    i1 = _xlogy_ratio(joint, w, py_x2[None, :, :]).sum()
    i2 = _xlogy_ratio(joint, w, py_x1[:, None, :]).sum()
    i12 = _xlogy_ratio(joint, w, py[None, None, :]).sum()
    # round-off can leave tiny negatives
    return InfoTriple(max(float(i1), 0.0), max(float(i2), 0.0), max(float(i12), 0.0))


def info_triple_timeshared(ch: McChannel, inp: TimeSharedInput) -> InfoTriple:
    parts = [info_triple(ch, comp) for comp in inp.components]
    return InfoTriple(
        sum(w * t.i1 for w, t in zip(inp.weights, parts)),
        sum(w * t.i2 for w, t in zip(inp.weights, parts)),
        sum(w * t.i12 for w, t in zip(inp.weights, parts)),
    )


def _entropy_terms(p):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, -p * np.log(np.where(p > 0, p, 1.0)), 0.0)


def info_triples_grid(ch: McChannel, p1s: NDArray, p2s: NDArray):
    """Vectorized triples over all pairs of rows of ``p1s`` (a, k1) and ``p2s`` (b, k2).

    Returns three ``(a, b)`` arrays ``i1, i2, i12`` computed via entropies:
    ``I(X1;Y|X2) = H(Y|X2) - H(Y|X1,X2)`` and so on.
    """
    w = ch.transition
    hrow = _entropy_terms(w).sum(axis=-1)  # H(Y|x1,x2)
    h_cond = np.einsum("ia,jb,ab->ij", p1s, p2s, hrow)
    py_x2 = np.einsum("ia,aby->iby", p1s, w)  # (a, k2, y)
    py_x1 = np.einsum("jb,aby->jay", p2s, w)  # (b, k1, y)
    h_y_x2 = np.einsum("jb,ib->ij", p2s, _entropy_terms(py_x2).sum(axis=-1))
    h_y_x1 = np.einsum("ia,ja->ij", p1s, _entropy_terms(py_x1).sum(axis=-1))
    py = np.einsum("ia,jay->ijy", p1s, py_x1)
    h_y = _entropy_terms(py).sum(axis=-1)
    return (
        np.maximum(h_y_x2 - h_cond, 0.0),
        np.maximum(h_y_x1 - h_cond, 0.0),
        np.maximum(h_y - h_cond, 0.0),
    )


def single_user_capacity(rows: ArrayLike, tol: float = 1e-9, max_iter: int = 100_000):
    """Capacity (nats) of a single-user channel ``rows[x, y] = p(y|x)``.

    Blahut–Arimoto iteration. At every step the mutual information at the
    current input is a lower bound and ``max_x D(p(.|x) || q)`` an upper
    bound; iteration stops when they are closer than ``tol``. Returns the
    bracket midpoint and the current input pmf.
    """
    w = np.asarray(rows, dtype=np.float64)
    nx = w.shape[0]
    p = np.full(nx, 1.0 / nx)
    logw = np.log(np.where(w > 0, w, 1.0))
    for _ in range(max_iter):
        q = p @ w
        with np.errstate(divide="ignore"):
            logq = np.log(np.where(q > 0, q, 1.0))
        # D(p(.|x) || q) for each input letter
        d = np.sum(np.where(w > 0, w * (logw - logq), 0.0), axis=1)
        lower = float(p @ d)
        upper = float(d.max())
        if upper - lower < tol:
            return max(0.5 * (lower + upper), 0.0), p
        p = p * np.exp(d - upper)
        p /= p.sum()
    raise NoConvergence(f"Blahut-Arimoto did not reach width {tol} in {max_iter} iterations")


def channel_summary(ch: McChannel) -> ChannelSummary:
    """``C1`` and ``C2`` by reduction to fixed cross letters.

    For fixed ``p(x1)``, ``I(X1;Y|X2)`` is linear in ``p(x2)``, so the
    maximum over product inputs sits at a point mass on one letter of the
    other user.
    """
    best1 = max(
        ((single_user_capacity(ch.transition[:, b, :]), b) for b in range(ch.x2_size)),
        key=lambda t: t[0][0],
    )
    best2 = max(
        ((single_user_capacity(ch.transition[a, :, :]), a) for a in range(ch.x1_size)),
        key=lambda t: t[0][0],
    )
    (c1, p1), b = best1
    (c2, p2), a = best2
    return ChannelSummary(
        c1=c1,
        c2=c2,
        c1_argmax=ProductInput(p1, np.eye(ch.x2_size)[b]),
        c2_argmax=ProductInput(np.eye(ch.x1_size)[a], p2),
    )


def increment_law(ch: McChannel, inp: ProductInput, kind: WalkKind):
    """Discrete law of one walk increment.

    Returns ``(values, weights)`` with zero-weight atoms dropped. Values may
    be ``-inf`` (hypothesis inconsistent with the output).

    Wrong kinds pair the output law induced by the transmitted symbols with
    an independent codeword symbol of the wrong hypothesis.
    """
    inp.check_against(ch)
    w = ch.transition
    p1, p2 = inp.p1, inp.p2
    py, py_x1, py_x2 = output_marginals(ch, inp)
    k = kind
    if k is WalkKind.JOINT_CORRECT:
        weight = p1[:, None, None] * p2[None, :, None] * w
        num, den = w, py[None, None, :]
    elif k is WalkKind.JOINT_BOTH_WRONG:
        weight = p1[:, None, None] * p2[None, :, None] * py[None, None, :]
        num, den = w, py[None, None, :]
    elif k is WalkKind.JOINT_W1_WRONG:
        # hypothesis x1' independent, true x2 shared: y ~ p(y|x2)
        weight = p1[:, None, None] * p2[None, :, None] * py_x2[None, :, :]
        num, den = w, py[None, None, :]
    elif k is WalkKind.JOINT_W2_WRONG:
        weight = p1[:, None, None] * p2[None, :, None] * py_x1[:, None, :]
        num, den = w, py[None, None, :]
    elif k is WalkKind.COND_CORRECT_GIVEN_X2:
        weight = p1[:, None, None] * p2[None, :, None] * w
        num, den = w, py_x2[None, :, :]
    elif k is WalkKind.COND_WRONG_GIVEN_X2:
        weight = p1[:, None, None] * p2[None, :, None] * py_x2[None, :, :]
        num, den = w, py_x2[None, :, :]
    elif k is WalkKind.COND_CORRECT_GIVEN_X1:
        weight = p1[:, None, None] * p2[None, :, None] * w
        num, den = w, py_x1[:, None, :]
    elif k is WalkKind.COND_WRONG_GIVEN_X1:
        weight = p1[:, None, None] * p2[None, :, None] * py_x1[:, None, :]
        num, den = w, py_x1[:, None, :]
    elif k is WalkKind.SINGLE_CORRECT_USER1:
        weight = p1[:, None] * py_x1
        num, den = py_x1, py[None, :]
    elif k is WalkKind.SINGLE_WRONG_USER1:
        weight = p1[:, None] * py[None, :]
        num, den = py_x1, py[None, :]
    elif k is WalkKind.SINGLE_CORRECT_USER2:
        weight = p2[:, None] * py_x2
        num, den = py_x2, py[None, :]
    elif k is WalkKind.SINGLE_WRONG_USER2:
        weight = p2[:, None] * py[None, :]
        num, den = py_x2, py[None, :]
    else:  # pragma: no cover
        raise ValueError(kind)
    weight, num, den = np.broadcast_arrays(weight, num, den)
    mask = weight > 0
    weight, num, den = weight[mask], num[mask], den[mask]
    with np.errstate(divide="ignore"):
        values = np.where(num > 0, np.log(np.where(num > 0, num, 1.0) / den), -np.inf)
    return values, weight


def drift(ch: McChannel, inp: ProductInput, kind: WalkKind) -> float:
    """Expected increment per channel use (nats); ``-inf`` if any atom is ``-inf``."""
    values, weights = increment_law(ch, inp, kind)
    if np.any(np.isneginf(values)):
        return -math.inf
    return float(np.dot(weights, values))


def max_increment(ch: McChannel, inp: ProductInput, kind: WalkKind) -> float:
    """Largest increment value with positive probability."""
    values, _ = increment_law(ch, inp, kind)
    return float(values.max())


def log_mgf(values: NDArray, weights: NDArray, lam: float) -> float:
    """``ln E[exp(lam * Z)]`` for ``lam > 0``; ``-inf`` atoms contribute 0."""
    finite = np.isfinite(values)
    if not finite.any():
        return -math.inf
    return float(logsumexp(lam * values[finite], b=weights[finite]))


def chernoff_root(ch: McChannel, inp: ProductInput, kind: WalkKind, tol: float = 1e-10) -> float:
    """Unique positive root of the log-MGF of a wrong-hypothesis increment.

    Bracketing followed by bisection. Raises :class:`NoPositiveRoot` if the
    increment is never positive, :class:`NonNegativeDrift` if its mean is
    not negative.
    """
    values, weights = increment_law(ch, inp, kind)
    finite = np.isfinite(values)
    if not np.any(values[finite] > 0):
        raise NoPositiveRoot(f"{kind.value}: increment is non-positive almost surely")
    mean = -math.inf if not finite.all() else float(np.dot(weights, values))
    if mean >= 0:
        raise NonNegativeDrift(f"{kind.value}: drift {mean} is not negative")

    def phi(lam):
        return log_mgf(values, weights, lam)

    hi = 1.0
    while phi(hi) <= 0:
        hi *= 2.0
        if hi > 1e12:
            raise NoConvergence("could not bracket the positive root")
    # phi < 0 just above zero: either P(Z = -inf) > 0 or phi'(0) = drift < 0
    lo = hi / 2.0
    while phi(lo) >= 0:
        lo /= 2.0
        if lo < 1e-300:
            raise NoConvergence("could not bracket the positive root from below")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        f = phi(mid)
        if f < 0:
            lo = mid
        else:
            hi = mid
        if abs(f) < tol and hi - lo < 1e-13 * max(1.0, mid):
            break
        if hi - lo <= 4 * np.finfo(float).eps * mid:
            break
    return 0.5 * (lo + hi)


def lambda_condition_check(ch: McChannel, inp: ProductInput) -> tuple[bool, bool]:
    """Check the sufficient root conditions for the plain joint decoder.

    Returns ``(root(w2 wrong) >= I(X2;Y|X1)/I(X1,X2;Y),
    root(w1 wrong) >= I(X1;Y|X2)/I(X1,X2;Y))``. A zero right-hand side is
    satisfied trivially; a walk that can never rise has an infinite root.
    """
    t = info_triple(ch, inp)
    out = []
    for kind, num in ((WalkKind.JOINT_W2_WRONG, t.i2), (WalkKind.JOINT_W1_WRONG, t.i1)):
        if num <= 0 or t.i12 <= 0:
            out.append(True)
            continue
        try:
            root = chernoff_root(ch, inp, kind)
        except NoPositiveRoot:
            root = NoPositiveRoot.sentinel
        out.append(bool(root >= num / t.i12))
    return out[0], out[1]
