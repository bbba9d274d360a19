"""Codes: lazily evaluated random codebooks and concatenated block-code schemes."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import MessageOutOfRange, NonPositiveRate
from .infomeasures import _check_pmf

__all__ = [
    "Codebook",
    "codeword_symbol",
    "Order",
    "ConcatScheme",
    "MixedScheme",
    "build_concat",
    "mixed_rates",
    "corner_schemes",
    "SchemeSpec",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(z):
    """SplitMix64 finalizer, elementwise on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _hash_uniform(seed: int, user: int, w, i) -> NDArray[np.float64]:
    """Counter-mode uniform in [0, 1) keyed by ``(seed, user, w, i)``."""
    w = np.asarray(w, dtype=np.uint64)
    i = np.asarray(i, dtype=np.uint64)
    with np.errstate(over="ignore"):
        key = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN * np.uint64(user))
        h = _mix64(key ^ _mix64(w * _GOLDEN + np.uint64(1)))
        h = _mix64(h + i * _GOLDEN)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True, eq=False)
class Codebook:
    """``m`` infinite i.i.d. codewords over one user's alphabet.

    The symbol at position ``i`` of message ``w`` (both 1-based) is a pure
    function of ``(seed, user, w, i)``; nothing is materialized.
    """

    m: int
    input_pmf: NDArray[np.float64]
    seed: int
    user: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("a codebook needs at least one message")
        if self.user not in (1, 2):
            raise ValueError("user must be 1 or 2")
        pmf = _check_pmf(self.input_pmf, "input_pmf").copy()
        pmf.setflags(write=False)
        object.__setattr__(self, "input_pmf", pmf)
        cdf = np.cumsum(pmf)
        cdf[-1] = 1.0
        object.__setattr__(self, "_cdf", cdf)

    @property
    def log_m(self) -> float:
        return math.log(self.m)

    def symbols(self, messages: ArrayLike, positions: ArrayLike) -> NDArray[np.int64]:
        """Symbols for a grid of 0-based ``messages`` (rows) and 0-based ``positions`` (cols)."""
        msgs = np.asarray(messages, dtype=np.int64)
        pos = np.asarray(positions, dtype=np.int64)
        u = _hash_uniform(self.seed, self.user, msgs[:, None], pos[None, :])
        return (u[..., None] >= self._cdf).sum(axis=-1).astype(np.int64)

    def block(self, start: int, length: int) -> NDArray[np.int64]:
        """All ``m`` codewords at 0-based positions ``start .. start+length-1``."""
        return self.symbols(np.arange(self.m), np.arange(start, start + length))


def codeword_symbol(cb: Codebook, w: int, i: int) -> int:
    """Symbol sent at channel use ``i`` (1-based) for message ``w`` (1-based)."""
    if not 1 <= w <= cb.m:
        raise MessageOutOfRange(f"message {w} outside 1..{cb.m}")
    if i < 1:
        raise ValueError("positions start at 1")
    return int(cb.symbols([w - 1], [i - 1])[0, 0])


class Order(enum.Enum):
    V1 = "v1"  # user 1 decoded first
    V2 = "v2"


@dataclass(frozen=True)
class ConcatScheme:
    """Two concatenated block codes with deterministic decoding times.

    Phase 1 carries both users at ``phase1_rates``; phase 2 carries the
    rest of the later user's message at ``phase2_rate`` while the other
    user sends ``fixed_letter``.
    """

    m1: int
    m2: int
    phase1_rates: tuple[float, float]
    phase2_rate: float
    n1: float
    n2: float
    order: Order
    fixed_letter: int | None = None

    def rates(self) -> tuple[float, float]:
        return math.log(self.m1) / self.n1, math.log(self.m2) / self.n2


def build_concat(m1: int, m2: int, phase1_rates, c_other: float, eps: float,
                 order: Order | str = Order.V1, fixed_letter: int | None = None) -> ConcatScheme:
    """Decoding times of the concatenated code (nats, channel uses).

    For ``v1``: ``n1 = log M1 / R1*`` and
    ``n2 = n1 + log M2 / (C2 - eps) - (R2* / (C2 - eps)) n1``, with
    ``c_other = C2``. ``v2`` swaps the users and uses ``c_other = C1``.
    """
    order = Order(order)
    r1s, r2s = (float(v) for v in phase1_rates)
    phase2 = c_other - eps
    if r1s <= 0 or r2s <= 0 or phase2 <= 0:
        raise NonPositiveRate(f"rates must be positive: R*=({r1s}, {r2s}), phase 2 {phase2}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    lm1, lm2 = math.log(m1), math.log(m2)
    if order is Order.V1:
        first, first_rate, second, second_rate = lm1, r1s, lm2, r2s
    else:
        first, first_rate, second, second_rate = lm2, r2s, lm1, r1s
    n_first = first / first_rate
    n_second = n_first + second / phase2 - (second_rate / phase2) * n_first
    if n_first <= 0 or n_second < n_first * (1 - 1e-12):
        raise ValueError(
            "phase 1 already carries more than the later message; "
            f"decode times would be ({n_first}, {n_second})"
        )
    n_second = max(n_second, n_first)
    n1, n2 = (n_first, n_second) if order is Order.V1 else (n_second, n_first)
    return ConcatScheme(m1, m2, (r1s, r2s), phase2, n1, n2, order, fixed_letter)


@dataclass(frozen=True)
class MixedScheme:
    """Use ``v1`` with probability ``lam`` and ``v2`` otherwise."""

    lam: float
    v1: ConcatScheme
    v2: ConcatScheme

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.v1.order is not Order.V1 or self.v2.order is not Order.V2:
            raise ValueError("v1 must decode user 1 first and v2 user 2 first")
        if (self.v1.m1, self.v1.m2) != (self.v2.m1, self.v2.m2):
            raise ValueError("component schemes must share message counts")


def mixed_rates(ms: MixedScheme, log_m1: float | None = None, log_m2: float | None = None):
    """Rates and expected decoding times of the mixture.

    Returns ``((R1, R2), (E[N1], E[N2]))``; rates in nats per use.
    """
    log_m1 = math.log(ms.v1.m1) if log_m1 is None else log_m1
    log_m2 = math.log(ms.v1.m2) if log_m2 is None else log_m2
    lb = 1.0 - ms.lam
    en1 = ms.lam * ms.v1.n1 + lb * ms.v2.n1
    en2 = ms.lam * ms.v1.n2 + lb * ms.v2.n2
    return (log_m1 / en1, log_m2 / en2), (en1, en2)


def corner_schemes(m1: int, m2: int, c1: float, c2: float, d1: float, d2: float, eps: float,
                   lam: float, c1_letter: int | None = None, c2_letter: int | None = None) -> MixedScheme:
    """Mixture of the two codes whose first phases sit at the dominant-face corners."""
    v1 = build_concat(m1, m2, (c1 - eps, d2), c2, eps, Order.V1, fixed_letter=c2_letter)
    v2 = build_concat(m1, m2, (d1, c2 - eps), c1, eps, Order.V2, fixed_letter=c1_letter)
    return MixedScheme(lam, v1, v2)


@dataclass(frozen=True)
class SchemeSpec:
    """Parsed scheme file.

    ``p1``/``p2`` (input pmfs of the random codebooks) default to uniform.
    """

    type: str
    m1: int
    m2: int
    seed: int = 0
    lam: float | None = None
    phase1_rates_bits: tuple[float, float] | None = None
    epsilon: float | None = None
    p1: tuple[float, ...] | None = None
    p2: tuple[float, ...] | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.type not in ("concat", "mixed", "random"):
            raise ValueError(f"unknown scheme type {self.type!r}")
        if self.m1 < 1 or self.m2 < 1:
            raise ValueError("message counts must be at least 1")

    @classmethod
    def from_json(cls, obj: dict) -> "SchemeSpec":
        known = {"type", "m1", "m2", "lambda", "phase1_rates_bits", "epsilon", "seed", "p1", "p2"}
        try:
            return cls(
                type=obj["type"],
                m1=int(obj["m1"]),
                m2=int(obj["m2"]),
                seed=int(obj.get("seed", 0)),
                lam=obj.get("lambda"),
                phase1_rates_bits=tuple(obj["phase1_rates_bits"]) if obj.get("phase1_rates_bits") else None,
                epsilon=obj.get("epsilon"),
                p1=tuple(obj["p1"]) if obj.get("p1") else None,
                p2=tuple(obj["p2"]) if obj.get("p2") else None,
                extra={k: v for k, v in obj.items() if k not in known},
            )
        except KeyError as exc:
            raise ValueError(f"scheme file missing field {exc.args[0]!r}") from None

    def to_json(self) -> dict:
        out = {"type": self.type, "m1": self.m1, "m2": self.m2, "seed": self.seed}
        if self.lam is not None:
            out["lambda"] = self.lam
        if self.phase1_rates_bits is not None:
            out["phase1_rates_bits"] = list(self.phase1_rates_bits)
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        if self.p1 is not None:
            out["p1"] = list(self.p1)
        if self.p2 is not None:
            out["p2"] = list(self.p2)
        return out
