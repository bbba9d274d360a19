"""Two-input discrete memoryless multiple-access channels.

A channel is stored as a dense array ``W[x1, x2, y] = p(y | x1, x2)`` over
0-based integer alphabets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import NegativeEntry, NonStochastic, SymbolOutOfRange, UnknownName

ROW_SUM_TOL = 1e-9

__all__ = [
    "McChannel",
    "validate_channel",
    "builtin_channel",
    "parse_channel_name",
    "sample_output",
    "sample_outputs",
    "load_channel",
    "channel_to_json",
    "channel_from_json",
]


@dataclass(frozen=True, eq=False)
class McChannel:
    """Immutable transition law ``p(y | x1, x2)``.

    Build instances through :func:`validate_channel` or
    :func:`builtin_channel`; the constructor trusts its input.
    """

    transition: NDArray[np.float64]
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        arr = np.array(self.transition, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "transition", arr)

    @property
    def x1_size(self) -> int:
        return self.transition.shape[0]

    @property
    def x2_size(self) -> int:
        return self.transition.shape[1]

    @property
    def y_size(self) -> int:
        return self.transition.shape[2]

    @cached_property
    def log_transition(self) -> NDArray[np.float64]:
        # ln(0) -> -inf: zero transitions eliminate hypotheses
        with np.errstate(divide="ignore"):
            out = np.log(self.transition)
        out.setflags(write=False)
        return out

    @cached_property
    def cdf(self) -> NDArray[np.float64]:
        c = np.cumsum(self.transition, axis=-1)
        c[..., -1] = 1.0
        c.setflags(write=False)
        return c

    def __eq__(self, other):
        if not isinstance(other, McChannel):
            return NotImplemented
        return np.array_equal(self.transition, other.transition)

    def __hash__(self):
        return hash(self.transition.tobytes())

    def __repr__(self):
        return (
            f"McChannel(name={self.name!r}, x1_size={self.x1_size}, "
            f"x2_size={self.x2_size}, y_size={self.y_size})"
        )


def validate_channel(raw: ArrayLike, name: str = "custom") -> McChannel:
    """Check a ``[x1][x2][y]`` probability array and wrap it.

    Rows whose sum is off by less than ``1e-9`` are renormalized; larger
    deviations raise :class:`NonStochastic`.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ValueError(f"expected a non-empty 3-index array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
        raise NonStochastic(bad[:2], float("nan"))
    neg = np.argwhere(arr < 0)
    if len(neg):
        raise NegativeEntry(tuple(int(i) for i in neg[0]))
    sums = arr.sum(axis=-1)
    dev = np.abs(sums - 1.0)
    if np.any(dev >= ROW_SUM_TOL):
        row = tuple(int(i) for i in np.argwhere(dev >= ROW_SUM_TOL)[0])
        raise NonStochastic(row, sums[row])
    return McChannel(arr / sums[..., None], name=name)


def _adder_table() -> NDArray[np.float64]:
    w = np.zeros((2, 2, 3))
    for x1 in range(2):
        for x2 in range(2):
            w[x1, x2, x1 + x2] = 1.0
    return w


def builtin_channel(name: str, param: float | None = None) -> McChannel:
    """Return one of the built-in test channels.

    ``adder``: ``Y = X1 + X2``. ``noisy_adder`` (param δ): the adder output
    is kept with probability ``1 - δ`` and moved to each other symbol with
    probability ``δ / 2``. ``multiplier``: ``Y = X1 * X2``.
    ``erasure_adder`` (param γ): adder output replaced by symbol 3 with
    probability γ.
    """
    if name == "adder":
        return validate_channel(_adder_table(), name="adder")
    if name == "multiplier":
        w = np.zeros((2, 2, 2))
        for x1 in range(2):
            for x2 in range(2):
                w[x1, x2, x1 * x2] = 1.0
        return validate_channel(w, name="multiplier")
    if name in ("noisy_adder", "erasure_adder"):
        if param is None:
            raise ValueError(f"{name} needs a parameter in [0, 1)")
        if not 0.0 <= param < 1.0:
            raise ValueError(f"{name} parameter must lie in [0, 1), got {param}")
        base = _adder_table()
        if name == "noisy_adder":
            mix = np.full((3, 3), param / 2.0)
            np.fill_diagonal(mix, 1.0 - param)
            w = base @ mix
        else:
            w = np.concatenate([base * (1.0 - param), np.full((2, 2, 1), param)], axis=-1)
        return validate_channel(w, name=f"{name}({param:g})")
    raise UnknownName(name)


def parse_channel_name(text: str) -> McChannel:
    """Parse ``"adder"``, ``"noisy_adder:0.1"`` style names."""
    head, _, arg = text.partition(":")
    return builtin_channel(head, float(arg) if arg else None)


def sample_output(ch: McChannel, x1: int, x2: int, rng: np.random.Generator) -> int:
    """Draw one output letter from row ``W[x1][x2][.]``."""
    if not (0 <= x1 < ch.x1_size and 0 <= x2 < ch.x2_size):
        raise SymbolOutOfRange(f"inputs ({x1}, {x2}) outside {ch.x1_size}x{ch.x2_size}")
    u = rng.random()
    return int(np.searchsorted(ch.cdf[x1, x2], u, side="right"))


def sample_outputs(ch: McChannel, x1: ArrayLike, x2: ArrayLike, rng: np.random.Generator) -> NDArray[np.int64]:
    """Vectorized :func:`sample_output`; consumes one uniform per letter in order."""
    x1 = np.asarray(x1, dtype=np.int64)
    x2 = np.asarray(x2, dtype=np.int64)
    if x1.size and (x1.min() < 0 or x1.max() >= ch.x1_size or x2.min() < 0 or x2.max() >= ch.x2_size):
        raise SymbolOutOfRange("input symbol outside alphabet")
    u = rng.random(x1.shape)
    cdf = ch.cdf[x1, x2]
    return (u[..., None] >= cdf).sum(axis=-1).astype(np.int64)


def channel_to_json(ch: McChannel) -> dict:
    return {
        "x1_size": ch.x1_size,
        "x2_size": ch.x2_size,
        "y_size": ch.y_size,
        "transition": ch.transition.ravel().tolist(),
    }


def channel_from_json(obj: dict) -> McChannel:
    try:
        shape = (int(obj["x1_size"]), int(obj["x2_size"]), int(obj["y_size"]))
        flat = np.asarray(obj["transition"], dtype=np.float64)
    except KeyError as exc:
        raise ValueError(f"channel file missing field {exc.args[0]!r}") from None
    if flat.size != shape[0] * shape[1] * shape[2]:
        raise ValueError(f"transition has {flat.size} entries, expected {shape[0] * shape[1] * shape[2]}")
    return validate_channel(flat.reshape(shape), str(obj.get("name", "custom")))


def load_channel(path: str | Path) -> McChannel:
    text = Path(path).read_text()
    return channel_from_json(json.loads(text))
