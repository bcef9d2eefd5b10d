"""Deterministic random streams: one 64-bit seed, one counter-based stream per replica.

Streams use the Philox counter-based generator, so distinct ``stream_index``
values give statistically independent streams and identical ``(seed,
stream_index)`` pairs reproduce trajectories bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class RngSeed:
    """Seed plus replica index identifying one reproducible stream."""

    seed: int
    stream_index: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.stream_index < 0:
            raise ValueError("stream_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.Philox(ss))

    def stream(self, index: int) -> "RngSeed":
        return replace(self, stream_index=index)


class Draws:
    """Buffered scalar draws from a Generator.

    Event loops need millions of scalar exponential/uniform draws; pulling
    them in blocks and handing out plain Python floats avoids the per-call
    numpy dispatch cost while keeping the stream deterministic.
    """

    __slots__ = ("rng", "_block", "_exp", "_uni", "_ei", "_ui")

    def __init__(self, rng: np.random.Generator, block: int = 8192):
        self.rng = rng
        self._block = block
        self._exp = rng.standard_exponential(block).tolist()
        self._uni = rng.random(block).tolist()
        self._ei = 0
        self._ui = 0

    def exp(self) -> float:
        """One Exponential(1) draw."""
        i = self._ei
        if i == self._block:
            self._exp = self.rng.standard_exponential(self._block).tolist()
            i = 0
        self._ei = i + 1
        return self._exp[i]

    def u01(self) -> float:
        """One Uniform[0, 1) draw."""
        i = self._ui
        if i == self._block:
            self._uni = self.rng.random(self._block).tolist()
            i = 0
        self._ui = i + 1
        return self._uni[i]


def as_draws(rng) -> Draws:
    """Wrap a Generator (or pass through an existing Draws buffer)."""
    if isinstance(rng, Draws):
        return rng
    return Draws(rng)
