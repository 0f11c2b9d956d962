"""Counter-based random streams.

A stream is addressed by ``(seed, stream)`` and every draw by its word index,
so results do not depend on how work is split across processes.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_TWO53 = 2.0**-53
_MASK64 = (1 << 64) - 1


class CounterStream:
    """Philox stream exposing the subset of ``numpy.random.Generator`` used here.

    One 64-bit word is consumed per uniform or normal variate; normals are
    obtained by inverse-CDF so that word ``i`` always maps to variate ``i``.
    """

    def __init__(self, seed: int, stream: int = 0, offset: int = 0):
        if seed < 0 or stream < 0:
            raise ValueError("seed and stream must be non-negative")
        self.seed = int(seed)
        self.stream = int(stream)
        key = ((self.stream & _MASK64) << 64) | (self.seed & _MASK64)
        self._bg = np.random.Philox(key=key)
        self.position = 0
        if offset:
            self.skip(offset)

    @property
    def descriptor(self) -> dict:
        return {"seed": self.seed, "stream": self.stream, "position": self.position}

    def skip(self, n: int) -> None:
        n = int(n)
        head = min((-self.position) % 4, n)
        if head:
            self._raw(head)
            n -= head
        if n >= 4:
            self._bg.advance(n // 4)
            self.position += 4 * (n // 4)
            n %= 4
        if n:
            self._raw(n)

    def _raw(self, n: int) -> np.ndarray:
        self.position += n
        return self._bg.random_raw(n)

    def random(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = ((self._raw(n) >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO53
        return float(u[0]) if size is None else u.reshape(size)

    def standard_normal(self, size=None):
        u = self.random(size)
        return float(ndtri(u)) if size is None else ndtri(u)

    def spawn(self, stream: int) -> "CounterStream":
        return CounterStream(self.seed, stream)


def make_stream(seed: int, stream: int = 0) -> CounterStream:
    return CounterStream(seed, stream)
