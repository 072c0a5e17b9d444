"""Random bits, lazily extended uniforms and the Knuth-Yao generator.

Every random bit drawn goes through a bit source that counts it, so the
number of random bits a sampler consumes is known exactly.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .dyadic import Dyadic

PRNG_NAME = "numpy.random.Philox (4x64, counter-based)"

_BLOCK = 64  # 64-bit words fetched per refill


class BitSource:
    """Deterministic stream of fair bits from a seeded Philox generator.

    ``stream`` selects an independent substream for the same seed, which is
    how batch runs derive per-run sources.
    """

    def __init__(self, seed: int = 0, stream: int | None = None):
        self.seed = int(seed)
        self.stream = stream
        entropy = [self.seed] if stream is None else [self.seed, int(stream)]
        self._gen = np.random.Philox(np.random.SeedSequence(entropy))
        self._words: list = []
        self._buf = 0
        self._nbuf = 0
        self.count = 0

    def _refill(self):
        if not self._words:
            self._words = self._gen.random_raw(_BLOCK).tolist()
            self._words.reverse()
        self._buf = (self._buf << 64) | self._words.pop()
        self._nbuf += 64

    def next_bit(self) -> int:
        if not self._nbuf:
            self._refill()
        self._nbuf -= 1
        self.count += 1
        bit = (self._buf >> self._nbuf) & 1
        self._buf &= (1 << self._nbuf) - 1
        return bit

    def bits(self, k: int) -> int:
        """Next ``k`` bits as an integer, first bit most significant."""
        if k <= 0:
            return 0
        while self._nbuf < k:
            self._refill()
        self._nbuf -= k
        self.count += k
        val = self._buf >> self._nbuf
        self._buf &= (1 << self._nbuf) - 1
        return val


class BitsExhausted(Exception):
    """A scripted source ran past its prefix."""


class ScriptedBits:
    """Bit source replaying a fixed prefix; used to enumerate randomness paths."""

    def __init__(self, prefix: Sequence[int]):
        self.prefix = list(prefix)
        self.count = 0

    def next_bit(self) -> int:
        if self.count >= len(self.prefix):
            raise BitsExhausted(self.count)
        bit = self.prefix[self.count]
        self.count += 1
        return bit

    def bits(self, k: int) -> int:
        val = 0
        for _ in range(k):
            val = (val << 1) | self.next_bit()
        return val


def next_bit(src) -> int:
    return src.next_bit()


class LazyUniform:
    """Uniform variate on [0, 1] revealed one binary digit at a time.

    After ``t`` digits ``U[t] = sum_{i<=t} U_i 2**-i`` and the ideal value
    satisfies ``U[t] <= U < U[t] + 2**-t``.
    """

    __slots__ = ("numerator", "length")

    def __init__(self):
        self.numerator = 0  # U[length] * 2**length
        self.length = 0

    def extend(self, src, to_t: int) -> Dyadic:
        if to_t > self.length:
            k = to_t - self.length
            self.numerator = (self.numerator << k) | src.bits(k)
            self.length = to_t
        return self.value(to_t)

    def value(self, t: int | None = None) -> Dyadic:
        if t is None:
            t = self.length
        if t > self.length:
            raise ValueError(f"only {self.length} bits drawn, asked for {t}")
        return Dyadic(self.numerator >> (self.length - t), -t)

    @property
    def bits(self) -> list[int]:
        return [(self.numerator >> (self.length - 1 - i)) & 1 for i in range(self.length)]

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> LazyUniform:
        u = cls()
        for b in bits:
            u.numerator = (u.numerator << 1) | (b & 1)
        u.length = len(bits)
        return u


def extend_uniform(u: LazyUniform, src, to_t: int) -> Dyadic:
    if to_t < u.length:
        raise ValueError("cannot shrink a lazy uniform")
    return u.extend(src, to_t)


class DdgTree:
    """Knuth-Yao discrete distribution generating tree over exact rationals.

    ``weights`` are non-negative integers; outcome ``x`` has probability
    ``weights[x] / sum(weights)``.  Level ``l`` of the tree holds a leaf for
    ``x`` exactly when bit ``l`` of that probability's binary expansion is 1.
    Expansions of non-dyadic rationals are infinite, so levels are generated
    on demand from integer remainders and cached.
    """

    def __init__(self, weights: Sequence[int]):
        self.weights = tuple(int(w) for w in weights)
        if any(w < 0 for w in self.weights):
            raise ValueError("negative weight")
        self.total = sum(self.weights)
        if self.total <= 0:
            raise ValueError("weights sum to zero")
        self._rem = list(self.weights)
        self.levels: list[tuple[int, ...]] = []  # levels[l-1]: leaves at depth l
        nonzero = [i for i, w in enumerate(self.weights) if w]
        self.point_mass = nonzero[0] if len(nonzero) == 1 else None

    def level(self, depth: int) -> tuple[int, ...]:
        while len(self.levels) < depth:
            total = self.total
            rem = self._rem
            leaves = []
            for i, r in enumerate(rem):
                r <<= 1
                if r >= total:
                    r -= total
                    leaves.append(i)
                rem[i] = r
            self.levels.append(tuple(leaves))
        return self.levels[depth - 1]

    def sample(self, src) -> tuple[int, int]:
        """Walk the tree with fair bits; return ``(outcome, bits_used)``."""
        if self.point_mass is not None:
            return self.point_mass, 0
        node = 0
        depth = 0
        levels = self.levels
        while True:
            node = (node << 1) | src.next_bit()
            depth += 1
            leaves = levels[depth - 1] if depth <= len(levels) else self.level(depth)
            if node < len(leaves):
                return leaves[node], depth
            node -= len(leaves)


def ky_sample(q, src) -> tuple[int, int]:
    """Sample a flat outcome index from a proposal (or a :class:`DdgTree`)."""
    tree = q if isinstance(q, DdgTree) else q.ddg()
    return tree.sample(src)
