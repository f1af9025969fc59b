"""Reproducible random streams keyed by (seed, stream_index).

Every simulation run in a batch owns its own stream, derived purely from
the batch seed and the run index.  Because a stream's draw sequence is a
function of (seed, stream_index) alone, batch results are identical for
any worker count or scheduling order.

The generator is xoshiro256++ with SplitMix64 state expansion (the
standard seeding recipe for the xoshiro family).  The same algorithm is
implemented twice: here in pure Python, and in ``_kernels`` for the
compiled batch loops.  A test pins the two implementations to identical
output, so Python-level reference interpreters and compiled kernels can
share draw sequences draw-for-draw.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)

# Poisson sampling switches from sequential inversion to transformed
# rejection (Hormann's PTRS) at this rate.
POISSON_INVERSION_CUTOFF = 10.0


def mix64(x: int) -> int:
    """SplitMix64 finalizer: a bijective avalanche mix of a 64-bit word."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stream_state(seed: int, stream_index: int) -> tuple[int, int, int, int]:
    """Expand (seed, stream_index) into a 256-bit xoshiro state.

    The SplitMix64 walk starts from an avalanche mix of both inputs, so
    neighbouring stream indices produce unrelated states (no shared state
    words between streams, unlike naive ``seed + index`` seeding).
    """
    sm = mix64(mix64(seed & _MASK64) ^ ((stream_index * _GOLDEN) & _MASK64))
    s = []
    for _ in range(4):
        sm = (sm + _GOLDEN) & _MASK64
        s.append(mix64(sm))
    if s[0] == 0 and s[1] == 0 and s[2] == 0 and s[3] == 0:
        s[0] = _GOLDEN
    return s[0], s[1], s[2], s[3]


def derive_seed(*parts: int) -> int:
    """Fold integers into one 64-bit sub-seed (for per-task stream roots)."""
    acc = 0x8BADF00D5EED5EED
    for p in parts:
        acc = mix64(acc ^ mix64(p & _MASK64))
    return acc


class RngStream:
    """xoshiro256++ stream addressed by (seed, stream_index).

    Identical (seed, stream_index) pairs always yield identical draw
    sequences.  All consuming helpers (`randbelow`, `poisson`, ...) have
    fixed, documented draw orders so independent implementations can be
    compared draw-for-draw.
    """

    __slots__ = ("seed", "stream_index", "_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int, stream_index: int = 0):
        self.seed = seed
        self.stream_index = stream_index
        self._s0, self._s1, self._s2, self._s3 = stream_state(seed, stream_index)

    def next_uint64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        x = (s0 + s3) & _MASK64
        result = (((x << 23) | (x >> 41)) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def random(self) -> float:
        """Uniform double in [0, 1), from the top 53 bits of one draw."""
        return (self.next_uint64() >> 11) * _INV_2_53

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) via masked rejection (exactly uniform)."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        mask = n - 1
        mask |= mask >> 1
        mask |= mask >> 2
        mask |= mask >> 4
        mask |= mask >> 8
        mask |= mask >> 16
        mask |= mask >> 32
        while True:
            r = self.next_uint64() & mask
            if r < n:
                return r

    def bernoulli(self, p: float) -> bool:
        """One success/failure draw; consumes exactly one uniform."""
        return self.random() < p

    def poisson(self, lam: float) -> int:
        """Poisson(lam) variate with an exact marginal.

        lam == 0 consumes no draws.  Below the cutoff rate sequential
        inversion is used (one uniform per draw); above it, Hormann's
        transformed-rejection method PTRS.
        """
        if lam < 0.0 or not math.isfinite(lam):
            raise ValueError("poisson rate must be finite and >= 0")
        if lam == 0.0:
            return 0
        if lam < POISSON_INVERSION_CUTOFF:
            return self._poisson_inversion(lam)
        return self._poisson_ptrs(lam)

    def _poisson_inversion(self, lam: float) -> int:
        u = self.random()
        p = math.exp(-lam)
        f = p
        k = 0
        while u > f:
            k += 1
            p = p * lam / k
            f += p
            if p < 5e-324:
                # float-saturated CDF tail; u cannot exceed it meaningfully
                break
        return k

    def _poisson_ptrs(self, lam: float) -> int:
        slam = math.sqrt(lam)
        loglam = math.log(lam)
        b = 0.931 + 2.53 * slam
        a = -0.059 + 0.02483 * b
        invalpha = 1.1239 + 1.1328 / (b - 3.4)
        vr = 0.9277 - 3.6224 / (b - 2.0)
        while True:
            u = self.random() - 0.5
            v = self.random()
            us = 0.5 - abs(u)
            k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
            if us >= 0.07 and v <= vr:
                return int(k)
            if k < 0 or (us < 0.013 and v > us):
                continue
            if math.log(v * invalpha / (a / (us * us) + b)) <= (
                k * loglam - lam - math.lgamma(k + 1.0)
            ):
                return int(k)
