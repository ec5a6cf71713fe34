"""Counter-based random numbers for deterministic parallel sampling.

Philox4x64-10, keyed by (seed, salt) with the trial index in the
counter block, so every trial owns an independent stream addressable
without sequential jumps.  Trajectory results are then a pure function
of (seed, trial_index) regardless of execution order, chunking, or
thread count.

The compiled kernel implements the identical integer recurrence; the
parity test in tests/test_kernels.py asserts bit-equal streams.  All
floating-point draws are derived from the top 53 bits.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1

PHILOX_M0 = 0xD2E7470EE14C6C93
PHILOX_M1 = 0xCA5A826395121157
PHILOX_W0 = 0x9E3779B97F4A7C15
PHILOX_W1 = 0xBB67AE8584CAA73B

KEY_SALT = 0x8BADF00D5DEECE66

_INV53 = 1.0 / 9007199254740992.0  # 2^-53


def philox4x64_block(c0: int, c1: int, c2: int, c3: int, k0: int, k1: int):
    """One 10-round Philox4x64 block: four uint64 outputs."""
    for _ in range(10):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        hi0, lo0 = (p0 >> 64) & MASK64, p0 & MASK64
        hi1, lo1 = (p1 >> 64) & MASK64, p1 & MASK64
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + PHILOX_W0) & MASK64
        k1 = (k1 + PHILOX_W1) & MASK64
    return c0, c1, c2, c3


class TrialStream:
    """Stream of uniforms for one trial: counter = (block, 0, trial, 0),
    key = (seed, salt).  Buffers one block (4 outputs) at a time."""

    __slots__ = ("_seed", "_trial", "_block", "_buf", "_pos")

    def __init__(self, seed: int, trial: int):
        self._seed = seed & MASK64
        self._trial = trial & MASK64
        self._block = 0
        self._buf = ()
        self._pos = 4

    def next_u64(self) -> int:
        if self._pos == 4:
            self._buf = philox4x64_block(
                self._block, 0, self._trial, 0, self._seed, KEY_SALT
            )
            self._block = (self._block + 1) & MASK64
            self._pos = 0
        out = self._buf[self._pos]
        self._pos += 1
        return out

    def uniform(self) -> float:
        """Uniform in [0, 1)."""
        return (self.next_u64() >> 11) * _INV53

    def uniform_open(self) -> float:
        """Uniform in (0, 1], safe as a log() argument."""
        return 1.0 - self.uniform()


def mix64(x: int) -> int:
    """SplitMix64 finalizer; used to derive per-row sub-seeds."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Deterministic sub-seed for row/candidate ``index`` of a batch."""
    return mix64((seed & MASK64) ^ mix64(index & MASK64))
