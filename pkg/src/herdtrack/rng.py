"""Deterministic random generator for everything that must replay exactly.

Python's and numpy's generators do not promise bit-identical streams across
interpreter or library versions, so patch sampling, negative subsampling and
forest bootstraps draw from this small splitmix64 generator instead.  Seeds
for sub-tasks are derived with `derive_seed`, a fixed mixing of integer
identifiers, so a whole run is reproducible across machines from one global
seed.
"""

import math

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# role tags folded into derived seeds so different consumers of the same
# (seed, frame, instance) triple get unrelated streams
ROLE_FEATURES = 1
ROLE_REBALANCE = 2
ROLE_TREE = 3
ROLE_SCENE = 4


def _mix(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *parts: int) -> int:
    """Fold integer identifiers (role, frame id, ...) into a sub-seed."""
    state = _mix(seed & _MASK64)
    for part in parts:
        state = _mix((state + _GOLDEN + (part & _MASK64)) & _MASK64)
    return state


class Rng:
    """splitmix64 stream with uniform and gaussian draws."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64
        self._spare = None

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix(self._state)

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return (self.next_u64() * n) >> 64

    def normal(self) -> float:
        """Standard normal via Box-Muller; deviates arrive in cached pairs."""
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = 1.0 - self.uniform()  # (0, 1] keeps the log finite
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)
