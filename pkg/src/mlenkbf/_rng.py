"""Counter-style randomness plumbing.

All randomness in the package flows through keyed Philox draws: a 128-bit key
is assembled from (seed, role, level, step) and the generator is rewound to
counter zero before every block.  A draw is therefore a pure function of its
coordinates -- no hidden sequential state, so particle updates can be batched
or reordered without changing a single bit of output.

Sub-seeds for independent components (per-level legs of a multilevel
estimator, path vs. filter randomness, repetition indices) are derived with
the splitmix64 finalizer, which is the standard way to spread correlated
integer inputs over the full 64-bit range.
"""

from __future__ import annotations

import numpy as np

__all__ = ["mix64", "KeyedPhilox", "MASK64"]

MASK64 = 0xFFFFFFFFFFFFFFFF


def mix64(seed: int, *branch: int) -> int:
    """Derive an independent 64-bit sub-seed from ``seed`` and branch indices.

    Applies the splitmix64 finalizer once per branch index, folding each index
    in with the golden-ratio increment first.  Deterministic, stateless, and
    cheap; distinct branch tuples give (for all practical purposes) independent
    streams.
    """
    z = seed & MASK64
    for b in branch:
        z = (z + 0x9E3779B97F4A7C15 + (b & MASK64)) & MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        z = z ^ (z >> 31)
    return z


class KeyedPhilox:
    """One reusable Philox generator, rekeyed per block.

    Rekeying through the state dict is ~2.5x cheaper than constructing a fresh
    ``Generator(Philox(key=...))`` and produces bit-identical output, which the
    step loops rely on (they rekey twice per time step).
    """

    __slots__ = ("_bg", "_gen", "_state", "_key", "_counter")

    def __init__(self) -> None:
        self._bg = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
        self._gen = np.random.Generator(self._bg)
        self._state = self._bg.state
        self._key = self._state["state"]["key"]
        self._counter = self._state["state"]["counter"]

    def normals(self, key0: int, key1: int, shape) -> np.ndarray:
        """Standard-normal block for key (key0, key1), counter rewound to 0."""
        st = self._state
        self._key[0] = key0
        self._key[1] = key1
        self._counter[:] = 0
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bg.state = st
        return self._gen.standard_normal(shape)
