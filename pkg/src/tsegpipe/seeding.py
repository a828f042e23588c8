"""Deterministic seed derivation.

A single root seed drives the whole mock-mode pipeline.  Per-stage (and
per-view) seeds are derived with a splitmix64 step over ``root ^ fnv1a(tag)``
so any stage can be re-run in isolation with the same randomness it saw
inside the full run.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def splitmix64(x: int) -> int:
    """One splitmix64 output step (Steele et al. mixing constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(root: int, tag: str) -> int:
    """Derive the sub-seed for a named stage (e.g. ``"seg/occlusal"``)."""
    return splitmix64((root & _MASK64) ^ _fnv1a64(tag.encode("utf-8")))


def rng_for(root: int, tag: str) -> np.random.Generator:
    """Seeded generator for a named stage."""
    return np.random.Generator(np.random.PCG64(derive_seed(root, tag)))
