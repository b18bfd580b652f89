"""Deterministic seed derivation so that resumed runs replay the same streams."""

from __future__ import annotations

_MASK = (1 << 64) - 1


def splitmix64(state: int) -> int:
    """One splitmix64 output step; a cheap, well-mixed 64-bit hash."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *indices: int) -> int:
    """Fold index coordinates (epoch, batch, ...) into a fresh 64-bit seed."""
    state = splitmix64(master & _MASK)
    for idx in indices:
        state = splitmix64(state ^ splitmix64(idx & _MASK))
    return state
