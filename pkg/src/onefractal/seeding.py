"""Deterministic per-index seed derivation.

Every parallel map in this package (rendering a family, writing images,
resampling failed classes) derives one RNG stream per index from a single
base seed, so results are identical for any worker count or scheduling
order.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """Finalize ``state`` into one well-mixed 64-bit value."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, index: int) -> int:
    """Seed for stream ``index`` of the family rooted at ``base_seed``.

    Pure function of its arguments; distinct indices give unrelated
    streams.
    """
    if index < 0:
        raise ValueError(f"index must be >= 0, got {index}")
    return splitmix64((base_seed + (index + 1) * _GOLDEN) & _MASK64)
