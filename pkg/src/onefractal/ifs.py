"""Affine iterated function systems and the sigma complexity control.

An IFS is a list of 2D affine maps ``v -> [[a,b],[c,d]] v + [e,f]`` with
selection probabilities. Complexity is summarized by the sigma factor
``sum_j (s1_j + 2 s2_j)`` over the singular values ``s1 >= s2`` of each
map's linear part; small sigma gives dense, intricate attractors and the
sampler below hits any requested sigma analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chaos import probe_orbit
from .jsonio import dumps_canonical, loads
from .seeding import derive_seed

PROB_DET_FLOOR = 0.01
SEARCH_ATTEMPT_BUDGET = 10_000

# Candidate acceptance: boundedness at high sigma is a marginal property
# of the random matrix products, and a code that merely survived one
# seeded orbit can still escape under another seed. Accepting only
# orbits that stay inside a tight radius over a render-length run AND
# show a clearly negative Lyapunov exponent makes acceptance
# seed-robust. A short pre-probe rejects plainly expansive candidates
# before the full-length run.
_PROBE_SHORT_STEPS = 4_096
_PROBE_STEPS = 100_000
_PROBE_TAIL = 50_000
_PROBE_RADIUS = 1e3
_PROBE_MAX_LYAPUNOV = -0.005
_PROBE_MIN_EXTENT = 1e-4
# Tail points must cover enough of a coarse grid over their own
# bounding box; this rejects attractors that are usable numerically but
# collapse to a handful of pixels when rendered.
_PROBE_GRID = 64
_PROBE_MIN_CELLS = 150

Point = tuple[float, float]


class SearchExhausted(Exception):
    """No acceptable IFS found within the candidate attempt budget."""


@dataclass(frozen=True)
class AffineMap:
    """One affine map. ``a..d`` form the linear part, ``e, f`` translate."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    def __post_init__(self) -> None:
        for name in ("a", "b", "c", "d", "e", "f"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"coefficient {name} is not finite: {v!r}")

    def singular_values(self) -> tuple[float, float]:
        """Singular values (s1 >= s2 >= 0) of the linear part, closed form."""
        a, b, c, d = self.a, self.b, self.c, self.d
        q1 = a * a + b * b + c * c + d * d
        q2 = math.hypot(a * a + b * b - c * c - d * d, 2.0 * (a * c + b * d))
        s1 = math.sqrt((q1 + q2) / 2.0)
        s2 = math.sqrt(max(q1 - q2, 0.0) / 2.0)
        return s1, s2

    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c

    def coefficients(self) -> tuple[float, float, float, float, float, float]:
        return (self.a, self.b, self.c, self.d, self.e, self.f)


@dataclass(frozen=True)
class IfsCode:
    """An IFS: affine maps plus their selection probabilities.

    ``seed`` records the sampler seed that produced the code (None for
    hand-built codes); it rides along through serialization so a code
    file documents its own provenance.
    """

    maps: tuple[AffineMap, ...]
    probs: tuple[float, ...]
    seed: int | None = None

    def __post_init__(self) -> None:
        if len(self.maps) < 1:
            raise ValueError("an IFS needs at least one map")
        if len(self.probs) != len(self.maps):
            raise ValueError(
                f"{len(self.probs)} probabilities for {len(self.maps)} maps"
            )
        if any(p < 0.0 for p in self.probs):
            raise ValueError("probabilities must be nonnegative")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")

    @property
    def n_maps(self) -> int:
        return len(self.maps)

    def coefficient_array(self) -> np.ndarray:
        """(N, 6) float64 array of rows (a, b, c, d, e, f)."""
        return np.array([m.coefficients() for m in self.maps], dtype=np.float64)

    def to_doc(self) -> dict:
        """Plain-JSON form with fixed key order."""
        return {
            "maps": [
                {"a": m.a, "b": m.b, "c": m.c, "d": m.d, "e": m.e, "f": m.f}
                for m in self.maps
            ],
            "probs": list(self.probs),
            "sigma": sigma_factor(self),
            "seed": self.seed,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "IfsCode":
        maps = tuple(
            AffineMap(m["a"], m["b"], m["c"], m["d"], m["e"], m["f"])
            for m in doc["maps"]
        )
        return cls(maps=maps, probs=tuple(doc["probs"]), seed=doc.get("seed"))

    def to_json(self) -> str:
        return dumps_canonical(self.to_doc())

    @classmethod
    def from_json(cls, text: str) -> "IfsCode":
        return cls.from_doc(loads(text))


@dataclass(frozen=True)
class SigmaTarget:
    """Requested sigma value with an acceptance half-width."""

    target: float
    tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if not self.target > 0.0:
            raise ValueError(f"sigma target must be > 0, got {self.target!r}")
        if self.tolerance < 0.0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance!r}")


def apply_map(m: AffineMap, v: Point) -> Point:
    """Apply one affine map to a point."""
    x, y = v
    return (m.a * x + m.b * y + m.e, m.c * x + m.d * y + m.f)


def sigma_factor(code: IfsCode) -> float:
    """Sum of (s1 + 2 s2) over the maps' singular values."""
    total = 0.0
    for m in code.maps:
        s1, s2 = m.singular_values()
        total += s1 + 2.0 * s2
    return total


def derive_probs(maps: Sequence[AffineMap]) -> tuple[float, ...]:
    """Selection probabilities proportional to |det|, floored at 0.01.

    The floor keeps near-singular maps selectable so no branch of the
    attractor silently disappears.
    """
    weights = [max(abs(m.determinant()), PROB_DET_FLOOR) for m in maps]
    total = math.fsum(weights)
    return tuple(w / total for w in weights)


def _grid_coverage(points: np.ndarray) -> int:
    """Distinct cells hit on a _PROBE_GRID^2 grid over the point bbox."""
    lo = points.min(axis=0)
    span = points.max(axis=0) - lo
    span[span == 0.0] = 1.0
    cells = np.minimum(
        ((points - lo) / span * _PROBE_GRID).astype(np.int64), _PROBE_GRID - 1
    )
    return len(np.unique(cells[:, 0] * _PROBE_GRID + cells[:, 1]))


def _attractor_usable(code: IfsCode, rng: np.random.Generator) -> bool:
    """Orbit probe: tightly bounded, contracting with margin, and
    spread over enough of its own bounding box to render usefully."""
    coeffs = code.coefficient_array()
    probs = np.asarray(code.probs)
    idx = rng.choice(code.n_maps, size=_PROBE_SHORT_STEPS, p=probs).astype(np.int64)
    tail = np.empty((2, 2), dtype=np.float64)
    escaped, _, _ = probe_orbit(coeffs, idx, tail, _PROBE_RADIUS)
    if escaped:
        return False
    idx = rng.choice(code.n_maps, size=_PROBE_STEPS, p=probs).astype(np.int64)
    tail = np.empty((_PROBE_TAIL, 2), dtype=np.float64)
    escaped, lyapunov, extent = probe_orbit(coeffs, idx, tail, _PROBE_RADIUS)
    if escaped or lyapunov > _PROBE_MAX_LYAPUNOV or extent <= _PROBE_MIN_EXTENT:
        return False
    return _grid_coverage(tail) >= _PROBE_MIN_CELLS


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _sample_candidate(
    n_maps: int, target: float, rng: np.random.Generator
) -> IfsCode | None:
    # Linear part R(theta) diag(s1, s2) R(phi) diag(+-1, +-1); the two
    # rotations and the sign flips are orthogonal, so (s1, s2) are the
    # exact singular values and rescaling the s-values hits the sigma
    # target analytically instead of by rejection.
    raw = rng.random((n_maps, 2))
    s_hi = raw.max(axis=1)
    s_lo = raw.min(axis=1)
    scale = target / float(np.sum(s_hi + 2.0 * s_lo))
    s_hi *= scale
    s_lo *= scale

    # The Lyapunov exponents satisfy l1 + l2 = sum_j p_j log|det_j|, so
    # a candidate with nonnegative average volume rate can never pass
    # the orbit test (which needs l1 strictly negative). Reject before
    # paying for map construction and orbit probes.
    dets = s_hi * s_lo
    weights = np.maximum(dets, PROB_DET_FLOOR)
    probs = weights / weights.sum()
    if float(probs @ np.log(np.maximum(dets, 1e-300))) > 2.0 * _PROBE_MAX_LYAPUNOV:
        return None

    signs = rng.integers(0, 2, size=(n_maps, 2)) * 2 - 1
    thetas = rng.uniform(0.0, 2.0 * math.pi, n_maps)
    phis = rng.uniform(0.0, 2.0 * math.pi, n_maps)
    translations = rng.uniform(-1.0, 1.0, size=(n_maps, 2))

    maps = []
    for j in range(n_maps):
        lin = _rotation(thetas[j]) @ np.diag([s_hi[j], s_lo[j]]) @ _rotation(phis[j])
        lin = lin @ np.diag(signs[j].astype(float))
        maps.append(
            AffineMap(
                a=float(lin[0, 0]),
                b=float(lin[0, 1]),
                c=float(lin[1, 0]),
                d=float(lin[1, 1]),
                e=float(translations[j, 0]),
                f=float(translations[j, 1]),
            )
        )
    return IfsCode(maps=tuple(maps), probs=derive_probs(maps))


def sample_ifs(n_maps: int, sigma: SigmaTarget, rng_seed: int) -> IfsCode:
    """Sample one IFS whose sigma factor matches ``sigma`` to tolerance.

    Deterministic for a fixed seed. Candidates whose orbit probe
    escapes, barely contracts, or collapses are rejected and redrawn.

    Raises SearchExhausted after the attempt budget.
    """
    if n_maps < 1:
        raise ValueError(f"n_maps must be >= 1, got {n_maps}")
    rng = np.random.default_rng(rng_seed)
    for _ in range(SEARCH_ATTEMPT_BUDGET):
        code = _sample_candidate(n_maps, sigma.target, rng)
        if code is None:
            continue
        if abs(sigma_factor(code) - sigma.target) > sigma.tolerance:
            continue
        if not _attractor_usable(code, rng):
            continue
        return IfsCode(maps=code.maps, probs=code.probs, seed=rng_seed)
    raise SearchExhausted(
        f"no usable IFS with sigma {sigma.target} +- {sigma.tolerance} "
        f"in {SEARCH_ATTEMPT_BUDGET} candidates (seed {rng_seed})"
    )


def search_category_set(
    count: int, n_maps: int, sigma: SigmaTarget, rng_seed: int
) -> list[IfsCode]:
    """Sample ``count`` distinct IFS codes meeting the sigma constraint.

    count=1 is the single-fractal setting; larger counts support
    multi-category datasets. Seeds are derived per slot so the list is
    reproducible and order-stable.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    codes: list[IfsCode] = []
    seen: set[tuple[float, ...]] = set()
    for i in range(count):
        attempt = 0
        while True:
            code = sample_ifs(n_maps, sigma, derive_seed(rng_seed, i + attempt * count))
            key = tuple(v for m in code.maps for v in m.coefficients())
            if key not in seen:
                break
            attempt += 1
            if attempt >= SEARCH_ATTEMPT_BUDGET:
                raise SearchExhausted(f"could not find a distinct code for slot {i}")
        seen.add(key)
        codes.append(code)
    return codes
