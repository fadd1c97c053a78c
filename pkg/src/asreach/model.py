"""Plant model: mode distributions, the multi-mode system and its expected system.

Distribution parameters are held as exact :class:`fractions.Fraction` values so
that the decision procedure can work without rounding; sampling converts them
to binary64 once, at construction.

Random numbers come from numpy's ``PCG64`` bit generator.  Per-run streams are
derived from ``SeedSequence((seed, run_index))`` (see :func:`derive_rng`); this
choice is part of the reproducibility contract and must not change silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatch, NonRationalParameter

RationalLike = Union[int, Fraction, str, float]
RationalVector = tuple  # tuple[Fraction, ...]

PROB_TOL = Fraction(1, 10**12)


def to_fraction(x: RationalLike) -> Fraction:
    """Exact rational value of ``x``.

    Strings accept ``"p/q"``, integers and decimals.  Floats go through their
    shortest repr, so ``0.1`` becomes ``1/10``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise NonRationalParameter(f"boolean is not a rational number: {x!r}")
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise NonRationalParameter(f"non-finite parameter {x!r}")
        return Fraction(repr(float(x)))
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise NonRationalParameter(f"not a rational literal: {x!r}") from exc
    raise NonRationalParameter(f"unsupported numeric type {type(x).__name__}")


def to_rational_vector(v: Sequence[RationalLike]) -> RationalVector:
    return tuple(to_fraction(x) for x in v)


def rational_norm2(v: Sequence[Fraction]) -> Fraction:
    return sum((x * x for x in v), Fraction(0))


def fraction_str(x: Fraction) -> str:
    return str(x)


class ModeDistribution:
    """A compactly supported distribution over rate vectors."""

    tag: str = ""

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def mean(self) -> RationalVector:
        raise NotImplementedError

    def support_radius(self) -> float:
        raise NotImplementedError

    def sample_block(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` i.i.d. samples as a ``(size, dim)`` float array."""
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


def _check_dim(n: int) -> None:
    if n < 1:
        raise DimensionMismatch("dimension must be at least 1")


@dataclass(frozen=True)
class PointMass(ModeDistribution):
    v: RationalVector
    tag = "point_mass"

    def __post_init__(self):
        object.__setattr__(self, "v", to_rational_vector(self.v))
        _check_dim(len(self.v))

    @property
    def dim(self) -> int:
        return len(self.v)

    def mean(self) -> RationalVector:
        return self.v

    def support_radius(self) -> float:
        return math.sqrt(rational_norm2(self.v))

    @cached_property
    def _v(self) -> np.ndarray:
        return np.array([float(x) for x in self.v])

    def sample_block(self, rng, size):
        return np.tile(self._v, (size, 1))

    def to_json(self):
        return {"type": self.tag, "v": [str(x) for x in self.v]}


@dataclass(frozen=True)
class UniformBox(ModeDistribution):
    center: RationalVector
    half_widths: RationalVector
    tag = "uniform_box"

    def __post_init__(self):
        object.__setattr__(self, "center", to_rational_vector(self.center))
        object.__setattr__(self, "half_widths", to_rational_vector(self.half_widths))
        _check_dim(len(self.center))
        if len(self.half_widths) != len(self.center):
            raise DimensionMismatch("center and half_widths differ in length")
        if any(h < 0 for h in self.half_widths):
            raise ValueError("half widths must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.center)

    def mean(self) -> RationalVector:
        return self.center

    def support_radius(self) -> float:
        # farthest corner: |c_j| + h_j in every coordinate
        return math.sqrt(rational_norm2([abs(c) + h for c, h in zip(self.center, self.half_widths)]))

    @cached_property
    def _params(self):
        return (np.array([float(x) for x in self.center]),
                np.array([float(x) for x in self.half_widths]))

    def sample_block(self, rng, size):
        c, h = self._params
        u = rng.random((size, self.dim))
        return c + h * (2.0 * u - 1.0)

    def to_json(self):
        return {"type": self.tag, "center": [str(x) for x in self.center],
                "half_widths": [str(x) for x in self.half_widths]}


@dataclass(frozen=True)
class UniformBall(ModeDistribution):
    center: RationalVector
    radius: Fraction
    tag = "uniform_ball"

    def __post_init__(self):
        object.__setattr__(self, "center", to_rational_vector(self.center))
        object.__setattr__(self, "radius", to_fraction(self.radius))
        _check_dim(len(self.center))
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.center)

    def mean(self) -> RationalVector:
        return self.center

    def support_radius(self) -> float:
        return math.sqrt(rational_norm2(self.center)) + float(self.radius)

    @cached_property
    def _params(self):
        return np.array([float(x) for x in self.center]), float(self.radius)

    def sample_block(self, rng, size):
        # Gaussian direction times radius * U^(1/n): uniform in the ball
        c, r = self._params
        g = rng.standard_normal((size, self.dim))
        norms = np.linalg.norm(g, axis=1)
        norms[norms == 0.0] = 1.0
        scale = r * rng.random(size) ** (1.0 / self.dim)
        return c + g * (scale / norms)[:, None]

    def to_json(self):
        return {"type": self.tag, "center": [str(x) for x in self.center],
                "radius": str(self.radius)}


@dataclass(frozen=True)
class FiniteDiscrete(ModeDistribution):
    atoms: tuple  # tuple[tuple[RationalVector, Fraction], ...]
    tag = "finite_discrete"

    def __post_init__(self):
        atoms = tuple((to_rational_vector(v), to_fraction(p)) for v, p in self.atoms)
        if not atoms:
            raise ValueError("a discrete distribution needs at least one atom")
        n = len(atoms[0][0])
        _check_dim(n)
        if any(len(v) != n for v, _ in atoms):
            raise DimensionMismatch("atoms differ in dimension")
        if any(p < 0 or p > 1 for _, p in atoms):
            raise ValueError("atom probabilities must lie in [0, 1]")
        if abs(sum(p for _, p in atoms) - 1) > PROB_TOL:
            raise ValueError("atom probabilities must sum to 1")
        object.__setattr__(self, "atoms", atoms)

    @property
    def dim(self) -> int:
        return len(self.atoms[0][0])

    def mean(self) -> RationalVector:
        return tuple(sum((p * v[j] for v, p in self.atoms), Fraction(0)) for j in range(self.dim))

    def support_radius(self) -> float:
        return max(math.sqrt(rational_norm2(v)) for v, p in self.atoms if p > 0)

    @cached_property
    def _params(self):
        pts = np.array([[float(x) for x in v] for v, _ in self.atoms])
        cum = np.cumsum([float(p) for _, p in self.atoms])
        return pts, cum

    def sample_block(self, rng, size):
        pts, cum = self._params
        idx = np.searchsorted(cum, rng.random(size), side="right")
        return pts[np.minimum(idx, len(pts) - 1)]

    def to_json(self):
        return {"type": self.tag,
                "atoms": [{"v": [str(x) for x in v], "p": str(p)} for v, p in self.atoms]}


def mode_mean(d: ModeDistribution) -> RationalVector:
    return d.mean()


def mode_support_radius(d: ModeDistribution) -> float:
    return d.support_radius()


def sample(d: ModeDistribution, rng: np.random.Generator) -> np.ndarray:
    """One draw from ``d``."""
    return d.sample_block(rng, 1)[0]


def distribution_from_json(obj: dict) -> ModeDistribution:
    kind = obj["type"]
    if kind == PointMass.tag:
        return PointMass(obj["v"])
    if kind == UniformBox.tag:
        return UniformBox(obj["center"], obj["half_widths"])
    if kind == UniformBall.tag:
        return UniformBall(obj["center"], obj["radius"])
    if kind == FiniteDiscrete.tag:
        return FiniteDiscrete(tuple((a["v"], a["p"]) for a in obj["atoms"]))
    raise ValueError(f"unknown distribution type {kind!r}")


@dataclass(frozen=True)
class ExpectedSystem:
    means: tuple  # tuple[RationalVector, ...]
    dim: int

    @cached_property
    def means_array(self) -> np.ndarray:
        return np.array([[float(x) for x in v] for v in self.means])


@dataclass(frozen=True)
class Smms:
    """A stochastic multi-mode system: a finite list of modes of common dimension."""

    modes: tuple
    dim: int = field(default=0)

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise ValueError("an SMMS needs at least one mode")
        n = self.dim or modes[0].dim
        _check_dim(n)
        for i, m in enumerate(modes):
            if m.dim != n:
                raise DimensionMismatch(f"mode {i} has dimension {m.dim}, expected {n}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "dim", n)

    def __len__(self) -> int:
        return len(self.modes)

    @cached_property
    def support(self) -> float:
        return system_support(self)

    @cached_property
    def expected(self) -> ExpectedSystem:
        return expected_system(self)

    @property
    def means_array(self) -> np.ndarray:
        return self.expected.means_array

    def to_json(self) -> list:
        return [m.to_json() for m in self.modes]


def system_support(m: Smms) -> float:
    """The constant L: the largest support radius over all modes."""
    return max(d.support_radius() for d in m.modes)


def expected_system(m: Smms) -> ExpectedSystem:
    # parameters were coerced to Fraction at construction, where
    # non-rational input already raised NonRationalParameter
    return ExpectedSystem(tuple(mode_mean(d) for d in m.modes), m.dim)


def derive_seed(seed: int, run_index: int) -> int:
    """64-bit seed for run ``run_index`` of a batch started from ``seed``."""
    state = np.random.SeedSequence([int(seed) & (2**64 - 1), int(run_index)]).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def derive_rng(seed: int, run_index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, run_index)))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))
