"""Compactly supported bump potentials and the reduction to unit energy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

KINDS = ("zero", "radial_bump", "bump_sum")
SUP_BOUND = 1.0


@dataclass(frozen=True)
class Bump:
    """One mollifier bump ``amplitude * exp(1 - 1/(1 - |x-c|^2/radius^2))``."""

    amplitude: float
    radius: float
    center: tuple[float, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "amplitude": float(self.amplitude),
            "radius": float(self.radius),
            "center": [float(c) for c in self.center],
        }


@dataclass(frozen=True)
class PotentialSpec:
    kind: str
    dimension: int
    bumps: tuple[Bump, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        object.__setattr__(self, "bumps", tuple(self.bumps))
        if self.kind == "zero" and self.bumps:
            raise ValueError("zero potential takes no bumps")
        if self.kind == "radial_bump" and len(self.bumps) != 1:
            raise ValueError("radial_bump takes exactly one bump")
        if self.kind == "bump_sum" and not self.bumps:
            raise ValueError("bump_sum needs at least one bump")
        for b in self.bumps:
            if len(b.center) != self.dimension:
                raise ValueError("bump center has wrong dimension")
            if not b.radius > 0:
                raise ValueError("bump radius must be strictly positive")
            if not abs(b.amplitude) < SUP_BOUND:
                raise ValueError("bump amplitude must satisfy |V0| < 1")

    @classmethod
    def zero(cls, dimension: int = 3) -> "PotentialSpec":
        return cls("zero", dimension)

    @classmethod
    def radial_bump(
        cls,
        amplitude: float,
        radius: float = 1.0,
        dimension: int = 3,
        center: Sequence[float] | None = None,
    ) -> "PotentialSpec":
        c = tuple(float(v) for v in center) if center is not None else (0.0,) * dimension
        return cls("radial_bump", dimension, (Bump(float(amplitude), float(radius), c),))

    @classmethod
    def bump_sum(cls, bumps: Sequence[tuple[float, float, Sequence[float]]], dimension: int) -> "PotentialSpec":
        return cls(
            "bump_sum",
            dimension,
            tuple(Bump(float(a), float(r), tuple(float(v) for v in c)) for a, r, c in bumps),
        )

    def scaled(self, factor: float) -> "PotentialSpec":
        return PotentialSpec(
            self.kind,
            self.dimension,
            tuple(Bump(b.amplitude * factor, b.radius, b.center) for b in self.bumps),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "dimension": self.dimension,
            "bumps": [b.to_dict() for b in self.bumps],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PotentialSpec":
        bumps = tuple(
            Bump(float(b["amplitude"]), float(b["radius"]), tuple(float(c) for c in b["center"]))
            for b in data.get("bumps", [])
        )
        return cls(str(data["kind"]), int(data["dimension"]), bumps)


def _sample_points(spec: PotentialSpec, per_axis: int = 48) -> np.ndarray:
    pts = [np.asarray(b.center, dtype=float) for b in spec.bumps]
    lo = np.min([np.asarray(b.center) - b.radius for b in spec.bumps], axis=0)
    hi = np.max([np.asarray(b.center) + b.radius for b in spec.bumps], axis=0)
    axes = [np.linspace(l, u, per_axis) for l, u in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.dimension)
    return np.vstack([np.array(pts), grid])


@dataclass(frozen=True)
class Potential:
    """Evaluator for a validated :class:`PotentialSpec`.

    ``value`` and ``gradient`` accept points with shape ``(..., d)``; both vanish
    identically outside ``support_radius``.
    """

    spec: PotentialSpec
    support_radius: float = field(init=False)
    _centers: np.ndarray = field(init=False, repr=False, compare=False)
    _radii: np.ndarray = field(init=False, repr=False, compare=False)
    _amps: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        b = self.spec.bumps
        d = self.spec.dimension
        centers = np.array([x.center for x in b], dtype=float).reshape(len(b), d)
        radii = np.array([x.radius for x in b], dtype=float)
        amps = np.array([x.amplitude for x in b], dtype=float)
        object.__setattr__(self, "_centers", centers)
        object.__setattr__(self, "_radii", radii)
        object.__setattr__(self, "_amps", amps)
        R = float(np.max(np.linalg.norm(centers, axis=1) + radii)) if len(b) else 0.0
        object.__setattr__(self, "support_radius", R)

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def is_zero(self) -> bool:
        return len(self.spec.bumps) == 0

    @property
    def is_central(self) -> bool:
        return bool(np.all(self._centers == 0.0))

    @property
    def min_bump_radius(self) -> float:
        return float(self._radii.min()) if len(self._radii) else math.inf

    def value_and_gradient(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        val = np.zeros(x.shape[:-1])
        grad = np.zeros(x.shape)
        for c, R, a in zip(self._centers, self._radii, self._amps):
            dx = x - c
            u = np.einsum("...i,...i->...", dx, dx) / (R * R)
            inside = u < 1.0
            if not np.any(inside):
                continue
            one_minus = np.where(inside, 1.0 - u, 1.0)
            bump = np.where(inside, a * np.exp(1.0 - 1.0 / one_minus), 0.0)
            val = val + bump
            coef = -2.0 * bump / (R * R * one_minus**2)
            grad = grad + coef[..., None] * dx
        return val, grad

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.value_and_gradient(x)[0]

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.value_and_gradient(x)[1]

    def radial(self, r: np.ndarray) -> np.ndarray:
        """Profile V(r) of a central potential."""
        if not self.is_central:
            raise ValueError("radial profile requested for a non-central potential")
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape)
        for R, a in zip(self._radii, self._amps):
            u = (r / R) ** 2
            inside = u < 1.0
            out = out + np.where(inside, a * np.exp(1.0 - 1.0 / np.where(inside, 1.0 - u, 1.0)), 0.0)
        return out

    def scaled(self, factor: float) -> "Potential":
        return construct_potential(self.spec.scaled(factor))

    def line_hits_support(self, omega: np.ndarray, eta: np.ndarray) -> np.ndarray:
        """Whether the straight line ``t*omega + eta`` meets the open support of some bump."""
        omega = np.asarray(omega, dtype=float)
        eta = np.asarray(eta, dtype=float)
        hit = np.zeros(omega.shape[:-1], dtype=bool)
        for c, R in zip(self._centers, self._radii):
            rel = c - eta
            along = np.einsum("...i,...i->...", rel, omega)
            perp = rel - along[..., None] * omega
            hit |= np.einsum("...i,...i->...", perp, perp) < R * R
        return hit


def construct_potential(spec: PotentialSpec) -> Potential:
    """Validate ``spec`` and build its evaluator.

    Raises ``ValueError`` when the sampled sup of |V| reaches 1.
    """
    pot = Potential(spec)
    if not pot.is_zero:
        sup = float(np.max(np.abs(pot.value(_sample_points(spec)))))
        if sup >= SUP_BOUND:
            raise ValueError(f"sup|V| = {sup:.6g} must stay below 1")
    return pot


@dataclass(frozen=True)
class SquareWell:
    """Piecewise-constant central profile ``depth * 1[r <= radius]``.

    Only the radial solver accepts it; it exists to check phase shifts against the
    closed-form matching formula. The interval is closed so that integrating
    outward sees the interior value at the last node.
    """

    depth: float
    radius: float
    dimension: int = 3

    is_central = True
    is_zero = False

    def __post_init__(self) -> None:
        if not abs(self.depth) < SUP_BOUND or not self.radius > 0:
            raise ValueError("square well needs |depth| < 1 and radius > 0")

    @property
    def support_radius(self) -> float:
        return float(self.radius)

    def radial(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.radius, self.depth, 0.0)


@dataclass(frozen=True)
class EnergyProblem:
    h: float
    E: float
    potential: Potential

    def __post_init__(self) -> None:
        if not self.h > 0:
            raise ValueError("h must be positive")


def rescale_to_unit_energy(problem: EnergyProblem) -> EnergyProblem:
    """Map (h, E, V) to the equivalent problem (h/sqrt(E), 1, V/E)."""
    if not problem.E > 0:
        raise ValueError("energy must be positive")
    if problem.E == 1.0:
        return problem
    s = math.sqrt(problem.E)
    return EnergyProblem(problem.h / s, 1.0, problem.potential.scaled(1.0 / problem.E))


def sphere_volume(d: int) -> float:
    """Riemannian volume of the unit sphere S^{d-1} in R^d."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def ball_volume(n: int, radius: float) -> float:
    """Volume of the n-dimensional ball of the given radius."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * radius**n


def central_interaction_volume(radius: float, d: int) -> float:
    """Liouville volume of {|eta| < R} in T*S^{d-1}."""
    return ball_volume(d - 1, radius) * sphere_volume(d)

