"""The eigenphase measure mu_h, sector counts, weighted norms and trace formulas.

For eigenphases beta_n with weights w_n the rescaled counting measure is

    <mu_h, f> = (2 pi h)^{d-1} / c_V * sum_n w_n f(e^{i beta_n}),

with c_V = Vol(interaction region) at unit energy. As h -> 0 it converges to
normalized Lebesgue measure on the circle for test functions vanishing at 1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

TWO_PI = 2.0 * math.pi
SECTOR_MARGIN = 0.1


# ---------------------------------------------------------------------------
# eigenphase multisets


@dataclass
class EigenphaseSet:
    """Eigenphases in (-pi, pi] with weights.

    Central sets carry the angular momentum ``l`` of each row and the tail fit of
    the phase table they came from; dense sets have unit weights and no ``l``.
    """

    betas: np.ndarray
    weights: np.ndarray
    source: str
    h: float
    d: int
    l: np.ndarray | None = None
    tail_fit: dict = field(default_factory=dict)
    L_max: int | None = None

    def __post_init__(self) -> None:
        self.betas = np.asarray(self.betas, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.betas.shape != self.weights.shape:
            raise ValueError("betas and weights must align")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if self.source not in ("central-table", "dense-2d"):
            raise ValueError(f"unknown source {self.source!r}")

    @classmethod
    def from_table(cls, table) -> "EigenphaseSet":
        return cls(
            table.beta.copy(),
            table.d_l.astype(float),
            "central-table",
            table.h,
            table.d,
            l=np.asarray(table.l).copy(),
            tail_fit=dict(table.tail_fit),
            L_max=int(table.L_max),
        )

    def __len__(self) -> int:
        return len(self.betas)

    @property
    def total_weight(self) -> float:
        return float(math.fsum(self.weights))

    @property
    def angles(self) -> np.ndarray:
        """Eigenphases taken mod 2 pi, in [0, 2 pi)."""
        return np.mod(self.betas, TWO_PI)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.exp(1j * self.betas)

    def write_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["beta", "weight", "source", "h", "d"])
            for b, wt in zip(self.betas, self.weights):
                w.writerow([repr(float(b)), repr(float(wt)), self.source, repr(float(self.h)), self.d])
        return path


# ---------------------------------------------------------------------------
# test functions


class TestFunction:
    """Continuous function on the unit circle; admissible when it vanishes at 1."""

    __test__ = False  # keep pytest from collecting the class

    def __call__(self, z):
        raise NotImplementedError

    def ratio_at_one(self) -> complex:
        """Limit of f(z)/(z-1) as z -> 1 along the circle."""
        raise NotImplementedError

    def circle_mean(self) -> complex:
        """(1/2 pi) int f(e^{i phi}) d phi."""
        raise NotImplementedError

    def value_at_one(self) -> complex:
        return complex(self(np.array([1.0 + 0j]))[0])

    def is_admissible(self, tol: float = 1e-12) -> bool:
        return abs(self.value_at_one()) <= tol

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return LinearCombination(((1.0, self), (1.0, other)))

    def __rmul__(self, c: complex) -> "TestFunction":
        return LinearCombination(((c, self),))

    def __mul__(self, c: complex) -> "TestFunction":
        return LinearCombination(((c, self),))

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return LinearCombination(((1.0, self), (-1.0, other)))


class Polynomial(TestFunction):
    """Laurent polynomial sum_k a_k z^k on the circle (z^{-1} = conj z).

    Parameters
    ----------
    coeffs : dict
        Mapping k -> a_k, k may be negative.
    """

    def __init__(self, coeffs: dict[int, complex]):
        self.coeffs = {int(k): complex(v) for k, v in coeffs.items() if v != 0}

    @classmethod
    def power_minus_one(cls, k: int) -> "Polynomial":
        """z^k - 1."""
        if k == 0:
            return cls({})
        return cls({k: 1.0, 0: -1.0})

    @property
    def degree(self) -> int:
        return max((abs(k) for k in self.coeffs), default=0)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for k, a in self.coeffs.items():
            out = out + a * z**k
        return out

    def ratio_at_one(self) -> complex:
        return complex(sum(k * a for k, a in self.coeffs.items()))

    def circle_mean(self) -> complex:
        return self.coeffs.get(0, 0j)

    def __repr__(self) -> str:
        return f"Polynomial({self.coeffs})"

    def to_dict(self) -> dict:
        return {str(k): [v.real, v.imag] for k, v in sorted(self.coeffs.items())}


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, antisymmetric about 1/2."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


class SectorMollifier(TestFunction):
    """Smoothed indicator of the arc [phi0, phi1] with transitions of width ``width``.

    Each transition is centered at its endpoint, so the circle mean is exactly
    (phi1 - phi0)/(2 pi). The support must stay away from angle 0.
    """

    def __init__(self, phi0: float, phi1: float, width: float):
        if not (width > 0 and phi0 - width / 2 > 0 and phi1 + width / 2 < TWO_PI and phi1 - phi0 > width):
            raise ValueError("sector mollifier must be supported away from angle 0")
        self.phi0, self.phi1, self.width = float(phi0), float(phi1), float(width)

    def __call__(self, z):
        phi = np.mod(np.angle(np.asarray(z, dtype=complex)), TWO_PI)
        w = self.width
        up = _smooth_step((phi - (self.phi0 - w / 2)) / w)
        down = _smooth_step(((self.phi1 + w / 2) - phi) / w)
        return (up * down).astype(complex)

    def ratio_at_one(self) -> complex:
        return 0j

    def circle_mean(self) -> complex:
        return complex((self.phi1 - self.phi0) / TWO_PI)


class LinearCombination(TestFunction):
    def __init__(self, terms: Sequence[tuple[complex, TestFunction]]):
        flat = []
        for c, f in terms:
            if isinstance(f, LinearCombination):
                flat.extend((c * c2, f2) for c2, f2 in f.terms)
            else:
                flat.append((complex(c), f))
        self.terms = tuple(flat)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for c, f in self.terms:
            out = out + c * f(z)
        return out

    def ratio_at_one(self) -> complex:
        return sum((c * f.ratio_at_one() for c, f in self.terms), 0j)

    def circle_mean(self) -> complex:
        return sum((c * f.circle_mean() for c, f in self.terms), 0j)


def _require_admissible(f: TestFunction) -> None:
    if not f.is_admissible():
        raise ValueError(f"test function does not vanish at z = 1 (f(1) = {f.value_at_one():.3g})")


def weighted_norm(f: TestFunction, M: int = 256, tol: float = 1e-6, max_M: int = 1 << 20) -> float:
    """sup over the circle minus {1} of |f(z)/(z-1)|.

    The grid is refined geometrically towards z = 1 and the continuous extension
    at 1 is included; M doubles until the maximum changes by less than ``tol``.
    """
    _require_admissible(f)

    def estimate(m: int) -> float:
        theta = TWO_PI * np.arange(1, m) / m
        near = TWO_PI / m * 2.0 ** -np.arange(1, 30)
        theta = np.concatenate([theta, near, TWO_PI - near])
        z = np.exp(1j * theta)
        vals = np.abs(f(z) / (z - 1.0))
        return float(max(np.max(vals), abs(f.ratio_at_one())))

    prev = estimate(M)
    while M < max_M:
        M *= 2
        cur = estimate(M)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    return prev


# ---------------------------------------------------------------------------
# pairing, counts, traces


def _fsum_complex(values: np.ndarray) -> complex:
    return complex(math.fsum(np.real(values)), math.fsum(np.imag(values)))


def scale_factor(h: float, d: int) -> float:
    return (TWO_PI * h) ** (d - 1)


def tail_sum(phases: EigenphaseSet) -> float:
    """Bound on sum_{l > L_max} d_l |e^{i beta_l} - 1| from the fitted envelope."""
    fit = phases.tail_fit or {}
    C, slope = fit.get("envelope_C"), fit.get("slope")
    if phases.source != "central-table" or C is None or slope is None or slope >= 0:
        return 0.0
    from eigenphase.partialwave import multiplicity

    c = -slope
    total = 0.0
    l = phases.L_max + 1
    while True:
        term = multiplicity(phases.d, l) * min(2.0, C * math.exp(-c * l))
        total += term
        if term < 1e-18 * max(total, 1e-300) or l > phases.L_max + 100000:
            break
        l += 1
    return total


def pair_measure(phases: EigenphaseSet, f: TestFunction, c_V: float) -> complex:
    """<mu_h, f> with compensated summation over the eigenphase multiset."""
    if not c_V > 0:
        raise ValueError("c_V must be positive")
    _require_admissible(f)
    vals = phases.weights * f(phases.eigenvalues)
    return scale_factor(phases.h, phases.d) / c_V * _fsum_complex(vals)


def pairing_tail_bound(phases: EigenphaseSet, f: TestFunction, c_V: float) -> float:
    """Bound on the pairing contribution of rows beyond the table."""
    s = tail_sum(phases)
    if s == 0.0:
        return 0.0
    return scale_factor(phases.h, phases.d) / c_V * weighted_norm(f) * s


def _check_sector(phi0: float, phi1: float) -> None:
    if not (0 < phi0 < phi1 < TWO_PI):
        raise ValueError("sector must satisfy 0 < phi0 < phi1 < 2 pi (it may not contain angle 0)")


def count_sector(phases: EigenphaseSet, phi0: float, phi1: float) -> int:
    """Weighted number of eigenphases with beta mod 2 pi in the closed arc [phi0, phi1]."""
    _check_sector(phi0, phi1)
    a = phases.angles
    sel = (a >= phi0) & (a <= phi1)
    return int(round(math.fsum(phases.weights[sel])))


def normalized_count(phases: EigenphaseSet, phi0: float, phi1: float, c_V: float) -> float:
    if not c_V > 0:
        raise ValueError("c_V must be positive")
    return scale_factor(phases.h, phases.d) * count_sector(phases, phi0, phi1) / c_V


@dataclass(frozen=True)
class MeasureReport:
    h: float
    d: int
    c_V: float
    pairing: complex
    pairing_target: complex
    tail_bound: float
    sector: tuple[float, float]
    count: int
    normalized_count: float
    limit_target: float
    relative_error: float

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "d": self.d,
            "c_V": self.c_V,
            "pairing": [self.pairing.real, self.pairing.imag],
            "pairing_target": [self.pairing_target.real, self.pairing_target.imag],
            "tail_bound": self.tail_bound,
            "sector": list(self.sector),
            "count": self.count,
            "normalized_count": self.normalized_count,
            "limit_target": self.limit_target,
            "relative_error": self.relative_error,
        }


def measure_report(
    phases: EigenphaseSet, f: TestFunction, c_V: float, sector: tuple[float, float] = (math.pi / 2, 3 * math.pi / 2)
) -> MeasureReport:
    pairing = pair_measure(phases, f, c_V)
    n = count_sector(phases, *sector)
    norm = scale_factor(phases.h, phases.d) * n / c_V
    target = (sector[1] - sector[0]) / TWO_PI
    return MeasureReport(
        phases.h,
        phases.d,
        c_V,
        pairing,
        f.circle_mean(),
        pairing_tail_bound(phases, f, c_V),
        (float(sector[0]), float(sector[1])),
        n,
        norm,
        target,
        abs(norm - target) / target,
    )


@dataclass(frozen=True)
class TraceReport:
    h: float
    d: int
    polynomial: dict
    lhs: complex
    rhs: complex
    relative_error: float
    tail_bound: float = 0.0
    cutoff: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "d": self.d,
            "polynomial": self.polynomial,
            "lhs": [self.lhs.real, self.lhs.imag],
            "rhs": [self.rhs.real, self.rhs.imag],
            "relative_error": self.relative_error,
            "tail_bound": self.tail_bound,
            "cutoff": list(self.cutoff) if self.cutoff else None,
        }


def _relative(lhs: complex, rhs: complex) -> float:
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return abs(lhs - rhs) / abs(rhs)


def trace_check(phases: EigenphaseSet, p: Polynomial, volume: float) -> TraceReport:
    """Compare Tr p(S_h) with Vol(I) (2 pi h)^{1-d} times the circle mean of p."""
    if not isinstance(p, Polynomial):
        raise TypeError("trace_check takes a Polynomial")
    if abs(p.value_at_one()) > 1e-12:
        raise ValueError("trace formula needs p(1) = 0")
    lhs = _fsum_complex(phases.weights * p(phases.eigenvalues))
    rhs = volume / scale_factor(phases.h, phases.d) * p.circle_mean()
    tail = max(abs(a) for a in p.coeffs.values()) * p.degree * tail_sum(phases) if p.coeffs else 0.0
    return TraceReport(phases.h, phases.d, p.to_dict(), lhs, complex(rhs), _relative(lhs, rhs), tail)


def taper(t, R: float, R_star: float):
    """rho(t): 1 for t <= R^2, cosine taper to 0 at R_star^2, 0 beyond."""
    t = np.asarray(t, dtype=float)
    a, b = R * R, R_star * R_star
    if b <= a:
        return np.where(t <= a, 1.0, 0.0)
    s = np.clip((t - a) / (b - a), 0.0, 1.0)
    return np.where(t <= a, 1.0, np.where(t >= b, 0.0, 0.5 * (1.0 + np.cos(math.pi * s))))


def cutoff_trace_check(phases: EigenphaseSet, R: float, R_star: float) -> TraceReport:
    """Trace of A_h (S_h - 1) with A_h = rho(h^2 Laplacian on the sphere), central case.

    LHS = sum_l d_l rho(h^2 l(l+d-2)) (e^{i beta_l} - 1) and
    RHS = -(2 pi h)^{1-d} int_{|eta| <= R} rho(|eta|^2) d omega d eta.
    """
    if phases.source != "central-table" or phases.l is None:
        raise ValueError("cutoff trace needs a central eigenphase table")
    if R_star < R:
        raise ValueError("R_star must be at least R")
    from eigenphase.potential import sphere_volume

    d, h = phases.d, phases.h
    lam = h * h * phases.l * (phases.l + d - 2)
    lhs = _fsum_complex(phases.weights * taper(lam, R, R_star) * (phases.eigenvalues - 1.0))
    shell = sphere_volume(d - 1) if d > 2 else 2.0
    radial, _ = integrate.quad(lambda s: float(taper(s * s, R, R_star)) * s ** (d - 2), 0.0, R, epsabs=1e-13)
    vol = sphere_volume(d) * shell * radial
    rhs = -vol / scale_factor(h, d)
    return TraceReport(h, d, {"1": [1.0, 0.0], "0": [-1.0, 0.0]}, lhs, complex(rhs), _relative(lhs, rhs), 0.0, (R, R_star))


# ---------------------------------------------------------------------------
# equidistribution


def sector_grid(n: int, margin: float = SECTOR_MARGIN) -> list[tuple[float, float]]:
    """``n`` equal closed sectors tiling [margin, 2 pi - margin]."""
    edges = np.linspace(margin, TWO_PI - margin, n + 1)
    return [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]


def quarter_sectors(margin: float = SECTOR_MARGIN) -> list[tuple[float, float]]:
    """Four sectors of width pi/2 (target 1/4), two anchored at each end of the admissible range."""
    q = math.pi / 2
    lo, hi = margin, TWO_PI - margin
    return [(lo, lo + q), (lo + q, lo + 2 * q), (hi - 2 * q, hi - q), (hi - q, hi)]


@dataclass
class EquidistributionReport:
    rows: list[dict]
    sup_deviation: dict[float, float]
    degenerate: bool = False

    @property
    def decreasing(self) -> bool:
        hs = sorted(self.sup_deviation, reverse=True)
        devs = [self.sup_deviation[h] for h in hs]
        return all(b < a for a, b in zip(devs, devs[1:]))

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "sup_deviation": {repr(k): v for k, v in self.sup_deviation.items()},
            "decreasing": self.decreasing,
            "degenerate": self.degenerate,
        }


def equidistribution_report(
    phase_sets: Iterable[EigenphaseSet], c_V: float, sectors: Sequence[tuple[float, float]]
) -> EquidistributionReport:
    """Normalized sector counts against (phi1 - phi0)/(2 pi) for each h."""
    for a, b in sectors:
        _check_sector(a, b)
        if a < SECTOR_MARGIN - 1e-12 or b > TWO_PI - SECTOR_MARGIN + 1e-12:
            raise ValueError("sectors must stay 0.1 rad away from angle 0")
    if not c_V > 0:
        return EquidistributionReport([], {}, degenerate=True)
    rows, sup = [], {}
    for ps in phase_sets:
        worst = 0.0
        for a, b in sectors:
            n = count_sector(ps, a, b)
            norm = scale_factor(ps.h, ps.d) * n / c_V
            target = (b - a) / TWO_PI
            dev = abs(norm - target)
            worst = max(worst, dev)
            rows.append({"h": ps.h, "phi0": a, "phi1": b, "count": n, "normalized": norm, "target": target, "deviation": dev})
        sup[ps.h] = worst
    return EquidistributionReport(rows, sup)


def histogram(phases: EigenphaseSet, bins: int, c_V: float) -> list[dict]:
    """Weighted eigenphase histogram over [0, 2 pi).

    ``density`` is (2 pi h)^{d-1} count / (c_V binwidth), whose equidistributed
    level is 1/(2 pi); ``density_normalized`` is 2 pi times that (flat level 1).
    """
    if bins < 8:
        raise ValueError("need at least 8 bins")
    edges = np.linspace(0.0, TWO_PI, bins + 1)
    counts, _ = np.histogram(phases.angles, bins=edges, weights=phases.weights)
    width = TWO_PI / bins
    s = scale_factor(phases.h, phases.d)
    out = []
    for i in range(bins):
        dens = s * counts[i] / (c_V * width) if c_V > 0 else 0.0
        out.append(
            {
                "left": float(edges[i]),
                "right": float(edges[i + 1]),
                "count": float(counts[i]),
                "density": dens,
                "density_normalized": TWO_PI * dens,
            }
        )
    return out


def dyadic_shell_counts(phases: EigenphaseSet, delta: float, jmax: int) -> np.ndarray:
    """Weighted counts of |beta| in [delta 2^{-(j+1)}, delta 2^{-j}) for j = 0..jmax."""
    a = np.abs(phases.betas)
    out = np.zeros(jmax + 1)
    for j in range(jmax + 1):
        sel = (a >= delta * 2.0 ** -(j + 1)) & (a < delta * 2.0**-j)
        out[j] = math.fsum(phases.weights[sel])
    return out


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True))
    return path
