"""Exact eigenphases of S_h for central potentials.

For a central potential S_h is diagonal on spherical harmonics of degree l with
eigenvalue e^{i beta_l}, beta_l = 2 delta_l. The phase shift delta_l is computed
with the variable-phase equation

    delta'(r) = -(U(r)/k) [f(r) cos delta - g(r) sin delta]^2,   delta(0) = 0,

where U = V/h^2, k = 1/h and f, g = sqrt(pi k r / 2) (J_nu, Y_nu)(k r) are the
free regular and irregular radial solutions (Wronskian k). delta is constant
beyond the support radius, so integrating over [0, R] gives the exact phase at
infinity. Working with the phase itself instead of the wave function or its log
derivative avoids overflow for nu >> k R and never meets a pole.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import special

STEPS_PER_H = 60
_F_FLOOR = 1e-150


class BesselRangeError(ArithmeticError):
    """Bessel value outside the representable range."""


def bessel_j(kind: str, nu, x):
    """Cylindrical Bessel function J_nu(x) or Neumann function Y_nu(x).

    Parameters
    ----------
    kind : {"J", "Y"}
    nu : float or array_like
        Order, ``nu >= 0``.
    x : float or array_like
        Argument, ``x > 0``.

    Raises
    ------
    BesselRangeError
        If the value overflows (Y_nu near the origin at large order).
    """
    nu = np.asarray(nu, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(nu < 0):
        raise ValueError("order must be non-negative")
    if np.any(x <= 0):
        raise ValueError("argument must be positive")
    if kind == "J":
        out = special.jv(nu, x)
    elif kind == "Y":
        out = special.yv(nu, x)
    else:
        raise ValueError(f"kind must be 'J' or 'Y', got {kind!r}")
    if not np.all(np.isfinite(out)):
        raise BesselRangeError(f"{kind}_nu overflow")
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class BesselEnvelope:
    """Upper bound for J_nu(nu*gamma), 0 < gamma < 1, with gamma = sech(alpha)."""

    nu: float
    gamma: float
    alpha: float = field(init=False)
    bound: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.nu >= 1:
            raise ValueError("envelope requires nu >= 1")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        alpha = math.acosh(1.0 / self.gamma)
        th = math.tanh(alpha)
        bound = math.exp(-self.nu * (alpha - th)) / math.sqrt(2 * math.pi * self.nu * th)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "bound", bound)


def bessel_envelope(nu: float, gamma: float) -> float:
    return BesselEnvelope(nu, gamma).bound


def multiplicity(d: int, l: int) -> int:
    """Dimension of the degree-l spherical harmonics on S^{d-1}."""
    if d not in (2, 3):
        raise ValueError("d must be 2 or 3")
    if l < 0:
        raise ValueError("l must be non-negative")
    return math.comb(l + d - 1, d - 1) - (math.comb(l + d - 3, d - 1) if l + d - 3 >= d - 1 else 0)


def nu_of(l, d: int):
    return np.asarray(l, dtype=float) + (d - 2) / 2.0


def _check_central(V) -> None:
    if not getattr(V, "is_central", False):
        raise ValueError("radial phase shifts need a central potential")


def phase_shifts(V, h: float, ls: Sequence[int], d: int, step: float | None = None) -> np.ndarray:
    """Phase shifts delta_l (unwrapped) for every l in ``ls``.

    Fixed-step RK4 on [0, R] with ``step`` (default h/60), vectorized over l.
    """
    _check_central(V)
    if not h > 0:
        raise ValueError("h must be positive")
    ls = np.asarray(ls, dtype=int)
    if np.any(ls < 0):
        raise ValueError("l must be non-negative")
    R = float(V.support_radius)
    if R == 0.0 or getattr(V, "is_zero", False):
        return np.zeros(len(ls))
    step = h / STEPS_PER_H if step is None else float(step)
    n = max(1, math.ceil(R / step - 1e-9))
    dr = R / n
    k = 1.0 / h
    # nodes for RK4: integer and half-integer points
    r = np.linspace(0.0, R, 2 * n + 1)
    U = V.radial(r) / (h * h)
    nu = nu_of(ls, d)
    kr = k * r[:, None]
    with np.errstate(all="ignore"):
        amp = np.sqrt(np.pi * kr / 2.0)
        f = amp * special.jv(nu[None, :], kr)
        g = amp * special.yv(nu[None, :], kr)
    live = np.isfinite(g) & np.isfinite(f) & (np.abs(f) >= _F_FLOOR) & (r[:, None] > 0)
    f = np.where(live, f, 0.0)
    g = np.where(live, g, 0.0)
    coef = np.where(live, (U / k)[:, None], 0.0)

    def rhs(i: int, delta: np.ndarray) -> np.ndarray:
        w = f[i] * np.cos(delta) - g[i] * np.sin(delta)
        return -coef[i] * w * w

    delta = np.zeros(len(ls))
    for j in range(n):
        i0, im, i1 = 2 * j, 2 * j + 1, 2 * j + 2
        k1 = rhs(i0, delta)
        k2 = rhs(im, delta + 0.5 * dr * k1)
        k3 = rhs(im, delta + 0.5 * dr * k2)
        k4 = rhs(i1, delta + dr * k3)
        delta = delta + dr / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(delta)):
        raise FloatingPointError("phase shift integration produced non-finite values")
    return delta


def wrap_phase(beta) -> np.ndarray:
    """Map angles to (-pi, pi]."""
    return np.angle(np.exp(1j * np.asarray(beta, dtype=float)))


def radial_phase_shift(V, h: float, l: int, d: int = 3, step: float | None = None) -> float:
    """Eigenphase beta_{h,l} = 2 delta_l in (-pi, pi]."""
    return float(wrap_phase(2.0 * phase_shifts(V, h, [l], d, step))[0])


@dataclass
class PhaseTable:
    h: float
    d: int
    L_max: int
    l: np.ndarray
    nu: np.ndarray
    beta: np.ndarray
    d_l: np.ndarray
    delta: np.ndarray | None = None
    support_radius: float = 0.0
    tail_fit: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.delta is None:
            self.delta = self.beta / 2.0
        if not self.tail_fit:
            self.tail_fit = tail_fit(self)

    @property
    def abs_s_minus_one(self) -> np.ndarray:
        return np.abs(np.exp(1j * self.beta) - 1.0)

    @property
    def eigenvalue_count(self) -> int:
        return int(np.sum(self.d_l))

    def rows(self):
        a = self.abs_s_minus_one
        for i in range(len(self.l)):
            yield {
                "h": self.h,
                "d": self.d,
                "l": int(self.l[i]),
                "nu": float(self.nu[i]),
                "beta": float(self.beta[i]),
                "d_l": int(self.d_l[i]),
                "abs_S_minus_1": float(a[i]),
            }

    def metadata(self) -> dict:
        return {
            "h": self.h,
            "d": self.d,
            "L_max": self.L_max,
            "support_radius": self.support_radius,
            "tail_fit": self.tail_fit,
        }

    def write(self, path) -> tuple[Path, Path]:
        """Write CSV rows and a JSON sidecar ``<path>.json`` with the tail fit."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["h", "d", "l", "nu", "beta", "d_l", "abs_S_minus_1"])
            w.writeheader()
            for row in self.rows():
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        side = path.with_suffix(path.suffix + ".json")
        side.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True))
        return path, side

    @classmethod
    def read(cls, path) -> "PhaseTable":
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        side = path.with_suffix(path.suffix + ".json")
        meta = json.loads(side.read_text()) if side.exists() else {}
        h = float(rows[0]["h"])
        d = int(rows[0]["d"])
        return cls(
            h=h,
            d=d,
            L_max=int(meta.get("L_max", len(rows) - 1)),
            l=np.array([int(r["l"]) for r in rows]),
            nu=np.array([float(r["nu"]) for r in rows]),
            beta=np.array([float(r["beta"]) for r in rows]),
            d_l=np.array([int(r["d_l"]) for r in rows]),
            support_radius=float(meta.get("support_radius", 0.0)),
            tail_fit=meta.get("tail_fit", {}),
        )


def default_lmax(R: float, h: float) -> int:
    return math.ceil(2 * R / h) + 10


def tail_fit(table: PhaseTable) -> dict:
    """Least-squares fit of log|e^{i beta}-1| against l on the tail l >= 1.2 R/h.

    Rows whose value underflowed to zero are excluded. ``envelope_C`` is the
    smallest C with |e^{i beta_l}-1| <= C e^{-c l} on the fitted range, c = -slope.
    """
    R = table.support_radius
    start = math.ceil(1.2 * R / table.h)
    vals = table.abs_s_minus_one
    sel = (table.l >= start) & (vals > 1e-300)
    out = {"l_start": start, "l_end": int(table.L_max), "points": int(sel.sum())}
    if sel.sum() < 3:
        out.update(slope=None, intercept=None, correlation=None, envelope_C=None)
        return out
    x = table.l[sel].astype(float)
    y = np.log(vals[sel])
    slope, intercept = np.polyfit(x, y, 1)
    rho = float(np.corrcoef(x, y)[0, 1])
    c = -slope
    env = float(np.max(y + c * x))
    out.update(
        slope=float(slope),
        intercept=float(intercept),
        correlation=rho,
        envelope_C=float(math.exp(env)),
    )
    return out


def phase_table(V, h: float, d: int = 3, L_max: int | None = None, step: float | None = None) -> PhaseTable:
    """Eigenphases for l = 0..L_max with multiplicities and tail-decay metadata."""
    _check_central(V)
    R = float(V.support_radius)
    need = math.ceil(2 * R / h)
    L_max = default_lmax(R, h) if L_max is None else int(L_max)
    if L_max < need:
        raise ValueError(f"L_max = {L_max} below ceil(2R/h) = {need}")
    ls = np.arange(L_max + 1)
    delta = phase_shifts(V, h, ls, d, step)
    return PhaseTable(
        h=float(h),
        d=int(d),
        L_max=L_max,
        l=ls,
        nu=nu_of(ls, d),
        beta=wrap_phase(2.0 * delta),
        d_l=np.array([multiplicity(d, int(l)) for l in ls]),
        delta=delta,
        support_radius=R,
    )
