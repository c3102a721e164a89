"""Classical scattering at unit energy: sojourn map, sojourn time, Liouville volumes.

Trajectories solve ``x'' = -grad V / 2`` so that ``|x'|^2 + V = 1`` is conserved
and the incoming asymptote ``x = t*omega + eta`` has unit speed. Many rays are
integrated at once by a batched embedded Runge-Kutta 5(4) scheme with per-ray
step control.

The sojourn time is the regularized action ``lim (int p.dq - 2T)`` between the
points at parameter -T on the incoming line and +T on the outgoing line,

    tau = -int V(x(s)) ds + B,

where ``B`` is a boundary term. With ``B = t_exit - x_exit . omega'`` (the
``"delay"`` candidate) this satisfies ``d tau = eta.d omega - eta'.d omega'``
exactly; :func:`calibrate_boundary_term` checks every candidate against that
identity numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from eigenphase.potential import Potential, ball_volume, sphere_volume
from eigenphase.rng import STREAM_CONTACT, STREAM_FIXED_POINT, STREAM_VOLUME, sample_rays


class TrappedError(RuntimeError):
    """A trajectory failed to leave the interaction ball within ``T_max``."""


class StepFailure(RuntimeError):
    """The adaptive step size underflowed."""


# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


@dataclass(frozen=True)
class IntegratorOptions:
    tol: float = 1e-10
    margin: float = 2.0
    tmax_factor: float = 100.0
    max_step: float | None = None
    min_step: float = 1e-12
    initial_step: float = 1e-2


DEFAULT_OPTIONS = IntegratorOptions()


@dataclass(frozen=True)
class IncomingRay:
    omega: tuple[float, ...]
    eta: tuple[float, ...]

    def __post_init__(self) -> None:
        o = np.asarray(self.omega, dtype=float)
        e = np.asarray(self.eta, dtype=float)
        if o.shape != e.shape or o.ndim != 1:
            raise ValueError("omega and eta must be vectors of equal length")
        if abs(np.linalg.norm(o) - 1.0) > 1e-12:
            raise ValueError("omega must be a unit vector")
        if abs(float(o @ e)) > 1e-12:
            raise ValueError("eta must be orthogonal to omega")
        object.__setattr__(self, "omega", tuple(float(v) for v in o))
        object.__setattr__(self, "eta", tuple(float(v) for v in e))

    @classmethod
    def project(cls, omega, eta) -> "IncomingRay":
        """Normalize omega and project eta onto omega-perp."""
        o = np.asarray(omega, dtype=float)
        o = o / np.linalg.norm(o)
        e = np.asarray(eta, dtype=float)
        e = e - (e @ o) * o
        return cls(tuple(o), tuple(e))

    @property
    def dimension(self) -> int:
        return len(self.omega)


@dataclass(frozen=True)
class ScatterDatum:
    incoming: IncomingRay
    omega_out: tuple[float, ...]
    eta_out: tuple[float, ...]
    tau: float
    interacted: bool
    energy_drift: float
    potential_integral: float = 0.0
    delay: float = 0.0
    boundary: str = "delay"


@dataclass
class ScatterBatch:
    """Sojourn data for many rays; rows align with the input arrays."""

    omega: np.ndarray
    eta: np.ndarray
    omega_out: np.ndarray
    eta_out: np.ndarray
    interacted: np.ndarray
    trapped: np.ndarray
    energy_drift: np.ndarray
    potential_integral: np.ndarray
    delay: np.ndarray
    boundary: str = "delay"
    tau: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.tau = sojourn_time_from_parts(self, self.boundary)

    def __len__(self) -> int:
        return len(self.omega)

    def datum(self, i: int) -> ScatterDatum:
        return ScatterDatum(
            IncomingRay(tuple(self.omega[i]), tuple(self.eta[i])),
            tuple(float(v) for v in self.omega_out[i]),
            tuple(float(v) for v in self.eta_out[i]),
            float(self.tau[i]),
            bool(self.interacted[i]),
            float(self.energy_drift[i]),
            float(self.potential_integral[i]),
            float(self.delay[i]),
            self.boundary,
        )


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    potential_integral: float
    winding: float
    energy_drift: float
    steps: int

    @property
    def exit_time(self) -> float:
        return float(self.times[-1])

    @property
    def exit_position(self) -> np.ndarray:
        return self.positions[-1]

    @property
    def exit_velocity(self) -> np.ndarray:
        return self.velocities[-1]


@dataclass(frozen=True)
class LiouvilleEstimate:
    volume: float
    std_error: float
    samples: int
    eta_max: float


@dataclass(frozen=True)
class FixedPointEstimate:
    l: int
    fraction: float
    tolerance: float
    samples: int
    interacting: int
    trapped: int


# ---------------------------------------------------------------------------
# integrator


def _start_states(V: Potential, omegas: np.ndarray, etas: np.ndarray, opts: IntegratorOptions):
    R0 = V.support_radius + opts.margin
    eta2 = np.einsum("ij,ij->i", etas, etas)
    t0 = -np.sqrt(np.maximum(R0 * R0 - eta2, 0.0))
    x0 = t0[:, None] * omegas + etas
    return t0, x0


def _propagate(
    V: Potential,
    omegas: np.ndarray,
    etas: np.ndarray,
    opts: IntegratorOptions = DEFAULT_OPTIONS,
    record: bool = False,
    raise_trapped: bool = True,
):
    """Integrate every ray from the entry sphere until it leaves it outward."""
    n, d = omegas.shape
    R0 = V.support_radius + opts.margin
    t_max = opts.tmax_factor * R0
    max_step = opts.max_step if opts.max_step is not None else 0.1 * min(V.min_bump_radius, 1.0)
    tol = opts.tol

    t0, x0 = _start_states(V, omegas, etas, opts)
    # state: x (d), v (d), int V dt, in-plane winding of the velocity
    y = np.zeros((n, 2 * d + 2))
    y[:, :d] = x0
    y[:, d : 2 * d] = omegas
    t = t0.copy()

    def rhs(state: np.ndarray):
        x = state[:, :d]
        v = state[:, d : 2 * d]
        val, grad = V.value_and_gradient(x)
        acc = -0.5 * grad
        out = np.empty_like(state)
        out[:, :d] = v
        out[:, d : 2 * d] = acc
        out[:, 2 * d] = val
        speed2 = v[:, 0] ** 2 + v[:, 1] ** 2
        out[:, 2 * d + 1] = np.where(
            speed2 > 0, (v[:, 0] * acc[:, 1] - v[:, 1] * acc[:, 0]) / np.where(speed2 > 0, speed2, 1.0), 0.0
        )
        return out, val

    k_first, _ = rhs(y)
    step = np.full(n, opts.initial_step)
    drift = np.zeros(n)
    done = np.zeros(n, dtype=bool)
    trapped = np.zeros(n, dtype=bool)
    nsteps = np.zeros(n, dtype=int)
    if record:
        rec_t, rec_x, rec_v = [t.copy()], [y[:, :d].copy()], [y[:, d : 2 * d].copy()]

    active = np.arange(n)
    while active.size:
        ya = y[active]
        ha = step[active][:, None]
        ks = [k_first[active]]
        for s in range(1, 7):
            inc = sum(_A[s][j] * ks[j] for j in range(s) if _A[s][j] != 0.0)
            k, vals = rhs(ya + ha * inc)
            ks.append(k)
        y_new = ya + ha * sum(_B[j] * ks[j] for j in range(6) if _B[j] != 0.0)
        err_vec = ha * sum(_E[j] * ks[j] for j in range(7) if _E[j] != 0.0)
        scale = tol + tol * np.maximum(np.abs(ya), np.abs(y_new))
        err = np.max(np.abs(err_vec) / scale, axis=1)
        accept = err <= 1.0

        with np.errstate(divide="ignore"):
            factor = np.where(err > 0, 0.9 * err ** -0.2, 5.0)
        factor = np.clip(factor, 0.2, 5.0)
        new_step = np.minimum(step[active] * factor, max_step)

        acc_idx = active[accept]
        y[acc_idx] = y_new[accept]
        t[acc_idx] += step[acc_idx]
        k_first[acc_idx] = ks[6][accept]
        nsteps[acc_idx] += 1
        xa = y_new[accept][:, :d]
        va = y_new[accept][:, d : 2 * d]
        energy = np.einsum("ij,ij->i", va, va) + vals[accept]
        drift[acc_idx] = np.maximum(drift[acc_idx], np.abs(energy - 1.0))
        step[active] = new_step
        if record:
            rec_t.append(t.copy())
            rec_x.append(y[:, :d].copy())
            rec_v.append(y[:, d : 2 * d].copy())

        leaving = (np.einsum("ij,ij->i", xa, xa) > R0 * R0) & (np.einsum("ij,ij->i", xa, va) > 0)
        done[acc_idx[leaving]] = True
        over = (t[active] - t0[active]) > t_max
        trapped[active[over & ~done[active]]] = True
        if np.any(step[active] < opts.min_step):
            raise StepFailure("adaptive step underflow")
        active = active[~done[active] & ~trapped[active]]

    if raise_trapped and trapped.any():
        raise TrappedError(f"{int(trapped.sum())} trajectories exceeded T_max = {t_max:g}")

    out = {
        "t": t,
        "x": y[:, :d],
        "v": y[:, d : 2 * d],
        "potential_integral": y[:, 2 * d],
        "winding": y[:, 2 * d + 1],
        "drift": drift,
        "trapped": trapped,
        "steps": nsteps,
    }
    if record:
        out["record"] = (np.array(rec_t), np.array(rec_x), np.array(rec_v))
    return out


def integrate_trajectory(V: Potential, ray: IncomingRay, opts: IntegratorOptions = DEFAULT_OPTIONS) -> Trajectory:
    """Integrate one ray, keeping every accepted step.

    The trajectory starts on the incoming asymptote at ``|x| = R + margin`` and
    stops at the first accepted step outside that sphere moving outward.

    Raises
    ------
    TrappedError
        If the flow time exceeds ``tmax_factor * (R + margin)``.
    StepFailure
        If the adaptive step underflows ``min_step``.
    """
    om = np.asarray(ray.omega, dtype=float)[None, :]
    et = np.asarray(ray.eta, dtype=float)[None, :]
    res = _propagate(V, om, et, opts, record=True)
    ts, xs, vs = res["record"]
    # drop repeated rows left behind by rejected steps
    keep = np.concatenate([[True], np.diff(ts[:, 0]) != 0])
    return Trajectory(
        times=ts[keep, 0],
        positions=xs[keep, 0],
        velocities=vs[keep, 0],
        potential_integral=float(res["potential_integral"][0]),
        winding=float(res["winding"][0]),
        energy_drift=float(res["drift"][0]),
        steps=int(res["steps"][0]),
    )


# ---------------------------------------------------------------------------
# sojourn map and time


def _b_symmetric(batch) -> np.ndarray:
    return -0.5 * np.einsum("ij,ij->i", batch.eta + batch.eta_out, batch.omega_out - batch.omega)


def _b_zero(batch) -> np.ndarray:
    return np.zeros(len(batch.omega))


def _b_outgoing(batch) -> np.ndarray:
    return -np.einsum("ij,ij->i", batch.eta_out, batch.omega_out - batch.omega)


def _b_delay(batch) -> np.ndarray:
    return batch.delay


BOUNDARY_TERMS: dict[str, Callable] = {
    "symmetric": _b_symmetric,
    "zero": _b_zero,
    "outgoing": _b_outgoing,
    "delay": _b_delay,
}
# order in which calibration tries the candidates
BOUNDARY_ORDER = ("symmetric", "zero", "outgoing", "delay")


def sojourn_time_from_parts(batch, boundary: str = "delay") -> np.ndarray:
    """tau = -int V ds + B; exactly zero for rays that miss the support."""
    if boundary not in BOUNDARY_TERMS:
        raise ValueError(f"unknown boundary term {boundary!r}")
    tau = -batch.potential_integral + BOUNDARY_TERMS[boundary](batch)
    return np.where(batch.interacted, tau, 0.0)


def sojourn_map_batch(
    V: Potential,
    omegas: np.ndarray,
    etas: np.ndarray,
    boundary: str = "delay",
    opts: IntegratorOptions = DEFAULT_OPTIONS,
    raise_trapped: bool = True,
) -> ScatterBatch:
    """Sojourn map for an array of rays ``(n, d)``.

    Rays whose straight incoming line misses the support are returned unchanged
    with zero sojourn time and are never integrated.
    """
    omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
    etas = np.atleast_2d(np.asarray(etas, dtype=float))
    n = len(omegas)
    om_out = omegas.copy()
    et_out = etas.copy()
    drift = np.zeros(n)
    pint = np.zeros(n)
    delay = np.zeros(n)
    trapped = np.zeros(n, dtype=bool)
    hit = V.line_hits_support(omegas, etas) if not V.is_zero else np.zeros(n, dtype=bool)
    idx = np.flatnonzero(hit)
    if idx.size:
        res = _propagate(V, omegas[idx], etas[idx], opts, raise_trapped=raise_trapped)
        v = res["v"]
        w = v / np.linalg.norm(v, axis=1, keepdims=True)
        x = res["x"]
        along = np.einsum("ij,ij->i", x, w)
        om_out[idx] = w
        et_out[idx] = x - along[:, None] * w
        drift[idx] = res["drift"]
        pint[idx] = res["potential_integral"]
        delay[idx] = res["t"] - along
        trapped[idx] = res["trapped"]
        # trapped rays carry no meaningful outgoing data
        bad = idx[res["trapped"]]
        om_out[bad] = np.nan
        et_out[bad] = np.nan
    return ScatterBatch(omegas, etas, om_out, et_out, hit, trapped, drift, pint, delay, boundary)


def sojourn_map(
    V: Potential, ray: IncomingRay, boundary: str = "delay", opts: IntegratorOptions = DEFAULT_OPTIONS
) -> ScatterDatum:
    """Outgoing data (omega', eta') and sojourn time of one incoming ray."""
    batch = sojourn_map_batch(
        V, np.asarray(ray.omega)[None, :], np.asarray(ray.eta)[None, :], boundary, opts
    )
    return batch.datum(0)


def sojourn_time(V: Potential, ray: IncomingRay, boundary: str = "delay", opts: IntegratorOptions = DEFAULT_OPTIONS) -> float:
    return sojourn_map(V, ray, boundary, opts).tau


def inverse_sojourn_batch(
    V: Potential,
    omegas: np.ndarray,
    etas: np.ndarray,
    boundary: str = "delay",
    opts: IntegratorOptions = DEFAULT_OPTIONS,
    raise_trapped: bool = True,
) -> ScatterBatch:
    """Inverse sojourn map by time reversal: S^-1(w, e) = flip(S(-w, e))."""
    res = sojourn_map_batch(V, -np.asarray(omegas), etas, boundary, opts, raise_trapped)
    return ScatterBatch(
        np.asarray(omegas, dtype=float),
        np.asarray(etas, dtype=float),
        -res.omega_out,
        res.eta_out,
        res.interacted,
        res.trapped,
        res.energy_drift,
        res.potential_integral,
        res.delay,
        boundary,
    )


# ---------------------------------------------------------------------------
# contact identity


def _perp_basis(omega: np.ndarray) -> np.ndarray:
    """Orthonormal basis of omega-perp, shape (d-1, d)."""
    d = len(omega)
    m = np.eye(d) - np.outer(omega, omega)
    u, s, _ = np.linalg.svd(m)
    return u[:, : d - 1].T


def _variations(omega: np.ndarray, eta: np.ndarray, step: float):
    """Rays displaced by +/- step along a basis of T(T*S^{d-1}) at (omega, eta).

    Returns displaced (omega, eta) arrays of shape (2k, d) ordered
    [+v_1, -v_1, +v_2, -v_2, ...] and the derivative of omega along each v_j.
    """
    basis = _perp_basis(omega)
    oms, ets, domegas = [], [], []
    for e in basis:
        # rotate omega and eta together in the (omega, e) plane
        pe = float(eta @ e)
        for sgn in (1.0, -1.0):
            eps = sgn * step
            oms.append(math.cos(eps) * omega + math.sin(eps) * e)
            ets.append(eta + pe * ((math.cos(eps) - 1.0) * e - math.sin(eps) * omega))
        domegas.append(e)
    for f in basis:
        for sgn in (1.0, -1.0):
            oms.append(omega.copy())
            ets.append(eta + sgn * step * f)
        domegas.append(np.zeros_like(omega))
    return np.array(oms), np.array(ets), np.array(domegas)


def _contact_defects_from_batch(base: ScatterBatch, pert: ScatterBatch, domegas: np.ndarray, step: float, k: int):
    """Defects |D tau - (eta.D omega - eta'.D omega')| for each boundary candidate."""
    n = len(base)
    out = {}
    for name in BOUNDARY_TERMS:
        tau_p = sojourn_time_from_parts(pert, name).reshape(n, k, 2)
        d_tau = (tau_p[:, :, 0] - tau_p[:, :, 1]) / (2 * step)
        om_p = pert.omega_out.reshape(n, k, 2, -1)
        d_om_out = (om_p[:, :, 0] - om_p[:, :, 1]) / (2 * step)
        lhs = np.einsum("id,ikd->ik", base.eta, domegas) - np.einsum("id,ikd->ik", base.eta_out, d_om_out)
        out[name] = np.max(np.abs(d_tau - lhs), axis=1)
    return out


def _check_step(step: float, opts: IntegratorOptions) -> None:
    if step <= 0 or opts.tol / step > 1e-4:
        raise ValueError(f"finite-difference step {step:g} is too small against integrator tolerance {opts.tol:g}")


def contact_defect(
    V: Potential,
    ray: IncomingRay,
    step: float = 1e-4,
    boundary: str = "delay",
    opts: IntegratorOptions = DEFAULT_OPTIONS,
) -> float:
    """Largest violation of ``d tau = eta.d omega - eta'.d omega'`` over a tangent basis.

    Derivatives are centered finite differences of the sojourn map with the
    given step. Zero (to rounding) means the graph of (S, tau) is Legendrian.
    """
    return float(contact_defects(V, np.asarray(ray.omega)[None], np.asarray(ray.eta)[None], step, opts)[boundary][0])


def contact_defects(
    V: Potential,
    omegas: np.ndarray,
    etas: np.ndarray,
    step: float = 1e-4,
    opts: IntegratorOptions = DEFAULT_OPTIONS,
) -> dict[str, np.ndarray]:
    """Contact defect of each ray for every boundary-term candidate."""
    _check_step(step, opts)
    omegas = np.atleast_2d(omegas)
    etas = np.atleast_2d(etas)
    d = omegas.shape[1]
    k = 2 * (d - 1)
    P_om, P_et, D_om = [], [], []
    for o, e in zip(omegas, etas):
        po, pe, dom = _variations(o, e, step)
        P_om.append(po)
        P_et.append(pe)
        D_om.append(dom)
    P_om = np.concatenate(P_om)
    P_et = np.concatenate(P_et)
    base = sojourn_map_batch(V, omegas, etas, opts=opts)
    pert = sojourn_map_batch(V, P_om, P_et, opts=opts)
    return _contact_defects_from_batch(base, pert, np.array(D_om), step, k)


@dataclass(frozen=True)
class BoundaryCalibration:
    chosen: str | None
    medians: dict[str, float]
    threshold: float
    rays: int
    step: float

    def to_dict(self) -> dict:
        return {
            "chosen": self.chosen,
            "medians": dict(self.medians),
            "threshold": self.threshold,
            "rays": self.rays,
            "step": self.step,
            "order": list(BOUNDARY_ORDER),
        }


def interacting_rays(V: Potential, n: int, seed: int, stream: int = STREAM_CONTACT, eta_max: float | None = None):
    """First ``n`` sampled rays (Liouville-uniform on |eta| < eta_max) that meet supp V."""
    eta_max = V.support_radius if eta_max is None else eta_max
    om, et = sample_rays(V.dimension, max(4 * n, 64), eta_max, seed, stream)
    hit = V.line_hits_support(om, et)
    om, et = om[hit][:n], et[hit][:n]
    if len(om) < n:
        raise ValueError("not enough interacting rays sampled")
    return om, et


def calibrate_boundary_term(
    V: Potential,
    rays: int = 50,
    step: float = 1e-4,
    threshold: float = 1e-3,
    seed: int = 0,
    opts: IntegratorOptions = DEFAULT_OPTIONS,
) -> BoundaryCalibration:
    """Pick the first boundary candidate whose median contact defect is below ``threshold``."""
    om, et = interacting_rays(V, rays, seed)
    defects = contact_defects(V, om, et, step, opts)
    medians = {name: float(np.median(defects[name])) for name in BOUNDARY_ORDER}
    chosen = next((name for name in BOUNDARY_ORDER if medians[name] < threshold), None)
    return BoundaryCalibration(chosen, medians, threshold, rays, step)


# ---------------------------------------------------------------------------
# Liouville volumes


def interaction_volume_mc(V: Potential, samples: int, eta_max: float, seed: int) -> LiouvilleEstimate:
    """Monte Carlo Liouville volume of the interaction region.

    Rays are uniform on S^{d-1} x B^{d-1}(eta_max); the estimate is the domain
    volume times the fraction of rays whose straight line meets supp V.
    """
    R = V.support_radius
    if eta_max < R:
        raise ValueError(f"eta_max = {eta_max:g} truncates the interaction region (R = {R:g})")
    if samples <= 0:
        raise ValueError("samples must be positive")
    d = V.dimension
    domain = sphere_volume(d) * ball_volume(d - 1, eta_max)
    if V.is_zero:
        return LiouvilleEstimate(0.0, 0.0, samples, eta_max)
    om, et = sample_rays(d, samples, eta_max, seed, STREAM_VOLUME)
    ind = V.line_hits_support(om, et).astype(float)
    p = float(ind.mean())
    std = float(ind.std(ddof=1)) if samples > 1 else 0.0
    return LiouvilleEstimate(domain * p, domain * std / math.sqrt(samples), samples, eta_max)


def ray_distance(om1, et1, om2, et2) -> np.ndarray:
    return np.linalg.norm(om1 - om2, axis=-1) + np.linalg.norm(et1 - et2, axis=-1)


def fixed_point_fraction(
    V: Potential,
    l: int,
    samples: int,
    delta_fix: float,
    seed: int,
    opts: IntegratorOptions = DEFAULT_OPTIONS,
) -> FixedPointEstimate:
    """Fraction of interacting rays returned within ``delta_fix`` of themselves by S^l.

    Rays are Liouville-uniform on {|eta| < R}; negative ``l`` iterates the
    time-reversed inverse map. Trapped trajectories are excluded and counted.
    """
    if l == 0:
        raise ValueError("l must be nonzero")
    if V.is_zero:
        return FixedPointEstimate(l, 0.0, delta_fix, samples, 0, 0)
    om, et = sample_rays(V.dimension, samples, V.support_radius, seed, STREAM_FIXED_POINT)
    hit = V.line_hits_support(om, et)
    om, et = om[hit], et[hit]
    step_map = sojourn_map_batch if l > 0 else inverse_sojourn_batch
    cur_o, cur_e = om, et
    trapped = np.zeros(len(om), dtype=bool)
    for _ in range(abs(l)):
        res = step_map(V, cur_o, np.nan_to_num(cur_e), opts=opts, raise_trapped=False)
        trapped |= res.trapped
        cur_o = np.where(trapped[:, None], om, res.omega_out)
        cur_e = np.where(trapped[:, None], et, res.eta_out)
    ok = ~trapped
    dist = ray_distance(cur_o[ok], cur_e[ok], om[ok], et[ok])
    n_ok = int(ok.sum())
    frac = float(np.mean(dist < delta_fix)) if n_ok else 0.0
    return FixedPointEstimate(l, frac, delta_fix, samples, int(hit.sum()), int(trapped.sum()))


def scattering_angle_central(
    V: Potential, b: float, signed: bool = False, opts: IntegratorOptions = DEFAULT_OPTIONS
) -> float:
    """Total deflection of the ray with impact parameter ``b`` by a central potential.

    The in-plane velocity angle is tracked along the trajectory, so deflections
    beyond pi are reported unwrapped. With ``signed=True`` repulsion is positive.
    """
    if not V.is_central:
        raise ValueError("scattering angle needs a central potential")
    if b < 0:
        raise ValueError("impact parameter must be non-negative")
    if b >= V.support_radius or V.is_zero:
        return 0.0
    d = V.dimension
    om = np.zeros((1, d))
    om[0, 0] = 1.0
    et = np.zeros((1, d))
    et[0, 1] = b
    try:
        res = _propagate(V, om, et, opts)
    except TrappedError as exc:
        raise TrappedError(f"near-orbiting ray at b = {b:g}") from exc
    w = float(res["winding"][0])
    return w if signed else abs(w)
