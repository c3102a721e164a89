"""Experiment configuration, content-addressed caching and stage orchestration."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from eigenphase import __version__
from eigenphase._canonical import content_hash, file_sha256
from eigenphase.potential import (
    EnergyProblem,
    Potential,
    PotentialSpec,
    central_interaction_volume,
    construct_potential,
    rescale_to_unit_energy,
)

log = logging.getLogger(__name__)

PIPELINES = ("classical", "phases", "dense2d", "spectral")
SPECTRAL_PARTS = ("measure", "trace", "report")

_DEFAULT_MC = {
    "volume_samples": 100000,
    "eta_max": None,
    "contact_rays": 50,
    "contact_step": 1e-4,
    "fixed_point_samples": 0,
    "fixed_point_l": [1, 2, 3],
    "delta_fix": 1e-3,
}
_DEFAULT_DENSE = {"N_ang": 128, "ppw": 32.0, "rho": 2.0}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    potential: PotentialSpec
    h_list: list[float]
    d: int
    pipelines: list[str]
    E: float = 1.0
    seed: int | None = None
    mc: dict = field(default_factory=dict)
    sectors: list[tuple[float, float]] | int = 16
    polynomials: list[int] = field(default_factory=lambda: [1, 2])
    cutoff: dict = field(default_factory=lambda: {"R_star_factor": 1.2})
    phases: dict = field(default_factory=dict)
    dense2d: dict = field(default_factory=dict)
    histogram_bins: int = 32
    checks: list[dict] = field(default_factory=list)
    output_dir: str = "eigenphase-out"

    def __post_init__(self) -> None:
        self.mc = {**_DEFAULT_MC, **self.mc}
        self.dense2d = {**_DEFAULT_DENSE, **self.dense2d}
        self.validate()

    def validate(self) -> None:
        if not self.h_list or any(not h > 0 for h in self.h_list):
            raise ConfigError("h_list must contain positive values")
        if any(b >= a for a, b in zip(self.h_list, self.h_list[1:])):
            raise ConfigError("h_list must be strictly decreasing")
        unknown = set(self.pipelines) - set(PIPELINES)
        if unknown:
            raise ConfigError(f"unknown pipelines {sorted(unknown)}")
        if self.d != self.potential.dimension:
            raise ConfigError("config dimension differs from the potential dimension")
        if "dense2d" in self.pipelines and self.d != 2:
            raise ConfigError("dense2d requires d = 2")
        if not self.E > 0:
            raise ConfigError("energy must be positive")
        needs_seed = "classical" in self.pipelines or (
            "spectral" in self.pipelines and self.potential.kind == "bump_sum"
        )
        if needs_seed and self.seed is None:
            raise ConfigError("a seed is required when Monte Carlo stages are enabled")
        for c in self.checks:
            if "metric" not in c or not ({"max", "min"} & set(c)):
                raise ConfigError(f"malformed check {c!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        try:
            spec = PotentialSpec.from_dict(data.pop("potential"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid potential: {exc}") from exc
        sectors = data.pop("sectors", 16)
        if isinstance(sectors, list):
            sectors = [tuple(map(float, s)) for s in sectors]
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(
            potential=spec,
            h_list=[float(h) for h in data.pop("h_list")],
            d=int(data.pop("d", spec.dimension)),
            pipelines=list(data.pop("pipelines", list(PIPELINES))),
            sectors=sectors,
            **data,
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "potential": self.potential.to_dict(),
            "h_list": list(self.h_list),
            "d": self.d,
            "pipelines": list(self.pipelines),
            "E": self.E,
            "seed": self.seed,
            "mc": dict(self.mc),
            "sectors": [list(s) for s in self.sectors] if isinstance(self.sectors, list) else self.sectors,
            "polynomials": list(self.polynomials),
            "cutoff": dict(self.cutoff),
            "phases": dict(self.phases),
            "dense2d": dict(self.dense2d),
            "histogram_bins": self.histogram_bins,
            "checks": list(self.checks),
            "output_dir": self.output_dir,
        }


# ---------------------------------------------------------------------------
# files and cache


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def csv_bytes(header: list[str], rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue().encode()


def json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n").encode()


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


class Cache:
    """Content-addressed artifact store; each entry has a ``.sha256`` sidecar."""

    def __init__(self, root: Path, enabled: bool = True):
        self.root = Path(root)
        self.enabled = enabled

    def path(self, key: str, name: str) -> Path:
        return self.root / key[:2] / key / name

    def get(self, key: str, names: list[str]) -> dict[str, bytes] | None:
        if not self.enabled:
            return None
        out = {}
        for name in names:
            p = self.path(key, name)
            side = p.with_name(p.name + ".sha256")
            if not p.exists() or not side.exists():
                return None
            data = p.read_bytes()
            if hashlib.sha256(data).hexdigest() != side.read_text().strip():
                log.warning("cache entry %s/%s failed its checksum; recomputing", key, name)
                return None
            out[name] = data
        return out

    def put(self, key: str, files: dict[str, bytes]) -> None:
        for name, data in files.items():
            p = self.path(key, name)
            _atomic_write(p, data)
            _atomic_write(p.with_name(p.name + ".sha256"), (hashlib.sha256(data).hexdigest() + "\n").encode())


@dataclass
class RunManifest:
    config_hash: str
    version: str = __version__
    stages: dict = field(default_factory=dict)
    calibration: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    energy: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "version": self.version,
            "stages": self.stages,
            "calibration": self.calibration,
            "files": self.files,
            "metrics": self.metrics,
            "checks": self.checks,
            "energy": self.energy,
            "ok": self.ok,
        }


def metric_key(name: str, **tags) -> str:
    if not tags:
        return name
    return name + "[" + ",".join(f"{k}={_fmt(v)}" for k, v in tags.items()) + "]"


# ---------------------------------------------------------------------------
# runner


class _Run:
    def __init__(self, cfg: ExperimentConfig, out: Path, use_cache: bool):
        self.cfg = cfg
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cache = Cache(self.out / "cache", use_cache)
        self.manifest = RunManifest(content_hash(cfg.to_dict()))
        self._phase_sets: dict = {}
        self._dense_sets: dict = {}
        self._c_v: tuple[float, float, str] | None = None

        # every downstream stage sees only the unit-energy problem
        base = construct_potential(cfg.potential)
        self.problems = []
        for h in cfg.h_list:
            pr = rescale_to_unit_energy(EnergyProblem(h, cfg.E, base))
            self.problems.append(pr)
        self.V: Potential = self.problems[0].potential
        self.manifest.energy = {
            "E": cfg.E,
            "h_input": list(cfg.h_list),
            "h_unit_energy": [p.h for p in self.problems],
        }

    # helpers -------------------------------------------------------------
    def emit(self, rel: str, data: bytes) -> Path:
        p = self.out / rel
        _atomic_write(p, data)
        self.manifest.files.append({"path": rel, "sha256": file_sha256(p)})
        return p

    def _key(self, stage: str, fragment: dict) -> str:
        return content_hash({"stage": stage, "version": __version__, **fragment})

    def cached(self, stage: str, fragment: dict, names: list[str], compute: Callable[[], dict[str, bytes]]):
        key = self._key(stage, fragment)
        hit = self.cache.get(key, names)
        if hit is not None:
            return hit, True
        files = compute()
        self.cache.put(key, files)
        return files, False

    def stage(self, name: str, fn: Callable[[], bool]) -> None:
        t0 = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            self.manifest.stages[name] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}", "wall_time": time.perf_counter() - t0}
            raise
        if result == "skipped":
            self.manifest.stages[name]["wall_time"] = time.perf_counter() - t0
            return
        self.manifest.stages[name] = {"status": "ok", "cached": bool(result), "wall_time": time.perf_counter() - t0}

    # classical ------------------------------------------------------------
    def run_classical(self) -> bool:
        from eigenphase import classical as cl

        cfg, V = self.cfg, self.V
        mc = cfg.mc
        frag = {"potential": V.spec.to_dict(), "seed": cfg.seed, "mc": mc}

        def compute():
            summary: dict[str, Any] = {}
            if V.is_zero:
                summary["boundary"] = None
                summary["volume"] = {"volume": 0.0, "std_error": 0.0, "samples": 0}
                return {"summary.json": json_bytes(summary), "scatter.csv": csv_bytes(_scatter_header(V.dimension), [])}
            cal = cl.calibrate_boundary_term(V, rays=int(mc["contact_rays"]), step=float(mc["contact_step"]), seed=int(cfg.seed))
            summary["boundary"] = cal.to_dict()
            eta_max = mc["eta_max"] if mc["eta_max"] is not None else 1.5 * V.support_radius
            est = cl.interaction_volume_mc(V, int(mc["volume_samples"]), float(eta_max), int(cfg.seed))
            summary["volume"] = {"volume": est.volume, "std_error": est.std_error, "samples": est.samples, "eta_max": est.eta_max}
            fps = {}
            if int(mc["fixed_point_samples"]) > 0:
                for l in mc["fixed_point_l"]:
                    fp = cl.fixed_point_fraction(V, int(l), int(mc["fixed_point_samples"]), float(mc["delta_fix"]), int(cfg.seed))
                    fps[str(l)] = {"fraction": fp.fraction, "interacting": fp.interacting, "trapped": fp.trapped}
            summary["fixed_point"] = fps
            om, et = cl.interacting_rays(V, int(mc["contact_rays"]), int(cfg.seed))
            batch = cl.sojourn_map_batch(V, om, et, boundary=cal.chosen or "delay")
            return {"summary.json": json_bytes(summary), "scatter.csv": csv_bytes(_scatter_header(V.dimension), _scatter_rows(batch))}

        files, hit = self.cached("classical", frag, ["summary.json", "scatter.csv"], compute)
        summary = json.loads(files["summary.json"])
        self.emit("classical/summary.json", files["summary.json"])
        self.emit("classical/scatter.csv", files["scatter.csv"])
        m = self.manifest.metrics
        if summary.get("boundary"):
            b = summary["boundary"]
            self.manifest.calibration["boundary_term"] = b
            if b["chosen"] is not None:
                m["contact_defect_median"] = b["medians"][b["chosen"]]
            else:
                m["contact_defect_median"] = min(b["medians"].values())
        vol = summary["volume"]
        m["volume_mc"] = vol["volume"]
        m["volume_mc_std"] = vol["std_error"]
        for l, fp in summary.get("fixed_point", {}).items():
            m[metric_key("fixed_point_fraction", l=int(l))] = fp["fraction"]
        self._mc_volume = (vol["volume"], vol["std_error"])
        return hit

    # phases ------------------------------------------------------------
    def run_phases(self) -> bool:
        from eigenphase.partialwave import PhaseTable, phase_table, STEPS_PER_H

        cfg, V = self.cfg, self.V
        if not V.is_central:
            self.manifest.stages["phases"] = {"status": "skipped", "reason": "potential is not central", "cached": False}
            return "skipped"
        all_hit = True
        for pr in self.problems:
            h = pr.h
            L_max = cfg.phases.get("L_max")
            steps = cfg.phases.get("steps_per_h", STEPS_PER_H)
            frag = {"potential": V.spec.to_dict(), "h": h, "d": cfg.d, "L_max": L_max, "steps_per_h": steps}

            def compute(h=h, L_max=L_max, steps=steps):
                t = phase_table(V, h, cfg.d, L_max, step=h / steps)
                rows = [(r["h"], r["d"], r["l"], r["nu"], r["beta"], r["d_l"], r["abs_S_minus_1"]) for r in t.rows()]
                return {
                    "table.csv": csv_bytes(["h", "d", "l", "nu", "beta", "d_l", "abs_S_minus_1"], rows),
                    "table.json": json_bytes(t.metadata()),
                }

            files, hit = self.cached("phases", frag, ["table.csv", "table.json"], compute)
            all_hit &= hit
            tag = _htag(h)
            p = self.emit(f"phases/table_h{tag}.csv", files["table.csv"])
            self.emit(f"phases/table_h{tag}.csv.json", files["table.json"])
            table = PhaseTable.read(p)
            self._phase_sets[h] = table
            fit = table.tail_fit
            self.manifest.metrics[metric_key("tail_slope", h=h)] = fit.get("slope")
            self.manifest.metrics[metric_key("tail_correlation", h=h)] = fit.get("correlation")
            self.manifest.metrics[metric_key("phase_rows", h=h)] = len(table.l)
        return all_hit

    # dense --------------------------------------------------------------
    def run_dense(self) -> bool:
        from eigenphase import smatrix2d as sm

        cfg, V = self.cfg, self.V
        dn = cfg.dense2d
        opts = sm.GridOptions(ppw=float(dn["ppw"]), rho=float(dn["rho"]))
        cal_files, cal_hit = self.cached(
            "gamma", {"grid": opts.to_dict(), "N_ang": int(dn["N_ang"])}, ["gamma.json"],
            lambda: {"gamma.json": json_bytes(sm.calibrate_gamma(N_ang=int(dn["N_ang"]), opts=opts).to_dict())},
        )
        gamma_rec = json.loads(cal_files["gamma.json"])
        self.manifest.calibration["dense_gamma"] = gamma_rec
        if gamma_rec["chosen"] is None:
            raise RuntimeError("no far-field normalization passed calibration")
        gamma = sm.GAMMA_CANDIDATES[gamma_rec["chosen"]]
        all_hit = cal_hit
        for pr in self.problems:
            h = pr.h
            frag = {"potential": V.spec.to_dict(), "h": h, "grid": opts.to_dict(), "N_ang": int(dn["N_ang"]), "gamma": [gamma.real, gamma.imag]}

            def compute(h=h):
                S = sm.build_smatrix(V, h, int(dn["N_ang"]), opts, gamma=gamma, check=False)
                buf = np.ascontiguousarray(S.entries, dtype="<c16").tobytes()
                return {"smatrix.bin": buf, "smatrix.json": json_bytes(S.header())}

            files, hit = self.cached("dense2d", frag, ["smatrix.bin", "smatrix.json"], compute)
            all_hit &= hit
            tag = _htag(h)
            self.emit(f"dense2d/smatrix_h{tag}.bin", files["smatrix.bin"])
            self.emit(f"dense2d/smatrix_h{tag}.bin.json", files["smatrix.json"])
            head = json.loads(files["smatrix.json"])
            n = int(head["N_ang"])
            ent = np.frombuffer(files["smatrix.bin"], dtype="<c16").reshape(n, n)
            S = sm.SMatrix2D(h, n, 2 * np.pi * np.arange(n) / n, ent.copy(), float(head["unitarity_defect"]), gamma, grid=head["grid"])
            self.manifest.metrics[metric_key("unitarity_defect", h=h)] = S.unitarity_defect
            ps = sm.eigenphases(S)
            self._dense_sets[h] = ps
            self.emit(f"dense2d/eigenphases_h{tag}.csv", csv_bytes(["beta", "weight", "source", "h", "d"], [(b, w, ps.source, ps.h, ps.d) for b, w in zip(ps.betas, ps.weights)]))
        return all_hit

    # spectral -------------------------------------------------------------
    def c_v(self) -> tuple[float, float, str]:
        """c_V at unit energy with its uncertainty and provenance."""
        if self._c_v is not None:
            return self._c_v
        V = self.V
        if V.is_zero:
            self._c_v = (0.0, 0.0, "zero")
        elif V.is_central:
            self._c_v = (central_interaction_volume(V.support_radius, V.dimension), 0.0, "analytic")
        else:
            if not hasattr(self, "_mc_volume"):
                from eigenphase.classical import interaction_volume_mc

                est = interaction_volume_mc(V, int(self.cfg.mc["volume_samples"]), 1.5 * V.support_radius, int(self.cfg.seed))
                self._mc_volume = (est.volume, est.std_error)
            self._c_v = (*self._mc_volume, "monte-carlo")
        return self._c_v

    def phase_sets(self) -> dict:
        from eigenphase.spectral import EigenphaseSet

        if not self._phase_sets and not self._dense_sets:
            if self.V.is_central or self.V.is_zero:
                self.stage("phases", self.run_phases)
            elif self.cfg.d == 2:
                self.stage("dense2d", self.run_dense)
        if self._phase_sets:
            return {h: EigenphaseSet.from_table(t) for h, t in self._phase_sets.items()}
        return dict(self._dense_sets)

    def run_spectral(self, parts=SPECTRAL_PARTS) -> bool:
        cfg = self.cfg
        sets = self.phase_sets()
        c_v, c_v_err, c_v_src = self.c_v()
        self.manifest.calibration["c_V"] = {"value": c_v, "std_error": c_v_err, "source": c_v_src}
        inputs = {
            repr(h): content_hash({"betas": [float(b) for b in ps.betas], "weights": [float(w) for w in ps.weights]})
            for h, ps in sets.items()
        }
        frag = {
            "inputs": inputs,
            "c_V": c_v,
            "parts": list(parts),
            "sectors": [list(x) for x in cfg.sectors] if isinstance(cfg.sectors, list) else cfg.sectors,
            "polynomials": list(cfg.polynomials),
            "cutoff": dict(cfg.cutoff),
            "bins": cfg.histogram_bins,
            "support_radius": self.V.support_radius,
        }
        # the file list depends on the requested parts, so the cached index names it
        key = self._key("spectral", frag)
        files = None
        idx = self.cache.get(key, ["index.json"])
        if idx is not None:
            files = self.cache.get(key, ["index.json", *json.loads(idx["index.json"])["files"]])
        hit = files is not None
        if not hit:
            files = self._spectral_files(sets, c_v, parts)
            self.cache.put(key, files)
        index = json.loads(files["index.json"])
        for name in index["files"]:
            self.emit(f"spectral/{name}", files[name])
        self.manifest.metrics.update(index["metrics"])
        return hit

    def _spectral_files(self, sets: dict, c_v: float, parts) -> dict[str, bytes]:
        from eigenphase import spectral as sp

        cfg = self.cfg
        m: dict[str, Any] = {}
        out: dict[str, bytes] = {}
        sectors = cfg.sectors if isinstance(cfg.sectors, list) else sp.sector_grid(int(cfg.sectors))
        z1 = sp.Polynomial.power_minus_one(1)
        if "measure" in parts:
            recs = []
            for h, ps in sets.items():
                if c_v > 0:
                    rep = sp.measure_report(ps, z1, c_v)
                    recs.append(rep.to_dict())
                    m[metric_key("pairing_re", h=h)] = rep.pairing.real
                    m[metric_key("pairing_im", h=h)] = rep.pairing.imag
                    m[metric_key("pairing_error", h=h)] = abs(rep.pairing - rep.pairing_target)
                    m[metric_key("half_count", h=h)] = rep.normalized_count
                else:
                    recs.append({"h": h, "degenerate": True, "pairing": [0.0, 0.0], "count": sp.count_sector(ps, math.pi / 2, 3 * math.pi / 2)})
                    m[metric_key("pairing_error", h=h)] = 0.0
            out["measure.json"] = json_bytes(recs)
        if "trace" in parts:
            recs, rows = [], []
            for h, ps in sets.items():
                for k in cfg.polynomials:
                    rep = sp.trace_check(ps, sp.Polynomial.power_minus_one(int(k)), c_v)
                    recs.append(rep.to_dict())
                    rows.append((h, f"z^{k}-1", rep.lhs.real, rep.lhs.imag, rep.rhs.real, rep.relative_error))
                    m[metric_key("trace_rel_error", k=int(k), h=h)] = rep.relative_error
                if ps.source == "central-table":
                    R = self.V.support_radius
                    rep = sp.cutoff_trace_check(ps, R, float(cfg.cutoff.get("R_star_factor", 1.2)) * R)
                    recs.append(rep.to_dict())
                    rows.append((h, "cutoff", rep.lhs.real, rep.lhs.imag, rep.rhs.real, rep.relative_error))
                    m[metric_key("cutoff_trace_rel_error", h=h)] = rep.relative_error
            out["trace.json"] = json_bytes(recs)
            out["trace.csv"] = csv_bytes(["h", "polynomial", "lhs_re", "lhs_im", "rhs", "relative_error"], rows)
        if "report" in parts:
            rep = sp.equidistribution_report(sets.values(), c_v, sectors)
            out["equidistribution.json"] = json_bytes(rep.to_dict())
            out["equidistribution.csv"] = csv_bytes(
                ["h", "phi0", "phi1", "count", "normalized", "target", "deviation"], [tuple(r.values()) for r in rep.rows]
            )
            for h, dev in rep.sup_deviation.items():
                m[metric_key("sup_deviation", h=h)] = dev
            m["sup_deviation_decreasing"] = 1.0 if (rep.decreasing and not rep.degenerate) else 0.0
            for h, ps in sets.items():
                hist = sp.histogram(ps, int(cfg.histogram_bins), c_v)
                out[f"histogram_h{_htag(h)}.csv"] = csv_bytes(list(hist[0].keys()), [tuple(r.values()) for r in hist])
        out["index.json"] = json_bytes({"files": sorted(k for k in out), "metrics": m})
        return out

    # checks -----------------------------------------------------------
    def evaluate_checks(self) -> None:
        for c in self.cfg.checks:
            name = c["metric"]
            val = self.manifest.metrics.get(name)
            passed = val is not None and not (isinstance(val, float) and math.isnan(val))
            if passed and "max" in c:
                passed = val <= c["max"]
            if passed and "min" in c:
                passed = val >= c["min"]
            self.manifest.checks.append({**c, "value": val, "passed": bool(passed)})


def _htag(h: float) -> str:
    return format(h, ".6g")


def _scatter_header(d: int) -> list[str]:
    return (
        [f"omega{i}" for i in range(d)]
        + [f"eta{i}" for i in range(d)]
        + [f"omega_p{i}" for i in range(d)]
        + [f"eta_p{i}" for i in range(d)]
        + ["tau", "interacted", "energy_drift"]
    )


def _scatter_rows(batch):
    for i in range(len(batch)):
        yield (
            *batch.omega[i],
            *batch.eta[i],
            *batch.omega_out[i],
            *batch.eta_out[i],
            batch.tau[i],
            bool(batch.interacted[i]),
            batch.energy_drift[i],
        )


def run_experiment(
    cfg: ExperimentConfig,
    out: str | os.PathLike | None = None,
    use_cache: bool = True,
    stages: list[str] | None = None,
    spectral_parts=SPECTRAL_PARTS,
) -> RunManifest:
    """Run the enabled pipelines in dependency order and write the manifest.

    ``stages`` restricts the run to a subset of the configured pipelines;
    spectral stages compute their phase inputs on demand.
    """
    run = _Run(cfg, Path(out or cfg.output_dir), use_cache)
    wanted = [p for p in PIPELINES if p in cfg.pipelines and (stages is None or p in stages)]
    if "classical" in wanted:
        run.stage("classical", run.run_classical)
    if "phases" in wanted:
        run.stage("phases", run.run_phases)
    if "dense2d" in wanted:
        run.stage("dense2d", run.run_dense)
    if "spectral" in wanted:
        run.stage("spectral", lambda: run.run_spectral(spectral_parts))
    run.evaluate_checks()
    man = run.manifest
    man.files.sort(key=lambda f: f["path"])
    _atomic_write(run.out / "manifest.json", json_bytes(man.to_dict()))
    return man
