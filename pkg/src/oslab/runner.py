"""Experiment dispatch, output persistence and run manifests."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import expm

from . import __version__
from . import billiard, gap, geometry, quant, svg, wave
from .config import ExperimentConfig
from .errors import ConfigError, OutputError

__all__ = ["RunManifest", "run", "csv_text"]

MANIFEST = "manifest.json"


@dataclass
class RunManifest:
    kind: str
    config_digest: str
    tool_version: str
    started_at: str
    finished_at: str
    outputs: list[dict]
    summary: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


class _Context:
    def __init__(self, workers: int, serial: bool):
        self.workers = 1 if serial else max(1, workers)

    def map(self, fn: Callable, items: list) -> list:
        """Apply ``fn`` to each item; results come back in input order."""
        if self.workers == 1 or len(items) < 2:
            return [fn(*item) for item in items]
        with ProcessPoolExecutor(max_workers=min(self.workers, len(items))) as pool:
            return list(pool.map(fn, *zip(*items)))


# ---------------------------------------------------------------------------
# per-point workers (module level so they pickle)

def _family(name: str):
    try:
        return gap.FAMILIES[name]
    except KeyError:
        raise ConfigError(f"unknown family {name!r}; expected one of {', '.join(gap.FAMILIES)}",
                          field="family") from None


def _gap_point(name, N, delta, exact):
    return gap.power_norm_scan(_family(name), delta, [N], exact_norm=exact).entries[0]


def _resolvent_point(name, N, delta, gamma, zs, tau0, h0):
    return gap.resolvent_norm_scan(_family(name), delta, gamma, [N], zs, tau0, h0).entries


def _orbit_point(config_fields, word):
    config = geometry.ObstacleConfig.from_arrays([f[:2] for f in config_fields], [f[2] for f in config_fields])
    return billiard.find_periodic_orbit(config, word)


def _contour_point(A, k, t, U, delta):
    value = wave.semigroup_contour(A, k, t, U)
    oracle = expm(t * A) @ np.linalg.matrix_power(np.linalg.inv(np.eye(len(U)) - A), k) @ U
    deformed = wave.deformed_contour_check(A, k, t, U, delta).difference if delta else math.nan
    return float(np.linalg.norm(value)), float(np.max(np.abs(value - oracle))), deformed


# ---------------------------------------------------------------------------
# experiments: each returns (outputs, summary); outputs maps name -> str|bytes

def _geometry_check(cfg: ExperimentConfig, ctx, plot):
    config = cfg.obstacles()
    n = len(config)
    rows = []
    disjoint = geometry.check_disjoint(config)
    for i in range(n):
        others = [m for m in range(n) if m != i]
        for a in range(len(others)):
            for b in range(a + 1, len(others)):
                j, k = others[a], others[b]
                clearance = geometry.hull_clearance(config.centers[i], (config.radii[j], config.radii[k]),
                                                    (config.centers[j], config.centers[k]))
                margin = clearance - config.radii[i]
                rows.append((i, j, k, clearance, margin, margin > 0))
    no_eclipse = disjoint and all(r[5] for r in rows)
    out = {"geometry_check.csv": csv_text(("i", "j", "k", "clearance", "margin", "ok"), rows)}
    return out, {"obstacles": n, "disjoint": disjoint, "no_eclipse": no_eclipse}


def _orbit(cfg: ExperimentConfig, ctx, plot):
    config = cfg.obstacles()
    words = cfg.get_words("words")
    orbits = ctx.map(_orbit_point, [(config.digest_fields(), w) for w in words])
    rows = [("-".join(map(str, o.word)), o.length, o.mu, o.lyapunov) for o in orbits]
    return {"orbits.csv": csv_text(("word", "length", "mu", "lambda"), rows)}, {"orbits": len(rows)}


def _trapped_set(cfg: ExperimentConfig, ctx, plot):
    config = cfg.obstacles()
    if not geometry.check_no_eclipse(config):
        raise geometry.InvalidConfig("configuration violates the no-eclipse condition")
    depth = cfg.get_int("depth", 8, minimum=0)
    samples = cfg.get_int("samples", 8, minimum=1)
    method = cfg.get_str("method", "transition", choices=("transition", "orbit"))
    cover = billiard.trapped_set_cover(config, depth, samples, method)
    rows = cover.history
    summary = {"box_count": cover.box_count, "area": cover.total_area}
    nonempty = [h for h in rows if h[0] >= 1 and h[1] > 0]
    if len(nonempty) >= 2:
        summary["dimension"] = billiard.box_counting_dimension(cover, 1)
    out = {"cover_stats.csv": csv_text(("depth", "box_count", "area"), rows)}
    if plot and nonempty:
        out["cover_stats.svg"] = svg.line_plot({"boxes": ([r[0] for r in nonempty], [r[1] for r in nonempty])},
                                               "box count", "depth", "box count", logy=True)
    return out, summary


def _quantize(cfg: ExperimentConfig, ctx, plot):
    name = cfg.get_str("operator", choices=("baker_open", "baker_closed", "dilation"))
    N = cfg.get_int("N", minimum=1)
    fmt = cfg.get_str("format", "binary", choices=("binary", "csv"))
    op = gap.FAMILIES[name](N)
    out = {}
    if fmt == "binary":
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "operator.bin"
            quant.save_operator(op, path)
            out["operator.bin"] = path.read_bytes()
    else:
        out["operator.csv"] = quant.operator_to_csv(op)
    return out, {"N": N, "h": op.h, "norm": op.norm()}


def _gap_scan(cfg: ExperimentConfig, ctx, plot):
    name = cfg.get_str("family", "baker_open")
    _family(name)
    delta = cfg.get_float("delta", 1.0, positive=True)
    Ns = cfg.get_int_list("Ns", minimum=1)
    exact = cfg.get_str("norm", "power", choices=("power", "svd")) == "svd"
    entries = ctx.map(_gap_point, [(name, N, delta, exact) for N in Ns])
    report = gap.GapReport(delta, entries, gap._fit_gamma(entries))
    out = {"gap_report.csv": csv_text(report.columns, report.rows())}
    if plot:
        out["gap_report.svg"] = svg.line_plot({"power norm": ([e.h for e in entries], [e.power_norm for e in entries])},
                                              "power norms", "h", "||M^N(h)||", logx=True, logy=True)
    return out, {"fitted_gamma": report.fitted_gamma, "delta": delta}


def _resolvent_scan(cfg: ExperimentConfig, ctx, plot):
    name = cfg.get_str("family", "baker_open")
    _family(name)
    delta = cfg.get_float("delta", 1.0, positive=True)
    Ns = cfg.get_int_list("Ns", minimum=1)
    zs = cfg.get_complex_list("zs", [0])
    tau0 = cfg.get_float("tau0", 1.0, positive=True)
    h0 = cfg.get_float("h0", positive=True) if cfg.has("h0") else None
    if cfg.has("gamma") and cfg.params["gamma"].strip() != "fit":
        gamma = cfg.get_float("gamma")
    else:
        fit_entries = ctx.map(_gap_point, [(name, N, delta, False) for N in Ns])
        gamma = gap._fit_gamma(fit_entries)
    chunks = ctx.map(_resolvent_point, [(name, N, delta, gamma, zs, tau0, h0) for N in Ns])
    report = gap.ResolventReport(delta, gamma, h0, [e for chunk in chunks for e in chunk])
    out = {"resolvent_report.csv": csv_text(report.columns, report.rows())}
    summary = {"gamma": gamma, "points": len(report.entries),
               "hypothesis_points": sum(e.hypothesis_ok for e in report.entries),
               "violations": len(report.violations)}
    return out, summary


def _spectrum(cfg: ExperimentConfig, ctx, plot):
    name = cfg.get_str("family", "baker_open")
    N = cfg.get_int("N", minimum=1)
    cap = cfg.get_int("cap", 2187, minimum=1)
    ev = gap.spectrum(_family(name)(N), cap)
    out = {"spectrum.csv": csv_text(("re", "im"), [(z.real, z.imag) for z in ev])}
    if plot:
        out["spectrum.svg"] = svg.scatter_plot(ev, f"{name} N={N}", unit_circle=True)
    return out, {"N": N, "spectral_radius": float(np.abs(ev[0])) if len(ev) else 0.0}


def _wave(cfg: ExperimentConfig, ctx, plot):
    config = cfg.obstacles(required=False)
    nx = cfg.get_int("nx", 512, minimum=8)
    if 2 * cfg.get_int("absorber_width", 32, minimum=1) >= nx:
        raise ConfigError("absorber_width must leave an interior (2 * absorber_width < nx)",
                          field="absorber_width", line=cfg.lines.get("absorber_width"))
    grid = wave.WaveGrid(cfg.get_float("extent", 128.0, positive=True), nx,
                         cfl=cfg.get_float("cfl", 0.5, positive=True),
                         absorber_width=cfg.get_int("absorber_width", 32, minimum=1),
                         absorber=cfg.get_str("absorber", "pml", choices=("pml", "sponge")))
    T = cfg.get_float("T", 100.0, positive=True)
    R = cfg.get_float("R", 5.0, positive=True)
    mode = cfg.get_str("pulse", "velocity", choices=("velocity", "displacement"))
    center = cfg.get_float_list("pulse_center", [0.0, 0.0])
    if len(center) != 2:
        raise ConfigError("pulse_center needs two numbers", field="pulse_center", line=cfg.lines.get("pulse_center"))
    data = wave.gaussian_pulse(grid, center, cfg.get_float("pulse_width", 1.0, positive=True), mode)
    stride = cfg.get_int("stride", 10, minimum=1)
    trace = wave.fdtd_run(config, grid, data, T, R, stride=stride)
    out = {"energy_trace.csv": csv_text(trace.columns, trace.rows())}
    if plot:
        keep = trace.times > 0
        out["energy_trace.svg"] = svg.line_plot({"E_R": (trace.times[keep], trace.local_energy[keep])},
                                                "local energy", "t", "E_R", logx=True, logy=True)
    summary = {"fitted_slope": trace.fitted_slope, "conservation_error": trace.conservation_error,
               "free_flight_ok": trace.free_flight_ok}
    if cfg.has("smoothness_levels"):
        # one extra run per bump order; the slope may depend on how smooth the data is
        radius = cfg.get_float("bump_radius", 2.0, positive=True)
        rows = []
        for order in cfg.get_int_list("smoothness_levels", minimum=1):
            bump = wave.bump_pulse(grid, center, radius, order, mode)
            rows.append((order, wave.fdtd_run(config, grid, bump, T, R, stride=stride).fitted_slope))
        out["smoothness_slopes.csv"] = csv_text(("order", "fitted_slope"), rows)
        summary["smoothness_slopes"] = {order: slope for order, slope in rows}
    return out, summary


def _contour_test(cfg: ExperimentConfig, ctx, plot):
    n = cfg.get_int("dim", 6, minimum=1)
    k = cfg.get_int("k", 2, minimum=2)
    ts = cfg.get_float_list("ts", [0.0, 1.0, 5.0])
    if any(t < 0 for t in ts):
        raise ConfigError("times must be nonnegative", field="ts", line=cfg.lines.get("ts"))
    rng = cfg.rng()
    A = wave.random_dissipative(rng, n)
    U = rng.standard_normal(n) + 0j
    delta = None
    if cfg.has("delta"):
        delta = cfg.get_float("delta", positive=True)
    results = ctx.map(_contour_point, [(A, k, t, U, delta) for t in ts])
    rows = [(t, r[0], r[1]) for t, r in zip(ts, results)]
    summary = {"max_difference": max(r[1] for r in results)}
    if delta:
        summary["max_deformation_difference"] = max(r[2] for r in results)
    return {"contour_check.csv": csv_text(("t", "value_norm", "difference"), rows)}, summary


EXPERIMENTS = {
    "geometry-check": _geometry_check,
    "orbit": _orbit,
    "trapped-set": _trapped_set,
    "quantize": _quantize,
    "gap-scan": _gap_scan,
    "resolvent-scan": _resolvent_scan,
    "spectrum": _spectrum,
    "wave": _wave,
    "contour-test": _contour_test,
}


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _atomic_write(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(value):
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def run(cfg: ExperimentConfig, out_dir, plot: bool = False, serial: bool = False,
        workers: int | None = None) -> RunManifest:
    """Run one experiment, write its outputs and finally the manifest."""
    started = _now()
    ctx = _Context(workers or os.cpu_count() or 1, serial)
    try:
        outputs, summary = EXPERIMENTS[cfg.kind](cfg, ctx, plot)
    except ValueError as exc:
        # library preconditions on parameter values surface as ValueError
        raise ConfigError(f"invalid parameters for {cfg.kind}: {exc}") from None
    out_dir = Path(out_dir)
    records = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        stale = out_dir / MANIFEST
        if stale.exists():
            stale.unlink()
        for name, content in outputs.items():
            data = content.encode() if isinstance(content, str) else content
            _atomic_write(out_dir / name, data)
            records.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
        manifest = RunManifest(cfg.kind, cfg.digest(), __version__, started, _now(), records,
                               {k: _jsonable(v) for k, v in summary.items()}, cfg.canonical())
        _atomic_write(out_dir / MANIFEST, manifest.to_json().encode())
    except OSError as exc:
        raise OutputError(f"cannot write outputs to {out_dir}: {exc}") from None
    return manifest
