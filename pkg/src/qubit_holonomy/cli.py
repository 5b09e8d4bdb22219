"""Command-line entry point: ``qubit-holonomy <subcommand> [--config FILE] [overrides]``.

Subcommands: steady-state, curvature-map, cycle, triality-map.

Configuration is a flat ``key = value`` file (``#`` starts a comment); any
command-line flag overrides the file. Exit codes: 0 ok, 2 validation,
3 I/O, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .atlas import (
    corridor_ratio,
    global_abs_extrema,
    is_eta_even,
    locate_extrema,
    paint_regularized_curvature,
    quarter_sphere_vertices,
)
from .bloch import (
    BathSpec,
    Controls,
    deficit_balance,
    ness_closed_form,
    phase_of_ness,
    to_triality,
)
from .errors import DegenerateCoherence, NotSupported, ValidationError
from .geometry import curvature_closed_arrays, curvature_fd_arrays
from .transport import (
    ControlPath,
    Schedule,
    adiabatic_convergence_study,
    curvature_flux,
    loop_work_gibbs,
    loop_work_quasistatic,
    stokes_residual,
    stokes_residual_gibbs,
)

EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

DEFAULTS = {
    "omega": 1.0,
    "g": 1.0,
    "gamma1": 1.0,
    "gamma2": 1.0,
    "z0": 1.0,
    "phi": math.pi / 2,
    "beta": 1.0,
    "grid": None,
    "omega_min": 0.2,
    "omega_max": 2.0,
    "g_min": 0.2,
    "g_max": 2.0,
    "path": "rect",
    "center": (1.0, 1.0),
    "size": (0.5, 0.5),
    "orientation": "ccw",
    "samples_per_unit": 64.0,
    "flux_grid": (32, 32),
    "adiabatic": None,
    "schedule": "smoothstep",
    "dt": None,
    "gibbs": False,
    "out": "out",
    "threads": None,
}

GRID_DEFAULTS = {"curvature-map": (64, 64), "triality-map": (128, 64)}

_PI_EXPR = re.compile(r"^\s*([+-]?)\s*(\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


class ConfigError(ValidationError):
    pass


# ---------------------------------------------------------------------------
# parsing


def parse_angle(text) -> float:
    """Float, or a multiple of pi such as ``pi/2``, ``-pi/4``, ``0.5pi``."""
    if isinstance(text, (int, float)):
        return float(text)
    m = _PI_EXPR.match(str(text))
    if m:
        sign, coef, denom = m.groups()
        v = (float(coef) if coef not in ("", ".") else 1.0) * math.pi
        if denom:
            v /= float(denom)
        return -v if sign == "-" else v
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse angle {text!r}") from exc


def parse_pair(text, kind=float):
    if isinstance(text, (tuple, list)):
        vals = list(text)
    else:
        vals = re.split(r"[,x]", str(text).strip())
    if len(vals) != 2:
        raise ConfigError(f"expected two values, got {text!r}")
    try:
        return tuple(kind(v) for v in vals)
    except ValueError as exc:
        raise ConfigError(f"cannot parse pair {text!r}") from exc


def parse_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {text!r}") from exc


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean {text!r}")


def _float(text):
    try:
        return float(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc


def _int_positive(text):
    try:
        v = int(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot parse integer {text!r}") from exc
    if v <= 0:
        raise ConfigError(f"threads must be positive, got {v}")
    return v


def _grid(text):
    pair = parse_pair(text, int)
    if pair[0] <= 0 or pair[1] <= 0:
        raise ConfigError(f"grid sizes must be positive, got {text!r}")
    return pair


CONVERTERS = {
    "omega": _float, "g": _float, "gamma1": _float, "gamma2": _float, "z0": _float,
    "phi": parse_angle, "beta": _float,
    "grid": _grid, "flux_grid": _grid,
    "omega_min": _float, "omega_max": _float, "g_min": _float, "g_max": _float,
    "path": str, "center": parse_pair, "size": parse_pair, "orientation": str,
    "samples_per_unit": _float, "adiabatic": parse_list, "schedule": str,
    "dt": lambda v: None if v in (None, "", "none") else _float(v),
    "gibbs": parse_bool, "out": str,
    "threads": lambda v: None if v in (None, "", "auto") else _int_positive(v),
}


def read_config_file(path) -> dict:
    out = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def resolve_config(command: str, file_values: dict, overrides: dict) -> dict:
    cfg = dict(DEFAULTS)
    merged = {**file_values, **{k: v for k, v in overrides.items() if v is not None}}
    for key, value in merged.items():
        cfg[key] = CONVERTERS[key](value)
    if cfg["grid"] is None:
        cfg["grid"] = GRID_DEFAULTS.get(command)
    if cfg["threads"] is None:
        cfg["threads"] = os.cpu_count() or 1
    if cfg["path"] not in ("rect", "ellipse"):
        raise ConfigError(f"path must be 'rect' or 'ellipse', got {cfg['path']!r}")
    if cfg["orientation"] not in ("ccw", "cw"):
        raise ConfigError(f"orientation must be 'ccw' or 'cw', got {cfg['orientation']!r}")
    if cfg["schedule"] not in ("uniform", "smoothstep"):
        raise ConfigError(f"schedule must be 'uniform' or 'smoothstep', got {cfg['schedule']!r}")
    if not cfg["beta"] >= 0:
        raise ConfigError(f"beta >= 0 required, got {cfg['beta']}")
    for k in ("omega", "g", "phi"):
        if not math.isfinite(cfg[k]):
            raise ConfigError(f"{k} must be finite")
    # validates gamma1 > 0, gamma2 > 0, |z0| <= 1
    bath_of(cfg)
    return cfg


def bath_of(cfg) -> BathSpec:
    return BathSpec(cfg["gamma1"], cfg["gamma2"], cfg["z0"])


def path_of(cfg) -> ControlPath:
    if cfg["path"] == "rect":
        return ControlPath.rectangle(cfg["center"], cfg["size"], cfg["orientation"], cfg["samples_per_unit"])
    return ControlPath.ellipse(cfg["center"], cfg["size"], cfg["orientation"], cfg["samples_per_unit"])


def config_echo(cfg) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(cfg.items())}


# ---------------------------------------------------------------------------
# writers


def fmt(v) -> str:
    return format(float(v), ".17g")


class Run:
    """Tracks emitted files, their digests and per-stage timings."""

    def __init__(self, command, cfg):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.files = {}
        self.timings = {}
        self.extra = {}
        self.out.mkdir(parents=True, exist_ok=True)

    @contextlib.contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - t0

    def _record(self, name):
        data = (self.out / name).read_bytes()
        self.files[name] = {"bytes": len(data), "path": name, "sha256": hashlib.sha256(data).hexdigest()}

    def write_text(self, name, text):
        (self.out / name).write_text(text)
        self._record(name)

    def write_json(self, name, obj):
        self.write_text(name, dumps(obj))

    def write_csv(self, name, header, rows):
        lines = [",".join(header)]
        lines.extend(",".join(fmt(v) for v in row) for row in rows)
        self.write_text(name, "\n".join(lines) + "\n")

    def write_png(self, name, render):
        render(self.out / name)
        self._record(name)

    def finish(self):
        manifest = {
            "command": self.command,
            "config": config_echo(self.cfg),
            "files": [self.files[k] for k in sorted(self.files)],
            "timings_s": self.timings,
            "tool": "qubit-holonomy",
            "version": __version__,
        }
        manifest.update(self.extra)
        (self.out / "manifest.json").write_text(dumps(manifest))


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def render_heatmap(path, x, y, values, xlabel, ylabel, title, overlays=()):
    """Flat-shaded diverging heatmap centred on zero; ``values[i, j]`` at ``(x[i], y[j])``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    def edges(a):
        a = np.asarray(a, dtype=float)
        if a.size == 1:
            return np.array([a[0] - 0.5, a[0] + 0.5])
        mid = 0.5 * (a[1:] + a[:-1])
        return np.concatenate([[2 * a[0] - mid[0]], mid, [2 * a[-1] - mid[-1]]])

    vmax = float(np.nanmax(np.abs(values))) if np.size(values) else 0.0
    if not vmax > 0:
        vmax = 1.0
    fig, ax = plt.subplots(figsize=(6.4, 4.8), dpi=100)
    mesh = ax.pcolormesh(edges(x), edges(y), np.asarray(values).T, cmap="RdBu_r",
                         vmin=-vmax, vmax=vmax, shading="flat")
    fig.colorbar(mesh, ax=ax)
    for kind, pos in overlays:
        if kind == "h":
            ax.axhline(pos, color="k", linestyle="--", linewidth=1.0)
        else:
            ax.axvline(pos, color="k", linestyle="--", linewidth=1.0)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def mesh_text(mesh) -> str:
    lines = ["# quarter-sphere mesh: v C P E scalar; f i j k (1-based)"]
    lines += [f"v {fmt(c)} {fmt(p)} {fmt(e)} {fmt(s)}" for (c, p, e), s in zip(mesh.vertices, mesh.scalars)]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    for label, idx in mesh.polylines.items():
        lines.append(f"o {label}")
        lines.append("l " + " ".join(str(i + 1) for i in idx))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_steady_state(cfg) -> Run:
    run = Run("steady-state", cfg)
    b = bath_of(cfg)
    c = Controls(cfg["omega"], cfg["g"])
    with run.stage("compute"):
        r = ness_closed_form(c, b)
        t = to_triality(r)
        phase, reason, phase_residual = None, None, None
        try:
            phase = phase_of_ness(c, b)
            if c.omega != 0:
                phase_residual = abs(math.tan(phase) + b.gamma2 / c.omega)
        except DegenerateCoherence:
            reason = "DegenerateCoherence"
        out = {
            "bath": {"gamma1": b.gamma1, "gamma2": b.gamma2, "z0": b.z0},
            "bloch": {"x": r.x, "y": r.y, "z": r.z},
            "constraint_residual": abs(deficit_balance(t.C, t.P, b)),
            "controls": {"g": c.g, "omega": c.omega},
            "phase": phase,
            "phase_reason": reason,
            "phase_relation_residual": phase_residual,
            "triality": {"C": t.C, "E": t.E, "P": t.P, "phi": t.phi},
        }
    with run.stage("write"):
        run.write_json("ness.json", out)
    return run


def _parallel_rows(fn, n_rows, threads):
    chunks = np.array_split(np.arange(n_rows), max(1, min(threads, n_rows)))
    chunks = [ch for ch in chunks if ch.size]
    if len(chunks) == 1:
        return [fn(chunks[0])]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        return list(pool.map(fn, chunks))


def cmd_curvature_map(cfg) -> Run:
    run = Run("curvature-map", cfg)
    b = bath_of(cfg)
    n_w, n_g = cfg["grid"]
    w = np.linspace(cfg["omega_min"], cfg["omega_max"], n_w)
    g = np.linspace(cfg["g_min"], cfg["g_max"], n_g)

    def rows(idx):
        W, G = np.meshgrid(w[idx], g, indexing="ij")
        return curvature_fd_arrays(W, G, b), curvature_closed_arrays(W, G, b)

    with run.stage("compute"):
        parts = _parallel_rows(rows, n_w, cfg["threads"])
        f_fd = np.concatenate([p[0] for p in parts])
        f_cl = np.concatenate([p[1] for p in parts])
        diff = np.abs(f_fd - f_cl)
    with run.stage("write"):
        table = [(w[i], g[j], f_fd[i, j], f_cl[i, j], diff[i, j]) for i in range(n_w) for j in range(n_g)]
        run.write_csv("curvature_grid.csv", ["omega", "g", "F_fd", "F_closed", "abs_diff"], table)
        run.write_png("curvature_grid.png", lambda p: render_heatmap(
            p, w, g, f_cl, "omega", "g", "work curvature F_omega_g"))
    run.extra["summary"] = {"max_abs_diff": float(diff.max()),
                            "max_abs_F": float(np.abs(f_cl).max())}
    return run


def cmd_cycle(cfg) -> Run:
    run = Run("cycle", cfg)
    b = bath_of(cfg)
    path = path_of(cfg)
    out = {"path": {"center": list(path.center), "kind": path.kind.value,
                    "orientation": path.orientation.value, "size": list(path.size)},
           "area": path.area}
    with run.stage("quasistatic"):
        if cfg["gibbs"]:
            res = loop_work_gibbs(path, cfg["beta"])
            out.update(mode="gibbs", beta=cfg["beta"], W_loop=res.w_cyc, W_loop_error=res.estimated_error,
                       W_flux=0.0, stokes_residual=stokes_residual_gibbs(path, cfg["beta"]))
        else:
            res = loop_work_quasistatic(path, b)
            out.update(mode="pointer", W_loop=res.w_cyc, W_loop_error=res.estimated_error,
                       W_flux=curvature_flux(path, b, cfg["flux_grid"]),
                       stokes_residual=stokes_residual(path, b, cfg["flux_grid"]))
        out["quadrature_nodes"] = res.quadrature_nodes
    if cfg["adiabatic"]:
        with run.stage("adiabatic"):
            study = adiabatic_convergence_study(path, b, cfg["adiabatic"], dt=cfg["dt"],
                                                schedule=Schedule(cfg["schedule"]), gibbs=cfg["gibbs"])
        out["adiabatic"] = {
            "W_quasistatic": study.w_quasistatic,
            "slope": study.slope,
            "table": [{"T": T, "W": W, "error": e} for T, W, e in zip(study.periods, study.work, study.errors)],
        }
    with run.stage("write"):
        run.write_json("cycle.json", out)
    return run


def cmd_triality_map(cfg) -> Run:
    run = Run("triality-map", cfg)
    b = bath_of(cfg)
    phi = cfg["phi"]
    with run.stage("paint"):
        field = paint_regularized_curvature(phi, b, cfg["grid"])
        mesh = quarter_sphere_vertices(cfg["grid"], phi, b)
    with run.stage("analyse"):
        extrema = locate_extrema(field)
        top = global_abs_extrema(field)
        report = {
            "phi": phi,
            "eta_even": is_eta_even(field),
            "corridor_ratio": corridor_ratio(field),
            "global_abs_extrema": [
                {"eta": float(field.axis1[i]), "lambda": float(field.axis2[j]),
                 "value": float(field.values[i, j]), "index": [i, j]} for i, j in top],
            "local_extrema": [
                {"eta": e.coords[0], "lambda": e.coords[1], "value": e.value, "kind": e.kind,
                 "interior": e.interior, "index": list(e.index)} for e in extrema],
        }
    with run.stage("write"):
        eta, lam = field.axis1, field.axis2
        rows = []
        for j, l_ in enumerate(lam):
            for i, e_ in enumerate(eta):
                cl = math.cos(l_)
                rows.append((e_, l_, max(cl * math.cos(e_), 0.0), cl * math.sin(e_), math.sin(l_),
                             field.values[i, j]))
        run.write_csv("mercator.csv", ["eta", "lambda", "C", "P", "E", "F_reg"], rows)
        run.write_png("mercator.png", lambda p: render_heatmap(
            p, eta, lam, field.values, "eta", "lambda", f"regularized curvature P F, phi={phi:.4g}",
            overlays=(("h", 0.0), ("v", 0.0))))
        run.write_text("sphere_mesh.txt", mesh_text(mesh))
        run.write_json("extrema.json", report)
    return run


COMMANDS = {
    "steady-state": cmd_steady_state,
    "curvature-map": cmd_curvature_map,
    "cycle": cmd_cycle,
    "triality-map": cmd_triality_map,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qubit-holonomy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value configuration file")
        for key in ("omega", "g", "gamma1", "gamma2", "z0", "phi", "beta", "grid", "path", "center",
                    "size", "orientation", "out", "threads", "adiabatic", "omega-min", "omega-max",
                    "g-min", "g-max", "samples-per-unit", "flux-grid", "schedule", "dt"):
            p.add_argument(f"--{key}", dest=key.replace("-", "_"), default=None)
        p.add_argument("--gibbs", action="store_const", const=True, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve_config(args.command, file_values, overrides)
        run = COMMANDS[args.command](cfg)
        run.finish()
    except (ValidationError, NotSupported) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"{args.command}: wrote {len(run.files) + 1} files to {run.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
