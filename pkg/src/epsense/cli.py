"""Command-line front end.

    epsense spectrum      half splitting and sensitivity over a coupling grid
    epsense evolve        unconditioned and post-selected population traces
    epsense trajectories  quantum-jump ensemble versus the closed form
    epsense sense         synthetic sensing campaign with power-law fits
    epsense plot          SVG line chart from any CSV produced above

Exit codes: 0 success, 2 configuration or input error, 3 I/O error,
4 a fit failed (the report is still written).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import estimation as est
from ._accel import BACKEND
from .dynamics import TimeGrid, integrate_master, no_jump_amplitudes
from .model import DEFAULT_KAPPA_P, DEFAULT_KAPPA_Q, Density3, EpsenseError, make_params
from .nh_core import spectrum_sweep
from .svgplot import PlotError, Series, line_chart
from .trajectories import binomial_sigma, run_ensemble

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_FIT = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    omega: float = abs(DEFAULT_KAPPA_P - DEFAULT_KAPPA_Q) / 4.0
    kappa_q: float = DEFAULT_KAPPA_Q
    kappa_p: float = DEFAULT_KAPPA_P
    t0: float = 0.0
    t_max: float = 2.0
    n_points: int = 81
    shots: int = est.DEFAULT_SHOTS
    n_traj: int = 100_000
    seed: int = 0
    workers: int = 1
    min_kept: int = est.MIN_KEPT
    omega_min: float | None = None
    omega_max: float | None = None
    omega_points: int = 201
    omega_list: list[float] | None = None
    omega_offsets: list[float] = field(default_factory=lambda: list(est.DEFAULT_OFFSETS))
    out: str | None = None
    format: str = "csv"
    plot: bool = False

    def validate(self) -> RunConfig:
        try:
            make_params(self.omega, self.kappa_q, self.kappa_p)
            self.grid()
        except EpsenseError as exc:
            raise ConfigError(str(exc)) from exc
        for name in ("shots", "n_traj", "workers", "omega_points"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if isinstance(self.min_kept, bool) or not isinstance(self.min_kept, int) or self.min_kept < 1:
            raise ConfigError(f"min_kept must be a positive integer, got {self.min_kept!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        for name in ("omega_list", "omega_offsets"):
            v = getattr(self, name)
            if v is not None and (
                not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)
            ):
                raise ConfigError(f"{name} must be a list of numbers")
        if self.omega_list is not None and any(x < 0 for x in self.omega_list):
            raise ConfigError("omega_list values must be >= 0")
        if any(not 0 < x for x in self.omega_offsets):
            raise ConfigError("omega_offsets must be positive")
        return self

    def params(self):
        return make_params(self.omega, self.kappa_q, self.kappa_p)

    def grid(self) -> TimeGrid:
        return TimeGrid(float(self.t0), float(self.t_max), self.n_points)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_FLOAT_KEYS = {"omega", "kappa_q", "kappa_p", "t0", "t_max", "omega_min", "omega_max"}


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Defaults, then the JSON file at ``path``, then non-None ``overrides``."""
    values: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(_FIELDS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values.update(data)
    values.update({k: v for k, v in overrides.items() if v is not None})
    for k in _FLOAT_KEYS:
        v = values.get(k)
        if isinstance(v, int) and not isinstance(v, bool):
            values[k] = float(v)
        elif v is not None and not isinstance(v, float):
            raise ConfigError(f"{k} must be a number, got {v!r}")
    return RunConfig(**values).validate()


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------


def _num(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if not math.isfinite(v):
        return ""
    return f"{v:.12g}"


def _json_num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) for v in row])
    return buf.getvalue()


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _table_json(header: list[str], rows, meta: dict) -> str:
    doc = {"schema_version": SCHEMA_VERSION, **meta, "columns": header}
    doc["rows"] = [[_json_num(v) for v in row] for row in rows]
    return _json_text(doc)


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _emit_table(cfg: RunConfig, default_name: str, header, rows, meta) -> Path:
    ext = ".json" if cfg.format == "json" else ".csv"
    path = Path(cfg.out or default_name + ext)
    text = _table_json(header, rows, meta) if cfg.format == "json" else _csv_text(header, rows)
    _write(path, text)
    return path


def _params_meta(cfg: RunConfig) -> dict:
    return {"kappa_q": cfg.kappa_q, "kappa_p": cfg.kappa_p, "omega_ep": cfg.params().omega_ep}


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def spectrum_grid(cfg: RunConfig) -> list[float]:
    w0 = cfg.params().omega_ep
    lo = 0.0 if cfg.omega_min is None else cfg.omega_min
    hi = 2.0 * w0 if cfg.omega_max is None else cfg.omega_max
    if lo < 0 or hi < lo:
        raise ConfigError(f"bad omega range [{lo}, {hi}]")
    if cfg.omega_points == 1:
        grid = [lo]
    else:
        grid = list(np.linspace(lo, hi, cfg.omega_points))
    # snap values that only miss the EP by rounding
    return [w0 if abs(v - w0) <= 1e-12 * max(w0, 1.0) else float(v) for v in grid]


def cmd_spectrum(cfg: RunConfig) -> int:
    rows = spectrum_sweep(cfg.params(), spectrum_grid(cfg))
    header = ["omega", "delta_omega", "re_E", "im_E", "S_theory"]
    path = _emit_table(cfg, "spectrum", header, rows, _params_meta(cfg))
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def evolve_rows(cfg: RunConfig):
    p = cfg.params()
    grid = cfg.grid()
    rhos = integrate_master(p, Density3.basis(1), grid)
    ce, cg = no_jump_amplitudes(p, grid.times)
    rows = []
    for t, rho, a, b in zip(grid.times, rhos, ce, cg):
        pops = rho.populations
        n = abs(a) ** 2 + abs(b) ** 2
        if n > 1e-12:
            cond_e = abs(a) ** 2 / n
            cond = (cond_e, 1.0 - cond_e)
        else:
            cond = (None, None)
        rows.append((t, pops[1], pops[2], pops[0], *cond, n))
    return rows


def cmd_evolve(cfg: RunConfig) -> int:
    header = ["t", "p_e0", "p_g1", "p_g0", "cond_p_e", "cond_p_g1", "survival"]
    meta = {**_params_meta(cfg), "omega": cfg.omega}
    path = _emit_table(cfg, "evolve", header, evolve_rows(cfg), meta)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_trajectories(cfg: RunConfig) -> int:
    p = cfg.params()
    grid = cfg.grid()
    stats = run_ensemble(p, grid, cfg.n_traj, cfg.seed, workers=cfg.workers)
    ce, cg = no_jump_amplitudes(p, grid.times)
    theory = np.abs(ce) ** 2 + np.abs(cg) ** 2
    sigma = binomial_sigma(theory, stats.n_traj)
    diff = stats.survival_fraction - theory
    with np.errstate(all="ignore"):
        z = np.where(sigma > 0, diff / sigma, np.where(np.abs(diff) <= 1e-12, 0.0, np.inf))
    header = [
        "t", "survival", "survival_theory", "z_survival", "cond_p_e", "cond_p_g1",
        "rho_g0g0", "rho_e0e0", "rho_g1g1", "re_rho_e0g1", "im_rho_e0g1",
    ]
    rows = []
    for k, t in enumerate(grid.times):
        r = stats.rho_mean[k]
        rows.append((
            t, stats.survival_fraction[k], theory[k], z[k],
            stats.conditioned_p_e[k], stats.conditioned_p_g1[k],
            r[0, 0].real, r[1, 1].real, r[2, 2].real, r[1, 2].real, r[1, 2].imag,
        ))
    meta = {**_params_meta(cfg), "omega": cfg.omega, "n_traj": cfg.n_traj, "seed": cfg.seed}
    path = _emit_table(cfg, "trajectories", header, rows, meta)
    summary = {
        "schema_version": SCHEMA_VERSION,
        **meta,
        "t": [float(t) for t in grid.times],
        "z_survival": [_json_num(v) for v in z],
        "max_abs_z": _json_num(np.max(np.abs(z))),
        "jump_channels": stats.channel_counts(),
    }
    summary_path = path.with_suffix(".summary.json")
    _write(summary_path, _json_text(summary))
    print(f"wrote {path} and {summary_path}; max |z| = {summary['max_abs_z']:.3g}")
    return EXIT_OK


def campaign_omegas(cfg: RunConfig) -> list[float]:
    if cfg.omega_list is not None:
        return [float(v) for v in cfg.omega_list]
    return est.default_campaign_omegas(cfg.params(), cfg.omega_offsets)


def report_document(report: est.CampaignReport) -> dict:
    p = report.params
    w0 = p.omega_ep
    points = []
    for pt in report.points:
        fit = pt.fit
        points.append({
            "omega": pt.omega,
            "delta_omega": pt.delta_omega,
            "re_E": _json_num(fit.energy.re) if fit else None,
            "im_E": _json_num(fit.energy.im) if fit else None,
            "S": _json_num(pt.sensitivity.S) if pt.sensitivity else None,
            "rss": _json_num(fit.residual_rss) if fit else None,
            "n_points_used": fit.n_points_used if fit else 0,
            "converged": pt.converged,
            "error": pt.error,
        })
    laws = []
    for side in est.Side:
        if side not in report.power_laws:
            continue
        law = report.power_laws[side]
        block = {"side": side.value, "A": None, "B": None, "stderr_A": None, "stderr_B": None}
        if law is not None:
            block.update(
                A=law.A, B=law.B, stderr_A=_json_num(law.stderr_A),
                stderr_B=_json_num(law.stderr_B), n_points=law.n_points,
            )
        else:
            block["error"] = report.power_law_errors[side]
        laws.append(block)
    g = report.grid
    return {
        "schema_version": SCHEMA_VERSION,
        "params": {"kappa_q": p.kappa_q, "kappa_p": p.kappa_p, "omega_ep": w0},
        "grid": {"t0": g.t0, "t_max": g.t_max, "n_points": g.n_points},
        "shots": report.shots,
        "seed": report.seed,
        "points": points,
        "power_laws": laws,
        "ok": report.ok,
    }


def sense_svg(report: est.CampaignReport) -> str:
    w0 = report.params.omega_ep
    series = []
    for side in est.Side:
        pts = [
            pt.sensitivity for pt in report.points
            if pt.sensitivity is not None and side.matches(pt.delta_omega)
        ]
        if not pts:
            continue
        pts.sort(key=lambda s: abs(s.delta_omega))
        xs = [abs(s.delta_omega) / w0 for s in pts]
        series.append(Series(f"S ({side.value} EP)", xs, [s.S for s in pts], markers=True, line=False))
        law = report.power_laws.get(side)
        if law is not None:
            xf = list(np.geomspace(min(xs), max(xs), 50))
            series.append(Series(
                f"A={law.A:.3f}, B={law.B:.3f}", xf, [law.A * x**law.B for x in xf]
            ))
    return line_chart(
        series, loglog=True, title="Sensitivity near the exceptional point",
        xlabel="|delta_omega / omega_ep|", ylabel="S",
    )


def cmd_sense(cfg: RunConfig) -> int:
    p = cfg.params()
    omegas = campaign_omegas(cfg)
    if any(abs(o - p.omega_ep) <= 1e-12 * max(p.omega_ep, 1.0) for o in omegas):
        raise ConfigError("omega list must exclude the exceptional point")
    report = est.run_sensing_campaign(
        omegas, p, cfg.grid(), cfg.shots, cfg.seed, min_kept=cfg.min_kept
    )
    doc = report_document(report)
    out = Path(cfg.out or "sense.json")
    _write(out, _json_text(doc))
    rows = [
        (abs(pt.delta_omega) / p.omega_ep, pt.sensitivity.S, pt.delta_omega)
        for pt in report.points if pt.sensitivity is not None
    ]
    _write(out.with_suffix(".csv"), _csv_text(["abs_rel_delta_omega", "S", "delta_omega"], rows))
    if cfg.plot:
        try:
            _write(out.with_suffix(".svg"), sense_svg(report))
        except PlotError as exc:
            print(f"plot skipped: {exc}", file=sys.stderr)
    for block in doc["power_laws"]:
        if block["A"] is not None:
            print(f"{block['side']:>5} EP: A = {block['A']:.4f} +/- {block['stderr_A']:.4f}, "
                  f"B = {block['B']:.4f} +/- {block['stderr_B']:.4f}")
        else:
            print(f"{block['side']:>5} EP: {block['error']}", file=sys.stderr)
    if not report.ok:
        print("one or more fits failed; see report flags", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def read_csv_columns(path: str, columns: list[str]) -> dict[str, list[float]]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except (csv.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"malformed CSV {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path} has no header row")
    header = rows[0]
    missing = [c for c in columns if c not in header]
    if missing:
        raise ConfigError(f"columns not found in {path}: {', '.join(missing)}")
    body = [r for r in rows[1:] if r]
    if not body:
        raise ConfigError(f"{path} has no data rows")
    out = {c: [] for c in columns}
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        for c in columns:
            cell = r[header.index(c)].strip()
            try:
                out[c].append(float(cell) if cell else math.nan)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: non-numeric {c!r} value {cell!r}") from exc
    return out


def cmd_plot(args) -> int:
    ys = [c for c in args.y.split(",") if c]
    if not ys:
        raise ConfigError("--y needs at least one column")
    cols = read_csv_columns(args.input, [args.x, *ys])
    xs = cols[args.x]
    if args.abs_x:
        xs = [abs(v) for v in xs]
    series = [Series(c, xs, cols[c]) for c in ys]
    try:
        svg = line_chart(
            series, loglog=args.loglog, title=args.title or "", xlabel=args.x, ylabel=", ".join(ys)
        )
    except PlotError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out or Path(args.input).with_suffix(".svg"))
    _write(out, svg)
    print(f"wrote {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON config file; flags override its values")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("csv", "json"))
    sp.add_argument("--plot", action="store_true", default=None, help="also write an SVG plot")
    sp.add_argument("--print-defaults", action="store_true", help="print the default config and exit")
    sp.add_argument("--omega", type=float)
    sp.add_argument("--kappa-q", type=float)
    sp.add_argument("--kappa-p", type=float)
    sp.add_argument("--t0", type=float)
    sp.add_argument("--t-max", type=float)
    sp.add_argument("--n-points", type=int)
    sp.add_argument("--workers", type=int)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epsense", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s (kernels: {BACKEND})")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="half splitting and theoretical sensitivity")
    _common(sp)
    sp.add_argument("--omega-min", type=float)
    sp.add_argument("--omega-max", type=float)
    sp.add_argument("--omega-points", type=int)

    sp = sub.add_parser("evolve", help="population traces")
    _common(sp)

    sp = sub.add_parser("trajectories", help="quantum-jump ensemble")
    _common(sp)
    sp.add_argument("--n-traj", type=int)

    sp = sub.add_parser("sense", help="synthetic sensing campaign")
    _common(sp)
    sp.add_argument("--shots", type=int)
    sp.add_argument("--min-kept", type=int)
    sp.add_argument("--omega-list", type=_floats, help="comma-separated couplings")
    sp.add_argument("--omega-offsets", type=_floats, help="comma-separated |delta_omega|/omega_ep")

    sp = sub.add_parser("plot", help="SVG line chart from a CSV file")
    sp.add_argument("input")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True, help="comma-separated column names")
    sp.add_argument("--loglog", action="store_true")
    sp.add_argument("--abs-x", action="store_true", help="plot |x| (useful for delta_omega)")
    sp.add_argument("--title")
    sp.add_argument("--out")
    return ap


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "trajectories": cmd_trajectories,
    "sense": cmd_sense,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "plot":
            return cmd_plot(args)
        if args.print_defaults:
            print(_json_text(RunConfig().to_dict()), end="")
            return EXIT_OK
        skip = {"command", "config", "print_defaults"}
        overrides = {k: v for k, v in vars(args).items() if k not in skip}
        cfg = load_config(args.config, overrides)
        return _COMMANDS[args.command](cfg)
    except (ConfigError, EpsenseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
