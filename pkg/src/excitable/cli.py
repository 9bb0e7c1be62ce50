"""Command line driver: ``excitable {fixed-points,run,sweep}``.

Exit codes: 0 success, 1 configuration error, 2 numerical blow-up, 3 I/O error.
The sweep worker count is read from ``EXCITABLE_WORKERS`` (default 1).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError, ExperimentConfig, PRESETS, load_config, locked_alpha, preset,
)
from .diagnostics import fit_wavelength_law, summarize
from .kinetics import (
    Regime, all_fixed_points, classify_regime, limit_cycle_radius, snh_alpha, trace_threshold,
)
from .rdsolver import BlowUpError, SpaceTimeRecord, apply_initial, run

log = logging.getLogger("excitable")

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_IO = 0, 1, 2, 3
WORKERS_ENV = "EXCITABLE_WORKERS"


def fmt(value) -> str:
    """CSV cell: reals with 17 significant digits, empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_spacetime_csv(path: Path, record: SpaceTimeRecord, frames) -> None:
    """One row per frame: time, then the value at every active site."""
    grid = record.grid
    if grid.dimension == 1:
        keep = None
        n = grid.n_sites
    elif record.section_only:
        keep = grid.mask[grid.section_row]
        n = int(keep.sum())
    else:
        keep = grid.mask
        n = grid.n_active
    header = ["time"] + [f"s{i}" for i in range(n)]
    rows = ([t] + list(f if keep is None else f[keep]) for t, f in zip(record.times, frames))
    write_csv(path, header, rows)


def write_pgm(path: Path, values: np.ndarray, lo: float, hi: float) -> None:
    """Binary greyscale image (P5, maxval 255), ``lo`` -> 0 and ``hi`` -> 255."""
    scaled = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    data = np.rint(scaled * 255).astype(np.uint8)
    rows, cols = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    return np.frombuffer(parts[4][: rows * cols], dtype=np.uint8).reshape(rows, cols)


def resolved_parameters(cfg: ExperimentConfig) -> dict:
    k = cfg.kinetic_params()
    grid = cfg.grid()
    out = {key: getattr(cfg, key) for key in ExperimentConfig.__dataclass_fields__}
    out.update(dx=grid.dx, length=grid.length, regime=classify_regime(k).value)
    if k.nu > 0:
        out.update(r0=limit_cycle_radius(k), alpha_S=snh_alpha(k))
    return out


def write_manifest(out: Path, cfg: ExperimentConfig, command: str, outputs, started: float) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "input_sha256": cfg.digest(),
        "config": cfg.to_text(),
        "resolved": resolved_parameters(cfg),
        "outputs": sorted(outputs),
        "wall_clock_s": time.perf_counter() - started,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _snapshot_range(cfg: ExperimentConfig) -> tuple[float, float]:
    r0 = limit_cycle_radius(cfg.kinetic_params())
    return -r0 - 0.1, r0 + 0.1


# -- commands -----------------------------------------------------------

FIXED_POINT_HEADER = ["kind", "x", "y", "r", "theta", "eig1_re", "eig1_im",
                      "eig2_re", "eig2_im", "regime", "alpha_S"]


def cmd_fixed_points(cfg: ExperimentConfig, out: Path) -> list[str]:
    k = cfg.kinetic_params()
    regime = classify_regime(k)
    alpha_s = snh_alpha(k) if k.nu > 0 else None
    rows = []
    for rep in all_fixed_points(k):
        p = rep.location
        (l1, l2) = rep.eigenvalues
        rows.append([rep.kind.value, p.x, p.y, p.r, p.theta, l1.real, l1.imag,
                     l2.real, l2.imag, regime.value, alpha_s])
    write_csv(out / "fixed_points.csv", FIXED_POINT_HEADER, rows)
    written = ["fixed_points.csv"]
    if cfg.trace_threshold and regime in (Regime.SNH, Regime.EXCITABLE):
        m = trace_threshold(k, arclength=cfg.trace_arclength, ds=cfg.trace_ds)
        pts = [("inner", i, x, y) for i, (x, y) in enumerate(m.inner)]
        pts += [("outer", i, x, y) for i, (x, y) in enumerate(m.outer)]
        write_csv(out / "threshold.csv", ["branch", "index", "x", "y"], pts)
        written.append("threshold.csv")
    return written


METRIC_KEYS = ["wavelength_sites", "wavelength", "cv", "periodic", "n_gaps",
               "pulse_count", "pulse_count_total", "front_position", "front_speed"]


def simulate(cfg: ExperimentConfig, workers: int = 1) -> SpaceTimeRecord:
    cfg.validate()
    return run(cfg.grid(), cfg.kinetic_params(), cfg.initial_condition(), cfg.t_end,
               cfg.sample_stride, workers=workers, section_only=cfg.section_only)


def cmd_run(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[str]:
    record = simulate(cfg, workers)
    written = []
    write_spacetime_csv(out / "spacetime_x.csv", record, record.x_frames)
    write_spacetime_csv(out / "spacetime_y.csv", record, record.y_frames)
    written += ["spacetime_x.csv", "spacetime_y.csv"]
    metrics = summarize(record, cfg.floor, cfg.cv_threshold, cfg.margin).as_row()
    write_csv(out / "metrics.csv", METRIC_KEYS, [[metrics[key] for key in METRIC_KEYS]])
    written.append("metrics.csv")
    if cfg.dimension == 2:
        lo, hi = _snapshot_range(cfg)
        write_pgm(out / "initial_x.pgm", apply_initial(record.grid, record.initial).x, lo, hi)
        write_pgm(out / "final_x.pgm", record.final.x, lo, hi)
        written += ["initial_x.pgm", "final_x.pgm"]
    return written


def sweep_values(cfg: ExperimentConfig) -> list:
    if cfg.sweep_count < 1:
        raise ConfigError("[sweep] sweep_count: must be >= 1")
    vals = np.linspace(cfg.sweep_start, cfg.sweep_stop, cfg.sweep_count)
    if cfg.sweep_parameter == "radius":
        return [int(round(v)) for v in vals]
    return [float(v) for v in vals]


def sweep_point(cfg: ExperimentConfig, value) -> ExperimentConfig:
    name = cfg.sweep_parameter
    if name == "beta":
        c = cfg.replace(beta=value)
        return c.replace(alpha=locked_alpha(c))
    if name == "alpha":
        return cfg.replace(alpha=value)
    if name == "radius":
        return cfg.replace(radius=value)
    raise ConfigError(f"[sweep] sweep_parameter: {name!r} not one of beta, alpha, radius")


def _sweep_task(args):
    index, cfg = args
    try:
        record = simulate(cfg)
        metrics = summarize(record, cfg.floor, cfg.cv_threshold, cfg.margin).as_row()
        error = ""
    except (ConfigError, BlowUpError, ValueError) as exc:
        metrics = dict.fromkeys(METRIC_KEYS)
        error = f"{type(exc).__name__}: {exc}"
    return index, metrics, error


SWEEP_HEADER = ["index", "beta", "alpha", "radius"] + METRIC_KEYS + ["error"]


def cmd_sweep(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[str]:
    if not cfg.sweep_parameter:
        raise ConfigError("[sweep] sweep_parameter: required for the sweep command")
    points = [sweep_point(cfg, v) for v in sweep_values(cfg)]
    tasks = list(enumerate(points))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sweep_task, tasks))
        results.sort(key=lambda r: r[0])
    else:
        results = [_sweep_task(t) for t in tasks]
    rows = []
    for (index, metrics, error), p in zip(results, points):
        rows.append([index, p.beta, p.alpha, p.radius] + [metrics[k] for k in METRIC_KEYS]
                    + [error])
    write_csv(out / "sweep.csv", SWEEP_HEADER, rows)
    if cfg.sweep_parameter == "beta":
        pairs = [(p.beta, m["wavelength"]) for (_, m, err), p in zip(results, points)
                 if not err and m["periodic"]]
        with open(out / "sweep.csv", "a", encoding="utf-8") as fh:
            try:
                law = fit_wavelength_law(pairs)
                fh.write(f"law_fit,c={fmt(law.c)},d={fmt(law.d)},rms={fmt(law.rms)},n={law.n}\n")
            except ValueError as exc:
                fh.write(f"law_fit,error={exc}\n")
    return ["sweep.csv"]


COMMANDS = {"fixed-points": cmd_fixed_points, "run": cmd_run, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="excitable", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="figure preset applied first")
        p.add_argument("--out", type=Path, help="output directory (overrides [output] out_dir)")
        p.add_argument("--stride", type=int, help="record every k-th step")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def workers_from_env() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    started = time.perf_counter()
    try:
        cfg = preset(args.preset) if args.preset else ExperimentConfig()
        if args.config:
            cfg = load_config(args.config, cfg)
        if args.stride is not None:
            cfg = cfg.replace(sample_stride=args.stride)
        if args.out is not None:
            cfg = cfg.replace(out_dir=str(args.out))
        if args.command == "fixed-points":
            cfg.kinetic_params()
        else:
            cfg.validate()
        workers = workers_from_env()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        command = COMMANDS[args.command]
        if args.command == "fixed-points":
            written = command(cfg, out)
        else:
            written = command(cfg, out, workers)
        write_manifest(out, cfg, args.command, written + ["manifest.json"], started)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"numerical blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except OSError as exc:
        print(f"I/O error at {exc.filename or out}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    log.info("wrote %s", ", ".join(written))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
