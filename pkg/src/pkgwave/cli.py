"""Command-line front end: simulate, analyze, sweep and validate.

Every command exits 0 only when nothing reported an error. Failures are
printed to stderr and, when an output directory is known, recorded in
``error.json`` there.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
import threading
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .channel import (ChannelError, channel_response, fit_path_loss, pair_attenuation,
                      pair_distances, worst_case_coupling, write_pairs_csv, write_smin_csv)
from .config import ConfigError, ScenarioConfig, as_plain
from .fdtd import InstabilityError
from .geometry import GeometryError, SizingError
from .scenario import simulate_sparams
from .sparams import TouchstoneError, touchstone_read, touchstone_write, write_magnitude_csv
from .sweep import SweepError, SweepResult, SweepSpec, run_sweep
from .tuning import apply_length, tune_monopole_length
from .validation import run_validation

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, "thz": 1e12}


class CommandError(RuntimeError):
    """A user-facing failure with a short kind label."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


# ------------------------------------------------------------------ parsing helpers

def parse_frequency(text: str) -> float:
    """'60e9', '60GHz' or '60 ghz' to Hz."""
    m = re.fullmatch(r"\s*([-+0-9.eE]+)\s*([a-zA-Z]*)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"not a frequency: {text!r}")
    unit = m.group(2).lower() or "hz"
    if unit not in _UNITS:
        raise argparse.ArgumentTypeError(f"unknown frequency unit {m.group(2)!r}")
    try:
        value = float(m.group(1)) * _UNITS[unit]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a frequency: {text!r}") from None
    if not (math.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"frequency must be positive: {text!r}")
    return value


def parse_band(text: str) -> tuple[float, float]:
    """'LO:HI' with each side accepted by parse_frequency."""
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"band must be LO:HI, got {text!r}")
    lo, hi = parse_frequency(lo), parse_frequency(hi)
    if lo >= hi:
        raise argparse.ArgumentTypeError(f"band must have LO < HI, got {text!r}")
    return lo, hi


def parse_axis(text: str) -> tuple[str, list]:
    """'silicon=0.7e-3,0.1e-3' to ('silicon', [0.0007, 0.0001])."""
    name, sep, values = text.partition("=")
    if not sep or not name or not values:
        raise argparse.ArgumentTypeError(f"axis must be NAME=V1,V2,..., got {text!r}")
    out = []
    for v in values.split(","):
        v = v.strip()
        try:
            out.append(float(v))
        except ValueError:
            out.append(v)
    return name.strip(), out


def load_config(args) -> ScenarioConfig:
    """Config file (or defaults) with command-line overrides applied."""
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig.from_dict({})
    updates = {}
    if getattr(args, "dim", None) is not None:
        updates["solver.dim"] = args.dim
    if getattr(args, "band", None) is not None:
        updates["band"] = list(args.band)
    if getattr(args, "threads", None) is not None:
        updates["solver.threads"] = args.threads
    return cfg.with_updates(**updates) if updates else cfg


def _output_dir(args, cfg: ScenarioConfig | None, default: str) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None and args.config:
        return Path(cfg.data["output"])
    return Path(default)


def write_json(path: Path, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return str(obj)


def _finite_or_none(v: float):
    return v if math.isfinite(v) else None


# ------------------------------------------------------------------ simulate

def _port_table(model) -> list[dict]:
    return [{"port": p.index, "x": p.x, "y": p.y, "kind": p.kind,
             "monopole_length": p.monopole_length} for p in model.ports]


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    out = _output_dir(args, cfg, "run")
    key = cfg.hash()
    meta_path = out / "metadata.json"
    if args.resume and meta_path.exists():
        old = json.loads(meta_path.read_text())
        if old.get("config_hash") == key and (out / old.get("touchstone", "")).is_file():
            print(f"up to date: {out / old['touchstone']}")
            return EXIT_OK
    model = cfg.build_model()
    tuning = None
    if cfg.data["ports"]["tune"]:
        tuning = tune_monopole_length(model, dim=cfg.dim, policy=cfg.policy(),
                                      settings=cfg.run_settings())
        model = apply_length(model, tuning.length)
        if not tuning.matched:
            print(f"warning: monopole tuning did not reach -10 dB: {tuning.diagnostic}",
                  file=sys.stderr)
    settings = cfg.run_settings()
    if settings.snapshot_steps:
        settings = replace(settings, snapshot_dir=str(out / "snapshots"), keep_snapshots=False)
    result = simulate_sparams(model, dim=cfg.dim, policy=cfg.policy(), settings=settings,
                              frequencies=cfg.frequencies(), source_band=cfg.band,
                              f0=0.5 * sum(cfg.band), threads=cfg.data["solver"]["threads"],
                              metadata={"config_hash": key})
    ts = touchstone_write(result.sparams, out / "sparams")
    write_magnitude_csv(result.sparams, out / "sparams_db.csv")
    lib = model.library
    meta = {
        "pkgwave_version": __version__,
        "config_hash": key,
        "config": as_plain(cfg.data),
        "touchstone": ts.name,
        "dim": cfg.dim,
        "materials": {name: {"rel_permittivity": m.rel_permittivity,
                             "loss_tangent": m.loss_tangent,
                             "pinned_conductivity": m.conductivity(result.grid.f_pin)}
                      for name, m in lib.items()},
        "conductivity_pinned_at_hz": result.grid.f_pin,
        "grid": result.grid.summary(),
        "dt": result.records[0].dt,
        "ports": _port_table(model),
        "runs": [{"port": r.excited, "steps": r.steps, "decayed": r.decayed}
                 for r in result.records],
        "warnings": result.warnings,
    }
    if tuning is not None:
        meta["tuning"] = {"length": tuning.length, "s11_db": _finite_or_none(tuning.s11_db),
                          "dip_frequency": tuning.dip_frequency, "matched": tuning.matched,
                          "diagnostic": tuning.diagnostic}
    write_json(meta_path, meta)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {ts}")
    return EXIT_OK


# ------------------------------------------------------------------ analyze

def _find_touchstone(path: Path) -> Path:
    if path.is_dir():
        found = sorted(p for p in path.iterdir() if re.fullmatch(r"\.s\d+p", p.suffix.lower()))
        if len(found) != 1:
            raise CommandError("input", f"{path}: expected exactly one .sNp file, found {len(found)}")
        return found[0]
    if not path.exists():
        raise CommandError("input", f"{path}: no such file or directory")
    return path


def _port_positions(path: Path, sset, spacing: float | None):
    """Port coordinates from the run metadata, or a uniform row ``spacing`` apart."""
    meta = (path if path.is_dir() else path.parent) / "metadata.json"
    if meta.is_file():
        ports = json.loads(meta.read_text()).get("ports", [])
        by_id = {p["port"]: p for p in ports}
        if all(pid in by_id for pid in sset.port_ids):
            return [_Position(pid, by_id[pid]["x"], by_id[pid]["y"]) for pid in sset.port_ids]
    if spacing is not None:
        return [_Position(pid, n * spacing, 0.0) for n, pid in enumerate(sset.port_ids)]
    return None


class _Position:
    def __init__(self, index: int, x: float, y: float):
        self.index, self.x, self.y = index, x, y


def write_channel_csv(sset, path: Path, tx_gain: float, rx_gain: float) -> Path:
    """Per ordered pair and frequency: 10 log10(Gt Gr |H|^2) and attenuation."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tx_port", "rx_port", "frequency_hz", "gain_product_db", "attenuation_db"])
        for i in sset.port_ids:
            for j in sset.port_ids:
                if i == j:
                    continue
                resp = channel_response(sset, i, j, tx_gain, rx_gain)
                for f, g, a in zip(resp.frequencies, resp.gain_product_db, resp.attenuation_db()):
                    w.writerow([i, j, repr(float(f)), repr(float(g)), repr(float(a))])
    return path


def cmd_analyze(args) -> int:
    paths = [Path(p) for p in args.inputs]
    files = [_find_touchstone(p) for p in paths]
    sets = []
    for f in files:
        try:
            sets.append(touchstone_read(f))
        except (TouchstoneError, ValueError) as exc:
            raise CommandError("touchstone", f"{f}: {exc}") from None
    hashes = {s.metadata.get("config_hash", "") for s in sets}
    if len(hashes) > 1 and not args.force:
        raise CommandError("mixed_hash", "inputs come from different configurations "
                           f"({', '.join(sorted(h or '<none>' for h in hashes))}); use --force to analyze anyway")
    band = args.band or (55e9, 65e9)
    out_root = Path(args.out) if args.out else (paths[0] if paths[0].is_dir() else paths[0].parent) / "analysis"
    for path, f, sset in zip(paths, files, sets):
        out = out_root if len(files) == 1 else out_root / f.stem
        lo, hi = sset.frequencies[0], sset.frequencies[-1]
        if band[0] < lo * (1 - 1e-9) or band[1] > hi * (1 + 1e-9):
            raise CommandError("band", f"{f}: band {band[0]:g}-{band[1]:g} Hz lies outside "
                               f"the file's frequency grid {lo:g}-{hi:g} Hz")
        summary = worst_case_coupling(sset, band, linear=args.linear)
        write_smin_csv(summary, out / "smin.csv")
        write_channel_csv(sset, out / "channel.csv", args.tx_gain, args.rx_gain)
        lines = [f"input: {f}",
                 f"config_hash: {sset.metadata.get('config_hash', '')}",
                 f"ports: {sset.n_ports}",
                 f"band: {band[0]:g}-{band[1]:g} Hz",
                 f"statistics: {'linear magnitude' if args.linear else 'dB'}",
                 f"s_min_mean_db: {summary.mean_db:.6g}",
                 f"s_min_std_db: {summary.std_db:.6g}"]
        positions = _port_positions(path, sset, args.spacing)
        if positions is None:
            lines.append("path_loss: skipped (no port positions; pass --spacing)")
        else:
            rows = pair_attenuation(sset, pair_distances(positions), args.frequency,
                                    band=band if args.band_average else None,
                                    tx_gain=args.tx_gain, rx_gain=args.rx_gain)
            write_pairs_csv(rows, out / "pairs.csv")
            where = f"band mean {band[0]:g}-{band[1]:g} Hz" if args.band_average else f"{args.frequency:g} Hz"
            lines.append(f"path_loss_at: {where}")
            try:
                fit = fit_path_loss([r[2] for r in rows], [r[3] for r in rows])
                lines += fit.summary().rstrip("\n").splitlines()
            except ChannelError as exc:
                lines.append(f"path_loss: fit not possible ({exc})")
        text = "\n".join(lines) + "\n"
        (out / "summary.txt").write_text(text)
        print(text, end="")
    return EXIT_OK


# ------------------------------------------------------------------ sweep

def cmd_sweep(args) -> int:
    cfg = load_config(args)
    if args.axis:
        cfg = cfg.with_updates(**{"sweep.axes": dict(args.axis)})
    if args.retune:
        cfg = cfg.with_updates(**{"sweep.retune": True})
    spec = SweepSpec.from_config(cfg)
    out = _output_dir(args, cfg, "sweep")
    csv_path = out / "sweep.csv"
    previous = None
    if args.resume and csv_path.is_file():
        previous = SweepResult.from_csv(csv_path, spec.names)
    known = list(previous.rows) if previous else []
    lock = threading.Lock()

    def record(row):
        # rewrite the whole file so it stays a valid, resumable CSV after every point
        with lock:
            known.append(row)
            SweepResult(spec.names, list(known), cfg.band, spec.variance_penalty).to_csv(csv_path)
            print(f"point {row.index}: {row.status} mean {row.mean_db:.3f} dB", file=sys.stderr)

    result = run_sweep(spec, threads=cfg.data["solver"]["threads"], previous=previous, on_row=record)
    result.to_csv(csv_path)
    text = result.summary()
    (out / "summary.txt").write_text(text)
    print(text, end="")
    return EXIT_OK if len(result.successful()) == len(result.rows) else EXIT_FAILED


# ------------------------------------------------------------------ validate

def cmd_validate(args) -> int:
    checks = run_validation(cfl_safety=args.cfl_safety, include_slow=not args.quick)
    lines = [c.line() for c in checks]
    print("\n".join(lines))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "validation.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED


# ------------------------------------------------------------------ entry point

def _common(p: argparse.ArgumentParser, *, config: bool = True) -> None:
    if config:
        p.add_argument("--config", metavar="PATH", help="scenario YAML (defaults: baseline package)")
        p.add_argument("--dim", type=int, choices=(2, 3), help="override solver dimensionality")
        p.add_argument("--threads", type=int, metavar="N", help="concurrent solver runs")
    p.add_argument("--out", metavar="DIR", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pkgwave", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pkgwave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="compute the scattering matrix of a scenario")
    _common(p)
    p.add_argument("--band", type=parse_band, metavar="LO:HI", help="frequency band")
    p.add_argument("--resume", action="store_true", help="skip if the output matches the config hash")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="channel metrics from Touchstone files or run directories")
    p.add_argument("inputs", nargs="+", metavar="INPUT", help=".sNp file or run directory")
    _common(p, config=False)
    p.add_argument("--band", type=parse_band, metavar="LO:HI", help="band for S_min statistics")
    p.add_argument("--frequency", type=parse_frequency, default=60e9,
                   help="frequency for per-pair path loss (default 60GHz)")
    p.add_argument("--band-average", action="store_true",
                   help="average per-pair path loss over the band instead")
    p.add_argument("--tx-gain", type=float, default=1.0, help="transmit antenna gain (linear)")
    p.add_argument("--rx-gain", type=float, default=1.0, help="receive antenna gain (linear)")
    p.add_argument("--linear", action="store_true", help="band statistics over linear |S|")
    p.add_argument("--spacing", type=float, metavar="M",
                   help="port spacing for a uniform row when no metadata is available")
    p.add_argument("--force", action="store_true", help="allow inputs with different config hashes")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="grid sweep over package parameters")
    _common(p)
    p.add_argument("--band", type=parse_band, metavar="LO:HI", help="frequency band")
    p.add_argument("--axis", type=parse_axis, action="append", metavar="NAME=V1,V2",
                   help="sweep axis (repeatable); replaces the config's axes")
    p.add_argument("--retune", action="store_true", help="retune monopoles at every point")
    p.add_argument("--resume", action="store_true", help="reuse finished points from sweep.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run the analytic oracle checks")
    _common(p, config=False)
    p.add_argument("--quick", action="store_true", help="skip the slower exponent check")
    p.add_argument("--cfl-safety", type=float, default=0.99,
                   help="time-step safety factor (values above 1 must be caught as unstable)")
    p.set_defaults(func=cmd_validate)
    return parser


_KNOWN_ERRORS = (ConfigError, GeometryError, SizingError, InstabilityError, TouchstoneError,
                 ChannelError, SweepError, CommandError)


def _error_kind(exc: BaseException) -> str:
    if isinstance(exc, CommandError):
        return exc.kind
    return {ConfigError: "config", GeometryError: "geometry", SizingError: "sizing",
            InstabilityError: "instability", TouchstoneError: "touchstone",
            ChannelError: "channel", SweepError: "sweep"}.get(type(exc), type(exc).__name__)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        record = {"command": args.command, "error": _error_kind(exc), "message": str(exc)}
        if isinstance(exc, SizingError):
            record["required_cells"] = exc.required_cells
        if isinstance(exc, InstabilityError):
            record["step"] = exc.step
        if not isinstance(exc, _KNOWN_ERRORS):
            record["traceback"] = traceback.format_exc()
        out = getattr(args, "out", None)
        if out is None and getattr(args, "config", None):
            try:
                out = ScenarioConfig.load(args.config).data["output"]
            except Exception:
                out = None
        if out is not None:
            write_json(Path(out) / "error.json", record)
        print(f"error ({record['error']}): {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, ConfigError) else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
