"""Command-line front end: load a run configuration, evaluate, write CSV.

Snapshot scenarios write ``x, rho_sc, rho_exact, re_psi_sc, im_psi_sc,
status`` rows; the time sweep writes ``p, tau_barrier, tau_free, tau_class,
t_max, status``.  A ``.meta.json`` sidecar echoes the configuration.
"""

from __future__ import annotations

import argparse
import csv
import enum
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from semitunnel import __version__
from semitunnel.core import CoherentState, PhysicalSetup
from semitunnel.exact import ScatteringExpansion
from semitunnel.semiclassical import edge_phases, semiclassical_field
from semitunnel.tunneling import QuadratureParams, tunneling_times

log = logging.getLogger("semitunnel")

SNAPSHOT_COLUMNS = ("x", "rho_sc", "rho_exact", "re_psi_sc", "im_psi_sc", "status")
SWEEP_COLUMNS = ("p", "tau_barrier", "tau_free", "tau_class", "t_max", "status")
FREE_V0 = 1e-12
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class Scenario(enum.Enum):
    SnapshotBefore = "SnapshotBefore"
    SnapshotInside = "SnapshotInside"
    SnapshotInsideGhost = "SnapshotInsideGhost"
    SnapshotAfter = "SnapshotAfter"
    TimeSweep = "TimeSweep"
    FreeComparison = "FreeComparison"


DEFAULT_GRIDS = {
    Scenario.SnapshotBefore: (-150.0, -50.0, 801),
    Scenario.SnapshotInside: (-50.0, 50.0, 801),
    Scenario.SnapshotInsideGhost: (-50.0, 50.0, 801),
    Scenario.SnapshotAfter: (50.0, 250.0, 801),
    Scenario.FreeComparison: (-150.0, 250.0, 1601),
    Scenario.TimeSweep: (-150.0, 250.0, 2),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    setup: PhysicalSetup
    state: CoherentState
    scenario: Scenario
    x_grid: tuple
    t_values: list = field(default_factory=lambda: [50.0])
    p_values: list = field(default_factory=list)
    with_ghost: bool = False
    with_exact: bool = False
    hbar: float | None = None

    def echo(self) -> dict:
        s = self.setup
        return {
            "scenario": self.scenario.value,
            "v0": s.v0,
            "a": s.a,
            "b": s.b,
            "c": s.c,
            "hbar": s.hbar,
            "lam": s.lam,
            "q": self.state.q,
            "p": self.state.p,
            "x_grid": list(self.x_grid),
            "t_values": list(self.t_values),
            "p_values": list(self.p_values),
            "with_ghost": self.with_ghost,
            "with_exact": self.with_exact,
            "hbar_override": self.hbar,
        }


_KNOWN = {"scenario", "v0", "a", "q", "p", "hbar", "lam", "T", "t_values", "p_values", "x_grid", "xmin", "xmax", "nx", "ghost", "exact"}


def _number(raw, name):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"field {name!r}: expected a number, got {raw!r}")
    return float(raw)


def _flag(raw, name):
    if isinstance(raw, bool):
        return raw
    if isinstance(raw, str) and raw.lower() in ("1", "true", "yes", "on", "0", "false", "no", "off"):
        return raw.lower() in ("1", "true", "yes", "on")
    raise ConfigError(f"field {name!r}: expected a boolean, got {raw!r}")


def _read_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text()
    if not text.strip():
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Merge a JSON file and flag overrides onto the default parameters."""
    raw = _read_file(path) if path is not None else {}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(raw) - _KNOWN)
    if unknown:
        raise ConfigError(f"unknown field(s): {', '.join(unknown)}")

    try:
        scenario = Scenario(raw.get("scenario", "SnapshotAfter"))
    except ValueError:
        names = ", ".join(s.value for s in Scenario)
        raise ConfigError(f"field 'scenario': {raw['scenario']!r} is not one of {names}") from None

    v0 = _number(raw.get("v0", 0.5), "v0")
    if scenario is Scenario.FreeComparison:
        v0 = FREE_V0
    a = _number(raw.get("a", 50.0), "a")
    lam = _number(raw.get("lam", 1.0), "lam")
    hbar = _number(raw["hbar"], "hbar") if "hbar" in raw else None
    try:
        setup = PhysicalSetup.from_hbar(hbar if hbar is not None else 1.0, v0=v0, a=a, lam=lam)
        state = CoherentState(_number(raw.get("q", -60.0), "q"), _number(raw.get("p", 2.0), "p"), setup)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    if "T" in raw and "t_values" in raw:
        raise ConfigError("give either 'T' or 't_values', not both")
    if "t_values" in raw:
        if not isinstance(raw["t_values"], list) or not raw["t_values"]:
            raise ConfigError("field 't_values': expected a non-empty list")
        t_values = [_number(t, "t_values") for t in raw["t_values"]]
    else:
        t_values = [_number(raw.get("T", 50.0), "T")]
    if any(t <= 0 for t in t_values):
        raise ConfigError("field 'T': times must be positive")

    if "p_values" in raw:
        if not isinstance(raw["p_values"], list) or not raw["p_values"]:
            raise ConfigError("field 'p_values': expected a non-empty list")
        p_values = [_number(v, "p_values") for v in raw["p_values"]]
    else:
        p_values = [0.25 * i for i in range(1, 17)]
    if any(v <= 0 for v in p_values):
        raise ConfigError("field 'p_values': momenta must be positive")

    lo, hi, n = DEFAULT_GRIDS[scenario]
    if "x_grid" in raw:
        g = raw["x_grid"]
        if not isinstance(g, (list, dict)):
            raise ConfigError("field 'x_grid': expected [min, max, count] or an object")
        lo, hi, n = (g.get("min", lo), g.get("max", hi), g.get("count", n)) if isinstance(g, dict) else (g + [None] * 3)[:3]
    lo = _number(raw.get("xmin", lo), "xmin")
    hi = _number(raw.get("xmax", hi), "xmax")
    n_raw = raw.get("nx", n)
    if isinstance(n_raw, bool) or not isinstance(n_raw, (int, float)) or n_raw != int(n_raw):
        raise ConfigError(f"field 'nx': expected an integer, got {n_raw!r}")
    n = int(n_raw)
    if n < 2:
        raise ConfigError("field 'nx': the x grid needs at least 2 points")
    if not lo < hi:
        raise ConfigError("field 'x_grid': min must be below max")

    ghost = _flag(raw.get("ghost", False), "ghost") or scenario is Scenario.SnapshotInsideGhost
    exact = _flag(raw.get("exact", scenario is Scenario.FreeComparison), "exact")
    return RunConfig(setup, state, scenario, (lo, hi, n), t_values, p_values, ghost, exact, hbar)


# ---------------------------------------------------------------------------
# evaluation


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SEMITUNNEL_THREADS", os.cpu_count() or 1)))
    except ValueError:
        return 1


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return ""
    return format(float(v), ".12g")


def _snapshot_chunk(x, T, config: RunConfig, phases):
    """Semiclassical values for one chunk; failures are isolated per row."""
    try:
        f = semiclassical_field(x, T, config.state, config.with_ghost, phases)
        return [(complex(v), "ok") if np.isfinite(v) else (None, "error:nonfinite") for v in f.amplitude]
    except (ArithmeticError, ValueError):
        rows = []
        for xi in x:
            try:
                v = semiclassical_field([xi], T, config.state, config.with_ghost, phases).amplitude[0]
                rows.append((complex(v), "ok") if np.isfinite(v) else (None, "error:nonfinite"))
            except (ArithmeticError, ValueError) as exc:
                rows.append((None, f"error:{type(exc).__name__}"))
        return rows


def snapshot_rows(config: RunConfig, T: float):
    lo, hi, n = config.x_grid
    x = np.linspace(lo, hi, n)
    phases = edge_phases(config.state, T, config.with_ghost)
    chunks = np.array_split(x, max(1, min(n, 8 * _threads())))
    with ThreadPoolExecutor(_threads()) as pool:
        parts = list(pool.map(lambda c: _snapshot_chunk(c, T, config, phases), chunks))
    sc = [r for part in parts for r in part]
    exact = [None] * n
    if config.with_exact:
        try:
            exact = list(np.abs(ScatteringExpansion(config.state).grid(lo, x[1] - x[0], n, T).values) ** 2)
        except ValueError as exc:
            log.warning("exact solver unavailable: %s", exc)
            sc = [(v, "error:exact" if s == "ok" else s) for v, s in sc]
    rows = []
    for xi, (psi, status), ex in zip(x, sc, exact):
        if psi is None:
            rows.append((xi, None, ex, None, None, status))
        else:
            rows.append((xi, abs(psi) ** 2, ex, psi.real, psi.imag, status))
    return rows


def sweep_rows(config: RunConfig):
    params = QuadratureParams()

    def one(p):
        try:
            r = tunneling_times(p, config.setup, q=config.state.q, params=params)
            return (p, r.tau_barrier, r.tau_free, r.tau_class, r.t_max, "ok")
        except (ArithmeticError, ValueError) as exc:
            return (p, None, None, None, None, f"error:{type(exc).__name__}")

    with ThreadPoolExecutor(_threads()) as pool:
        return list(pool.map(one, config.p_values))


def _write(path: Path, columns, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])


def run_scenario(config: RunConfig, out: Path) -> int:
    """Write the dataset(s) for ``config`` and return the process exit code."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    jobs = []
    if config.scenario is Scenario.TimeSweep:
        jobs.append((out, SWEEP_COLUMNS, sweep_rows(config)))
    else:
        for T in config.t_values:
            target = out if len(config.t_values) == 1 else out.with_name(f"{out.stem}_T{T:g}{out.suffix}")
            jobs.append((target, SNAPSHOT_COLUMNS, snapshot_rows(config, T)))
    code = EXIT_OK
    for path, columns, rows in jobs:
        _write(path, columns, rows)
        failed = sum(1 for r in rows if r[-1] != "ok")
        meta = {"version": __version__, "columns": list(columns), "rows": len(rows), "failed_rows": failed, "config": config.echo()}
        path.with_name(path.name + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        log.info("wrote %s (%d rows, %d failed)", path, len(rows), failed)
        if failed > 0.01 * len(rows):
            code = EXIT_NUMERIC
    return code


def _bool_arg(text):
    try:
        return _flag(text, "flag")
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semitunnel", description="Semiclassical wavepacket tunneling through a square barrier.")
    ap.add_argument("--config", type=Path, help="JSON run configuration")
    ap.add_argument("--scenario", choices=[s.value for s in Scenario])
    for name in ("hbar", "p", "T", "a", "v0", "q", "xmin", "xmax"):
        ap.add_argument(f"--{name}", type=float)
    ap.add_argument("--nx", type=int)
    ap.add_argument("--ghost", type=_bool_arg, nargs="?", const=True)
    ap.add_argument("--exact", type=_bool_arg, nargs="?", const=True)
    ap.add_argument("--out", type=Path, default=Path("semitunnel.csv"))
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    flags = {k: getattr(args, k) for k in ("scenario", "hbar", "p", "T", "a", "v0", "q", "xmin", "xmax", "nx", "ghost", "exact")}
    try:
        config = load_config(args.config, flags)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_scenario(config, args.out)


if __name__ == "__main__":
    sys.exit(main())
