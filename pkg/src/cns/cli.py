"""Command-line interface: configuration, runs, verification suites and file formats.

Exit codes: 0 success, 1 configuration or usage error (or a failed
verification), 2 solver divergence.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import difflib
import math
import struct
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cutoff import LevelFailed, expansion_study, strictly_decreasing
from .diagnostics import (EnergyReport, check_linf_interpolation, check_observation_identities,
                          ew_monotone, identity_residual_L2, identity_residual_weighted)
from .grid import CylGrid, build_grid
from .reconstruct import energy_inequality_check
from .timestepper import PRESETS, RunConfig, SolverDiverged, run

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2

# configuration

SCHEMA = {
    "domain": {"r0": float, "R0": float, "L3": float, "Nr": int, "Nz": int},
    "solver": {"nu": float, "dt": float, "cfl": float, "T_end": float,
               "report_every": int, "linear_only": bool},
    "initial": {"preset": str, "amplitude": float, "axial_mode": int},
    "output": {"out_dir": str},
    "expansion": {"levels": int, "base_n": int, "dr": float},
}
REQUIRED = {("solver", "nu"), ("solver", "T_end")}
DEFAULTS = {
    "r0": 1.0, "R0": 2.0, "L3": math.pi, "Nr": 64, "Nz": 64,
    "report_every": 10, "linear_only": False,
    "preset": "quartic-cos", "amplitude": 1.0, "axial_mode": 1,
    "out_dir": "out", "levels": 3, "base_n": 1, "dr": 1.0 / 32,
}
DEFAULT_CFL = 0.4
# common alternative spellings, used only to suggest a correction
ALIASES = {
    "viscosity": "nu", "kinematic_viscosity": "nu", "timestep": "dt", "time_step": "dt",
    "t_end": "T_end", "tend": "T_end", "end_time": "T_end", "t_final": "T_end",
    "nr": "Nr", "nz": "Nz", "r_inner": "r0", "r_outer": "R0", "period": "L3",
}


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None,
                 path: str | None = None):
        self.key, self.line, self.path = key, line, path
        where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(where + message)


class MissingKey(ConfigError):
    pass


class UnknownKey(ConfigError):
    def __init__(self, message, key=None, line=None, path=None, suggestion=None):
        self.suggestion = suggestion
        super().__init__(message, key, line, path)


class BadValue(ConfigError):
    pass


@dataclass
class ConfigFile:
    run: RunConfig
    out_dir: str = "out"
    levels: int = 3
    base_n: int = 1
    dr: float = 1.0 / 32
    path: str | None = None
    lines: dict = field(default_factory=dict, repr=False)


def _key_lines(text: str) -> dict:
    """Line number of every ``section.key`` assignment and section header."""
    lines, section = {}, None
    for no, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            lines.setdefault((section, None), no)
        elif section is not None:
            for sep in ("=", ":"):
                if sep in s:
                    lines.setdefault((section, s.split(sep, 1)[0].strip()), no)
                    break
    return lines


def suggest_key(name: str) -> str | None:
    known = [k for keys in SCHEMA.values() for k in keys]
    pool = {k.lower(): k for k in known}
    pool.update(ALIASES)
    hit = difflib.get_close_matches(name.lower(), list(pool), n=1, cutoff=0.6)
    return pool[hit[0]] if hit else None


def _convert(kind, raw: str):
    if kind is bool:
        v = raw.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind is int:
        return int(raw.strip())
    if kind is float:
        v = float(raw.strip())
        if not math.isfinite(v):
            raise ValueError(f"not finite: {raw!r}")
        return v
    return raw.strip()


def parse_config(path) -> ConfigFile:
    """Read and validate an INI configuration; raise the first error found."""
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError("file not found", path=path) from None
    except UnicodeDecodeError as exc:
        raise ConfigError(f"not valid UTF-8 ({exc.reason})", path=path) from None
    lines = _key_lines(text)
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str  # keys are case sensitive (r0 vs R0)
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"malformed file: {exc.message.splitlines()[0]}", line=line, path=path) from None

    values = {}
    for section in cp.sections():
        if section not in SCHEMA:
            hit = difflib.get_close_matches(section, list(SCHEMA), n=1)
            hint = f"; did you mean [{hit[0]}]?" if hit else ""
            raise UnknownKey(f"unknown section [{section}]{hint}", key=section,
                             line=lines.get((section, None)), path=path,
                             suggestion=hit[0] if hit else None)
        for key, raw in cp.items(section):
            line = lines.get((section, key))
            if key not in SCHEMA[section]:
                hint = suggest_key(key)
                where = next((s for s, ks in SCHEMA.items() if hint in ks), None)
                msg = f"unknown key {key!r} in [{section}]"
                if hint:
                    msg += f"; did you mean {hint!r}" + (f" in [{where}]" if where != section else "") + "?"
                raise UnknownKey(msg, key=key, line=line, path=path, suggestion=hint)
            try:
                values[key] = (_convert(SCHEMA[section][key], raw), line)
            except ValueError as exc:
                raise BadValue(f"bad value for {key!r}: {exc}", key=key, line=line, path=path) from None

    for section, key in sorted(REQUIRED):
        if key not in values:
            raise MissingKey(f"missing required key {key!r} in [{section}]", key=key, path=path)

    def get(key):
        return values[key][0] if key in values else DEFAULTS.get(key)

    def bad(key, why):
        return BadValue(f"{key} {why}", key=key, line=values.get(key, (None, None))[1], path=path)

    for key in ("nu", "T_end", "L3", "amplitude", "dr"):
        if key in values and not get(key) > 0:
            raise bad(key, "must be positive")
    if "dt" in values and "cfl" in values:
        raise bad("cfl", "cannot be combined with dt; give one of them")
    if "dt" in values and not get("dt") > 0:
        raise bad("dt", "must be positive")
    if "cfl" in values and not 0 < get("cfl") <= 1:
        raise bad("cfl", "must lie in (0, 1]")
    if not get("r0") > 0:
        raise bad("r0", "must be positive")
    if not get("R0") > get("r0"):
        raise bad("R0", "must exceed r0")
    if get("Nr") < 8:
        raise bad("Nr", "must be at least 8")
    if get("Nz") < 8 or get("Nz") % 2:
        raise bad("Nz", "must be even and at least 8")
    for key in ("report_every", "axial_mode", "levels", "base_n"):
        if get(key) < 1:
            raise bad(key, "must be at least 1")
    if get("preset") not in PRESETS:
        raise bad("preset", f"must be one of {', '.join(sorted(PRESETS))}")

    dt = get("dt") if "dt" in values else None
    cfl = None if dt is not None else (get("cfl") if "cfl" in values else DEFAULT_CFL)
    rc = RunConfig(nu=get("nu"), T_end=get("T_end"), dt=dt, cfl=cfl,
                   r0=get("r0"), R0=get("R0"), L3=get("L3"), Nr=get("Nr"), Nz=get("Nz"),
                   preset=get("preset"), amplitude=get("amplitude"), axial_mode=get("axial_mode"),
                   report_every=get("report_every"), linear_only=get("linear_only"))
    return ConfigFile(run=rc, out_dir=get("out_dir"), levels=get("levels"), base_n=get("base_n"),
                      dr=get("dr"), path=path, lines={k: v[1] for k, v in values.items()})


# field snapshots

MAGIC = b"CNSF"
VERSION = 1
_HEADER = struct.Struct("<4sIQQdddd")


class SnapshotError(ValueError):
    pass


class BadMagic(SnapshotError):
    pass


class VersionMismatch(SnapshotError):
    pass


class TruncatedPayload(SnapshotError):
    def __init__(self, expected: int, actual: int):
        self.expected, self.actual = expected, actual
        super().__init__(f"payload has {actual} bytes, expected {expected}")


@dataclass
class Snapshot:
    grid: CylGrid
    psi: np.ndarray
    t: float


def write_snapshot(grid: CylGrid, psi: np.ndarray, t: float, path) -> None:
    psi = np.asarray(psi, dtype=float)
    if psi.shape != grid.shape:
        raise ValueError(f"field shape {psi.shape} does not match grid {grid.shape}")
    header = _HEADER.pack(MAGIC, VERSION, grid.Nr, grid.Nz, grid.r0, grid.R0, grid.L3, float(t))
    # x3-major, r fastest
    payload = np.ascontiguousarray(psi.T, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


def read_snapshot(path) -> Snapshot:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"{path}: not a CNSF file (magic {data[:4]!r})")
    if len(data) < _HEADER.size:
        raise TruncatedPayload(_HEADER.size, len(data))
    _, version, Nr, Nz, r0, R0, L3, t = _HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionMismatch(f"{path}: version {version}, this reader handles {VERSION}")
    expected = Nr * Nz * 8
    actual = len(data) - _HEADER.size
    if actual < expected:
        raise TruncatedPayload(expected, actual)
    if actual > expected:
        raise SnapshotError(f"{path}: {actual - expected} trailing bytes after payload")
    grid = build_grid(r0, R0, L3, Nr, Nz)
    psi = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(Nz, Nr).T.astype(float)
    return Snapshot(grid, psi, t)


# CSV output

ENERGY_COLUMNS = ["step"] + EnergyReport.columns()
RESIDUAL_COLUMNS = ["t_start", "t_end", "rho_L2", "rho_weighted", "ew_monotone"]
EXPANSION_COLUMNS = ["n", "n_next", "l2_diff", "h1_diff"]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def residual_rows(reports, nu, dt, h):
    if len(reports) < 2:
        return []
    r1 = identity_residual_L2(reports, nu)
    r2 = identity_residual_weighted(reports, nu)
    mono = ew_monotone(reports, dt, h)
    return [{"t_start": a.t, "t_end": b.t, "rho_L2": float(x), "rho_weighted": float(y),
             "ew_monotone": bool(m)}
            for a, b, x, y, m in zip(reports, reports[1:], r1, r2, mono)]


# commands


def _err(msg):
    print(msg, file=sys.stderr)


def cmd_run(config, out=None) -> int:
    try:
        cfg = parse_config(config)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    out_dir = Path(out or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rc = cfg.run
    grid = rc.grid()
    rows = []

    def on_report(state, rep):
        rows.append({"step": state.step_index, **rep.as_row()})
        write_snapshot(grid, state.psi, state.t, out_dir / f"psi_{state.step_index:06d}.cnsf")

    code = EXIT_OK
    reports = []
    try:
        _, reports = run(rc, on_report=on_report)
    except SolverDiverged as exc:
        _err(f"error: solver diverged at t = {exc.t:.6g}: {exc}")
        code = EXIT_DIVERGED
    _write_csv(out_dir / "energy.csv", ENERGY_COLUMNS, rows)
    dt_nom = rc.dt if rc.dt is not None else 0.0
    h = max(grid.dr, grid.dz)
    _write_csv(out_dir / "residuals.csv", RESIDUAL_COLUMNS, residual_rows(reports, rc.nu, dt_nom, h))
    if code == EXIT_OK:
        print(f"wrote {len(rows)} reports to {out_dir}")
    return code


def cmd_expand(config, levels=None, out=None) -> int:
    try:
        cfg = parse_config(config)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    levels = levels or cfg.levels
    out_dir = Path(out or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        rows = expansion_study(cfg.run, levels, n0=cfg.base_n, dr=cfg.dr, amplitude=cfg.run.amplitude)
    except LevelFailed as exc:
        _err(f"error: {exc}")
        return EXIT_DIVERGED
    except ValueError as exc:
        _err(f"error: {exc}")
        return EXIT_CONFIG
    _write_csv(out_dir / "expansion.csv", EXPANSION_COLUMNS, [r.as_row() for r in rows])
    print(f"{'n':>4} {'2n':>4} {'L2 diff':>12} {'H1 diff':>12}")
    for r in rows:
        print(f"{r.n:4d} {r.n_next:4d} {r.l2:12.4e} {r.h1:12.4e}")
    return EXIT_OK


# verification suites


class UnknownSuite(ValueError):
    pass


class _Checks:
    def __init__(self):
        self.ok = True

    def __call__(self, name, value, op, threshold):
        passed = bool(value <= threshold if op == "<=" else value >= threshold)
        self.ok &= passed
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {value:.4g} {op} {threshold:.4g}")
        return passed


def _suite_identities(cfg: RunConfig | None, check):
    cfg = cfg or RunConfig(nu=0.5, T_end=1.0, dt=1e-3, Nr=128, Nz=128, preset="octic-cos")
    cfg.report_every = 1
    grid = cfg.grid()
    from .timestepper import preset_field
    psi0 = preset_field(cfg.preset, grid, cfg.amplitude, cfg.axial_mode)
    h3, h4 = check_observation_identities(grid, psi0)
    check("H3 decomposition, relative residual", h3, "<=", 1e-3)
    check("H4 decomposition, relative residual", h4, "<=", 1e-3)
    _, reps = run(cfg)
    r1 = np.abs(identity_residual_L2(reps, cfg.nu)).max()
    r2 = np.abs(identity_residual_weighted(reps, cfg.nu)).max()
    check("L2 energy identity, max normalized residual", r1, "<=", 5e-3)
    check("weighted identity, max normalized residual", r2, "<=", 5e-3)
    dt = cfg.dt or 0.0
    h = max(grid.dr, grid.dz)
    check("Ew monotone violations", float((~ew_monotone(reps, dt, h)).sum()), "<=", 0)
    ok = energy_inequality_check(reps, cfg.nu, dt, h)
    check("energy inequality violations", float((~ok).sum()), "<=", 0)


def _suite_convergence(cfg, check):
    from .manufactured import manufactured_error, observed_orders
    errs = [manufactured_error(N, 1e-3, omega=8.0) for N in (32, 64, 128)]
    for k, o in enumerate(observed_orders(errs)):
        check(f"manufactured solution, h order (level {k + 1})", o, ">=", 1.8)
    errs = [manufactured_error(32, dt, omega=8.0, semi_discrete=True) for dt in (0.01, 0.005, 0.0025)]
    for k, o in enumerate(observed_orders(errs)):
        check(f"manufactured solution, dt order (level {k + 1})", o, ">=", 1.8)
    for k, o in enumerate(observed_orders(divergence_refinement())):
        check(f"divergence, h order (level {k + 1})", o, ">=", 1.8)
    for k, o in enumerate(observed_orders(vorticity_refinement())):
        check(f"vorticity residual, simultaneous (h, dt) order (level {k + 1})", o, ">=", 1.8)


def divergence_refinement(levels=(32, 64, 128), preset="quartic-cos"):
    """max |div u| / max |u| on a quadrant box with one axial period."""
    from .reconstruct import BoxGrid, divergence, to_cartesian
    from .timestepper import preset_field
    out = []
    for n in levels:
        g = build_grid(1.0, 2.0, math.pi, n + 1, n)
        box = BoxGrid((0.0, 0.0, -math.pi), (2.0, 2.0, math.pi), (n, n, n), periodic3=True)
        u = to_cartesian(g, preset_field(preset, g), box)
        div, valid = divergence(u)
        out.append(float(np.abs(div[valid]).max() / u.magnitude_max()))
    return out


def vorticity_refinement(levels=((24, 0.02), (48, 0.01), (96, 0.005)), t_end=0.2, nu=0.5,
                         preset="octic-cos"):
    """L2 vorticity-equation residual of the last step at each (N, dt) level."""
    from .elliptic import ModalSolver
    from .reconstruct import BoxGrid, vorticity_equation_residual
    from .timestepper import initial_state, preset_field, step
    out = []
    for N, dt in levels:
        g = build_grid(1.0, 2.0, math.pi, N + 1, N)
        s = ModalSolver(g)
        st = initial_state(s, preset_field(preset, g))
        prev = st
        for _ in range(int(round(t_end / dt))):
            prev, st = st, step(st, dt, nu, s)
        box = BoxGrid((1.2, -0.3, -math.pi), (1.8, 0.3, math.pi), (N, N, N), periodic3=True)
        out.append(vorticity_equation_residual(g, prev.psi, st.psi, dt, nu, box)["l2"])
    return out


def _suite_expansion(cfg, check, levels=3):
    base = cfg or RunConfig(nu=0.5, T_end=0.1, dt=1e-3, Nz=32)
    rows = expansion_study(base, levels)
    print(f"{'n':>4} {'2n':>4} {'L2 diff':>12} {'H1 diff':>12}")
    for r in rows:
        print(f"{r.n:4d} {r.n_next:4d} {r.l2:12.4e} {r.h1:12.4e}")
    check("successive H1 differences decreasing (10% slack)",
          float(not strictly_decreasing(rows, 0.1)), "<=", 0)


def random_decaying_profile(rng, n=2001, L=10.0):
    """Sum of random Gaussians on [-L, L], small at both ends."""
    x = np.linspace(-L, L, n)
    f = np.zeros_like(x)
    for _ in range(rng.integers(1, 5)):
        c, s, a = rng.uniform(-3, 3), rng.uniform(0.3, 1.5), rng.normal()
        f += a * np.exp(-((x - c) / s) ** 2) * np.cos(rng.uniform(0, 4) * x)
    return x, f


def _suite_interpolation(cfg, check, count=50, seed=12345):
    rng = np.random.default_rng(seed)
    bad, worst = 0, 0.0
    for _ in range(count):
        x, f = random_decaying_profile(rng)
        lhs, rhs, ok = check_linf_interpolation(f, x[1] - x[0])
        bad += not ok
        worst = max(worst, lhs / rhs)
    print(f"worst ratio max|f| / bound = {worst:.4f}")
    check(f"interpolation inequality violations ({count} profiles)", float(bad), "<=", 0)


SUITES = {
    "identities": _suite_identities,
    "convergence": _suite_convergence,
    "expansion": _suite_expansion,
    "interpolation": _suite_interpolation,
}


def cmd_verify(suite: str, config=None) -> int:
    if suite not in SUITES:
        raise UnknownSuite(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    cfg = None
    if config is not None:
        try:
            cfg = parse_config(config).run
        except ConfigError as exc:
            _err(f"config error: {exc}")
            return EXIT_CONFIG
    check = _Checks()
    t0 = time.perf_counter()
    try:
        SUITES[suite](cfg, check)
    except (SolverDiverged, LevelFailed) as exc:
        _err(f"error: {exc}")
        return EXIT_DIVERGED
    print(f"suite {suite}: {'PASS' if check.ok else 'FAIL'} ({time.perf_counter() - t0:.1f} s)")
    return EXIT_OK if check.ok else EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cns", description="Axisymmetric Navier-Stokes stream-function solver")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="integrate one configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (default: [output] out_dir)")
    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("--suite", required=True, help=", ".join(SUITES))
    v.add_argument("--config", help="optional configuration for the identities and expansion suites")
    e = sub.add_parser("expand", help="domain-expansion study")
    e.add_argument("--config", required=True)
    e.add_argument("--levels", type=int)
    e.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out)
    if args.command == "expand":
        if args.levels is not None and args.levels < 2:
            _err("error: --levels must be at least 2")
            return EXIT_CONFIG
        return cmd_expand(args.config, args.levels, args.out)
    try:
        return cmd_verify(args.suite, args.config)
    except UnknownSuite as exc:
        _err(f"error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
