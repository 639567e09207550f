"""
Command-line runners: spectra, parameter sweeps and verification suites.

Configs are TOML documents; nested tables and dotted keys are equivalent and
are flattened to dotted names (``geometry.eta``).  Presets ship with the
package and can be overridden key by key from a config file.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:        # Python 3.10
    import tomli as tomllib

from . import __version__
from .convergence import OrderingScheme, mode_sequence
from .geometry import (
    DeltaBarrier, DomainError, FewModeError, Layer, PotentialSpec, SolverError, ValidationError,
    WaveKind, double_cavity, double_delta, ley_loudon_cavity, wall_mirror,
)
from .interaction import AtomSpec, compute_spectrum, drive_spectrum
from .modes import dirichlet_modes
from .scattering import transmission_peak

log = logging.getLogger("fewmode")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3


class ConfigError(ValidationError):
    """Invalid run configuration; the message names the offending key."""


# ---------------------------------------------------------------------------
# config handling

_DEFAULTS = {
    "name": "run",
    "wave_kind": "maxwell_rwa",
    "geometry.L": 1.0,
    "basis.scheme": "explicit",
    "basis.dominant": 9,
    "basis.parity": "odd",
    "grid.count": 401,
    "outputs.prefix": "spectrum",
    "outputs.oracle": True,
    "drive.channel": 0,
}

_KNOWN = {
    "name", "description", "wave_kind",
    "geometry.kind", "geometry.L", "geometry.xi", "geometry.xi1", "geometry.xi2",
    "geometry.eta", "geometry.eta1", "geometry.eta2", "geometry.n_mid", "geometry.n0",
    "geometry.t", "geometry.strength", "geometry.support", "geometry.deltas",
    "geometry.layers", "geometry.wall",
    "basis.scheme", "basis.selector", "basis.count", "basis.dominant", "basis.parity",
    "grid.min", "grid.max", "grid.count", "grid.center", "grid.half_width",
    "atom.omega_a", "atom.d", "atom.r_a", "atom.peak_mode", "atom.peak_half_width",
    "drive.b_in", "drive.channel",
    "sweep.parameter", "sweep.values",
    "outputs.prefix", "outputs.oracle",
}

_GEOMETRY_KEYS = {
    "double_delta": {"xi", "xi1", "xi2", "L"},
    "thin_mirror": {"eta", "eta1", "eta2", "L"},
    "double_cavity": {"n_mid", "n0", "t", "L"},
    "wall_mirror": {"strength", "L"},
    "custom": {"support", "deltas", "layers", "wall", "L"},
}

CONVENTIONS = {
    "units": "hbar = m = c = 1; E = k^2/2; omega = k for the electromagnetic kinds",
    "length": "cavity length L = 1 unless geometry.L says otherwise",
    "ports": "index 0 = left, 1 = right; column j = incidence from side j; "
             "S[1,0] is left-to-right transmission; free propagation is [[0,1],[1,0]]",
    "phases": "plane waves exp(+-ikr) with absolute phase referenced to r = 0",
    "free_states": "(2 pi k)^(-1/2) exp(+-ikr), energy normalized",
    "modes": "Dirichlet modes sqrt(2/L') sin(q (r - a)) on the mode support [a, b], L' = b - a",
    "couplings": "electromagnetic couplings in frequency normalization W / sqrt(omega_l)",
    "factorization": "S_full = S_bg S_io; S_io acts between bath channels, S_bg maps them to ports",
    "grid": "energy E for schroedinger, frequency omega otherwise",
}


def flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def list_presets() -> list[str]:
    root = resources.files("fewmode") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def _load_toml(text: str, origin: str) -> dict:
    try:
        return flatten(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{origin}: {exc}") from None


def load_config(path: str | None = None, preset: str | None = None) -> dict:
    """Defaults, then the preset, then the config file, key by key."""
    if path is None and preset is None:
        raise ConfigError("give --config and/or --preset")
    cfg = dict(_DEFAULTS)
    if preset is not None:
        if preset not in list_presets():
            raise ConfigError(f"unknown preset {preset!r}; see list-presets")
        text = (resources.files("fewmode") / "presets" / f"{preset}.toml").read_text()
        cfg.update(_load_toml(text, f"preset {preset}"))
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        cfg.update(_load_toml(text, str(path)))
    unknown = sorted(set(cfg) - _KNOWN)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return cfg


def _num(cfg: dict, key: str, default=None, positive=False) -> float:
    v = cfg.get(key, default)
    if v is None:
        raise ConfigError(f"{key}: required")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{key}: must be positive, got {v!r}")
    return float(v)


def build_geometry(cfg: dict) -> PotentialSpec:
    try:
        kind = WaveKind(cfg["wave_kind"])
    except ValueError:
        raise ConfigError(f"wave_kind: unknown value {cfg['wave_kind']!r}") from None
    gkind = cfg.get("geometry.kind")
    if gkind not in _GEOMETRY_KEYS:
        raise ConfigError(f"geometry.kind: expected one of {sorted(_GEOMETRY_KEYS)}, got {gkind!r}")
    extra = {k.split(".", 1)[1] for k in cfg if k.startswith("geometry.")} - {"kind"}
    bad = sorted(extra - _GEOMETRY_KEYS[gkind])
    if bad:
        raise ConfigError(f"geometry.{bad[0]}: not used by geometry.kind = {gkind!r}")
    L = _num(cfg, "geometry.L", 1.0, positive=True)
    try:
        if gkind == "double_delta":
            if kind is not WaveKind.SCHROEDINGER:
                raise ConfigError("geometry.kind: double_delta needs wave_kind = 'schroedinger'")
            xi = _num(cfg, "geometry.xi", cfg.get("geometry.xi1"))
            return double_delta(_num(cfg, "geometry.xi1", xi), _num(cfg, "geometry.xi2", xi), L)
        if gkind == "thin_mirror":
            eta = cfg.get("geometry.eta", cfg.get("geometry.eta1"))
            return ley_loudon_cavity(_num(cfg, "geometry.eta1", eta), _num(cfg, "geometry.eta2", eta),
                                     L, kind)
        if gkind == "double_cavity":
            return double_cavity(_num(cfg, "geometry.n_mid"), _num(cfg, "geometry.n0", 4.0),
                                 _num(cfg, "geometry.t", 0.01, positive=True), L, kind)
        if gkind == "wall_mirror":
            return wall_mirror(_num(cfg, "geometry.strength"), L, kind)
        support = cfg.get("geometry.support")
        if not (isinstance(support, list) and len(support) == 2):
            raise ConfigError("geometry.support: expected [a, b]")
        deltas = []
        for i, d in enumerate(cfg.get("geometry.deltas", [])):
            if not (isinstance(d, list) and len(d) == 2):
                raise ConfigError(f"geometry.deltas[{i}]: expected [position, strength]")
            deltas.append(DeltaBarrier(float(d[0]), float(d[1])))
        layers = []
        for i, lay in enumerate(cfg.get("geometry.layers", [])):
            if not (isinstance(lay, list) and len(lay) == 3):
                raise ConfigError(f"geometry.layers[{i}]: expected [start, end, n]")
            layers.append(Layer(float(lay[0]), float(lay[1]), float(lay[2])))
        wall = cfg.get("geometry.wall")
        return PotentialSpec(kind, tuple(support), tuple(layers), tuple(deltas),
                             None if wall is None else float(wall))
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(f"geometry: {exc}") from None


def build_selector(cfg: dict) -> list[int]:
    scheme = cfg["basis.scheme"]
    if scheme == "explicit":
        sel = cfg.get("basis.selector")
        if not isinstance(sel, list) or not all(isinstance(x, int) and x >= 1 for x in sel):
            raise ConfigError("basis.selector: expected a list of positive mode indices")
        return sorted(set(sel))
    try:
        ordering = OrderingScheme(scheme, int(cfg["basis.dominant"]), cfg["basis.parity"])
    except ValueError as exc:
        raise ConfigError(f"basis.scheme: {exc}") from None
    count = cfg.get("basis.count")
    if not isinstance(count, int) or count < 0:
        raise ConfigError("basis.count: expected a non-negative integer")
    return mode_sequence(ordering, count) if count else []


def resolve_atom(cfg: dict, spec: PotentialSpec) -> AtomSpec | None:
    if not any(k.startswith("atom.") for k in cfg):
        return None
    wa = cfg.get("atom.omega_a")
    if wa == "resonant-with-peak":
        mode = int(cfg.get("atom.peak_mode", 9))
        hw = _num(cfg, "atom.peak_half_width", 0.45 * np.pi, positive=True)
        L = float(cfg.get("geometry.L", 1.0))
        wa = transmission_peak(spec, mode * np.pi / L, hw)
    else:
        wa = _num(cfg, "atom.omega_a", positive=True)
    try:
        return AtomSpec(float(wa), _num(cfg, "atom.d"), _num(cfg, "atom.r_a", 0.0))
    except ValidationError as exc:
        raise ConfigError(f"atom: {exc}") from None


def build_grid(cfg: dict, atom: AtomSpec | None) -> np.ndarray:
    count = cfg.get("grid.count")
    if not isinstance(count, int) or count < 1:
        raise ConfigError("grid.count: expected a positive integer")
    if "grid.half_width" in cfg:
        center = cfg.get("grid.center", "atom")
        if center == "atom":
            if atom is None:
                raise ConfigError("grid.center: 'atom' needs an atom block")
            center = atom.omega_a
        c = float(center) if isinstance(center, (int, float)) else None
        if c is None:
            raise ConfigError(f"grid.center: expected a number or 'atom', got {center!r}")
        hw = _num(cfg, "grid.half_width", positive=True)
        lo, hi = c - hw, c + hw
    else:
        lo, hi = _num(cfg, "grid.min"), _num(cfg, "grid.max")
    if not 0 < lo <= hi:
        raise ConfigError(f"grid: need 0 < min <= max, got [{lo}, {hi}]")
    return np.linspace(lo, hi, count)


@dataclass
class RunConfig:
    raw: dict
    spec: PotentialSpec
    selector: list
    atom: AtomSpec | None
    grid: np.ndarray
    drive: dict | None = None
    resolved: dict = field(default_factory=dict)


def resolve(cfg: dict) -> RunConfig:
    spec = build_geometry(cfg)
    selector = build_selector(cfg)
    atom = resolve_atom(cfg, spec)
    if atom is not None and spec.wave_kind is WaveKind.SCHROEDINGER:
        raise ConfigError("atom: needs an electromagnetic wave_kind")
    grid = build_grid(cfg, atom)
    drive = None
    if "drive.b_in" in cfg:
        if atom is None:
            raise ConfigError("drive: needs an atom block")
        drive = {"b_in": _num(cfg, "drive.b_in", positive=True),
                 "channel": int(cfg.get("drive.channel", 0))}
    resolved = {"selector": selector, "grid_min": float(grid[0]), "grid_max": float(grid[-1]),
                "grid_count": int(grid.size)}
    if atom is not None:
        resolved["omega_a"] = atom.omega_a
    return RunConfig(cfg, spec, selector, atom, grid, drive, resolved)


# ---------------------------------------------------------------------------
# output


def fmt(x: float) -> str:
    return f"{x:.17g}"


def spectrum_table(rc: RunConfig, threads: int = 1) -> tuple[list[str], np.ndarray]:
    basis = dirichlet_modes(rc.spec, rc.selector)
    res = compute_spectrum(rc.spec, basis, rc.grid, atom=rc.atom,
                           oracle=bool(rc.raw.get("outputs.oracle", True)), threads=threads)
    n_ch = rc.spec.n_channels
    entries = ["00", "01", "10", "11"] if n_ch == 2 else ["00"]
    cols = ["E" if rc.spec.wave_kind is WaveKind.SCHROEDINGER else "omega"]
    data = [rc.grid]
    parts = [("full", res.stack("full")), ("io", res.stack("io")), ("bg", res.stack("bg"))]
    if res.oracle is not None:
        parts.append(("oracle", np.array([s.matrix for s in res.oracle])))
    for name, st in parts:
        for e in entries:
            i, j = int(e[0]), int(e[1])
            cols += [f"Re_S_{name}_{e}", f"Im_S_{name}_{e}"]
            data += [st[:, i, j].real, st[:, i, j].imag]
    if n_ch == 2:
        for name, st in parts:
            cols.append(f"T2_{name}")
            data.append(np.abs(st[:, 1, 0]) ** 2)
    names = {"gamma_s": "gamma_S", "delta_ls": "delta_LS", "kappa": "kappa_T"}
    for key, col in names.items():
        if key in res.extras:
            cols.append(col)
            data.append(res.extras[key])
    if rc.drive is not None:
        dr = drive_spectrum(rc.spec, basis, rc.atom, rc.grid, rc.drive["b_in"],
                            rc.drive["channel"], threads=threads)
        for key in ("T2_drive", "R2_drive", "sigma_z", "drive_residual"):
            cols.append(key)
            data.append(dr[key])
    return cols, np.column_stack(data)


def write_csv(path: Path, cols: list[str], table: np.ndarray) -> str:
    lines = [",".join(cols)]
    lines += [",".join(fmt(float(x)) for x in row) for row in table]
    text = "\n".join(lines) + "\n"
    path.write_text(text)
    return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not serializable: {type(x).__name__}")


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def manifest(rc: RunConfig, files: dict, columns: list[str]) -> dict:
    return {
        "tool": {"name": "fewmode", "version": __version__},
        "config": rc.raw,
        "resolved": rc.resolved,
        "conventions": CONVENTIONS,
        "tolerances": {
            "bath_state_projection_residual": 1e-8,
            "csv_significant_digits": 17,
        },
        "columns": columns,
        "files": files,
    }


def run_spectrum(cfg: dict, out: Path, threads: int = 1) -> dict:
    rc = resolve(cfg)
    out.mkdir(parents=True, exist_ok=True)
    prefix = rc.raw["outputs.prefix"]
    cols, table = spectrum_table(rc, threads)
    csv = out / f"{prefix}.csv"
    digest = write_csv(csv, cols, table)
    man = manifest(rc, {csv.name: digest}, cols)
    write_json(out / f"{prefix}.manifest.json", man)
    return man


def _set_key(cfg: dict, key: str, value) -> dict:
    new = copy.deepcopy(cfg)
    if key not in _KNOWN or key.startswith("sweep."):
        raise ConfigError(f"sweep.parameter: cannot sweep {key!r}")
    # a symmetric value overrides both per-mirror values
    for short in ("eta", "xi"):
        if key == f"geometry.{short}":
            new.pop(f"geometry.{short}1", None)
            new.pop(f"geometry.{short}2", None)
    new[key] = value
    return new


def run_sweep(cfg: dict, out: Path, threads: int = 1) -> dict:
    key = cfg.get("sweep.parameter")
    values = cfg.get("sweep.values")
    if not isinstance(key, str):
        raise ConfigError("sweep.parameter: required")
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values: expected a non-empty list")
    out.mkdir(parents=True, exist_ok=True)
    prefix = cfg["outputs.prefix"]
    entries = []
    cols = []
    for i, v in enumerate(values):
        sub = _set_key(cfg, key, v)
        rc = resolve(sub)
        cols, table = spectrum_table(rc, threads)
        csv = out / f"{prefix}_{i:03d}.csv"
        digest = write_csv(csv, cols, table)
        entry = {"index": i, "value": v, "file": csv.name, "sha256": digest, "resolved": rc.resolved}
        entries.append(entry)
        log.info("sweep %s = %r -> %s", key, v, csv.name)
    index = {
        "tool": {"name": "fewmode", "version": __version__},
        "config": cfg,
        "conventions": CONVENTIONS,
        "tolerances": {"bath_state_projection_residual": 1e-8, "csv_significant_digits": 17},
        "columns": cols,
        "sweep": {"parameter": key, "entries": entries},
    }
    write_json(out / f"{prefix}.index.json", index)
    return index


def run_verify(suites: list[str], profile: str, out: Path | None, threads: int = 1) -> bool:
    from .suites import SUITES, run_suite

    names = list(SUITES) if suites == ["all"] else suites
    report = {"profile": profile, "suites": {}}
    ok = True
    for name in names:
        checks = run_suite(name, profile, threads)
        for c in checks:
            print(c.line(), flush=True)
        report["suites"][name] = [c.as_dict() for c in checks]
        ok &= all(c.passed for c in checks)
    report["passed"] = ok
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "verify-report.json", report)
    print("ALL PASSED" if ok else "VERIFICATION FAILED")
    return ok


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fewmode", description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=f"fewmode {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default="out"):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--preset", metavar="NAME")
        sp.add_argument("--out", metavar="DIR", default=out_default)
        sp.add_argument("--threads", type=int, default=1, metavar="N")
        sp.add_argument("--tolerance-profile", choices=["default", "strict"], default="default")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("spectrum", help="S-matrix spectrum on a grid"))
    common(sub.add_parser("sweep", help="one spectrum per value of a swept key"))
    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("suites", nargs="*", default=["all"], metavar="SUITE")
    common(v, out_default=None)
    sub.add_parser("list-presets", help="print the shipped presets")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "list-presets":
            for name in list_presets():
                print(name)
            return EXIT_OK
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        if args.command == "verify":
            from .suites import SUITES

            unknown = [s for s in args.suites if s != "all" and s not in SUITES]
            if unknown:
                raise ConfigError(f"unknown suite {unknown[0]!r}; choose from {sorted(SUITES)}")
            out = Path(args.out) if args.out else None
            ok = run_verify(args.suites or ["all"], args.tolerance_profile, out, args.threads)
            return EXIT_OK if ok else EXIT_VERIFY
        cfg = load_config(args.config, args.preset)
        if args.command == "spectrum":
            run_spectrum(cfg, Path(args.out), args.threads)
        else:
            run_sweep(cfg, Path(args.out), args.threads)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, DomainError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FewModeError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
