"""Configuration files, snapshot/timeseries serialization, run outputs.

Configs are sectioned key=value text (INI) with a fixed schema; unknown
sections or keys are rejected so typos cannot silently fall back to
defaults.  Every key has a default, so even an empty file is a valid
configuration.  Floats are written with `repr`, which round-trips bit
exactly, making save -> load the identity and reruns byte-identical.

Snapshots come in two flavours: CSV (one row per cell, the bit-exact
archival format) and legacy-VTK structured points (ASCII, for viewers).
The output directory can be redirected with the CHBSIM_OUTPUT_ROOT
environment variable and is protected by a lock sentinel per run.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Grid, State, face_to_center, make_grid
from .constitutive import (
    CoefficientSpec,
    EdgeValues,
    MobilityViscositySpec,
    ModelParams,
    ModelSpec,
    PotentialSpec,
    SourceSpec,
    validate_params,
)
from .timestepper import (
    ROW_FIELDS,
    RunResult,
    SchemeOptions,
    SimSpec,
    StepFailure,
    initial_state,
    run,
)


class ConfigError(ValueError):
    """Invalid configuration; `errors` lists every individual problem."""

    def __init__(self, errors: list[str]) -> None:
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))
        self.errors = errors


# ---------------------------------------------------------------------------
# RunConfig
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    # [domain]
    lx: float = 1.0
    ly: float = 1.0
    nx: int = 64
    ny: int = 64
    # [time]
    dt: float = 1e-3
    t_end: float = 1e-2
    snapshot_every: int = 0
    # [model]
    epsilon: float = 0.1
    chi_sigma: float = 1.0
    chi_phi: float = 0.0
    nu: float = 1.0
    b: float = 0.0
    sigma_inf: tuple = (1.0, 1.0, 1.0, 1.0)   # left right bottom top
    # [constitutive]
    potential: str = "quartic"
    delta_cap: float = 0.2
    mobility: tuple = (1.0, 1.0)              # lo hi
    nutrient_mobility: tuple = (1.0, 1.0)
    viscosity: tuple = (1.0, 1.0)
    bulk_viscosity: tuple = (0.0, 0.0)
    source: str = "none"
    source_P: float = 0.0
    source_A: float = 0.0
    source_C: float = 0.0
    source_p0: float = 0.0
    source_rho_min: float = 1e-3
    c_gamma_v: float = 0.0
    gamma0: float | None = None
    # [solver]
    phase_tol: float = 1e-12
    nutrient_tol: float = 1e-12
    flow_tol: float = 1e-11
    max_iters: int = 40000
    stabilization_s: float = 2.0
    flow: bool = True
    # [init]
    phi0: str = "uniform"
    phi0_value: float = 0.0
    phi0_center: tuple = (0.5, 0.5)
    phi0_radius: float = 0.25
    phi0_amplitude: float = 0.0
    phi0_modes: tuple = ((1, 0), (0, 1))
    sigma0: str = "uniform"
    sigma0_value: float = 1.0
    sigma0_amplitude: float = 0.0
    sigma0_modes: tuple = ((1, 1),)
    # [output]
    directory: str = "run"
    formats: tuple = ("csv",)

    # -- assembly into model objects ------------------------------------

    def grid(self) -> Grid:
        return make_grid(self.lx, self.ly, self.nx, self.ny)

    def model_params(self) -> ModelParams:
        l, r, bo, t = self.sigma_inf
        return ModelParams(epsilon=self.epsilon, chi_sigma=self.chi_sigma,
                           chi_phi=self.chi_phi, nu=self.nu, b=self.b,
                           sigma_inf=EdgeValues(l, r, bo, t))

    def potential_spec(self) -> PotentialSpec:
        if self.potential == "quartic":
            return PotentialSpec.quartic()
        return PotentialSpec.quadratic_growth(self.delta_cap)

    def mobvis_spec(self) -> MobilityViscositySpec:
        pair = lambda t: CoefficientSpec(t[0], t[1])
        return MobilityViscositySpec(m=pair(self.mobility),
                                     n=pair(self.nutrient_mobility),
                                     eta=pair(self.viscosity),
                                     lam=pair(self.bulk_viscosity))

    def source_spec(self) -> SourceSpec:
        kind = self.source
        if kind == "none":
            return SourceSpec.none()
        if kind == "lima":
            return SourceSpec.lima(self.source_P, self.source_A, self.source_C,
                                   self.c_gamma_v, self.gamma0)
        if kind == "hawkins":
            return SourceSpec.hawkins(self.source_p0, self.c_gamma_v, self.gamma0)
        return SourceSpec.hawkins_positive(self.source_p0, self.source_rho_min,
                                           self.c_gamma_v, self.gamma0)

    def model_spec(self) -> ModelSpec:
        return ModelSpec(grid=self.grid(), params=self.model_params(),
                         potential=self.potential_spec(),
                         mobvis=self.mobvis_spec(), source=self.source_spec())

    def scheme(self) -> SchemeOptions:
        return SchemeOptions(dt=self.dt, s=self.stabilization_s, flow=self.flow,
                             phase_tol=self.phase_tol,
                             nutrient_tol=self.nutrient_tol,
                             flow_tol=self.flow_tol, max_iters=self.max_iters,
                             snapshot_every=self.snapshot_every)

    def sim_spec(self) -> SimSpec:
        return SimSpec(model=self.model_spec(), scheme=self.scheme())

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def initial_fields(self) -> tuple[np.ndarray, np.ndarray]:
        g = self.grid()
        x, y = g.cell_centers()

        def mix(modes):
            out = np.zeros(g.shape)
            for i, j in modes:
                out += (np.cos(i * np.pi * x / g.Lx)
                        * np.cos(j * np.pi * y / g.Ly))
            return out

        if self.phi0 == "uniform":
            phi = np.full(g.shape, self.phi0_value)
        elif self.phi0 == "tanh_disc":
            cx, cy = self.phi0_center
            dist = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
            phi = np.tanh((self.phi0_radius - dist)
                          / (np.sqrt(2.0) * self.epsilon))
        else:  # cosine_perturbation
            phi = self.phi0_value + self.phi0_amplitude * mix(self.phi0_modes)

        if self.sigma0 == "uniform":
            sigma = np.full(g.shape, self.sigma0_value)
        else:  # cosine
            sigma = self.sigma0_value + self.sigma0_amplitude * mix(self.sigma0_modes)
        return phi, sigma

    def initial_state(self) -> State:
        phi, sigma = self.initial_fields()
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(sigma))):
            raise ConfigError(["initial fields contain non-finite values"])
        return initial_state(phi, sigma, self.model_spec())


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _pairs(text: str) -> tuple:
    out = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        i, j = chunk.split()
        out.append((int(i), int(j)))
    return tuple(out)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _bounds(text: str) -> tuple:
    vals = _floats(text)
    if len(vals) == 1:
        return (vals[0], vals[0])
    if len(vals) == 2:
        return (vals[0], vals[1])
    raise ValueError("expected one value or a lo hi pair")


def _edges(text: str) -> tuple:
    vals = _floats(text)
    if len(vals) == 1:
        return (vals[0],) * 4
    if len(vals) == 4:
        return tuple(vals)
    raise ValueError("expected one value or four (left right bottom top)")


def _center(text: str) -> tuple:
    vals = _floats(text)
    if len(vals) != 2:
        raise ValueError("expected two coordinates")
    return (vals[0], vals[1])


def _formats(text: str) -> tuple:
    fmts = tuple(tok.strip() for tok in text.split(",") if tok.strip())
    for f in fmts:
        if f not in ("csv", "vtk"):
            raise ValueError(f"unknown snapshot format {f!r} (csv or vtk)")
    return fmts


def _opt_float(text: str) -> float | None:
    return None if not text.strip() else float(text)


def _fmt_floats(vals) -> str:
    return " ".join(repr(float(v)) for v in vals)


def _fmt_pairs(pairs) -> str:
    return ", ".join(f"{i} {j}" for i, j in pairs)


# section -> key -> (attribute, parser, formatter)
_SCHEMA = {
    "domain": {
        "lx": ("lx", float, repr),
        "ly": ("ly", float, repr),
        "nx": ("nx", int, str),
        "ny": ("ny", int, str),
    },
    "time": {
        "dt": ("dt", float, repr),
        "t_end": ("t_end", float, repr),
        "snapshot_every": ("snapshot_every", int, str),
    },
    "model": {
        "epsilon": ("epsilon", float, repr),
        "chi_sigma": ("chi_sigma", float, repr),
        "chi_phi": ("chi_phi", float, repr),
        "nu": ("nu", float, repr),
        "b": ("b", float, repr),
        "sigma_inf": ("sigma_inf", _edges, _fmt_floats),
    },
    "constitutive": {
        "potential": ("potential", str.strip, str),
        "delta_cap": ("delta_cap", float, repr),
        "mobility": ("mobility", _bounds, _fmt_floats),
        "nutrient_mobility": ("nutrient_mobility", _bounds, _fmt_floats),
        "viscosity": ("viscosity", _bounds, _fmt_floats),
        "bulk_viscosity": ("bulk_viscosity", _bounds, _fmt_floats),
        "source": ("source", str.strip, str),
        "source_p": ("source_P", float, repr),
        "source_a": ("source_A", float, repr),
        "source_c": ("source_C", float, repr),
        "source_p0": ("source_p0", float, repr),
        "source_rho_min": ("source_rho_min", float, repr),
        "c_gamma_v": ("c_gamma_v", float, repr),
        "gamma0": ("gamma0", _opt_float,
                   lambda v: "" if v is None else repr(v)),
    },
    "solver": {
        "phase_tol": ("phase_tol", float, repr),
        "nutrient_tol": ("nutrient_tol", float, repr),
        "flow_tol": ("flow_tol", float, repr),
        "max_iters": ("max_iters", int, str),
        "stabilization_s": ("stabilization_s", float, repr),
        "flow": ("flow", _bool, lambda v: "on" if v else "off"),
    },
    "init": {
        "phi0": ("phi0", str.strip, str),
        "phi0_value": ("phi0_value", float, repr),
        "phi0_center": ("phi0_center", _center, _fmt_floats),
        "phi0_radius": ("phi0_radius", float, repr),
        "phi0_amplitude": ("phi0_amplitude", float, repr),
        "phi0_modes": ("phi0_modes", _pairs, _fmt_pairs),
        "sigma0": ("sigma0", str.strip, str),
        "sigma0_value": ("sigma0_value", float, repr),
        "sigma0_amplitude": ("sigma0_amplitude", float, repr),
        "sigma0_modes": ("sigma0_modes", _pairs, _fmt_pairs),
    },
    "output": {
        "directory": ("directory", str.strip, str),
        "formats": ("formats", _formats, lambda v: ", ".join(v)),
    },
}

_CHOICES = {
    "potential": ("quartic", "quadratic_growth"),
    "source": ("none", "lima", "hawkins", "hawkins_positive"),
    "phi0": ("uniform", "tanh_disc", "cosine_perturbation"),
    "sigma0": ("uniform", "cosine"),
}


def load_config(path: str | Path) -> RunConfig:
    """Parse, fill defaults, reject unknown keys, validate everything."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#", ";"))
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh, source=str(path))

    errors: list[str] = []
    values: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            entry = _SCHEMA[section].get(key)
            if entry is None:
                errors.append(f"unknown key {key!r} in section [{section}]")
                continue
            attr, parse, _ = entry
            try:
                values[attr] = parse(raw)
            except ValueError as exc:
                errors.append(f"[{section}] {key}: {exc}")
    if errors:
        raise ConfigError(errors)

    cfg = RunConfig(**values)
    errors.extend(_semantic_errors(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def _semantic_errors(cfg: RunConfig) -> list[str]:
    errors: list[str] = []
    for name, choices in _CHOICES.items():
        if getattr(cfg, name) not in choices:
            errors.append(f"{name} must be one of {choices}, "
                          f"got {getattr(cfg, name)!r}")
    if cfg.dt <= 0.0:
        errors.append(f"dt must be positive, got {cfg.dt}")
    if cfg.t_end < cfg.dt:
        errors.append(f"t_end={cfg.t_end} is shorter than one step dt={cfg.dt}")
    if cfg.snapshot_every < 0:
        errors.append("snapshot_every must be >= 0")
    if not cfg.formats:
        errors.append("need at least one output format")
    try:
        cfg.grid()
    except ValueError as exc:
        errors.append(str(exc))
    if errors:
        return errors
    try:
        report = validate_params(cfg.model_params(), cfg.potential_spec(),
                                 cfg.mobvis_spec(), cfg.source_spec())
    except ValueError as exc:
        return [str(exc)]
    for check in report.failures():
        errors.append(f"assumption check {check.name!r} failed: {check.detail}")
    return errors


def save_config(cfg: RunConfig, path: str | Path) -> None:
    """Write the full canonical file; load(save(cfg)) == cfg."""
    lines = []
    for section, entries in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (attr, _, fmt) in entries.items():
            lines.append(f"{key} = {fmt(getattr(cfg, attr))}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------

SNAPSHOT_FIELDS = ("phi", "mu", "sigma", "p", "vx", "vy")
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class SnapshotHeader:
    time: float
    lx: float
    ly: float
    nx: int
    ny: int
    fields: tuple = SNAPSHOT_FIELDS
    version: int = SNAPSHOT_VERSION


def _snapshot_columns(state: State, grid: Grid) -> dict:
    vx, vy = face_to_center(state.v)
    return {"phi": state.phi, "mu": state.mu, "sigma": state.sigma,
            "p": state.p, "vx": vx, "vy": vy}


def write_snapshot(state: State, grid: Grid, path: str | Path,
                   fmt: str = "csv") -> SnapshotHeader:
    header = SnapshotHeader(time=state.t, lx=grid.Lx, ly=grid.Ly,
                            nx=grid.nx, ny=grid.ny)
    cols = _snapshot_columns(state, grid)
    if fmt == "csv":
        _write_snapshot_csv(header, cols, grid, Path(path))
    elif fmt == "vtk":
        _write_snapshot_vtk(header, cols, grid, Path(path))
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}")
    return header


def _write_snapshot_csv(header: SnapshotHeader, cols: dict, grid: Grid,
                        path: Path) -> None:
    x, y = grid.cell_centers()
    lines = [
        f"# chbsim-snapshot {header.version}",
        f"# t = {float(header.time)!r}",
        f"# grid = {float(header.lx)!r} {float(header.ly)!r} {header.nx} {header.ny}",
        "# fields = " + " ".join(header.fields),
        "i,j,x,y," + ",".join(header.fields),
    ]
    data = [cols[name] for name in header.fields]
    for i in range(grid.nx):
        for j in range(grid.ny):
            vals = ",".join(repr(float(d[i, j])) for d in data)
            lines.append(f"{i},{j},{float(x[i, j])!r},{float(y[i, j])!r},{vals}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_snapshot(path: str | Path) -> tuple[SnapshotHeader, dict]:
    """Read a CSV snapshot back; values reproduce the written fields bit-exactly."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("# chbsim-snapshot"):
        raise ValueError(f"{path}: not a snapshot file")
    version = int(text[0].split()[-1])
    time = float(text[1].split("=", 1)[1])
    gl, gly, gnx, gny = text[2].split("=", 1)[1].split()
    fields = tuple(text[3].split("=", 1)[1].split())
    header = SnapshotHeader(time=time, lx=float(gl), ly=float(gly),
                            nx=int(gnx), ny=int(gny), fields=fields,
                            version=version)
    arrays = {name: np.empty((header.nx, header.ny)) for name in fields}
    for line in text[5:]:
        if not line.strip():
            continue
        toks = line.split(",")
        i, j = int(toks[0]), int(toks[1])
        for name, tok in zip(fields, toks[4:]):
            arrays[name][i, j] = float(tok)
    return header, arrays


def _write_snapshot_vtk(header: SnapshotHeader, cols: dict, grid: Grid,
                        path: Path) -> None:
    lines = [
        "# vtk DataFile Version 3.0",
        f"chbsim snapshot t={float(header.time)!r} v{header.version}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {float(grid.hx)!r} {float(grid.hy)!r} 1.0",
        f"CELL_DATA {grid.nx * grid.ny}",
    ]
    for name in header.fields:
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        # VTK cell order: x varies fastest
        flat = cols[name].flatten(order="F")
        lines.extend(repr(float(v)) for v in flat)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Time series
# ---------------------------------------------------------------------------

def write_timeseries(rows: list, path: str | Path) -> None:
    """CSV with exactly the 16 canonical diagnostic columns."""
    lines = [",".join(ROW_FIELDS)]
    for row in rows:
        cells = []
        for name in ROW_FIELDS:
            v = row[name]
            cells.append(str(v) if isinstance(v, (int, np.integer))
                         else repr(float(v)))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_timeseries(path: str | Path) -> list:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    names = text[0].split(",")
    rows = []
    for line in text[1:]:
        if not line.strip():
            continue
        toks = line.split(",")
        row = {}
        for name, tok in zip(names, toks):
            row[name] = int(tok) if name == "cg_iters_total" else float(tok)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Output directories and the run driver
# ---------------------------------------------------------------------------

OUTPUT_ROOT_ENV = "CHBSIM_OUTPUT_ROOT"


def resolve_output_dir(directory: str | Path) -> Path:
    """Relative output paths land under $CHBSIM_OUTPUT_ROOT when it is set."""
    p = Path(directory)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        p = Path(root) / p
    return p


class OutputLock:
    """Exclusive lock sentinel: one live run per output directory."""

    def __init__(self, directory: Path) -> None:
        self.path = directory / "run.lock"

    def __enter__(self) -> "OutputLock":
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RuntimeError(
                f"output directory {self.path.parent} is locked by another "
                f"run (remove {self.path.name} if that run is dead)") from None
        os.close(fd)
        return self

    def __exit__(self, *exc) -> None:
        try:
            os.unlink(self.path)
        except FileNotFoundError:
            pass


def _write_outputs(result: RunResult, cfg: RunConfig, outdir: Path) -> None:
    grid = cfg.grid()
    write_timeseries(result.rows, outdir / "timeseries.csv")
    for state in result.states:
        step = int(round(state.t / cfg.dt))
        for fmt in cfg.formats:
            write_snapshot(state, grid, outdir / f"snap_{step:06d}.{fmt}", fmt)


def run_from_config(cfg: RunConfig) -> tuple[RunResult, Path]:
    """Full simulation with all outputs; partial outputs survive a failed step."""
    outdir = resolve_output_dir(cfg.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    with OutputLock(outdir):
        save_config(cfg, outdir / "config.ini")
        state0 = cfg.initial_state()
        specs = cfg.sim_spec()
        try:
            result = run(state0, cfg.n_steps, specs)
        except StepFailure as exc:
            if exc.partial is not None:
                _write_outputs(exc.partial, cfg, outdir)
            raise
        _write_outputs(result, cfg, outdir)
    return result, outdir
