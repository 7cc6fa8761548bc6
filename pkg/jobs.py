"""
Job configuration, execution and result persistence.

A job is a JSON document validated by the pydantic models below. Frequencies
are entered in MHz (ordinary frequency) and times in ns; `run_job` converts
them to rad/ns, runs the job and writes its files plus a manifest.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from circuits import SweepRow, circuit_sweep, make_profile, read_sweep_csv, write_sweep_csv
from errors import ConfigurationError, UnpairedResultsError
from fields import RandomFieldSpec, TimeGrid, random_guess, write_field_csv
from gates import PARAMETRIC_GATES, embed_targets, entangling_power_estimate, entangling_power_sweep, make_gate
from models import (
    ATOM_DELTA_MAX_RATIO,
    ATOM_DT_NS,
    ATOM_OMEGA_MAX_RATIO,
    MHZ,
    TRANSMON_ALPHA_MHZ,
    TRANSMON_WINDOWS_MHZ,
    TRANSMON_DT_NS,
    AtomArrayConfig,
    TransmonPlaquetteConfig,
    auxiliary_to_lab_fields,
    build_atom_model,
    build_transmon_model,
    field_configuration,
)
from optimizer import KrotovOptions, krotov_iterate
from qslscan import (
    DEFAULT_M_RANGE,
    ScanSpec,
    density_histogram,
    expand_scan_specs,
    run_scan,
    write_best_eps_csv,
    write_histogram_csv,
)

logger = logging.getLogger(__name__)

VERSION = "1.0.0"
OUTPUT_ROOT_ENV = "QSLKIT_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"


# -----------------------------
# Configuration
# -----------------------------
class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AtomsSection(_Section):
    n_atoms: int = 2
    geometry: str = "pair"
    coupling_mode: str = "pseudo2d"
    V_mhz: float = 40.0
    omega_max_mhz: Optional[float] = None  # default 0.1·V
    delta_max_mhz: Optional[float] = None  # default 0.3·V
    global_fields: bool = True

    def to_config(self) -> AtomArrayConfig:
        omega_max = self.omega_max_mhz if self.omega_max_mhz is not None else ATOM_OMEGA_MAX_RATIO * self.V_mhz
        delta_max = self.delta_max_mhz if self.delta_max_mhz is not None else ATOM_DELTA_MAX_RATIO * self.V_mhz
        return AtomArrayConfig(
            n_atoms=self.n_atoms, geometry=self.geometry, coupling_mode=self.coupling_mode,
            V=self.V_mhz * MHZ, omega_max=omega_max * MHZ, delta_max=delta_max * MHZ,
            global_fields=self.global_fields,
        )


class TransmonsSection(_Section):
    n_transmons: int = 2
    levels_per_transmon: int = 5
    omega_windows_mhz: Optional[List[Tuple[float, float]]] = None
    alpha_mhz: Optional[List[float]] = None
    eta_mhz: float = -200.0
    g_bounds_mhz: Tuple[float, float] = (-40.0, 5.0)
    omega_rot_mhz: Optional[float] = None
    x_drive_bound_mhz: float = 50.0
    nnn_coupling: bool = False

    def to_config(self) -> TransmonPlaquetteConfig:
        n = self.n_transmons
        windows = self.omega_windows_mhz or list(TRANSMON_WINDOWS_MHZ[:n])
        alpha = self.alpha_mhz or list(TRANSMON_ALPHA_MHZ[:n])
        return TransmonPlaquetteConfig(
            n_transmons=n,
            levels_per_transmon=self.levels_per_transmon,
            omega_windows=tuple((lo * MHZ, hi * MHZ) for lo, hi in windows),
            alpha=tuple(a * MHZ for a in alpha),
            eta=self.eta_mhz * MHZ,
            g_bounds=(self.g_bounds_mhz[0] * MHZ, self.g_bounds_mhz[1] * MHZ),
            omega_rot=self.omega_rot_mhz * MHZ if self.omega_rot_mhz is not None else None,
            x_drive_bound=self.x_drive_bound_mhz * MHZ,
            nnn_coupling=self.nnn_coupling,
        )


class GateSection(_Section):
    name: str
    gamma: Optional[float] = None
    phase_shifted: bool = False


class KrotovSection(_Section):
    lambda_k: Union[None, float, Dict[str, float]] = None
    max_iterations: int = 1500
    epsilon_max: float = 1e-3
    ramp_fraction: float = 0.05
    stall_tolerance: float = 1e-10
    max_lambda_retries: int = 5
    delta_below: Optional[float] = None
    update_fraction: float = 0.05

    @field_validator("lambda_k")
    @classmethod
    def _positive_lambda(cls, value):
        values = value.values() if isinstance(value, dict) else [] if value is None else [value]
        if any(not v > 0 for v in values):
            raise ValueError(f"lambda_k must be positive, got {value}")
        return value

    def to_options(self, control_names: Optional[Sequence[str]] = None) -> KrotovOptions:
        """KrotovOptions for a model; per-field λ keys must name its controls."""
        if isinstance(self.lambda_k, dict) and control_names is not None:
            unknown = sorted(set(self.lambda_k) - set(control_names))
            if unknown:
                raise ConfigurationError(
                    f"lambda_k names unknown fields {unknown}, expected a subset of {list(control_names)}"
                )
        return KrotovOptions(**self.model_dump())


class OptimizeSection(_Section):
    T_ns: float = Field(gt=0)
    dt_ns: Optional[float] = Field(default=None, gt=0)
    m_range: Optional[Tuple[int, int]] = None


class ScanSection(_Section):
    T_values_ns: List[float]
    restarts_per_T: int = Field(default=10, ge=1)
    dt_ns: Optional[float] = Field(default=None, gt=0)
    m_range: Optional[Tuple[int, int]] = None
    gammas: Optional[List[float]] = None
    delta_ratios: Optional[List[float]] = None
    histogram_bins: int = Field(default=10, ge=1)

    @field_validator("T_values_ns")
    @classmethod
    def _descending(cls, values: List[float]) -> List[float]:
        if not values:
            raise ValueError("T_values_ns must not be empty")
        if any(b >= a for a, b in zip(values, values[1:])):
            raise ValueError(f"T_values_ns must be strictly decreasing, got {values}")
        return values


class SweepSection(_Section):
    algorithms: List[Literal["QFT", "QAOA"]] = ["QFT", "QAOA"]
    platforms: List[Literal["atoms", "superconducting"]] = ["atoms", "superconducting"]
    atoms_variant: Literal["planar2d", "pseudo2d"] = "planar2d"
    superconducting_variant: Literal["nn", "nnn"] = "nn"
    models: List[Literal["SGM", "PM"]] = ["SGM", "PM"]
    gate_sets: List[Literal["SGS", "QGS"]] = ["SGS", "QGS"]
    N_values: List[int] = [9, 16, 25]
    angles: Tuple[float, float, float] = (0.3, 0.7, float(np.pi / 4))
    hadamard_passes: int = Field(default=2, ge=1)
    time_limit_s: float = Field(default=5.0, gt=0)

    @field_validator("N_values")
    @classmethod
    def _sizes(cls, values: List[int]) -> List[int]:
        if not values or min(values) < 3:
            raise ValueError(f"N_values must be non-empty with every N >= 3, got {values}")
        return values


class EpowerSection(_Section):
    gammas: Optional[List[float]] = None
    n_samples: int = Field(default=2000, ge=1)


class ReportSection(_Section):
    sweep_csv: str


JobKind = Literal["optimize", "qsl_scan", "circuit_sweep", "entangling_power", "report"]

_REQUIRED = {
    "optimize": ("gate", "field_configuration", "optimize"),
    "qsl_scan": ("gate", "field_configuration", "scan"),
    "circuit_sweep": ("sweep",),
    "entangling_power": ("gate",),
    "report": ("report",),
}


class JobConfig(_Section):
    kind: JobKind
    seed: int = Field(ge=0, lt=2 ** 64)
    output_dir: Optional[str] = None
    threads: int = Field(default=1, ge=1)
    atoms: Optional[AtomsSection] = None
    transmons: Optional[TransmonsSection] = None
    gate: Optional[GateSection] = None
    field_configuration: Optional[str] = None
    krotov: KrotovSection = KrotovSection()
    optimize: Optional[OptimizeSection] = None
    scan: Optional[ScanSection] = None
    sweep: Optional[SweepSection] = None
    epower: Optional[EpowerSection] = None
    report: Optional[ReportSection] = None

    @model_validator(mode="after")
    def _sections_for_kind(self) -> "JobConfig":
        missing = [name for name in _REQUIRED[self.kind] if getattr(self, name) is None]
        if missing:
            raise ValueError(f"Job kind '{self.kind}' requires sections {missing}")
        if self.kind in ("optimize", "qsl_scan") and (self.atoms is None) == (self.transmons is None):
            raise ValueError(f"Job kind '{self.kind}' requires exactly one of 'atoms' / 'transmons'")
        return self


def load_config(path: Union[str, Path], **overrides) -> JobConfig:
    data = json.loads(Path(path).read_text())
    data.update({k: v for k, v in overrides.items() if v is not None})
    return JobConfig.model_validate(data)


# -----------------------------
# Manifest
# -----------------------------
class ManifestFile(BaseModel):
    name: str
    sha256: str
    bytes: int


class RunManifest(BaseModel):
    kind: str
    seed: int
    version: str = VERSION
    config: Dict[str, Any]
    started_at: str
    wall_clock_s: float
    dt_ns: Optional[float] = None
    lambdas: Dict[str, float] = {}
    files: List[ManifestFile] = []


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(data: Any, path: Path) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


@dataclass
class JobOutcome:
    out_dir: Path
    manifest: RunManifest
    result: Dict[str, Any]


def resolve_output_dir(config: JobConfig, out: Optional[Union[str, Path]] = None) -> Path:
    if out is not None:
        return Path(out)
    if config.output_dir is not None:
        return Path(config.output_dir)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT))
    return root / f"{config.kind}_{config.seed}"


# -----------------------------
# Reduction statistics
# -----------------------------
@dataclass
class ReductionRow:
    comparison: str
    algorithm: str
    platform: str
    variant: str
    held_fixed: str
    n_instances: int
    time_reduction_pct: float
    two_qubit_reduction_pct: float
    multi_qubit_reduction_pct: float


REDUCTION_COLUMNS = list(ReductionRow.__dataclass_fields__)


def _reduction(a: float, b: float) -> float:
    if a == 0 and b == 0:
        return 0.0
    if a == 0:
        return float("nan")
    return 100.0 * (1.0 - b / a)


def _mean(values: Sequence[float]) -> float:
    finite = [v for v in values if not np.isnan(v)]
    return float(np.mean(finite)) if finite else float("nan")


def report_reduction_stats(rows: Sequence[SweepRow]) -> List[ReductionRow]:
    """Average reductions SGS→QGS (per model) and SGM→PM (per gate set) over the sizes N.

    A group that contains both settings must contain them for the same N values.
    """
    comparisons = [
        ("SGS->QGS", "gateset", "SGS", "QGS", "model"),
        ("SGM->PM", "model", "SGM", "PM", "gateset"),
    ]
    table: List[ReductionRow] = []
    for label, axis, before, after, fixed_axis in comparisons:
        groups: Dict[Tuple, Dict[str, Dict[int, SweepRow]]] = {}
        for row in rows:
            key = (row.algorithm, row.platform, row.variant, getattr(row, fixed_axis))
            setting = getattr(row, axis)
            if setting in (before, after):
                groups.setdefault(key, {}).setdefault(setting, {})[row.N] = row
        for (algorithm, platform, variant, fixed), settings in sorted(groups.items()):
            if before not in settings or after not in settings:
                continue
            a_rows, b_rows = settings[before], settings[after]
            if set(a_rows) != set(b_rows):
                raise UnpairedResultsError(
                    f"{label} {algorithm}/{platform}/{fixed}: N values {sorted(a_rows)} vs {sorted(b_rows)}"
                )
            sizes = sorted(a_rows)
            table.append(ReductionRow(
                comparison=label, algorithm=algorithm, platform=platform, variant=variant,
                held_fixed=fixed, n_instances=len(sizes),
                time_reduction_pct=_mean([_reduction(a_rows[n].weighted_time, b_rows[n].weighted_time) for n in sizes]),
                two_qubit_reduction_pct=_mean([_reduction(a_rows[n].two, b_rows[n].two) for n in sizes]),
                multi_qubit_reduction_pct=_mean([_reduction(a_rows[n].multi, b_rows[n].multi) for n in sizes]),
            ))
    if not table:
        raise UnpairedResultsError("No paired sweep results to compare")
    return table


def write_reduction_csv(table: Sequence[ReductionRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    lines = [",".join(REDUCTION_COLUMNS)]
    for row in table:
        data = asdict(row)
        lines.append(",".join(f"{data[c]:.4f}" if isinstance(data[c], float) else str(data[c]) for c in REDUCTION_COLUMNS))
    path.write_text("\n".join(lines) + "\n")
    return path


def format_reduction_table(table: Sequence[ReductionRow]) -> str:
    header = f"{'comparison':<10} {'algorithm':<6} {'platform':<16} {'fixed':<5} {'time %':>8} {'2q %':>8} {'multi %':>8}"
    lines = [header]
    for r in table:
        lines.append(
            f"{r.comparison:<10} {r.algorithm:<6} {r.platform:<16} {r.held_fixed:<5} "
            f"{r.time_reduction_pct:>8.1f} {r.two_qubit_reduction_pct:>8.1f} {r.multi_qubit_reduction_pct:>8.1f}"
        )
    return "\n".join(lines)


# -----------------------------
# Job runners
# -----------------------------
def _model_sections(config: JobConfig):
    atoms = config.atoms.to_config() if config.atoms else None
    transmons = config.transmons.to_config() if config.transmons else None
    return atoms, transmons


def _run_optimize(config: JobConfig, out_dir: Path) -> Tuple[Dict[str, Any], List[Path], Dict[str, Any]]:
    atoms, transmons = _model_sections(config)
    fc = field_configuration(config.field_configuration)
    section = config.optimize
    platform = "atoms" if atoms else "superconducting"
    dt = section.dt_ns or (ATOM_DT_NS if atoms else TRANSMON_DT_NS)
    grid = TimeGrid.from_duration(section.T_ns, dt)
    if atoms:
        model, templates = build_atom_model(atoms, fc, grid)
    else:
        model, templates = build_transmon_model(transmons, fc, grid)
    gate = make_gate(config.gate.name, config.gate.gamma, config.gate.phase_shifted)
    targets = embed_targets(gate, model)
    rng = np.random.default_rng(config.seed)
    spec = RandomFieldSpec(m_range=section.m_range or DEFAULT_M_RANGE[platform], seed=config.seed)
    guesses = [random_guess(t, spec, rng) for t in templates]
    result = krotov_iterate(model, guesses, targets, config.krotov.to_options(model.control_names))

    files = [_write_json(result.to_dict(include_fields=True), out_dir / "result.json")]
    field_dir = out_dir / "fields"
    field_dir.mkdir(exist_ok=True)
    by_name = {f.name: f for f in result.fields}
    for control in result.fields:
        files.append(write_field_csv(control, field_dir / f"{control.name}.csv"))
    if transmons:
        for name in sorted(by_name):
            if name.startswith("x_re"):
                partner = by_name.get("x_im" + name[len("x_re"):])
                if partner is None:
                    continue
                for lab in auxiliary_to_lab_fields(by_name[name], partner, transmons.omega_rot):
                    files.append(write_field_csv(lab, field_dir / f"{lab.name}.csv"))
    summary = {
        "gate": gate.name,
        "T_ns": section.T_ns,
        "final_error": result.final_error,
        "converged": result.converged,
        "iterations_used": result.iterations_used,
        "leakage_ok": result.leakage_ok,
    }
    return summary, files, {"dt_ns": dt, "lambdas": result.lambdas}


def _run_qsl_scan(config: JobConfig, out_dir: Path):
    atoms, transmons = _model_sections(config)
    section = config.scan
    gate = make_gate(config.gate.name, config.gate.gamma, config.gate.phase_shifted)
    base = ScanSpec(
        gate=gate,
        field_configuration=field_configuration(config.field_configuration),
        T_values=section.T_values_ns,
        seed=config.seed,
        atoms=atoms,
        transmons=transmons,
        restarts_per_T=section.restarts_per_T,
        epsilon_max=config.krotov.epsilon_max,
        dt=section.dt_ns,
        m_range=section.m_range,
        krotov=config.krotov.to_options(),
        threads=config.threads,
        label=gate.name,
    )
    # same controls at every duration, so one model is enough to check per-field λ
    config.krotov.to_options(base.build(base.T_values[0])[0].control_names)
    specs = expand_scan_specs(base, section.gammas, section.delta_ratios)
    results = [run_scan(s) for s in specs]
    tables = [density_histogram(r, section.histogram_bins) for r in results]
    files = [
        _write_json([r.to_dict() for r in results], out_dir / "scan.json"),
        write_best_eps_csv(results, out_dir / "best_eps_vs_T.csv"),
        write_histogram_csv(tables, out_dir / "histogram.csv"),
    ]
    lambdas: Dict[str, float] = {}
    for r in results:
        for best in r.best_results.values():
            lambdas.update(best.lambdas)
            break
    summary = {"T_qsl_ns": {r.label: r.T_qsl for r in results}}
    return summary, files, {"dt_ns": base.time_step, "lambdas": lambdas}


def _run_circuit_sweep(config: JobConfig, out_dir: Path):
    section = config.sweep
    variants = {"atoms": section.atoms_variant, "superconducting": section.superconducting_variant}
    profiles = [make_profile(p, g, variants[p]) for p in section.platforms for g in section.gate_sets]
    rows = circuit_sweep(
        section.algorithms, profiles, section.models, section.N_values, seed=config.seed,
        threads=config.threads, angles=tuple(section.angles), hadamard_passes=section.hadamard_passes,
        time_limit_s=section.time_limit_s,
    )
    files = [write_sweep_csv(rows, out_dir / "sweep.csv")]
    summary: Dict[str, Any] = {"rows": len(rows)}
    try:
        table = report_reduction_stats(rows)
    except UnpairedResultsError as e:
        logger.info("No reduction table for this sweep: %s", e)
    else:
        files.append(write_reduction_csv(table, out_dir / "reduction.csv"))
        summary["reductions"] = [asdict(r) for r in table]
    return summary, files, {}


def _run_entangling_power(config: JobConfig, out_dir: Path):
    section = config.epower or EpowerSection()
    name = config.gate.name
    if section.gammas:
        if name not in PARAMETRIC_GATES:
            raise ConfigurationError(f"Gamma sweeps need a parametric gate, got {name}")
        gammas = list(section.gammas)
        estimates = entangling_power_sweep(name, gammas, section.n_samples, config.seed, config.gate.phase_shifted)
    else:
        gammas = [config.gate.gamma]
        gate = make_gate(name, config.gate.gamma, config.gate.phase_shifted)
        estimates = [entangling_power_estimate(gate, section.n_samples, config.seed)]
    path = out_dir / "epower.csv"
    lines = ["gate,gamma,mean,stderr,n_samples"]
    for gamma, est in zip(gammas, estimates):
        gamma_text = "" if gamma is None else f"{gamma:.10g}"
        lines.append(f"{name},{gamma_text},{est.mean:.10e},{est.stderr:.10e},{est.n_samples}")
    path.write_text("\n".join(lines) + "\n")
    summary = {
        "gate": name,
        "points": [{"gamma": g, "mean": e.mean, "stderr": e.stderr} for g, e in zip(gammas, estimates)],
    }
    return summary, [path], {}


def _run_report(config: JobConfig, out_dir: Path):
    rows = read_sweep_csv(config.report.sweep_csv)
    table = report_reduction_stats(rows)
    logger.info("Reduction table\n%s", format_reduction_table(table))
    files = [write_reduction_csv(table, out_dir / "reduction.csv")]
    return {"sweep_csv": config.report.sweep_csv, "reductions": [asdict(r) for r in table]}, files, {}


_RUNNERS = {
    "optimize": _run_optimize,
    "qsl_scan": _run_qsl_scan,
    "circuit_sweep": _run_circuit_sweep,
    "entangling_power": _run_entangling_power,
    "report": _run_report,
}


def run_job(config: JobConfig, out: Optional[Union[str, Path]] = None) -> JobOutcome:
    """Run one job and write its files plus `manifest.json` into the output directory."""
    out_dir = resolve_output_dir(config, out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started_at = datetime.now(timezone.utc).isoformat()
    start = time.perf_counter()
    logger.info("Starting %s job (seed %d) -> %s", config.kind, config.seed, out_dir)

    result, files, extra = _RUNNERS[config.kind](config, out_dir)

    manifest = RunManifest(
        kind=config.kind,
        seed=config.seed,
        config=config.model_dump(mode="json"),
        started_at=started_at,
        wall_clock_s=time.perf_counter() - start,
        dt_ns=extra.get("dt_ns"),
        lambdas=extra.get("lambdas", {}),
        files=[
            ManifestFile(name=str(p.relative_to(out_dir)), sha256=_sha256(p), bytes=p.stat().st_size)
            for p in files
        ],
    )
    _write_json(manifest.model_dump(mode="json"), out_dir / "manifest.json")
    logger.info("Finished %s job in %.1f s, %d files", config.kind, manifest.wall_clock_s, len(files))
    return JobOutcome(out_dir=out_dir, manifest=manifest, result=result)
