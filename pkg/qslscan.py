"""
Quantum-speed-limit scans: multi-restart Krotov optimizations over a
descending ladder of gate durations.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ConfigurationError
from fields import RandomFieldSpec, TimeGrid, random_guess
from gates import GateTarget, embed_targets, make_gate
from models import (
    ATOM_DT_NS,
    TRANSMON_DT_NS,
    AtomArrayConfig,
    FieldConfiguration,
    TransmonPlaquetteConfig,
    build_atom_model,
    build_transmon_model,
)
from optimizer import KrotovOptions, OptimizationResult, krotov_iterate

logger = logging.getLogger(__name__)

DEFAULT_M_RANGE = {"atoms": (1, 20), "superconducting": (1, 40)}
HISTOGRAM_FLOOR = 1e-16


@dataclass
class ScanSpec:
    gate: GateTarget
    field_configuration: FieldConfiguration
    T_values: Sequence[float]
    seed: int
    atoms: Optional[AtomArrayConfig] = None
    transmons: Optional[TransmonPlaquetteConfig] = None
    restarts_per_T: int = 10
    epsilon_max: float = 1e-3
    dt: Optional[float] = None
    m_range: Optional[Tuple[int, int]] = None
    krotov: KrotovOptions = field(default_factory=KrotovOptions)
    threads: int = 1
    label: str = ""
    restart_seeds: Optional[Sequence[int]] = None

    def __post_init__(self):
        self.T_values = [float(t) for t in self.T_values]
        if not self.T_values:
            raise ConfigurationError("T_values must not be empty")
        if any(t <= 0 for t in self.T_values):
            raise ConfigurationError(f"T_values must be positive, got {self.T_values}")
        if any(b >= a for a, b in zip(self.T_values, self.T_values[1:])):
            raise ConfigurationError(f"T_values must be strictly decreasing, got {self.T_values}")
        if self.restarts_per_T < 1:
            raise ConfigurationError(f"restarts_per_T must be at least 1, got {self.restarts_per_T}")
        if (self.atoms is None) == (self.transmons is None):
            raise ConfigurationError("Exactly one of atoms / transmons must be given")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")
        if self.restart_seeds is not None:
            self.restart_seeds = [int(s) for s in self.restart_seeds]
            if len(self.restart_seeds) != self.restarts_per_T:
                raise ConfigurationError(
                    f"restart_seeds needs {self.restarts_per_T} entries, got {len(self.restart_seeds)}"
                )
        if self.platform != self.field_configuration.platform:
            raise ConfigurationError(
                f"Field configuration '{self.field_configuration.name}' does not fit platform {self.platform}"
            )

    @property
    def platform(self) -> str:
        return "atoms" if self.atoms is not None else "superconducting"

    @property
    def time_step(self) -> float:
        if self.dt is not None:
            return self.dt
        return ATOM_DT_NS if self.platform == "atoms" else TRANSMON_DT_NS

    def build(self, T: float):
        grid = TimeGrid.from_duration(T, self.time_step)
        if self.atoms is not None:
            return build_atom_model(self.atoms, self.field_configuration, grid)
        return build_transmon_model(self.transmons, self.field_configuration, grid)


@dataclass
class QslScanResult:
    label: str
    T_values: List[float]
    epsilon_max: float
    errors: np.ndarray
    iterations: np.ndarray
    T_qsl: Optional[float]
    best_results: Dict[float, OptimizationResult] = field(default_factory=dict)

    @property
    def best(self) -> np.ndarray:
        return self.errors.min(axis=1)

    @property
    def worst(self) -> np.ndarray:
        return self.errors.max(axis=1)

    @property
    def success_fraction(self) -> np.ndarray:
        return (self.errors <= self.epsilon_max).mean(axis=1)

    @property
    def found(self) -> bool:
        return self.T_qsl is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "T_values_ns": self.T_values,
            "epsilon_max": self.epsilon_max,
            "T_qsl_ns": self.T_qsl,
            "found": self.found,
            "errors": self.errors.tolist(),
            "iterations": self.iterations.tolist(),
            "best": self.best.tolist(),
            "success_fraction": self.success_fraction.tolist(),
            "best_runs": {
                str(T): r.to_dict(include_fields=True) for T, r in self.best_results.items()
            },
        }


def determine_qsl(T_values: Sequence[float], best: Sequence[float], epsilon_max: float) -> Optional[float]:
    """Walk the ladder downward; the QSL is the last success before the first all-failed T."""
    t_qsl = None
    for T, eps in zip(T_values, best):
        if eps > epsilon_max:
            break
        t_qsl = T
    return t_qsl


def _run_cell(spec: ScanSpec, T: float, restart: int, seed_seq: np.random.SeedSequence) -> OptimizationResult:
    model, templates = spec.build(T)
    targets = embed_targets(spec.gate, model)
    rng = np.random.default_rng(seed_seq)
    m_range = spec.m_range or DEFAULT_M_RANGE[spec.platform]
    guess_spec = RandomFieldSpec(m_range=m_range, seed=spec.seed)
    guesses = [random_guess(t, guess_spec, rng) for t in templates]
    opts = replace(spec.krotov, epsilon_max=spec.epsilon_max)
    result = krotov_iterate(model, guesses, targets, opts)
    logger.info("T=%.2f ns restart %d: eps=%.3e after %d iterations (%s)",
                T, restart, result.final_error, result.iterations_used, result.message)
    return result


def run_scan(spec: ScanSpec) -> QslScanResult:
    """Optimize every (T, restart) cell from fresh random guesses and report the QSL.

    Restart r uses the same seed stream at every T, so the cells are
    reproducible for a fixed seed regardless of thread count.
    `restart_seeds` replaces the streams spawned from `seed` with explicit ones.
    """
    if spec.restart_seeds is not None:
        seeds = [np.random.SeedSequence(s) for s in spec.restart_seeds]
    else:
        seeds = np.random.SeedSequence(spec.seed).spawn(spec.restarts_per_T)
    cells = [(i, T, r) for i, T in enumerate(spec.T_values) for r in range(spec.restarts_per_T)]
    logger.info("Scan %s: %d durations x %d restarts", spec.label or spec.gate.name,
                len(spec.T_values), spec.restarts_per_T)

    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            futures = [pool.submit(_run_cell, spec, T, r, seeds[r]) for _, T, r in cells]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_run_cell(spec, T, r, seeds[r]) for _, T, r in cells]

    n_T, n_r = len(spec.T_values), spec.restarts_per_T
    errors = np.empty((n_T, n_r))
    iterations = np.empty((n_T, n_r), dtype=int)
    best_results: Dict[float, OptimizationResult] = {}
    for (i, T, r), outcome in zip(cells, outcomes):
        errors[i, r] = outcome.final_error
        iterations[i, r] = outcome.iterations_used
        if T not in best_results or outcome.final_error < best_results[T].final_error:
            best_results[T] = outcome

    t_qsl = determine_qsl(spec.T_values, errors.min(axis=1), spec.epsilon_max)
    for i, T in enumerate(spec.T_values):
        logger.info("T=%.2f ns: best eps=%.3e, success %d/%d", T, errors[i].min(),
                    int((errors[i] <= spec.epsilon_max).sum()), n_r)
    if t_qsl is None:
        logger.info("Scan %s: no duration reached epsilon_max=%.1e", spec.label or spec.gate.name, spec.epsilon_max)
    else:
        logger.info("Scan %s: T_QSL = %.2f ns", spec.label or spec.gate.name, t_qsl)

    return QslScanResult(
        label=spec.label or spec.gate.name,
        T_values=list(spec.T_values),
        epsilon_max=spec.epsilon_max,
        errors=errors,
        iterations=iterations,
        T_qsl=t_qsl,
        best_results=best_results,
    )


def expand_scan_specs(
    spec: ScanSpec,
    gammas: Optional[Sequence[float]] = None,
    delta_ratios: Optional[Sequence[float]] = None,
) -> List[ScanSpec]:
    """One scan per γ of the constraint gate and/or per Δ_max/Ω_max ratio of the atom model."""
    specs = [spec]
    if gammas:
        if spec.gate.gamma is None:
            raise ConfigurationError(f"Gate {spec.gate.name} takes no gamma")
        specs = [
            replace(s, gate=make_gate(s.gate.name, g, s.gate.phase_shifted), label=f"{s.label}{';' if s.label else ''}gamma={g:.6g}")
            for s in specs for g in gammas
        ]
    if delta_ratios:
        if spec.atoms is None:
            raise ConfigurationError("delta_ratios apply to atom models only")
        specs = [
            replace(
                s,
                atoms=replace(s.atoms, delta_max=ratio * s.atoms.omega_max),
                label=f"{s.label}{';' if s.label else ''}delta_ratio={ratio:.6g}",
            )
            for s in specs for ratio in delta_ratios
        ]
    return specs


# -----------------------------
# Histogram and CSV output
# -----------------------------
@dataclass
class HistogramTable:
    label: str
    T_values: List[float]
    edges: np.ndarray
    counts: np.ndarray  # (n_T, n_bins)


def density_histogram(result: QslScanResult, bins: int = 10) -> HistogramTable:
    """Counts of final errors per T in log-spaced bins spanning whole decades."""
    if result.errors.size == 0:
        raise ConfigurationError("Cannot build a histogram of an empty scan")
    if bins < 1:
        raise ConfigurationError(f"bins must be at least 1, got {bins}")
    values = np.maximum(result.errors, HISTOGRAM_FLOOR)
    lo = int(np.floor(np.log10(values.min())))
    hi = int(np.ceil(np.log10(values.max())))
    if hi == lo:
        hi += 1
    edges = np.logspace(lo, hi, bins + 1)
    # logspace rounding must not push extreme values out of range
    edges[0] = min(edges[0], values.min())
    edges[-1] = max(edges[-1], values.max())
    counts = np.array([np.histogram(row, bins=edges)[0] for row in values])
    return HistogramTable(label=result.label, T_values=list(result.T_values), edges=edges, counts=counts)


def write_best_eps_csv(results: Union[QslScanResult, Sequence[QslScanResult]], path: Union[str, Path]) -> Path:
    results = [results] if isinstance(results, QslScanResult) else list(results)
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["label", "T_ns", "best_eps", "worst_eps", "success_fraction"])
        for result in results:
            for T, best, worst, frac in zip(result.T_values, result.best, result.worst, result.success_fraction):
                writer.writerow([result.label, f"{T:g}", f"{best:.6e}", f"{worst:.6e}", f"{frac:.4f}"])
    return path


def write_histogram_csv(tables: Union[HistogramTable, Sequence[HistogramTable]], path: Union[str, Path]) -> Path:
    tables = [tables] if isinstance(tables, HistogramTable) else list(tables)
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["label", "T_ns", "bin_lo", "bin_hi", "count"])
        for table in tables:
            for T, row in zip(table.T_values, table.counts):
                for lo, hi, count in zip(table.edges[:-1], table.edges[1:], row):
                    writer.writerow([table.label, f"{T:g}", f"{lo:.3e}", f"{hi:.3e}", int(count)])
    return path
