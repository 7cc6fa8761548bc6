"""
Krotov's method for gate optimization.

Each iteration propagates the co-states backward under the old fields, then
sweeps the grid forward: at step k every updatable control is shifted by

    ΔE_k = (S(t_k)/λ) · Im Σ_l ⟨χ_l(t_k)| ∂H/∂E |ψ_l(t_k)⟩

with ψ_l already propagated under the updated fields (immediate feedback).
Bounded controls are updated in the unbounded u-space and mapped back.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from dynamics import field_matrix, propagate_backward, propagate_forward, step_unitary
from errors import ConfigurationError, NumericError
from fields import ControlField, ShapeFunction, make_shape, unbounded_derivative, unbounded_to_field
from gates import TargetStateSet
from models import HamiltonianModel

logger = logging.getLogger(__name__)


@dataclass
class KrotovOptions:
    """Knobs of the Krotov loop; `lambda_k=None` auto-scales λ on the first iteration."""
    lambda_k: Union[None, float, Dict[str, float]] = None
    max_iterations: int = 1500
    epsilon_max: float = 1e-3
    ramp_fraction: float = 0.05
    shape: Optional[Dict[str, ShapeFunction]] = None
    stall_tolerance: float = 1e-10
    max_lambda_retries: int = 5
    delta_below: Optional[float] = None
    update_fraction: float = 0.05
    leakage_threshold: float = 1e-3

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigurationError(f"max_iterations must be at least 1, got {self.max_iterations}")
        if not 0.0 < self.epsilon_max < 1.0:
            raise ConfigurationError(f"epsilon_max must lie in (0, 1), got {self.epsilon_max}")
        if isinstance(self.lambda_k, dict):
            bad = {k: v for k, v in self.lambda_k.items() if not v > 0}
            if bad:
                raise ConfigurationError(f"lambda_k must be positive, got {bad}")
        elif self.lambda_k is not None and not self.lambda_k > 0:
            raise ConfigurationError(f"lambda_k must be positive, got {self.lambda_k}")
        if self.stall_tolerance < 0:
            raise ConfigurationError("stall_tolerance must be non-negative")
        if self.max_lambda_retries < 0:
            raise ConfigurationError("max_lambda_retries must be non-negative")
        if not 0.0 < self.update_fraction <= 1.0:
            raise ConfigurationError("update_fraction must lie in (0, 1]")


@dataclass
class OptimizationResult:
    fields: List[ControlField]
    error_trace: List[float]
    j_trace: List[float]
    running_cost_trace: List[float]
    converged: bool
    iterations_used: int
    lambdas: Dict[str, float]
    dt: float
    monotonic_violations: int = 0
    stalled: bool = False
    highest_level_population: Optional[float] = None
    leakage_ok: Optional[bool] = None
    message: str = ""

    @property
    def final_error(self) -> float:
        return self.error_trace[-1]

    def to_dict(self, include_fields: bool = True) -> Dict:
        data = {
            "final_error": self.final_error,
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "error_trace": self.error_trace,
            "j_trace": self.j_trace,
            "running_cost_trace": self.running_cost_trace,
            "lambdas": self.lambdas,
            "dt": self.dt,
            "monotonic_violations": self.monotonic_violations,
            "stalled": self.stalled,
            "highest_level_population": self.highest_level_population,
            "leakage_ok": self.leakage_ok,
            "message": self.message,
        }
        if include_fields:
            data["fields"] = [f.to_dict() for f in self.fields]
        return data


# -----------------------------
# Functional
# -----------------------------
def gate_error(states_at_T: Sequence[np.ndarray], targets: TargetStateSet) -> float:
    """ε_T = 1 − (1/N) Σ_l Re⟨ψ_l^trgt|ψ_l(T)⟩."""
    if len(states_at_T) != targets.n_trgt:
        raise ConfigurationError(f"Got {len(states_at_T)} states for {targets.n_trgt} targets")
    overlap = sum(np.vdot(t, s) for t, s in zip(targets.targets, states_at_T))
    return float(1.0 - overlap.real / targets.n_trgt)


def costate_boundary(targets: TargetStateSet) -> List[np.ndarray]:
    """χ_l(T) = |ψ_l^trgt⟩ / (2N)."""
    return [t / (2.0 * targets.n_trgt) for t in targets.targets]


def highest_level_population(model: HamiltonianModel, states: np.ndarray) -> float:
    """Largest population in the top level over the columns of `states`."""
    proj = model.highest_level_projector()
    return float(np.max(proj @ (np.abs(states) ** 2)))


def error_gradient(
    model: HamiltonianModel, fields: Sequence[ControlField], targets: TargetStateSet
) -> Dict[str, np.ndarray]:
    """−∂ε_T/∂E(t_k) for every control, from forward states and co-states.

    Uses the trapezoid of 2·dt·Im Σ_l⟨χ_l|∂H/∂E|ψ_l⟩ over each interval.
    """
    forward = propagate_forward(model, fields, np.column_stack(targets.initial))
    backward = propagate_backward(model, fields, np.column_stack(costate_boundary(targets)))
    samples = field_matrix(model, fields)
    grid = fields[0].grid
    gradient = {}
    for name in model.control_names:
        g = np.zeros(grid.n_steps)
        for k in range(grid.n_steps):
            values = dict(zip(model.control_names, samples[:, k]))
            left = model.derivative_overlap(name, values, backward.states[k], forward.states[k])
            right = model.derivative_overlap(name, values, backward.states[k + 1], forward.states[k + 1])
            g[k] = grid.dt * (left.imag + right.imag)
        gradient[name] = g
    return gradient


# -----------------------------
# Krotov driver
# -----------------------------
class KrotovOptimizer:
    """Single-controller Krotov loop over one model, one target set and a fixed set of fields."""

    def __init__(
        self,
        model: HamiltonianModel,
        fields: Sequence[ControlField],
        targets: TargetStateSet,
        opts: Optional[KrotovOptions] = None,
    ):
        self.model = model
        self.targets = targets
        self.opts = opts or KrotovOptions()
        by_name = {f.name: f for f in fields}
        missing = [name for name in model.control_names if name not in by_name]
        if missing:
            raise ConfigurationError(f"Missing control fields: {missing}")
        self.fields = [by_name[name].copy() for name in model.control_names]
        self.grid = self.fields[0].grid
        self.dt = self.grid.dt
        self.names = list(model.control_names)
        self.optimized = [j for j, f in enumerate(self.fields) if f.updatable.any()]
        self.shapes = self._shapes()
        self.psi0 = np.column_stack(targets.initial)
        self.chiT = np.column_stack(costate_boundary(targets))

    def _shapes(self) -> Dict[int, np.ndarray]:
        shapes = {}
        default = make_shape(self.grid, self.opts.ramp_fraction).values
        for j in self.optimized:
            f = self.fields[j]
            custom = (self.opts.shape or {}).get(f.name)
            values = default if custom is None else custom.values
            shapes[j] = np.where(f.updatable, values, 0.0)
        return shapes

    # ----- Utilities -----
    def _gradient(self, j: int, values: Dict[str, float], chi: np.ndarray, psi: np.ndarray, x: float) -> float:
        """Im Σ⟨χ|∂H/∂x|ψ⟩ in the parametrization the update runs in (u for bounded fields)."""
        g = self.model.derivative_overlap(self.names[j], values, chi, psi).imag
        bounds = self.fields[j].bounds
        if bounds is not None:
            g *= float(unbounded_derivative(x, bounds))
        return g

    def _to_x(self, j: int, value: float) -> float:
        bounds = self.fields[j].bounds
        if bounds is None:
            return value
        lo, hi = bounds
        # samples resting on a bound are nudged inside before mapping to u
        inner = min(max(value, lo + 1e-12 * (hi - lo)), hi - 1e-12 * (hi - lo))
        return float(np.arctanh((2.0 * inner - hi - lo) / (hi - lo)))

    def _from_x(self, j: int, x: float) -> float:
        bounds = self.fields[j].bounds
        return x if bounds is None else unbounded_to_field(x, bounds)

    def _auto_lambdas(self, samples: np.ndarray, chi_states: np.ndarray) -> Dict[int, float]:
        """λ such that the first-order update peaks at update_fraction of each field's range."""
        forward = propagate_forward(self.model, self.fields, self.psi0)
        peak = {j: 0.0 for j in self.optimized}
        for k in range(self.grid.n_steps):
            values = dict(zip(self.names, samples[:, k]))
            for j in self.optimized:
                if self.shapes[j][k] == 0.0:
                    continue
                x = self._to_x(j, samples[j, k])
                g = self._gradient(j, values, chi_states[k], forward.states[k], x)
                delta = self.shapes[j][k] * g
                bounds = self.fields[j].bounds
                if bounds is not None:
                    delta *= float(unbounded_derivative(x, bounds))
                peak[j] = max(peak[j], abs(delta))
        lambdas = {}
        for j, p in peak.items():
            target = self.opts.update_fraction * self.fields[j].value_range
            lambdas[j] = p / target if p > 0 else 1.0
        return lambdas

    def _initial_lambdas(self, samples: np.ndarray, chi_states: np.ndarray) -> Dict[int, float]:
        lam = self.opts.lambda_k
        if lam is None:
            return self._auto_lambdas(samples, chi_states)
        if isinstance(lam, dict):
            missing = [self.names[j] for j in self.optimized if self.names[j] not in lam]
            if missing:
                raise ConfigurationError(f"lambda_k missing for optimized fields {missing}")
            return {j: float(lam[self.names[j]]) for j in self.optimized}
        return {j: float(lam) for j in self.optimized}

    def _sweep(self, samples: np.ndarray, chi_states: np.ndarray, lambdas: Dict[int, float]):
        """One forward update sweep; returns (new samples, final states, running cost)."""
        new = samples.copy()
        psi = self.psi0.copy()
        running_cost = 0.0
        for k in range(self.grid.n_steps):
            values = dict(zip(self.names, samples[:, k]))
            chi = chi_states[k]
            for j in self.optimized:
                s = self.shapes[j][k]
                if s == 0.0:
                    continue
                x = self._to_x(j, samples[j, k])
                g = self._gradient(j, values, chi, psi, x)
                dx = s / lambdas[j] * g
                new[j, k] = self._from_x(j, x + dx)
                running_cost += lambdas[j] / s * dx * dx * self.dt
            U = step_unitary(self.model.hamiltonian(dict(zip(self.names, new[:, k]))), self.dt)
            psi = U @ psi
        if not np.all(np.isfinite(psi)):
            raise NumericError("Krotov sweep produced non-finite states")
        return new, psi, running_cost

    def _result_fields(self, samples: np.ndarray) -> List[ControlField]:
        return [f.with_values(samples[j]) for j, f in enumerate(self.fields)]

    def run(self) -> OptimizationResult:
        opts = self.opts
        samples = field_matrix(self.model, self.fields)
        psi_T = propagate_forward(self.model, self.fields, self.psi0).final
        error = gate_error([psi_T[:, l] for l in range(psi_T.shape[1])], self.targets)
        errors, j_trace, costs = [error], [error], [0.0]
        lambdas: Dict[int, float] = {}
        violations = 0
        converged = error <= opts.epsilon_max
        stalled = False
        message = "guess already below epsilon_max" if converged else ""
        iteration = 0

        while not converged and iteration < opts.max_iterations:
            fields_now = self._result_fields(samples)
            chi_states = propagate_backward(self.model, fields_now, self.chiT).states
            if not lambdas:
                self.fields = fields_now
                lambdas = self._initial_lambdas(samples, chi_states)
                logger.debug("Initial lambdas: %s", {self.names[j]: lam for j, lam in lambdas.items()})

            for attempt in range(opts.max_lambda_retries + 1):
                new, final, cost = self._sweep(samples, chi_states, lambdas)
                new_error = gate_error([final[:, l] for l in range(final.shape[1])], self.targets)
                if new_error + cost <= error + opts.stall_tolerance:
                    break
                violations += 1
                logger.warning(
                    "Iteration %d not monotonic (J=%.3e > %.3e), doubling lambda (retry %d/%d)",
                    iteration + 1, new_error + cost, error, attempt + 1, opts.max_lambda_retries,
                )
                lambdas = {j: 2.0 * lam for j, lam in lambdas.items()}
            else:
                stalled = True
                message = "lambda retries exhausted"
                break

            iteration += 1
            improvement = error - new_error
            samples, error = new, new_error
            errors.append(error)
            j_trace.append(error + cost)
            costs.append(cost)
            logger.debug("Iteration %d: eps=%.6e running_cost=%.3e", iteration, error, cost)

            if error <= opts.epsilon_max:
                converged = True
                message = "epsilon_max reached"
            elif opts.delta_below is not None and 0.0 <= improvement < opts.delta_below:
                stalled = True
                message = "improvement below delta_below"
                break

        if not converged and not message:
            message = "max_iterations reached"

        result_fields = self._result_fields(samples)
        population = leakage_ok = None
        if self.model.platform == "superconducting":
            final = propagate_forward(self.model, result_fields, self.psi0).final
            population = highest_level_population(self.model, final)
            leakage_ok = population <= opts.leakage_threshold
            if not leakage_ok:
                logger.warning("Highest-level population %.3e above %.1e", population, opts.leakage_threshold)

        return OptimizationResult(
            fields=result_fields,
            error_trace=errors,
            j_trace=j_trace,
            running_cost_trace=costs,
            converged=converged,
            iterations_used=iteration,
            lambdas={self.names[j]: lam for j, lam in lambdas.items()},
            dt=self.dt,
            monotonic_violations=violations,
            stalled=stalled,
            highest_level_population=population,
            leakage_ok=leakage_ok,
            message=message,
        )


def krotov_iterate(
    model: HamiltonianModel,
    fields: Sequence[ControlField],
    targets: TargetStateSet,
    opts: Optional[KrotovOptions] = None,
) -> OptimizationResult:
    return KrotovOptimizer(model, fields, targets, opts).run()
