from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from errors import ConfigurationError, FieldDomainError

logger = logging.getLogger(__name__)

Bounds = Tuple[float, float]

# -----------------------------
# Time grid
# -----------------------------
@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [t0, t1] (ns); control samples sit at interval midpoints."""
    t0: float
    t1: float
    n_steps: int

    def __post_init__(self):
        if not np.isfinite(self.t0) or not np.isfinite(self.t1):
            raise ConfigurationError("Time grid bounds must be finite")
        if self.t1 <= self.t0:
            raise ConfigurationError(f"Invalid time grid: t1={self.t1} <= t0={self.t0}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigurationError(f"Invalid number of time steps: {self.n_steps}")

    @classmethod
    def from_duration(cls, duration: float, dt: float, t0: float = 0.0) -> "TimeGrid":
        """Grid of length `duration` whose step is as close to `dt` as the duration allows."""
        if dt <= 0:
            raise ConfigurationError(f"Invalid time step dt={dt}")
        n_steps = max(1, int(round(duration / dt)))
        return cls(t0, t0 + duration, n_steps)

    @property
    def duration(self) -> float:
        return self.t1 - self.t0

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.n_steps

    @property
    def midpoints(self) -> np.ndarray:
        return self.t0 + (np.arange(self.n_steps) + 0.5) * self.dt

    @property
    def boundaries(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_steps + 1) * self.dt


# -----------------------------
# Control fields
# -----------------------------
class FieldRole(str, Enum):
    RABI_AMPLITUDE = "rabi_amplitude"
    LASER_PHASE = "laser_phase"
    DETUNING = "detuning"
    QUBIT_FREQUENCY = "qubit_frequency"
    COUPLING = "coupling"
    X_DRIVE_RE = "x_drive_re"
    X_DRIVE_IM = "x_drive_im"
    DRIVE_AMPLITUDE = "drive_amplitude"
    DRIVE_FREQUENCY = "drive_frequency"


@dataclass
class ControlField:
    """Piecewise-constant control on a TimeGrid.

    Angular frequencies are in rad/ns, phases in rad. Samples where `active`
    is False are held at their current value and never optimized.
    """
    name: str
    role: FieldRole
    grid: TimeGrid
    values: np.ndarray
    bounds: Optional[Bounds] = None
    frozen: bool = False
    active: Optional[np.ndarray] = None

    def __post_init__(self):
        self.role = FieldRole(self.role)
        self.values = np.array(self.values, dtype=float).reshape(-1)
        if self.values.shape[0] != self.grid.n_steps:
            raise ConfigurationError(
                f"Field {self.name} has {self.values.shape[0]} samples, grid has {self.grid.n_steps}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError(f"Field {self.name} contains non-finite values")
        if self.bounds is not None:
            lo, hi = float(self.bounds[0]), float(self.bounds[1])
            if not lo < hi:
                raise ConfigurationError(f"Invalid bounds for field {self.name}: {self.bounds}")
            self.bounds = (lo, hi)
            if np.any(self.values < lo) or np.any(self.values > hi):
                raise ConfigurationError(f"Field {self.name} violates its bounds {self.bounds}")
        if self.active is not None:
            self.active = np.array(self.active, dtype=bool).reshape(-1)
            if self.active.shape[0] != self.grid.n_steps:
                raise ConfigurationError(f"Active mask of field {self.name} does not match its grid")

    @property
    def is_bounded(self) -> bool:
        return self.bounds is not None

    @property
    def updatable(self) -> np.ndarray:
        """Per-sample mask of values the optimizer may change."""
        if self.frozen:
            return np.zeros(self.grid.n_steps, dtype=bool)
        if self.active is None:
            return np.ones(self.grid.n_steps, dtype=bool)
        return self.active.copy()

    @property
    def value_range(self) -> float:
        """Natural scale of the field: bound width, or 2π for unbounded phases."""
        if self.bounds is not None:
            return self.bounds[1] - self.bounds[0]
        return 2.0 * np.pi

    def with_values(self, values: np.ndarray) -> "ControlField":
        return replace(self, values=np.array(values, dtype=float),
                       active=None if self.active is None else self.active.copy())

    def copy(self) -> "ControlField":
        return self.with_values(self.values)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "role": self.role.value,
            "t0": self.grid.t0,
            "t1": self.grid.t1,
            "n_steps": self.grid.n_steps,
            "bounds": list(self.bounds) if self.bounds is not None else None,
            "frozen": self.frozen,
            "values": [float(v) for v in self.values],
        }


def write_field_csv(control: ControlField, path: Union[str, Path]) -> Path:
    """Write a field as `t,value` rows at the sample midpoints."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t", "value"])
        for t, v in zip(control.grid.midpoints, control.values):
            writer.writerow([f"{t:.12e}", f"{v:.12e}"])
    return path


# -----------------------------
# Bounded parametrization
# -----------------------------
def _check_bounds(bounds: Bounds) -> Tuple[float, float]:
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo < hi:
        raise ConfigurationError(f"Invalid bounds {bounds}: min must be smaller than max")
    return lo, hi


def field_to_unbounded(value, bounds: Bounds):
    """Map a value strictly inside (min, max) to the unbounded u-space."""
    lo, hi = _check_bounds(bounds)
    x = np.asarray(value, dtype=float)
    if np.any(x <= lo) or np.any(x >= hi):
        raise FieldDomainError(f"Value(s) {value} not strictly inside bounds ({lo}, {hi})")
    u = np.arctanh((2.0 * x - hi - lo) / (hi - lo))
    return float(u) if np.ndim(u) == 0 else u


def unbounded_to_field(u, bounds: Bounds):
    """Inverse of field_to_unbounded; the image always lies strictly inside the bounds."""
    lo, hi = _check_bounds(bounds)
    x = 0.5 * (hi - lo) * np.tanh(np.asarray(u, dtype=float)) + 0.5 * (hi + lo)
    # tanh saturates to ±1 in double precision for |u| ≳ 19
    x = np.clip(x, np.nextafter(lo, hi), np.nextafter(hi, lo))
    return float(x) if np.ndim(x) == 0 else x


def unbounded_derivative(u, bounds: Bounds):
    """dE/du of the bounded parametrization."""
    lo, hi = _check_bounds(bounds)
    return 0.5 * (hi - lo) * (1.0 - np.tanh(np.asarray(u, dtype=float)) ** 2)


# -----------------------------
# Shape functions
# -----------------------------
@dataclass(frozen=True)
class ShapeFunction:
    grid: TimeGrid
    ramp_fraction: float
    values: np.ndarray = field(repr=False)


def make_shape(grid: TimeGrid, ramp_fraction: float = 0.05) -> ShapeFunction:
    """Flat-top update shape with sin² ramps of length ramp_fraction·(t1−t0) at each end."""
    if not 0.0 <= ramp_fraction < 0.5:
        raise ConfigurationError(f"ramp_fraction must lie in [0, 0.5), got {ramp_fraction}")
    t = grid.midpoints
    values = np.ones(grid.n_steps)
    if ramp_fraction > 0:
        t_ramp = ramp_fraction * grid.duration
        rise = t - grid.t0 < t_ramp
        fall = grid.t1 - t < t_ramp
        values[rise] = np.sin(0.5 * np.pi * (t[rise] - grid.t0) / t_ramp) ** 2
        values[fall] = np.minimum(values[fall], np.sin(0.5 * np.pi * (grid.t1 - t[fall]) / t_ramp) ** 2)
    return ShapeFunction(grid=grid, ramp_fraction=ramp_fraction, values=values)


# -----------------------------
# Random guess fields
# -----------------------------
@dataclass(frozen=True)
class RandomFieldSpec:
    m_range: Tuple[int, int]
    seed: int
    scale: Optional[float] = None

    def __post_init__(self):
        lo, hi = self.m_range
        if int(lo) != lo or int(hi) != hi or lo < 1 or hi < lo:
            raise ConfigurationError(f"Invalid m_range {self.m_range}: need integers 1 <= min <= max")


@dataclass(frozen=True)
class RandomFourierSeries:
    """f(t) = a0 + √2 Σ_j [a_j cos(2πjt/(t1−t0)) + b_j sin(2πjt/(t1−t0))]."""
    a0: float
    a: np.ndarray
    b: np.ndarray
    t0: float
    t1: float

    @property
    def m(self) -> int:
        return len(self.a)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        j = np.arange(1, self.m + 1)
        phase = 2.0 * np.pi * np.multiply.outer(t, j) / (self.t1 - self.t0)
        return self.a0 + np.sqrt(2.0) * (np.cos(phase) @ self.a + np.sin(phase) @ self.b)


def draw_fourier_series(spec: RandomFieldSpec, grid: TimeGrid, rng=None) -> RandomFourierSeries:
    """Draw m uniformly from m_range and all coefficients from N(0, 1/(2m+1))."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    m = int(rng.integers(spec.m_range[0], spec.m_range[1] + 1))
    std = np.sqrt(1.0 / (2 * m + 1))
    a0 = float(rng.normal(0.0, std))
    a = np.asarray(rng.normal(0.0, std, m), dtype=float)
    b = np.asarray(rng.normal(0.0, std, m), dtype=float)
    return RandomFourierSeries(a0=a0, a=a, b=b, t0=grid.t0, t1=grid.t1)


def generate_random_field(
    spec: RandomFieldSpec,
    grid: TimeGrid,
    name: str = "guess",
    role: FieldRole = FieldRole.LASER_PHASE,
    rng=None,
) -> ControlField:
    """Smooth random field sampled on the grid midpoints, scaled by spec.scale (default 1)."""
    series = draw_fourier_series(spec, grid, rng)
    scale = 1.0 if spec.scale is None else spec.scale
    return ControlField(name=name, role=role, grid=grid, values=scale * series(grid.midpoints))


GUESS_MARGIN = 1e-2


def random_guess(template: ControlField, spec: RandomFieldSpec, rng=None) -> ControlField:
    """Random guess for an existing control, respecting frozen values, masks and bounds.

    Bounded controls are centred on their interval with scale 0.5·(max−min) and
    clamped to GUESS_MARGIN of the range inside the bounds; unbounded phases use scale π.
    """
    if template.frozen:
        return template.copy()
    series = draw_fourier_series(spec, template.grid, rng)
    f = series(template.grid.midpoints)
    if template.bounds is not None:
        lo, hi = template.bounds
        scale = 0.5 * (hi - lo) if spec.scale is None else spec.scale
        values = 0.5 * (lo + hi) + scale * f
        margin = GUESS_MARGIN * (hi - lo)
        values = np.clip(values, lo + margin, hi - margin)
    else:
        scale = np.pi if spec.scale is None else spec.scale
        values = scale * f
    mask = template.updatable
    values = np.where(mask, values, template.values)
    return template.with_values(values)
