"""
Time propagation under piecewise-constant controls.

Each step applies exp(−i·H(t_k^mid)·dt), computed from a dense Hermitian
eigendecomposition. Several states are propagated together as the columns of
one matrix, so a step's exponential is built once for the whole batch.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np
from scipy import linalg

from errors import ConfigurationError, NumericError
from fields import ControlField, TimeGrid
from models import HamiltonianModel

logger = logging.getLogger(__name__)


@dataclass
class Trajectory:
    """States at the n_steps+1 grid boundaries, shape (n_steps+1, dim, n_states)."""
    grid: TimeGrid
    states: np.ndarray

    @property
    def initial(self) -> np.ndarray:
        return self.states[0]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def state(self, k: int, column: int = 0) -> np.ndarray:
        return self.states[k, :, column]

    @property
    def norm_drift(self) -> float:
        """max |‖ψ(t_k)‖ − ‖ψ(t_0)‖| over all boundaries and columns."""
        norms = np.linalg.norm(self.states, axis=1)
        return float(np.max(np.abs(norms - norms[0])))


def field_matrix(model: HamiltonianModel, fields: Sequence[ControlField]) -> np.ndarray:
    """Control samples as an (n_controls, n_steps) array in model.control_names order."""
    by_name = {f.name: f for f in fields}
    missing = [name for name in model.control_names if name not in by_name]
    if missing:
        raise ConfigurationError(f"Missing control fields: {missing}")
    grids = {f.grid for f in fields}
    if len(grids) != 1:
        raise ConfigurationError("All control fields must share one time grid")
    values = np.array([by_name[name].values for name in model.control_names], dtype=float)
    if not np.all(np.isfinite(values)):
        raise NumericError("Control fields contain non-finite values")
    return values


def values_at(model: HamiltonianModel, samples: np.ndarray, k: int) -> Dict[str, float]:
    return dict(zip(model.control_names, samples[:, k]))


def step_unitary(H: np.ndarray, dt: float) -> np.ndarray:
    """exp(−i·H·dt) for Hermitian H."""
    w, v = linalg.eigh(H)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def _as_columns(psi: np.ndarray, dim: int) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim == 1:
        psi = psi[:, None]
    if psi.shape[0] != dim:
        raise ConfigurationError(f"State dimension {psi.shape[0]} does not match model dimension {dim}")
    if not np.all(np.isfinite(psi)):
        raise NumericError("State contains non-finite values")
    return psi


def propagate_forward(
    model: HamiltonianModel, fields: Sequence[ControlField], psi0: np.ndarray
) -> Trajectory:
    samples = field_matrix(model, fields)
    grid = fields[0].grid
    dt = grid.dt
    psi = _as_columns(psi0, model.dim)
    states = np.empty((grid.n_steps + 1,) + psi.shape, dtype=complex)
    states[0] = psi
    for k in range(grid.n_steps):
        U = step_unitary(model.hamiltonian(values_at(model, samples, k)), dt)
        states[k + 1] = U @ states[k]
    if not np.all(np.isfinite(states[-1])):
        raise NumericError("Forward propagation produced non-finite states")
    return Trajectory(grid=grid, states=states)


def propagate_backward(
    model: HamiltonianModel, fields: Sequence[ControlField], chiT: np.ndarray
) -> Trajectory:
    """Adjoint evolution from t1 back to t0; states[k] is the co-state at boundary k."""
    samples = field_matrix(model, fields)
    grid = fields[0].grid
    dt = grid.dt
    chi = _as_columns(chiT, model.dim)
    states = np.empty((grid.n_steps + 1,) + chi.shape, dtype=complex)
    states[-1] = chi
    for k in range(grid.n_steps - 1, -1, -1):
        U = step_unitary(model.hamiltonian(values_at(model, samples, k)), dt)
        states[k] = U.conj().T @ states[k + 1]
    if not np.all(np.isfinite(states[0])):
        raise NumericError("Backward propagation produced non-finite states")
    return Trajectory(grid=grid, states=states)


def final_states(
    model: HamiltonianModel, fields: Sequence[ControlField], initial: List[np.ndarray]
) -> List[np.ndarray]:
    """Propagate a list of states to t1 without keeping the trajectory."""
    samples = field_matrix(model, fields)
    grid = fields[0].grid
    psi = np.column_stack(initial).astype(complex)
    for k in range(grid.n_steps):
        psi = step_unitary(model.hamiltonian(values_at(model, samples, k)), grid.dt) @ psi
    if not np.all(np.isfinite(psi)):
        raise NumericError("Forward propagation produced non-finite states")
    return [psi[:, l] for l in range(psi.shape[1])]
