from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import reduce
from typing import List, Optional, Sequence

import numpy as np

from errors import ConfigurationError, GateModelMismatchError
from models import HamiltonianModel

logger = logging.getLogger(__name__)

GATE_NAMES = ("CZ", "CNOT", "SWAP", "ZZZ", "ZZZZ")
PARAMETRIC_GATES = {"ZZZ": 3, "ZZZZ": 4}


# -----------------------------
# Targets
# -----------------------------
@dataclass(frozen=True)
class GateTarget:
    """Logical unitary on q qubits, basis ordered with the first qubit most significant.

    Logical 0 is ↓ (σz = +1), logical 1 is ↑ (σz = −1).
    """
    name: str
    matrix: np.ndarray
    gamma: Optional[float] = None
    phase_shifted: bool = False

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.matrix.shape[0])))


@dataclass
class TargetStateSet:
    initial: List[np.ndarray]
    targets: List[np.ndarray]
    gate: GateTarget

    @property
    def n_trgt(self) -> int:
        return len(self.initial)


def _parity_phases(n_qubits: int, gamma: float) -> np.ndarray:
    """Diagonal of exp(−iγ σz⊗…⊗σz)."""
    popcount = np.array([bin(i).count("1") for i in range(2 ** n_qubits)])
    return np.exp(-1j * gamma * (-1.0) ** popcount)


def make_gate(name: str, gamma: Optional[float] = None, phase_shifted: bool = False) -> GateTarget:
    """Target gate by name.

    With `phase_shifted`, ZZZ and ZZZZ are multiplied by the global phase that
    leaves |↓…↓⟩ invariant, i.e. e^{+iγ} for both.
    """
    if name not in GATE_NAMES:
        raise ConfigurationError(f"Unknown gate '{name}', expected one of {GATE_NAMES}")
    if name in PARAMETRIC_GATES:
        if gamma is None:
            raise ConfigurationError(f"Gate {name} requires gamma")
        diag = _parity_phases(PARAMETRIC_GATES[name], gamma)
        if phase_shifted:
            diag = diag * np.conj(diag[0])
            diag[0] = 1.0
        return GateTarget(name, np.diag(diag), gamma=float(gamma), phase_shifted=phase_shifted)

    if gamma is not None:
        logger.warning("gamma=%s ignored for gate %s", gamma, name)
    if name == "CZ":
        matrix = np.diag([1, 1, 1, -1]).astype(complex)
    elif name == "CNOT":
        matrix = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    else:
        matrix = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
    return GateTarget(name, matrix)


def embed_targets(gate: GateTarget, model: HamiltonianModel) -> TargetStateSet:
    """Logical basis states embedded in the model and their images under the gate."""
    if gate.n_qubits != model.n_sites:
        raise GateModelMismatchError(
            f"Gate {gate.name} acts on {gate.n_qubits} qubits, model has {model.n_sites} sites"
        )
    indices = model.logical_basis()
    initial = [model.basis_state(i) for i in indices]
    targets = []
    for col in range(len(indices)):
        psi = np.zeros(model.dim, dtype=complex)
        psi[indices] = gate.matrix[:, col]
        targets.append(psi)
    return TargetStateSet(initial=initial, targets=targets, gate=gate)


# -----------------------------
# Entangling power
# -----------------------------
@dataclass(frozen=True)
class EntanglingPowerEstimate:
    mean: float
    stderr: float
    n_samples: int


def _haar_qubits(rng: np.random.Generator, n_samples: int, n_qubits: int) -> np.ndarray:
    z = rng.normal(size=(n_samples, n_qubits, 2)) + 1j * rng.normal(size=(n_samples, n_qubits, 2))
    return z / np.linalg.norm(z, axis=2, keepdims=True)


def _mean_marginal_linear_entropy(states: np.ndarray, n_qubits: int) -> np.ndarray:
    """Per-sample mean over qubits of 1 − Tr ρ_j² for states of shape (n_samples, 2^q)."""
    psi = states.reshape((states.shape[0],) + (2,) * n_qubits)
    entropies = np.zeros(states.shape[0])
    for j in range(n_qubits):
        moved = np.moveaxis(psi, j + 1, 1).reshape(states.shape[0], 2, -1)
        rho = np.einsum("sak,sbk->sab", moved, moved.conj())
        entropies += 1.0 - np.einsum("sab,sba->s", rho, rho).real
    return entropies / n_qubits


def entangling_power_estimate(
    gate: GateTarget, n_samples: int = 2000, seed: Optional[int] = 0
) -> EntanglingPowerEstimate:
    """Mean single-qubit linear entropy of U|product⟩ over Haar-random product inputs."""
    if n_samples < 1:
        raise ConfigurationError(f"n_samples must be at least 1, got {n_samples}")
    q = gate.n_qubits
    rng = np.random.default_rng(seed)
    qubits = _haar_qubits(rng, n_samples, q)
    products = np.array([reduce(np.kron, sample) for sample in qubits])
    outputs = products @ gate.matrix.T
    samples = _mean_marginal_linear_entropy(outputs, q)
    stderr = float(np.std(samples, ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    return EntanglingPowerEstimate(mean=float(np.mean(samples)), stderr=stderr, n_samples=n_samples)


def entangling_power(gate: GateTarget, n_samples: int = 2000, seed: Optional[int] = 0) -> float:
    return entangling_power_estimate(gate, n_samples, seed).mean


def entangling_power_sweep(
    name: str,
    gammas: Sequence[float],
    n_samples: int = 2000,
    seed: Optional[int] = 0,
    phase_shifted: bool = False,
) -> List[EntanglingPowerEstimate]:
    """Entangling power of a constraint gate over γ, with the same input samples at every γ."""
    if name not in PARAMETRIC_GATES:
        raise ConfigurationError(f"Gamma sweeps need a parametric gate {sorted(PARAMETRIC_GATES)}, got {name}")
    estimates = []
    for gamma in gammas:
        estimate = entangling_power_estimate(make_gate(name, gamma, phase_shifted), n_samples, seed)
        logger.debug("e_p[%s](gamma=%.4f) = %.6f ± %.6f", name, gamma, estimate.mean, estimate.stderr)
        estimates.append(estimate)
    return estimates
