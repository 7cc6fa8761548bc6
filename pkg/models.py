"""
Hamiltonian generators for the neutral-atom array and the transmon plaquette.

A model is a fixed drift matrix plus a list of control-coupled terms
c(E)·A (+ c(E)*·A† when `add_conjugate`), where E maps control names to their
values at one instant. Sites are ordered left to right in the tensor product,
site 1 most significant; logical bit b of a qubit sits in level b.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from errors import ConfigurationError
from fields import ControlField, FieldRole, TimeGrid, unbounded_to_field

logger = logging.getLogger(__name__)

MHZ = 2.0 * np.pi * 1e-3
"""rad/ns per MHz of ordinary frequency."""


def mhz(value: float) -> float:
    return float(value) * MHZ


# -----------------------------
# Default parameter tables
# -----------------------------
ATOM_V_MHZ = 40.0
ATOM_OMEGA_MAX_RATIO = 0.1
ATOM_DELTA_MAX_RATIO = 0.3

# Per-site tunable windows (MHz) inside 6700..7100 and anharmonicities near 200 MHz.
# Placeholder values; the device's measured numbers are not published.
TRANSMON_WINDOWS_MHZ: Tuple[Tuple[float, float], ...] = (
    (6700.0, 7000.0),
    (6800.0, 7100.0),
    (6720.0, 7020.0),
    (6780.0, 7080.0),
)
TRANSMON_ALPHA_MHZ: Tuple[float, ...] = (200.0, 205.0, 195.0, 210.0)
TRANSMON_ETA_MHZ = -200.0
TRANSMON_G_BOUNDS_MHZ = (-40.0, 5.0)
TRANSMON_X_BOUND_MHZ = 50.0
TRANSMON_LEVELS = 5

ATOM_DT_NS = 1.0
TRANSMON_DT_NS = 0.02


# -----------------------------
# Configurations
# -----------------------------
class AtomGeometry(str, Enum):
    SINGLE = "single"
    PAIR = "pair"
    TRIANGLE_PLAQUETTE = "triangle_plaquette"
    SQUARE_PLAQUETTE = "square_plaquette"


class CouplingMode(str, Enum):
    PSEUDO2D = "pseudo2d"
    PLANAR2D = "planar2d"


# lattice positions in units of the nearest-neighbour spacing; square is ordered around the ring
ATOM_POSITIONS: Dict[AtomGeometry, Tuple[Tuple[int, int], ...]] = {
    AtomGeometry.SINGLE: ((0, 0),),
    AtomGeometry.PAIR: ((0, 0), (0, 1)),
    AtomGeometry.TRIANGLE_PLAQUETTE: ((0, 0), (0, 1), (1, 0)),
    AtomGeometry.SQUARE_PLAQUETTE: ((0, 0), (0, 1), (1, 1), (1, 0)),
}


@dataclass(frozen=True)
class AtomArrayConfig:
    n_atoms: int = 2
    geometry: AtomGeometry = AtomGeometry.PAIR
    coupling_mode: CouplingMode = CouplingMode.PSEUDO2D
    V: float = ATOM_V_MHZ * MHZ
    omega_max: float = ATOM_OMEGA_MAX_RATIO * ATOM_V_MHZ * MHZ
    delta_max: float = ATOM_DELTA_MAX_RATIO * ATOM_V_MHZ * MHZ
    global_fields: bool = True

    def __post_init__(self):
        object.__setattr__(self, "geometry", AtomGeometry(self.geometry))
        object.__setattr__(self, "coupling_mode", CouplingMode(self.coupling_mode))
        if len(ATOM_POSITIONS[self.geometry]) != self.n_atoms:
            raise ConfigurationError(
                f"Geometry {self.geometry.value} holds {len(ATOM_POSITIONS[self.geometry])} atoms, "
                f"n_atoms={self.n_atoms}"
            )
        if self.V <= 0:
            raise ConfigurationError(f"V must be positive, got {self.V}")
        if self.omega_max <= 0:
            raise ConfigurationError(f"omega_max must be positive, got {self.omega_max}")
        if self.delta_max < 0:
            raise ConfigurationError(f"delta_max must be non-negative, got {self.delta_max}")

    def interaction(self, n: int, m: int) -> float:
        """van der Waals shift of |r_n r_m⟩ (0-based site indices)."""
        if self.coupling_mode is CouplingMode.PSEUDO2D:
            return self.V
        (xn, yn), (xm, ym) = ATOM_POSITIONS[self.geometry][n], ATOM_POSITIONS[self.geometry][m]
        distance_sq = (xn - xm) ** 2 + (yn - ym) ** 2
        return self.V / distance_sq ** 3


@dataclass(frozen=True)
class TransmonPlaquetteConfig:
    n_transmons: int = 2
    levels_per_transmon: int = TRANSMON_LEVELS
    omega_windows: Tuple[Tuple[float, float], ...] = tuple(
        (lo * MHZ, hi * MHZ) for lo, hi in TRANSMON_WINDOWS_MHZ[:2]
    )
    alpha: Tuple[float, ...] = tuple(a * MHZ for a in TRANSMON_ALPHA_MHZ[:2])
    eta: float = TRANSMON_ETA_MHZ * MHZ
    g_bounds: Tuple[float, float] = (TRANSMON_G_BOUNDS_MHZ[0] * MHZ, TRANSMON_G_BOUNDS_MHZ[1] * MHZ)
    omega_rot: Optional[float] = None
    x_drive_bound: float = TRANSMON_X_BOUND_MHZ * MHZ
    nnn_coupling: bool = False

    @classmethod
    def default(cls, n_transmons: int, **overrides) -> "TransmonPlaquetteConfig":
        if not 1 <= n_transmons <= len(TRANSMON_WINDOWS_MHZ):
            raise ConfigurationError(f"n_transmons must be 1..4, got {n_transmons}")
        params = dict(
            n_transmons=n_transmons,
            omega_windows=tuple((lo * MHZ, hi * MHZ) for lo, hi in TRANSMON_WINDOWS_MHZ[:n_transmons]),
            alpha=tuple(a * MHZ for a in TRANSMON_ALPHA_MHZ[:n_transmons]),
        )
        params.update(overrides)
        return cls(**params)

    def __post_init__(self):
        if self.n_transmons not in (1, 2, 3, 4):
            raise ConfigurationError(f"n_transmons must be 1..4, got {self.n_transmons}")
        if self.levels_per_transmon < 3:
            raise ConfigurationError("levels_per_transmon must be at least 3")
        if len(self.omega_windows) != self.n_transmons or len(self.alpha) != self.n_transmons:
            raise ConfigurationError("omega_windows and alpha need one entry per transmon")
        for lo, hi in self.omega_windows:
            if not lo < hi:
                raise ConfigurationError(f"Invalid frequency window ({lo}, {hi})")
        if self.eta == 0:
            raise ConfigurationError("eta must be non-zero")
        g_min, g_max = self.g_bounds
        if not (g_min < 0 <= g_max):
            raise ConfigurationError(f"g_bounds must satisfy g_min < 0 <= g_max, got {self.g_bounds}")
        if self.x_drive_bound <= 0:
            raise ConfigurationError("x_drive_bound must be positive")
        if self.omega_rot is None:
            object.__setattr__(self, "omega_rot", float(np.mean(self.omega_windows)))

    @property
    def coupled_pairs(self) -> List[Tuple[int, int]]:
        """0-based coupled pairs: ring neighbours, plus the diagonals when nnn_coupling."""
        n = self.n_transmons
        if n == 1:
            return []
        if n == 2:
            pairs = [(0, 1)]
        elif n == 3:
            pairs = [(0, 1), (1, 2)]
        else:
            pairs = [(0, 1), (1, 2), (2, 3), (0, 3)]
        if self.nnn_coupling:
            pairs += [(0, 2)] if n == 3 else [(0, 2), (1, 3)] if n == 4 else []
        return pairs


class FieldMode(str, Enum):
    OPTIMIZED = "optimized"
    FROZEN = "frozen"
    ZERO = "zero"


@dataclass(frozen=True)
class FieldAssignment:
    mode: FieldMode
    value: Optional[str] = None  # "max", "min", or None for the template value
    window: Optional[str] = None  # "first_half" / "second_half"


@dataclass(frozen=True)
class FieldConfiguration:
    """Named assignment of every control class to optimized, frozen-at-value or zero."""
    name: str
    assignments: Dict[str, FieldAssignment] = field(default_factory=dict)

    @property
    def platform(self) -> str:
        return "atoms" if self.name.startswith("atoms_") else "superconducting"

    def assignment(self, base_name: str) -> FieldAssignment:
        return self.assignments[base_name]


_OPT = FieldAssignment(FieldMode.OPTIMIZED)
_ZERO = FieldAssignment(FieldMode.ZERO)

FIELD_CONFIGURATIONS: Dict[str, FieldConfiguration] = {
    "atoms_parallel": FieldConfiguration("atoms_parallel", {
        "omega_down": _OPT, "phi_down": _OPT, "omega_up": _OPT, "phi_up": _OPT, "delta": _OPT,
    }),
    "atoms_phase": FieldConfiguration("atoms_phase", {
        "omega_down": _ZERO, "phi_down": _ZERO,
        "omega_up": FieldAssignment(FieldMode.FROZEN, value="max"),
        "phi_up": _OPT,
        "delta": FieldAssignment(FieldMode.FROZEN, value="max"),
    }),
    "atoms_sequential": FieldConfiguration("atoms_sequential", {
        "omega_down": FieldAssignment(FieldMode.OPTIMIZED, window="first_half"),
        "phi_down": FieldAssignment(FieldMode.OPTIMIZED, window="first_half"),
        "omega_up": FieldAssignment(FieldMode.OPTIMIZED, window="second_half"),
        "phi_up": FieldAssignment(FieldMode.OPTIMIZED, window="second_half"),
        "delta": _OPT,
    }),
    "sc_full": FieldConfiguration("sc_full", {
        "omega": _OPT, "g": _OPT, "x_re": _OPT, "x_im": _OPT,
    }),
    "sc_noX": FieldConfiguration("sc_noX", {
        "omega": _OPT, "g": _OPT, "x_re": _ZERO, "x_im": _ZERO,
    }),
    "sc_interaction": FieldConfiguration("sc_interaction", {
        "omega": _OPT, "g": FieldAssignment(FieldMode.FROZEN, value="min"), "x_re": _ZERO, "x_im": _ZERO,
    }),
}


def field_configuration(name: str) -> FieldConfiguration:
    try:
        return FIELD_CONFIGURATIONS[name]
    except KeyError:
        raise ConfigurationError(
            f"Unknown field configuration '{name}', expected one of {sorted(FIELD_CONFIGURATIONS)}"
        ) from None


# -----------------------------
# Hamiltonian model
# -----------------------------
Coefficient = Callable[[Mapping[str, float]], complex]


@dataclass(frozen=True)
class HamiltonianTerm:
    operator: sparse.coo_matrix
    coefficient: Coefficient
    gradients: Dict[str, Coefficient]
    add_conjugate: bool = False
    csr: sparse.csr_matrix = field(init=False, repr=False, compare=False)
    csr_adjoint: sparse.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "csr", self.operator.tocsr())
        object.__setattr__(self, "csr_adjoint", self.operator.conj().T.tocsr())


def _coo(matrix) -> sparse.coo_matrix:
    coo = sparse.coo_matrix(matrix, dtype=complex)
    coo.sum_duplicates()
    coo.eliminate_zeros()
    return coo


@dataclass(frozen=True)
class HamiltonianModel:
    """H(E) = drift + Σ_terms c(E)·A (+ h.c.) on a tensor product of `site_levels`."""
    site_levels: Tuple[int, ...]
    basis_labels: Tuple[str, ...]
    drift: np.ndarray
    terms: Tuple[HamiltonianTerm, ...]
    control_names: Tuple[str, ...]
    platform: str
    logical_levels: Tuple[int, int] = (0, 1)

    @property
    def dim(self) -> int:
        return int(np.prod(self.site_levels))

    @property
    def n_sites(self) -> int:
        return len(self.site_levels)

    def _accumulate(self, out: np.ndarray, op: sparse.coo_matrix, c: complex, conjugate: bool):
        out[op.row, op.col] += c * op.data
        if conjugate:
            out[op.col, op.row] += np.conj(c) * np.conj(op.data)

    def hamiltonian(self, values: Mapping[str, float]) -> np.ndarray:
        H = self.drift.copy()
        for term in self.terms:
            c = term.coefficient(values)
            if c != 0:
                self._accumulate(H, term.operator, c, term.add_conjugate)
        return H

    def derivative(self, name: str, values: Mapping[str, float]) -> np.ndarray:
        """∂H/∂E_name at the given control values."""
        dH = np.zeros((self.dim, self.dim), dtype=complex)
        for term in self.terms:
            grad = term.gradients.get(name)
            if grad is None:
                continue
            c = grad(values)
            if c != 0:
                self._accumulate(dH, term.operator, c, term.add_conjugate)
        return dH

    def derivative_overlap(
        self, name: str, values: Mapping[str, float], bra: np.ndarray, ket: np.ndarray
    ) -> complex:
        """Σ_l ⟨bra_l|∂H/∂E_name|ket_l⟩ over the columns of bra and ket."""
        total = 0j
        for term in self.terms:
            grad = term.gradients.get(name)
            if grad is None:
                continue
            c = grad(values)
            if c == 0:
                continue
            total += c * np.vdot(bra, term.csr @ ket)
            if term.add_conjugate:
                total += np.conj(c) * np.vdot(bra, term.csr_adjoint @ ket)
        return total

    def logical_index(self, bits: Sequence[int]) -> int:
        if len(bits) != self.n_sites:
            raise ConfigurationError(f"Expected {self.n_sites} bits, got {len(bits)}")
        index = 0
        for bit, d in zip(bits, self.site_levels):
            index = index * d + self.logical_levels[int(bit)]
        return index

    def logical_basis(self) -> List[int]:
        """Physical indices of the logical basis states, in binary order (site 1 = MSB)."""
        return [self.logical_index(bits) for bits in itertools.product((0, 1), repeat=self.n_sites)]

    def basis_state(self, index: int) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[index] = 1.0
        return psi

    def highest_level_projector(self) -> np.ndarray:
        """Diagonal of the projector onto states with any site in its top level."""
        levels = np.array(list(itertools.product(*[range(d) for d in self.site_levels])))
        top = np.array(self.site_levels) - 1
        return np.any(levels == top, axis=1).astype(float)


def _embed(local: np.ndarray, site: int, site_levels: Sequence[int]) -> sparse.csr_matrix:
    op = sparse.identity(1, dtype=complex, format="csr")
    for k, d in enumerate(site_levels):
        factor = sparse.csr_matrix(local) if k == site else sparse.identity(d, dtype=complex, format="csr")
        op = sparse.kron(op, factor, format="csr")
    return op


def _ket_bra(d: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((d, d), dtype=complex)
    m[i, j] = 1.0
    return m


def _site_name(base: str, site: int, shared: bool) -> str:
    return base if shared else f"{base}_{site + 1}"


def _window_mask(grid: TimeGrid, window: Optional[str]) -> Optional[np.ndarray]:
    if window is None:
        return None
    first = grid.midpoints < grid.t0 + 0.5 * grid.duration
    if window == "first_half":
        return first
    if window == "second_half":
        return ~first
    raise ConfigurationError(f"Unknown window '{window}'")


def _make_control(
    name: str,
    role: FieldRole,
    grid: TimeGrid,
    bounds: Optional[Tuple[float, float]],
    assignment: FieldAssignment,
    frozen_values: Dict[str, float],
) -> ControlField:
    """Template control for an assignment; optimized fields start at the centre of their range."""
    if assignment.mode is FieldMode.ZERO:
        return ControlField(name, role, grid, np.zeros(grid.n_steps), bounds, frozen=True)
    if assignment.mode is FieldMode.FROZEN:
        value = frozen_values[assignment.value or "max"]
        return ControlField(name, role, grid, np.full(grid.n_steps, value), bounds, frozen=True)
    if bounds is None or bounds[0] < 0.0 < bounds[1]:
        start = 0.0
    else:
        start = unbounded_to_field(0.0, bounds)
    active = _window_mask(grid, assignment.window)
    values = np.full(grid.n_steps, start)
    if active is not None:
        # switched off outside its window
        values[~active] = 0.0 if bounds is None or bounds[0] <= 0.0 <= bounds[1] else start
    return ControlField(name, role, grid, values, bounds, frozen=False, active=active)


# -----------------------------
# Neutral atoms
# -----------------------------
def build_atom_model(
    config: AtomArrayConfig, fc: FieldConfiguration, grid: TimeGrid
) -> Tuple[HamiltonianModel, List[ControlField]]:
    """Rydberg-array Hamiltonian with levels (↓, ↑, r) = (0, 1, 2) on every atom.

    H = Σ_n [−Δ_n |r⟩⟨r| + Σ_l ½Ω_l e^{iφ_l}|r⟩⟨l| + h.c.] + Σ_{n<m} V_nm |r r⟩⟨r r|.
    """
    if fc.platform != "atoms":
        raise ConfigurationError(f"Field configuration '{fc.name}' is not an atoms configuration")
    n = config.n_atoms
    site_levels = (3,) * n
    dim = 3 ** n
    shared = config.global_fields or n == 1

    drift = np.zeros((dim, dim), dtype=complex)
    rr = _ket_bra(3, 2, 2)
    for a, b in itertools.combinations(range(n), 2):
        pair = _embed(rr, a, site_levels) @ _embed(rr, b, site_levels)
        drift += config.interaction(a, b) * pair.toarray()

    terms: List[HamiltonianTerm] = []
    controls: Dict[str, ControlField] = {}
    has_delta = config.delta_max > 0
    delta_bounds = (-config.delta_max, config.delta_max) if has_delta else None
    frozen_values = {
        "omega_up": {"max": config.omega_max, "min": 0.0},
        "omega_down": {"max": config.omega_max, "min": 0.0},
        "delta": {"max": config.delta_max, "min": -config.delta_max},
        "phi_up": {"max": 0.0, "min": 0.0},
        "phi_down": {"max": 0.0, "min": 0.0},
    }
    specs = {
        "omega_down": (FieldRole.RABI_AMPLITUDE, (0.0, config.omega_max)),
        "phi_down": (FieldRole.LASER_PHASE, None),
        "omega_up": (FieldRole.RABI_AMPLITUDE, (0.0, config.omega_max)),
        "phi_up": (FieldRole.LASER_PHASE, None),
        "delta": (FieldRole.DETUNING, delta_bounds),
    }

    for site in range(n):
        for base, (role, bounds) in specs.items():
            name = _site_name(base, site, shared)
            if name in controls:
                continue
            assignment = fc.assignment(base)
            if base == "delta" and not has_delta:
                assignment = _ZERO
            controls[name] = _make_control(name, role, grid, bounds, assignment, frozen_values[base])

        d_name = _site_name("delta", site, shared)
        terms.append(HamiltonianTerm(
            operator=_coo(_embed(rr, site, site_levels)),
            coefficient=lambda v, k=d_name: -v[k],
            gradients={d_name: lambda v: -1.0},
        ))
        for level, suffix in ((0, "down"), (1, "up")):
            om = _site_name(f"omega_{suffix}", site, shared)
            ph = _site_name(f"phi_{suffix}", site, shared)
            terms.append(HamiltonianTerm(
                operator=_coo(_embed(_ket_bra(3, 2, level), site, site_levels)),
                coefficient=lambda v, a=om, p=ph: 0.5 * v[a] * np.exp(1j * v[p]),
                gradients={
                    om: lambda v, p=ph: 0.5 * np.exp(1j * v[p]),
                    ph: lambda v, a=om, p=ph: 0.5j * v[a] * np.exp(1j * v[p]),
                },
                add_conjugate=True,
            ))

    labels = tuple("".join(s) for s in itertools.product("dur", repeat=n))
    model = HamiltonianModel(
        site_levels=site_levels,
        basis_labels=labels,
        drift=drift,
        terms=tuple(terms),
        control_names=tuple(controls),
        platform="atoms",
    )
    logger.debug("Built atom model: n=%d geometry=%s mode=%s config=%s",
                 n, config.geometry.value, config.coupling_mode.value, fc.name)
    return model, list(controls.values())


# -----------------------------
# Transmons
# -----------------------------
def _annihilation(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d)), k=1).astype(complex)


def build_transmon_model(
    config: TransmonPlaquetteConfig, fc: FieldConfiguration, grid: TimeGrid
) -> Tuple[HamiltonianModel, List[ControlField]]:
    """Transmon plaquette in the frame rotating at omega_rot.

    Per site (ω_n−ω_rot) n̂ − (α_n/2) b†b†bb + ½[b(X_re+iX_im) + b†(X_re−iX_im)];
    per coupled pair g(b†_n b_m + h.c.) + (g²/|η|) n̂_n n̂_m.
    """
    if fc.platform != "superconducting":
        raise ConfigurationError(f"Field configuration '{fc.name}' is not a superconducting configuration")
    n = config.n_transmons
    d = config.levels_per_transmon
    site_levels = (d,) * n
    dim = d ** n
    b = _annihilation(d)
    num = b.conj().T @ b
    kerr = b.conj().T @ b.conj().T @ b @ b

    drift = np.zeros((dim, dim), dtype=complex)
    terms: List[HamiltonianTerm] = []
    controls: Dict[str, ControlField] = {}
    xb = config.x_drive_bound
    g_min, g_max = config.g_bounds

    for site in range(n):
        drift -= 0.5 * config.alpha[site] * _embed(kerr, site, site_levels).toarray()

        w_name = f"omega_{site + 1}"
        lo, hi = config.omega_windows[site]
        controls[w_name] = _make_control(
            w_name, FieldRole.QUBIT_FREQUENCY, grid, (lo, hi), fc.assignment("omega"),
            {"max": hi, "min": lo},
        )
        terms.append(HamiltonianTerm(
            operator=_coo(_embed(num, site, site_levels)),
            coefficient=lambda v, k=w_name, rot=config.omega_rot: v[k] - rot,
            gradients={w_name: lambda v: 1.0},
        ))

        re_name, im_name = f"x_re_{site + 1}", f"x_im_{site + 1}"
        controls[re_name] = _make_control(
            re_name, FieldRole.X_DRIVE_RE, grid, (-xb, xb), fc.assignment("x_re"), {"max": xb, "min": -xb},
        )
        controls[im_name] = _make_control(
            im_name, FieldRole.X_DRIVE_IM, grid, (-xb, xb), fc.assignment("x_im"), {"max": xb, "min": -xb},
        )
        terms.append(HamiltonianTerm(
            operator=_coo(_embed(b.conj().T, site, site_levels)),
            coefficient=lambda v, r=re_name, i=im_name: 0.5 * (v[r] - 1j * v[i]),
            gradients={re_name: lambda v: 0.5, im_name: lambda v: -0.5j},
            add_conjugate=True,
        ))

    abs_eta = abs(config.eta)
    for a, c in config.coupled_pairs:
        g_name = f"g_{a + 1}{c + 1}"
        controls[g_name] = _make_control(
            g_name, FieldRole.COUPLING, grid, (g_min, g_max), fc.assignment("g"), {"max": g_max, "min": g_min},
        )
        hop = _embed(b.conj().T, a, site_levels) @ _embed(b, c, site_levels)
        cross = _embed(num, a, site_levels) @ _embed(num, c, site_levels)
        terms.append(HamiltonianTerm(
            operator=_coo(hop),
            coefficient=lambda v, k=g_name: v[k],
            gradients={g_name: lambda v: 1.0},
            add_conjugate=True,
        ))
        terms.append(HamiltonianTerm(
            operator=_coo(cross),
            coefficient=lambda v, k=g_name: v[k] ** 2 / abs_eta,
            gradients={g_name: lambda v, k=g_name: 2.0 * v[k] / abs_eta},
        ))

    labels = tuple("".join(str(x) for x in s) for s in itertools.product(range(d), repeat=n))
    model = HamiltonianModel(
        site_levels=site_levels,
        basis_labels=labels,
        drift=drift,
        terms=tuple(terms),
        control_names=tuple(controls),
        platform="superconducting",
    )
    logger.debug("Built transmon model: n=%d levels=%d nnn=%s config=%s", n, d, config.nnn_coupling, fc.name)
    return model, list(controls.values())


def auxiliary_to_lab_fields(
    re: ControlField, im: ControlField, omega_rot: float
) -> Tuple[ControlField, ControlField]:
    """Lab-frame drive amplitude Ω(t) and frequency ω̄(t) from the auxiliary X-drive fields."""
    if re.grid != im.grid:
        raise ConfigurationError("Auxiliary fields must share a grid")
    grid = re.grid
    z = re.values - 1j * im.values
    amplitude = np.abs(z)
    if grid.n_steps > 1:
        phase = np.unwrap(np.angle(z))
        frequency = omega_rot + np.gradient(phase, grid.midpoints)
    else:
        frequency = np.full(grid.n_steps, float(omega_rot))
    frequency = np.where(amplitude > 0, frequency, omega_rot)
    suffix = re.name[len("x_re"):] if re.name.startswith("x_re") else ""
    return (
        ControlField(f"drive_amplitude{suffix}", FieldRole.DRIVE_AMPLITUDE, grid, amplitude),
        ControlField(f"drive_frequency{suffix}", FieldRole.DRIVE_FREQUENCY, grid, frequency),
    )
