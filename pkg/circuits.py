"""
Circuit construction and resource estimation for QFT and single-step QAOA.

Builders emit a flat gate program (with optional barriers), lower it to the
platform profile's native gate set, merge runs of single-qubit gates, and pack
the result into ASAP layers. Qubit 0 is the most significant bit whenever a
circuit is turned into a matrix.
"""
from __future__ import annotations

import csv
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import reduce
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from ortools.sat.python import cp_model

from errors import ConfigurationError, MissingGateTimeError

logger = logging.getLogger(__name__)

# -----------------------------
# Gates
# -----------------------------
@dataclass(frozen=True)
class Gate:
    name: str
    qubits: Tuple[int, ...]
    params: Tuple[float, ...] = ()
    matrix: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    @property
    def arity(self) -> int:
        return len(self.qubits)


BARRIER = Gate("BARRIER", ())

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
# fSim(π/2, π/6)
_SYC = np.array(
    [[1, 0, 0, 0], [0, 0, -1j, 0], [0, -1j, 0, 0], [0, 0, 0, np.exp(-1j * np.pi / 6)]], dtype=complex
)


def _rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _zpower(n: int, gamma: float) -> np.ndarray:
    popcount = np.array([bin(i).count("1") for i in range(2 ** n)])
    return np.diag(np.exp(-1j * gamma * (-1.0) ** popcount))


def gate_matrix(gate: Gate) -> np.ndarray:
    """Unitary of a gate on its own qubits, first listed qubit most significant."""
    if gate.matrix is not None:
        return gate.matrix
    name, p = gate.name, gate.params
    if name == "H":
        return _H
    if name == "X":
        return _X
    if name == "RX":
        return _rx(p[0])
    if name == "RY":
        return _ry(p[0])
    if name == "RZ":
        return _rz(p[0])
    if name == "P":
        return np.diag([1.0, np.exp(1j * p[0])])
    if name == "CZ":
        return _CZ
    if name == "CNOT":
        return _CNOT
    if name == "SWAP":
        return _SWAP
    if name == "SYC":
        return _SYC
    if name == "CP":
        return np.diag([1.0, 1.0, 1.0, np.exp(1j * p[0])])
    if name == "RZZ":
        return _zpower(2, 0.5 * p[0])
    if name in ("ZZZ", "ZZZZ"):
        return _zpower(gate.arity, p[0])
    raise ConfigurationError(f"Gate {name} has no unitary")


def _single(name: str, q: int, *params: float) -> Gate:
    return Gate(name, (q,), tuple(float(x) for x in params))


# -----------------------------
# Platform profiles
# -----------------------------
T2_STAR_NS = 4e6
T_RYD_NS = 150e3
T1_NS = 15e3

ATOM_CONSTRAINT_TIMES = {"planar2d": (600.0, 600.0), "pseudo2d": (400.0, 500.0)}
SC_CONSTRAINT_TIMES = {"nn": (24.0, 80.0), "nnn": (20.0, 60.0)}


@dataclass(frozen=True)
class PlatformProfile:
    """Gate times (ns), error time scales and native gates of one platform / gate set."""
    name: str
    gate_set: str
    variant: str
    gate_times: Dict[str, float]
    single_qubit_error_time: float
    multi_qubit_error_time: float
    constraint_layers: int
    native_gates: FrozenSet[str]
    diagonal_coupling: bool = False

    def __post_init__(self):
        bad = {k: v for k, v in self.gate_times.items() if not v > 0}
        if bad:
            raise ConfigurationError(f"Gate times must be positive, got {bad}")
        if self.single_qubit_error_time <= 0 or self.multi_qubit_error_time <= 0:
            raise ConfigurationError("Error time scales must be positive")
        missing = [g for g in self.native_gates if g not in self.gate_times]
        if missing:
            raise ConfigurationError(f"Native gates without a time entry: {missing}")

    @property
    def label(self) -> str:
        return f"{self.name}/{self.variant}/{self.gate_set}"

    def gate_time(self, gate: Gate) -> float:
        key = "local" if gate.arity == 1 else gate.name
        try:
            return self.gate_times[key]
        except KeyError:
            raise MissingGateTimeError(f"Profile {self.label} has no time for gate {gate.name}") from None

    def error_time(self, gate: Gate) -> float:
        return self.single_qubit_error_time if gate.arity == 1 else self.multi_qubit_error_time


def make_profile(platform: str, gate_set: str, variant: Optional[str] = None) -> PlatformProfile:
    """Profiles for atoms (planar2d | pseudo2d) and superconducting circuits (nn | nnn)."""
    gate_set = gate_set.upper()
    if gate_set not in ("SGS", "QGS"):
        raise ConfigurationError(f"Unknown gate set '{gate_set}', expected SGS or QGS")
    if platform == "atoms":
        variant = variant or "planar2d"
        if variant not in ATOM_CONSTRAINT_TIMES:
            raise ConfigurationError(f"Unknown atoms variant '{variant}'")
        zzz, zzzz = ATOM_CONSTRAINT_TIMES[variant]
        if gate_set == "SGS":
            times = {"local": 1000.0, "CZ": 350.0}
            natives = {"CZ"}
        else:
            times = {"local": 1000.0, "CNOT": 300.0, "CZ": 350.0, "SWAP": 400.0, "ZZZ": zzz, "ZZZZ": zzzz}
            # the CNOT time is listed for reference only; atom circuits build it from CZ
            natives = {"CZ", "SWAP", "ZZZ", "ZZZZ"}
        return PlatformProfile(
            name="atoms", gate_set=gate_set, variant=variant, gate_times=times,
            single_qubit_error_time=T2_STAR_NS, multi_qubit_error_time=T_RYD_NS,
            constraint_layers=9, native_gates=frozenset(natives),
            diagonal_coupling=variant == "pseudo2d",
        )
    if platform == "superconducting":
        variant = variant or "nn"
        if variant not in SC_CONSTRAINT_TIMES:
            raise ConfigurationError(f"Unknown superconducting variant '{variant}'")
        zzz, zzzz = SC_CONSTRAINT_TIMES[variant]
        if gate_set == "SGS":
            times = {"local": 25.0, "SYC": 12.0}
            natives = {"SYC"}
        else:
            times = {"local": 25.0, "CNOT": 14.0, "CZ": 10.0, "SWAP": 12.0, "ZZZ": zzz, "ZZZZ": zzzz}
            natives = {"CNOT", "CZ", "SWAP", "ZZZ", "ZZZZ"}
        return PlatformProfile(
            name="superconducting", gate_set=gate_set, variant=variant, gate_times=times,
            single_qubit_error_time=T1_NS, multi_qubit_error_time=T1_NS,
            constraint_layers=4, native_gates=frozenset(natives),
            diagonal_coupling=variant == "nnn",
        )
    raise ConfigurationError(f"Unknown platform '{platform}', expected atoms or superconducting")


# -----------------------------
# Circuits
# -----------------------------
@dataclass
class Circuit:
    """Layered circuit on K physical qubits with grid coordinates.

    `input_map[j]` / `output_map[j]` give the physical qubit holding logical
    qubit j before and after the circuit.
    """
    n_qubits: int
    coords: List[Tuple[int, int]]
    layers: List[List[Gate]]
    provenance: Dict[str, Any] = field(default_factory=dict)
    input_map: Optional[List[int]] = None
    output_map: Optional[List[int]] = None
    constraint_layers: Optional[int] = None

    @property
    def gates(self) -> List[Gate]:
        return [g for layer in self.layers for g in layer]

    @property
    def depth(self) -> int:
        return len(self.layers)

    def to_text(self) -> str:
        """One gate per line: `layer name q1,q2,... p1,p2,...`."""
        lines = []
        for i, layer in enumerate(self.layers):
            for g in layer:
                params = ",".join(f"{x:.12g}" for x in g.params) or "-"
                lines.append(f"{i} {g.name} {','.join(str(q) for q in g.qubits)} {params}")
        return "\n".join(lines) + ("\n" if lines else "")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_qubits": self.n_qubits,
            "coords": [list(c) for c in self.coords],
            "provenance": self.provenance,
            "input_map": self.input_map,
            "output_map": self.output_map,
            "constraint_layers": self.constraint_layers,
            "layers": [
                [{"name": g.name, "qubits": list(g.qubits), "params": list(g.params)} for g in layer]
                for layer in self.layers
            ],
        }


def layout_violations(circuit: Circuit, diagonal: bool = False) -> List[str]:
    """Qubit collisions inside a layer and multi-qubit gates on non-adjacent qubits."""
    problems = []
    for i, layer in enumerate(circuit.layers):
        seen = set()
        for g in layer:
            overlap = seen.intersection(g.qubits)
            if overlap:
                problems.append(f"layer {i}: qubits {sorted(overlap)} used twice")
            seen.update(g.qubits)
            if g.arity < 2:
                continue
            rows = [circuit.coords[q][0] for q in g.qubits]
            cols = [circuit.coords[q][1] for q in g.qubits]
            if g.arity == 2:
                dr, dc = abs(rows[0] - rows[1]), abs(cols[0] - cols[1])
                ok = dr + dc == 1 or (diagonal and dr == 1 and dc == 1)
            else:
                ok = max(rows) - min(rows) <= 1 and max(cols) - min(cols) <= 1
            if not ok:
                problems.append(f"layer {i}: {g.name} on non-adjacent qubits {g.qubits}")
    return problems


# ----- Lowering -----
def _lower(gate: Gate, profile: Optional[PlatformProfile]) -> List[Gate]:
    if profile is None or gate is BARRIER or gate.arity == 1 or gate.name in profile.native_gates:
        return [gate]
    natives = profile.native_gates
    name, q, p = gate.name, gate.qubits, gate.params
    if name == "CNOT":
        seq = [_single("H", q[1]), Gate("CZ", q), _single("H", q[1])]
    elif name == "CZ":
        if "SYC" not in natives:
            raise MissingGateTimeError(f"Profile {profile.label} cannot realize CZ")
        # modeled template: timing and counting only
        a, b = q
        return [
            Gate("LOCAL", (a,)), Gate("LOCAL", (b,)), Gate("SYC", q), Gate("LOCAL", (a,)), Gate("LOCAL", (b,)),
        ]
    elif name == "SWAP":
        a, b = q
        seq = [Gate("CNOT", (a, b)), Gate("CNOT", (b, a)), Gate("CNOT", (a, b))]
    elif name == "RZZ":
        a, b = q
        seq = [Gate("CNOT", (a, b)), _single("RZ", b, p[0]), Gate("CNOT", (a, b))]
    elif name == "CP":
        a, b = q
        # equal up to the global phase e^{iθ/4}
        seq = [_single("RZ", a, p[0] / 2), _single("RZ", b, p[0] / 2), Gate("RZZ", q, (-p[0] / 2,))]
    elif name in ("ZZZ", "ZZZZ"):
        chain = [Gate("CNOT", (q[i], q[i + 1])) for i in range(len(q) - 1)]
        seq = chain + [_single("RZ", q[-1], 2.0 * p[0])] + chain[::-1]
    else:
        raise MissingGateTimeError(f"Profile {profile.label} cannot realize gate {name}")
    return [out for g in seq for out in _lower(g, profile)]


def _is_identity(m: np.ndarray) -> bool:
    return abs(abs(np.trace(m)) - m.shape[0]) < 1e-12


def _merge_single_qubit_runs(program: Iterable[Gate]) -> List[Gate]:
    """Fuse consecutive single-qubit gates per qubit into one gate; drop fused identities."""
    out: List[Optional[Gate]] = []
    last: Dict[int, int] = {}
    for g in program:
        if g is BARRIER:
            out.append(g)
            last.clear()
            continue
        if g.arity == 1:
            q = g.qubits[0]
            i = last.get(q)
            if i is not None and out[i] is not None and out[i].arity == 1:
                prev = out[i]
                if prev.name == "LOCAL" or g.name == "LOCAL":
                    merged = Gate("LOCAL", (q,))
                else:
                    m = gate_matrix(g) @ gate_matrix(prev)
                    merged = None if _is_identity(m) else Gate("U", (q,), (), m)
                out[i] = merged
                if merged is None:
                    del last[q]
                continue
        out.append(g)
        for q in g.qubits:
            last[q] = len(out) - 1
    return [g for g in out if g is not None]


def _asap_layers(program: Iterable[Gate], n_qubits: int) -> List[List[Gate]]:
    layers: List[List[Gate]] = []
    front = [0] * n_qubits
    floor = 0
    for g in program:
        if g is BARRIER:
            floor = len(layers)
            continue
        start = max([front[q] for q in g.qubits] + [floor])
        while len(layers) <= start:
            layers.append([])
        layers[start].append(g)
        for q in g.qubits:
            front[q] = start + 1
    return layers


def assemble(
    program: Sequence[Gate],
    n_qubits: int,
    coords: List[Tuple[int, int]],
    profile: Optional[PlatformProfile],
    provenance: Dict[str, Any],
    **extra,
) -> Circuit:
    lowered = [out for g in program for out in _lower(g, profile)]
    merged = _merge_single_qubit_runs(lowered)
    layers = _asap_layers(merged, n_qubits)
    return Circuit(n_qubits=n_qubits, coords=coords, layers=layers, provenance=provenance, **extra)


def _provenance(algorithm: str, model: str, profile: Optional[PlatformProfile]) -> Dict[str, Any]:
    return {
        "algorithm": algorithm,
        "model": model,
        "platform": profile.name if profile else "ideal",
        "variant": profile.variant if profile else "",
        "gate_set": profile.gate_set if profile else "ideal",
    }


# -----------------------------
# Standard gate model
# -----------------------------
def snake_coords(n: int) -> List[Tuple[int, int]]:
    """Grid coordinates of qubits numbered along a boustrophedon path, width ceil(√n)."""
    width = math.isqrt(n - 1) + 1 if n > 1 else 1
    coords = []
    for i in range(n):
        row, offset = divmod(i, width)
        col = offset if row % 2 == 0 else width - 1 - offset
        coords.append((row, col))
    return coords


def _grid_graph(coords: Sequence[Tuple[int, int]], diagonal: bool) -> nx.Graph:
    index = {c: i for i, c in enumerate(coords)}
    graph = nx.Graph()
    graph.add_nodes_from(range(len(coords)))
    steps = [(0, 1), (1, 0)] + ([(1, 1), (1, -1)] if diagonal else [])
    for (r, c), i in index.items():
        for dr, dc in steps:
            j = index.get((r + dr, c + dc))
            if j is not None:
                graph.add_edge(i, j)
    return graph


def build_qft_sgm(N: int, profile: Optional[PlatformProfile]) -> Circuit:
    """Linear nearest-neighbour QFT along the snake path of the grid.

    Stage j applies H to logical j and then, for every k > j, a controlled
    phase 2π/2^{k−j+1} followed by a SWAP that moves j one step down the line.
    The physical output equals the DFT with qubit i holding output bit i.
    """
    if N < 2:
        raise ConfigurationError(f"QFT needs at least 2 qubits, got {N}")
    position = list(range(N))
    program: List[Gate] = []
    for j in range(N):
        program.append(_single("H", position[j]))
        for k in range(j + 1, N):
            a, b = position[j], position[k]
            program.append(Gate("CP", (a, b), (2.0 * np.pi / 2 ** (k - j + 1),)))
            program.append(Gate("SWAP", (a, b)))
            position[j], position[k] = b, a
    identity = list(range(N))
    return assemble(
        program, N, snake_coords(N), profile, _provenance("QFT", "SGM", profile),
        input_map=identity, output_map=identity,
    )


@dataclass
class SpinGlassInstance:
    N: int
    couplings: Dict[Tuple[int, int], float]

    def __post_init__(self):
        if self.N < 2:
            raise ConfigurationError(f"Spin glass needs at least 2 qubits, got {self.N}")
        for (n, m) in self.couplings:
            if not 0 <= n < m < self.N:
                raise ConfigurationError(f"Invalid coupling index ({n}, {m}) for N={self.N}")

    @classmethod
    def random(cls, N: int, seed: Optional[int] = 0) -> "SpinGlassInstance":
        rng = np.random.default_rng(seed)
        pairs = list(itertools.combinations(range(N), 2))
        values = rng.normal(size=len(pairs))
        return cls(N, {p: float(v) for p, v in zip(pairs, values)})

    def J(self, n: int, m: int) -> float:
        return self.couplings.get((min(n, m), max(n, m)), 0.0)


def build_qaoa_sgm_step(
    instance: SpinGlassInstance,
    angles: Tuple[float, float],
    profile: Optional[PlatformProfile],
) -> Circuit:
    """exp(−iα Σσx)·exp(−iβ Σ J σzσz) on the grid, routed with a greedy SWAP router.

    Pending interactions that are adjacent are executed first; otherwise the
    closest pending pair is brought together along a shortest path.
    """
    beta, alpha = angles
    N = instance.N
    coords = snake_coords(N)
    # nnn couplings are left unused in the gate model: routing stays on the nearest-neighbour grid
    graph = _grid_graph(coords, False)
    where = list(range(N))  # logical -> physical
    pending = [
        (n, m) for (n, m), J in sorted(instance.couplings.items()) if J != 0.0
    ]
    program: List[Gate] = []
    distances = dict(nx.all_pairs_shortest_path_length(graph))
    while pending:
        adjacent = [(n, m) for n, m in pending if graph.has_edge(where[n], where[m])]
        if adjacent:
            for n, m in adjacent:
                program.append(Gate("RZZ", (where[n], where[m]), (2.0 * beta * instance.J(n, m),)))
            pending = [pair for pair in pending if pair not in set(adjacent)]
            continue
        n, m = min(pending, key=lambda pair: distances[where[pair[0]]][where[pair[1]]])
        path = nx.shortest_path(graph, where[n], where[m])
        occupant = {phys: logical for logical, phys in enumerate(where)}
        for a, b in zip(path[:-2], path[1:-1]):
            program.append(Gate("SWAP", (a, b)))
            la, lb = occupant[a], occupant[b]
            where[la], where[lb] = b, a
            occupant[a], occupant[b] = lb, la
    for q in range(N):
        if alpha != 0.0:
            program.append(_single("RX", q, 2.0 * alpha))
    return assemble(
        program, N, coords, profile, _provenance("QAOA", "SGM", profile),
        input_map=list(range(N)), output_map=list(where),
    )


# -----------------------------
# Parity mapping
# -----------------------------
@dataclass(frozen=True)
class Plaquette:
    anchor: Tuple[int, int]
    qubits: Tuple[int, ...]  # ordered along a nearest-neighbour chain


def pm_qaoa_layout(N: int) -> Tuple[List[Tuple[int, int]], List[Plaquette]]:
    """Parity qubit (n, m), n < m, sits at grid coordinate (n, m); plaquettes anchored at (n, m)."""
    if N < 3:
        raise ConfigurationError(f"Parity-mapped QAOA needs N >= 3, got {N}")
    coords = list(itertools.combinations(range(N), 2))
    index = {c: i for i, c in enumerate(coords)}
    plaquettes = []
    for n in range(N - 1):
        for m in range(n + 1, N - 1):
            ring = [(n, m), (n, m + 1), (n + 1, m + 1)]
            if m > n + 1:
                ring.append((n + 1, m))
            plaquettes.append(Plaquette((n, m), tuple(index[c] for c in ring)))
    return coords, plaquettes


def _conflict(a: Plaquette, b: Plaquette, platform: str) -> bool:
    if platform == "atoms":
        # one idle line of atoms between simultaneously driven plaquettes
        return abs(a.anchor[0] - b.anchor[0]) < 3 and abs(a.anchor[1] - b.anchor[1]) < 3
    return bool(set(a.qubits) & set(b.qubits))


def closed_form_colouring(plaquettes: Sequence[Plaquette], platform: str) -> List[int]:
    k = 3 if platform == "atoms" else 2
    return [(p.anchor[0] % k) * k + (p.anchor[1] % k) for p in plaquettes]


class _ColouringCollector(cp_model.CpSolverSolutionCallback):
    def __init__(self, layers_var):
        cp_model.CpSolverSolutionCallback.__init__(self)
        self.layers_var = layers_var
        self.solutions = 0

    def on_solution_callback(self):
        self.solutions += 1
        logger.debug("Colouring solution %d with %d layers", self.solutions, self.Value(self.layers_var))


def schedule_constraints(
    plaquettes: Sequence[Plaquette],
    platform: str,
    max_layers: int,
    time_limit_s: float = 5.0,
    workers: int = 1,
) -> Tuple[List[int], str]:
    """Colour plaquettes into as few parallel layers as possible with CP-SAT.

    Falls back to the closed-form colouring when the solver finds nothing.
    Colours are renumbered by first appearance.
    """
    if not plaquettes:
        return [], "EMPTY"
    fallback = closed_form_colouring(plaquettes, platform)
    model = cp_model.CpModel()
    colours = [model.NewIntVar(0, max_layers - 1, f"c_{i}") for i in range(len(plaquettes))]
    for i, j in itertools.combinations(range(len(plaquettes)), 2):
        if _conflict(plaquettes[i], plaquettes[j], platform):
            model.Add(colours[i] != colours[j])
    n_layers = model.NewIntVar(1, max_layers, "n_layers")
    for c in colours:
        model.Add(n_layers >= c + 1)
    model.Minimize(n_layers)
    for c, hint in zip(colours, fallback):
        if hint < max_layers:
            model.AddHint(c, hint)

    solver = cp_model.CpSolver()
    solver.parameters.max_time_in_seconds = time_limit_s
    # single worker and fixed seed keep the colouring reproducible
    solver.parameters.num_search_workers = workers
    solver.parameters.random_seed = 0
    collector = _ColouringCollector(n_layers)
    status = solver.Solve(model, collector)
    status_name = solver.StatusName(status)
    logger.info("Constraint colouring (%s, %d plaquettes): %s", platform, len(plaquettes), status_name)

    if status in [cp_model.OPTIMAL, cp_model.FEASIBLE]:
        raw = [solver.Value(c) for c in colours]
    else:
        logger.warning("CP-SAT found no colouring (%s); using the closed-form colouring", status_name)
        raw, status_name = fallback, "FALLBACK"
    renumber: Dict[int, int] = {}
    result = [renumber.setdefault(c, len(renumber)) for c in raw]
    return result, status_name


def build_qaoa_pm_step(
    instance: SpinGlassInstance,
    angles: Tuple[float, float, float],
    profile: Optional[PlatformProfile],
    native_constraints: Optional[bool] = None,
    time_limit_s: float = 5.0,
) -> Circuit:
    """Constraint layers exp(−iγH_c), then local fields exp(−iβΣJ̃σz), then the mixer."""
    beta, alpha, gamma = angles
    N = instance.N
    coords, plaquettes = pm_qaoa_layout(N)
    K = len(coords)
    if native_constraints is None:
        native_constraints = profile is None or {"ZZZ", "ZZZZ"} <= profile.native_gates
    if native_constraints and profile is not None and not {"ZZZ", "ZZZZ"} <= profile.native_gates:
        raise ConfigurationError(f"Profile {profile.label} has no native constraint gates")

    platform = profile.name if profile else "superconducting"
    max_layers = profile.constraint_layers if profile else 4
    colours, status = schedule_constraints(plaquettes, platform, max_layers, time_limit_s)
    n_layers = max(colours) + 1 if colours else 0

    program: List[Gate] = []
    for layer in range(n_layers):
        for p, c in zip(plaquettes, colours):
            if c != layer:
                continue
            gate = Gate("ZZZZ" if len(p.qubits) == 4 else "ZZZ", p.qubits, (gamma,))
            program.extend([gate] if native_constraints else _lower(gate, _CNOT_ONLY))
        program.append(BARRIER)
    for k, (n, m) in enumerate(coords):
        J = instance.J(n, m)
        if J != 0.0:
            program.append(_single("RZ", k, 2.0 * beta * J))
    if alpha != 0.0:
        program.extend(_single("RX", k, 2.0 * alpha) for k in range(K))

    provenance = _provenance("QAOA", "PM", profile)
    provenance.update(native_constraints=native_constraints, colouring=status)
    return assemble(program, K, coords, profile, provenance, constraint_layers=n_layers)


# decomposes constraint gates into CNOT chains; the profile lowers the CNOTs afterwards
_CNOT_ONLY = PlatformProfile(
    name="decomposition", gate_set="QGS", variant="cnot", gate_times={"local": 1.0, "CNOT": 1.0},
    single_qubit_error_time=1.0, multi_qubit_error_time=1.0, constraint_layers=1,
    native_gates=frozenset({"CNOT"}),
)


def pm_qft_layout(N: int) -> List[Tuple[int, int]]:
    """Qubit (j, k), j <= k, sits at grid coordinate (j, k)."""
    return [(j, k) for j in range(N) for k in range(j, N)]


def build_qft_pm(N: int, profile: Optional[PlatformProfile], hadamard_passes: int = 2) -> Circuit:
    """Resource model of the parity-mapped QFT on K = N(N+1)/2 qubits.

    A logical controlled phase becomes three single-qubit phases on (j,j),
    (k,k) and (j,k). A logical Hadamard on j runs `hadamard_passes` CZ chains
    over the N−1 links from (j,j) along row j and up column j.
    """
    if N < 2:
        raise ConfigurationError(f"QFT needs at least 2 qubits, got {N}")
    if hadamard_passes < 1:
        raise ConfigurationError("hadamard_passes must be at least 1")
    coords = pm_qft_layout(N)
    index = {c: i for i, c in enumerate(coords)}
    program: List[Gate] = []
    for j in range(N):
        row = [index[(j, k)] for k in range(j, N)]
        column = [index[(i, j)] for i in range(j, -1, -1)]
        chain_qubits = sorted(set(row) | set(column))
        for _ in range(hadamard_passes):
            program.extend(_single("H", q) for q in chain_qubits)
            for branch in (row, column):
                program.extend(Gate("CZ", (a, b)) for a, b in zip(branch, branch[1:]))
            program.extend(_single("H", q) for q in chain_qubits)
        for k in range(j + 1, N):
            theta = 2.0 * np.pi / 2 ** (k - j + 1)
            program.append(_single("RZ", index[(j, j)], theta / 2))
            program.append(_single("RZ", index[(k, k)], theta / 2))
            program.append(_single("RZ", index[(j, k)], -theta / 2))
    provenance = _provenance("QFT", "PM", profile)
    provenance["hadamard_passes"] = hadamard_passes
    return assemble(program, len(coords), coords, profile, provenance)


# -----------------------------
# Counting and timing
# -----------------------------
def count_gates(circuit: Circuit) -> Dict[str, int]:
    counts = {"single": 0, "two": 0, "three": 0, "four": 0}
    keys = {1: "single", 2: "two", 3: "three", 4: "four"}
    for g in circuit.gates:
        counts[keys[g.arity]] += 1
    return counts


def circuit_runtime_ns(circuit: Circuit, profile: PlatformProfile) -> float:
    return float(sum(max(profile.gate_time(g) for g in layer) for layer in circuit.layers if layer))


def weighted_runtime(circuit: Circuit, profile: PlatformProfile) -> float:
    """Σ_layers (slowest gate time) / (error time of the slowest gate's class)."""
    total = 0.0
    for layer in circuit.layers:
        if not layer:
            continue
        slowest = max(layer, key=lambda g: (profile.gate_time(g), g.arity))
        total += profile.gate_time(slowest) / profile.error_time(slowest)
    return total


# -----------------------------
# Dense oracles
# -----------------------------
def _apply(state: np.ndarray, matrix: np.ndarray, qubits: Sequence[int], n_qubits: int) -> np.ndarray:
    k = len(qubits)
    cols = state.shape[1]
    psi = state.reshape((2,) * n_qubits + (cols,))
    op = matrix.reshape((2,) * (2 * k))
    psi = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), list(qubits)))
    psi = np.moveaxis(psi, list(range(k)), list(qubits))
    return psi.reshape(2 ** n_qubits, cols)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    if circuit.n_qubits > 12:
        raise ConfigurationError(f"Refusing a dense unitary on {circuit.n_qubits} qubits")
    U = np.eye(2 ** circuit.n_qubits, dtype=complex)
    for g in circuit.gates:
        if g.name == "LOCAL":
            raise ConfigurationError("Circuit contains modeled gates without a unitary")
        U = _apply(U, gate_matrix(g), g.qubits, circuit.n_qubits)
    return U


def dft_matrix(n_qubits: int) -> np.ndarray:
    d = 2 ** n_qubits
    x = np.arange(d)
    return np.exp(2j * np.pi * np.outer(x, x) / d) / np.sqrt(d)


def qaoa_step_unitary(instance: SpinGlassInstance, beta: float, alpha: float) -> np.ndarray:
    """exp(−iαH_x)·exp(−iβH_z) on N logical qubits."""
    N = instance.N
    z = 1 - 2 * ((np.arange(2 ** N)[:, None] >> (N - 1 - np.arange(N))[None, :]) & 1)
    energy = sum(J * z[:, n] * z[:, m] for (n, m), J in instance.couplings.items())
    mixer = reduce(np.kron, [_rx(2.0 * alpha)] * N)
    return mixer @ np.diag(np.exp(-1j * beta * np.asarray(energy, dtype=float) * np.ones(2 ** N)))


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """Maps logical qubit j to physical qubit perm[j] (qubit 0 most significant)."""
    n = len(perm)
    d = 2 ** n
    P = np.zeros((d, d))
    for x in range(d):
        bits = [(x >> (n - 1 - j)) & 1 for j in range(n)]
        y = sum(bits[j] << (n - 1 - perm[j]) for j in range(n))
        P[y, x] = 1.0
    return P


def logical_unitary(circuit: Circuit) -> np.ndarray:
    """Circuit unitary expressed on logical qubits via its input and output maps."""
    U = circuit_unitary(circuit)
    n = circuit.n_qubits
    p_in = permutation_matrix(circuit.input_map or list(range(n)))
    p_out = permutation_matrix(circuit.output_map or list(range(n)))
    return p_out.T @ U @ p_in


def phase_insensitive_distance(U: np.ndarray, V: np.ndarray) -> float:
    """1 − |Tr(U†V)|/d."""
    return float(1.0 - abs(np.trace(U.conj().T @ V)) / U.shape[0])


# -----------------------------
# Sweeps
# -----------------------------
@dataclass
class SweepRow:
    algorithm: str
    platform: str
    variant: str
    model: str
    gateset: str
    N: int
    K: int
    weighted_time: float
    runtime_ns: float
    depth: int
    single: int
    two: int
    three: int
    four: int

    @property
    def multi(self) -> int:
        return self.two + self.three + self.four


SWEEP_COLUMNS = [f.name for f in SweepRow.__dataclass_fields__.values()]


def build_circuit(
    algorithm: str,
    model: str,
    N: int,
    profile: PlatformProfile,
    seed: Optional[int] = 0,
    angles: Tuple[float, float, float] = (0.3, 0.7, np.pi / 4),
    hadamard_passes: int = 2,
    time_limit_s: float = 5.0,
) -> Circuit:
    beta, alpha, gamma = angles
    if algorithm == "QFT":
        if model == "SGM":
            return build_qft_sgm(N, profile)
        return build_qft_pm(N, profile, hadamard_passes)
    if algorithm == "QAOA":
        instance = SpinGlassInstance.random(N, seed)
        if model == "SGM":
            return build_qaoa_sgm_step(instance, (beta, alpha), profile)
        return build_qaoa_pm_step(instance, (beta, alpha, gamma), profile, time_limit_s=time_limit_s)
    raise ConfigurationError(f"Unknown algorithm '{algorithm}', expected QFT or QAOA")


def sweep_row(algorithm: str, model: str, N: int, profile: PlatformProfile, **kwargs) -> SweepRow:
    if model not in ("SGM", "PM"):
        raise ConfigurationError(f"Unknown circuit model '{model}', expected SGM or PM")
    circuit = build_circuit(algorithm, model, N, profile, **kwargs)
    counts = count_gates(circuit)
    row = SweepRow(
        algorithm=algorithm, platform=profile.name, variant=profile.variant, model=model,
        gateset=profile.gate_set, N=N, K=circuit.n_qubits,
        weighted_time=weighted_runtime(circuit, profile), runtime_ns=circuit_runtime_ns(circuit, profile),
        depth=circuit.depth, **counts,
    )
    logger.info("%s-%s %s N=%d: K=%d weighted=%.4g two=%d three=%d four=%d", algorithm, model,
                profile.label, N, row.K, row.weighted_time, row.two, row.three, row.four)
    return row


def circuit_sweep(
    algorithms: Sequence[str],
    profiles: Sequence[PlatformProfile],
    models: Sequence[str],
    Ns: Sequence[int],
    seed: Optional[int] = 0,
    threads: int = 1,
    **kwargs,
) -> List[SweepRow]:
    """Every combination of algorithm × profile × model × N, in that nesting order."""
    jobs = [
        (a, m, N, p) for a in algorithms for p in profiles for m in models for N in Ns
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(sweep_row, a, m, N, p, seed=seed, **kwargs) for a, m, N, p in jobs]
            return [f.result() for f in futures]
    return [sweep_row(a, m, N, p, seed=seed, **kwargs) for a, m, N, p in jobs]


def write_sweep_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            data = asdict(row)
            writer.writerow([f"{data[c]:.10g}" if isinstance(data[c], float) else data[c] for c in SWEEP_COLUMNS])
    return path


def read_sweep_csv(path: Union[str, Path]) -> List[SweepRow]:
    rows = []
    with Path(path).open(newline="") as handle:
        for record in csv.DictReader(handle):
            missing = [c for c in SWEEP_COLUMNS if c not in record]
            if missing:
                raise ConfigurationError(f"Sweep file {path} lacks columns {missing}")
            rows.append(SweepRow(
                algorithm=record["algorithm"], platform=record["platform"], variant=record["variant"],
                model=record["model"], gateset=record["gateset"], N=int(record["N"]), K=int(record["K"]),
                weighted_time=float(record["weighted_time"]), runtime_ns=float(record["runtime_ns"]),
                depth=int(record["depth"]), single=int(record["single"]), two=int(record["two"]),
                three=int(record["three"]), four=int(record["four"]),
            ))
    return rows
