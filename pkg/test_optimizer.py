#!/usr/bin/env python3
"""
Tests for the gate error, its gradient and the Krotov optimizer
"""
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from dynamics import final_states
from errors import ConfigurationError
from fields import RandomFieldSpec, TimeGrid, random_guess
from gates import GateTarget, embed_targets, make_gate
from models import (
    AtomArrayConfig,
    FieldAssignment,
    FieldConfiguration,
    FieldMode,
    TransmonPlaquetteConfig,
    build_atom_model,
    build_transmon_model,
    field_configuration,
)
from optimizer import KrotovOptions, costate_boundary, error_gradient, gate_error, krotov_iterate

ALL_OFF = FieldConfiguration("atoms_off", {
    base: FieldAssignment(FieldMode.ZERO) for base in ("omega_down", "phi_down", "omega_up", "phi_up", "delta")
})


def _guesses(templates, seed, m_range=(1, 20)):
    rng = np.random.default_rng(seed)
    spec = RandomFieldSpec(m_range, seed=seed)
    return [random_guess(t, spec, rng) for t in templates]


def _cz_problem(T=400.0, seed=0):
    model, templates = build_atom_model(AtomArrayConfig(), field_configuration("atoms_phase"), TimeGrid(0.0, T, int(T)))
    return model, _guesses(templates, seed), embed_targets(make_gate("CZ"), model)


def test_gate_error_reference_values():
    model, _ = build_atom_model(AtomArrayConfig(), field_configuration("atoms_phase"), TimeGrid(0, 1, 1))
    targets = embed_targets(make_gate("CZ"), model)
    assert gate_error(targets.targets, targets) == pytest.approx(0.0, abs=1e-12)
    assert gate_error([-t for t in targets.targets], targets) == pytest.approx(2.0, abs=1e-12)
    rydberg = model.basis_state(8)
    assert gate_error([rydberg] * 4, targets) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ConfigurationError):
        gate_error(targets.targets[:3], targets)


def test_error_gradient_matches_finite_differences():
    config = AtomArrayConfig()
    model, templates = build_atom_model(config, field_configuration("atoms_parallel"), TimeGrid(0.0, 40.0, 80))
    fields = _guesses(templates, seed=5)
    targets = embed_targets(make_gate("CZ"), model)
    gradient = error_gradient(model, fields, targets)

    def error_of(fs):
        return gate_error(final_states(model, fs, targets.initial), targets)

    h = 1e-6
    for name in ("phi_up", "omega_down"):
        j = model.control_names.index(name)
        numeric = []
        for k in (10, 40, 70):
            up = [f.copy() for f in fields]
            down = [f.copy() for f in fields]
            up[j].values[k] += h
            down[j].values[k] -= h
            numeric.append(-(error_of(up) - error_of(down)) / (2 * h))
        analytic = gradient[name][[10, 40, 70]]
        assert np.linalg.norm(analytic - numeric) <= 0.05 * np.linalg.norm(numeric)


def test_converged_guess_stops_immediately():
    model, templates = build_atom_model(AtomArrayConfig(), ALL_OFF, TimeGrid(0.0, 20.0, 20))
    targets = embed_targets(GateTarget("I", np.eye(4, dtype=complex)), model)
    result = krotov_iterate(model, templates, targets)
    assert result.converged
    assert result.iterations_used == 0
    assert result.final_error == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("geometry, n_atoms, gate, n_trgt", [
    ("pair", 2, make_gate("CZ"), 4),
    ("triangle_plaquette", 3, make_gate("ZZZ", np.pi / 4), 8),
])
def test_costate_boundary_is_scaled_target(geometry, n_atoms, gate, n_trgt):
    config = AtomArrayConfig(n_atoms=n_atoms, geometry=geometry)
    model, _ = build_atom_model(config, field_configuration("atoms_phase"), TimeGrid(0.0, 1.0, 1))
    targets = embed_targets(gate, model)
    chis = costate_boundary(targets)
    assert len(chis) == n_trgt
    for chi, target in zip(chis, targets.targets):
        assert np.linalg.norm(chi) == pytest.approx(1.0 / (2 * n_trgt), abs=1e-14)
        # parallel with a positive real overlap
        overlap = np.vdot(target, chi)
        assert overlap.real == pytest.approx(np.linalg.norm(chi) * np.linalg.norm(target), abs=1e-14)
        assert overlap.imag == pytest.approx(0.0, abs=1e-14)


def test_running_cost_vanishes_without_gradient():
    # no laser amplitude: the phase has no handle on the dynamics, so every update is zero
    phase_only = FieldConfiguration("atoms_phase_only", {
        "omega_down": FieldAssignment(FieldMode.ZERO), "phi_down": FieldAssignment(FieldMode.ZERO),
        "omega_up": FieldAssignment(FieldMode.ZERO), "phi_up": FieldAssignment(FieldMode.OPTIMIZED),
        "delta": FieldAssignment(FieldMode.ZERO),
    })
    model, templates = build_atom_model(AtomArrayConfig(), phase_only, TimeGrid(0.0, 50.0, 50))
    guesses = _guesses(templates, seed=3)
    targets = embed_targets(make_gate("CZ"), model)
    result = krotov_iterate(model, guesses, targets, KrotovOptions(max_iterations=3))
    assert result.iterations_used == 3
    assert result.running_cost_trace == [0.0, 0.0, 0.0, 0.0]
    np.testing.assert_allclose(result.error_trace, 0.5, atol=1e-12)
    phase = {f.name: f for f in result.fields}["phi_up"]
    np.testing.assert_array_equal(phase.values, {f.name: f for f in guesses}["phi_up"].values)


def test_running_cost_is_zero_for_a_converged_guess():
    model, templates = build_atom_model(AtomArrayConfig(), ALL_OFF, TimeGrid(0.0, 20.0, 20))
    targets = embed_targets(GateTarget("I", np.eye(4, dtype=complex)), model)
    result = krotov_iterate(model, templates, targets)
    assert result.running_cost_trace == [0.0]
    assert result.j_trace == result.error_trace


def test_krotov_is_monotonic_on_short_runs():
    for seed in range(3):
        model, guesses, targets = _cz_problem(T=400.0, seed=seed)
        result = krotov_iterate(model, guesses, targets, KrotovOptions(max_iterations=15))
        assert result.iterations_used > 0
        assert np.all(np.diff(result.j_trace) <= 1e-10)
        assert np.all(np.diff(result.error_trace) <= 1e-10)
        assert result.final_error < result.error_trace[0]


def test_bounded_fields_stay_inside_bounds():
    model, templates = build_atom_model(AtomArrayConfig(), field_configuration("atoms_parallel"), TimeGrid(0, 100, 100))
    targets = embed_targets(make_gate("CZ"), model)
    result = krotov_iterate(model, _guesses(templates, 2), targets, KrotovOptions(max_iterations=5))
    for f in result.fields:
        if f.bounds is not None:
            assert np.all(f.values > f.bounds[0]) and np.all(f.values < f.bounds[1])


def test_frozen_and_inactive_samples_are_not_updated():
    model, templates = build_atom_model(AtomArrayConfig(), field_configuration("atoms_sequential"), TimeGrid(0, 100, 100))
    targets = embed_targets(make_gate("CZ"), model)
    guesses = _guesses(templates, 8)
    result = krotov_iterate(model, guesses, targets, KrotovOptions(max_iterations=3))
    before = {f.name: f for f in guesses}
    for f in result.fields:
        frozen = ~before[f.name].updatable
        np.testing.assert_array_equal(f.values[frozen], before[f.name].values[frozen])


def test_transmon_run_reports_leakage():
    config = TransmonPlaquetteConfig.default(2)
    model, templates = build_transmon_model(config, field_configuration("sc_interaction"), TimeGrid(0.0, 4.0, 200))
    targets = embed_targets(make_gate("CZ"), model)
    result = krotov_iterate(model, _guesses(templates, 1, (1, 40)), targets, KrotovOptions(max_iterations=2))
    assert result.highest_level_population is not None
    assert isinstance(result.leakage_ok, bool)
    assert result.to_dict(include_fields=False)["leakage_ok"] == result.leakage_ok


def test_options_validation():
    with pytest.raises(ConfigurationError):
        KrotovOptions(epsilon_max=0.0)
    with pytest.raises(ConfigurationError):
        KrotovOptions(lambda_k=-1.0)
    with pytest.raises(ConfigurationError):
        KrotovOptions(max_iterations=0)


@pytest.mark.slow
def test_krotov_is_monotonic_for_ten_restarts():
    for seed in range(10):
        model, guesses, targets = _cz_problem(T=400.0, seed=100 + seed)
        result = krotov_iterate(model, guesses, targets, KrotovOptions(max_iterations=200))
        assert np.all(np.diff(result.j_trace) <= 1e-10)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
