#!/usr/bin/env python3
"""
Tests for piecewise-constant propagation
"""
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from errors import ConfigurationError
from fields import RandomFieldSpec, TimeGrid, random_guess
from models import (
    AtomArrayConfig,
    FieldAssignment,
    FieldConfiguration,
    FieldMode,
    build_atom_model,
    field_configuration,
)
from dynamics import final_states, propagate_backward, propagate_forward

RABI_ONLY = FieldConfiguration("atoms_rabi", {
    "omega_down": FieldAssignment(FieldMode.ZERO),
    "phi_down": FieldAssignment(FieldMode.ZERO),
    "omega_up": FieldAssignment(FieldMode.FROZEN, value="max"),
    "phi_up": FieldAssignment(FieldMode.ZERO),
    "delta": FieldAssignment(FieldMode.ZERO),
})


def test_rabi_pi_pulse_transfers_population():
    config = AtomArrayConfig(n_atoms=1, geometry="single", delta_max=0.0)
    T = np.pi / config.omega_max
    model, fields = build_atom_model(config, RABI_ONLY, TimeGrid(0.0, T, 200))
    up = model.basis_state(1)
    trajectory = propagate_forward(model, fields, up)
    population = abs(trajectory.final[2, 0]) ** 2
    assert population == pytest.approx(1.0, abs=1e-8)


def _random_pair(n_steps, duration=300.0, seed=3):
    model, templates = build_atom_model(
        AtomArrayConfig(), field_configuration("atoms_parallel"), TimeGrid(0.0, duration, n_steps)
    )
    rng = np.random.default_rng(seed)
    spec = RandomFieldSpec((1, 20), seed=seed)
    return model, [random_guess(t, spec, rng) for t in templates]


def test_unitarity_over_many_steps():
    model, fields = _random_pair(1000)
    psi0 = np.column_stack([model.basis_state(i) for i in model.logical_basis()])
    trajectory = propagate_forward(model, fields, psi0)
    assert trajectory.states.shape == (1001, 9, 4)
    assert trajectory.norm_drift < 1e-9


def test_backward_undoes_forward():
    model, fields = _random_pair(200)
    psi0 = model.basis_state(4)
    final = propagate_forward(model, fields, psi0).final
    back = propagate_backward(model, fields, final)
    np.testing.assert_allclose(back.initial[:, 0], psi0, atol=1e-10)


def test_final_states_match_trajectory():
    model, fields = _random_pair(150)
    initial = [model.basis_state(i) for i in model.logical_basis()]
    finals = final_states(model, fields, initial)
    trajectory = propagate_forward(model, fields, np.column_stack(initial))
    for l, psi in enumerate(finals):
        np.testing.assert_allclose(psi, trajectory.final[:, l], atol=1e-12)


def test_step_halving_is_second_order():
    duration = 200.0

    def final(n_steps):
        model, templates = build_atom_model(
            AtomArrayConfig(), field_configuration("atoms_parallel"), TimeGrid(0.0, duration, n_steps)
        )
        t = templates[0].grid.midpoints
        smooth = {
            "omega_down": lambda f: f.bounds[1] * (0.5 + 0.4 * np.sin(2 * np.pi * t / duration)),
            "phi_down": lambda f: 1.5 * np.cos(2 * np.pi * t / duration),
            "omega_up": lambda f: f.bounds[1] * (0.5 + 0.4 * np.cos(np.pi * t / duration)),
            "phi_up": lambda f: 0.8 * np.sin(3 * np.pi * t / duration),
            "delta": lambda f: 0.5 * f.bounds[1] * np.sin(np.pi * t / duration),
        }
        fields = [f.with_values(smooth[f.name](f)) for f in templates]
        psi0 = np.column_stack([model.basis_state(i) for i in model.logical_basis()])
        return propagate_forward(model, fields, psi0).final

    coarse, medium, fine = final(200), final(400), final(800)
    ratio = np.linalg.norm(coarse - medium) / np.linalg.norm(medium - fine)
    assert 3.5 <= ratio <= 4.5


def test_phase_configuration_leaves_all_down_untouched():
    model, templates = build_atom_model(AtomArrayConfig(), field_configuration("atoms_phase"), TimeGrid(0.0, 80.0, 80))
    rng = np.random.default_rng(12)
    fields = [random_guess(t, RandomFieldSpec((1, 20), seed=12), rng) for t in templates]
    down_down = model.basis_state(model.logical_index([0, 0]))
    up_up = model.basis_state(model.logical_index([1, 1]))
    final, driven = final_states(model, fields, [down_down, up_up])
    np.testing.assert_allclose(final, down_down, atol=1e-12)
    assert abs(np.vdot(up_up, driven)) < 1.0 - 1e-6


def test_missing_field_raises():
    model, fields = _random_pair(10)
    with pytest.raises(ConfigurationError):
        propagate_forward(model, fields[1:], model.basis_state(0))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
