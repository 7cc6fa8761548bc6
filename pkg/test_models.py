#!/usr/bin/env python3
"""
Tests for the neutral-atom and transmon Hamiltonian models and the field configurations
"""
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from errors import ConfigurationError
from fields import TimeGrid
from models import (
    MHZ,
    AtomArrayConfig,
    TransmonPlaquetteConfig,
    auxiliary_to_lab_fields,
    build_atom_model,
    build_transmon_model,
    field_configuration,
)

GRID = TimeGrid(0.0, 100.0, 100)


def _random_values(model, fields, seed=0):
    rng = np.random.default_rng(seed)
    values = {}
    for f in fields:
        if f.bounds is None:
            values[f.name] = rng.uniform(-np.pi, np.pi)
        else:
            values[f.name] = rng.uniform(*f.bounds)
    return values


def test_atom_pair_blockade_shift():
    config = AtomArrayConfig()
    model, fields = build_atom_model(config, field_configuration("atoms_parallel"), GRID)
    assert model.dim == 9
    rr = model.basis_labels.index("rr")
    assert model.drift[rr, rr] == pytest.approx(40.0 * MHZ)
    assert model.logical_basis() == [0, 1, 3, 4]


def test_planar_square_diagonal_interaction():
    config = AtomArrayConfig(n_atoms=4, geometry="square_plaquette", coupling_mode="planar2d")
    assert config.interaction(0, 1) == pytest.approx(config.V)
    assert config.interaction(0, 2) == pytest.approx(config.V / 8)
    pseudo = AtomArrayConfig(n_atoms=4, geometry="square_plaquette", coupling_mode="pseudo2d")
    assert pseudo.interaction(0, 2) == pytest.approx(pseudo.V)


def test_geometry_must_match_atom_count():
    with pytest.raises(ConfigurationError):
        AtomArrayConfig(n_atoms=3, geometry="pair")


def test_atom_hamiltonian_is_hermitian_and_derivatives_match():
    model, fields = build_atom_model(AtomArrayConfig(), field_configuration("atoms_parallel"), GRID)
    values = _random_values(model, fields, seed=1)
    H = model.hamiltonian(values)
    np.testing.assert_allclose(H, H.conj().T, atol=1e-14)
    h = 1e-6
    for name in model.control_names:
        up, down = dict(values), dict(values)
        up[name] += h
        down[name] -= h
        numeric = (model.hamiltonian(up) - model.hamiltonian(down)) / (2 * h)
        np.testing.assert_allclose(model.derivative(name, values), numeric, atol=1e-8)


def test_phase_configuration_fields():
    config = AtomArrayConfig()
    _, fields = build_atom_model(config, field_configuration("atoms_phase"), GRID)
    by_name = {f.name: f for f in fields}
    assert by_name["omega_up"].frozen
    np.testing.assert_allclose(by_name["omega_up"].values, config.omega_max)
    assert by_name["delta"].frozen
    np.testing.assert_allclose(by_name["delta"].values, config.delta_max)
    assert by_name["omega_down"].frozen
    np.testing.assert_array_equal(by_name["omega_down"].values, 0.0)
    assert not by_name["phi_up"].frozen
    assert by_name["phi_up"].bounds is None


def test_sequential_configuration_windows():
    _, fields = build_atom_model(AtomArrayConfig(), field_configuration("atoms_sequential"), GRID)
    by_name = {f.name: f for f in fields}
    down = by_name["omega_down"].updatable
    up = by_name["omega_up"].updatable
    assert down[:50].all() and not down[50:].any()
    assert up[50:].all() and not up[:50].any()
    assert by_name["delta"].updatable.all()


def test_zero_detuning_range_freezes_delta():
    config = AtomArrayConfig(delta_max=0.0)
    _, fields = build_atom_model(config, field_configuration("atoms_parallel"), GRID)
    delta = {f.name: f for f in fields}["delta"]
    assert delta.frozen
    np.testing.assert_array_equal(delta.values, 0.0)


def test_local_fields_per_atom():
    config = AtomArrayConfig(n_atoms=3, geometry="triangle_plaquette", global_fields=False)
    model, _ = build_atom_model(config, field_configuration("atoms_parallel"), GRID)
    assert "phi_up_3" in model.control_names
    assert len(model.control_names) == 15


def test_configuration_platform_checks():
    with pytest.raises(ConfigurationError):
        field_configuration("atoms_everything")
    with pytest.raises(ConfigurationError):
        build_atom_model(AtomArrayConfig(), field_configuration("sc_full"), GRID)
    with pytest.raises(ConfigurationError):
        build_transmon_model(TransmonPlaquetteConfig(), field_configuration("atoms_phase"), GRID)


def test_transmon_model_structure():
    config = TransmonPlaquetteConfig.default(2)
    grid = TimeGrid(0.0, 10.0, 500)
    model, fields = build_transmon_model(config, field_configuration("sc_full"), grid)
    assert model.dim == 25
    assert set(model.control_names) == {"omega_1", "omega_2", "x_re_1", "x_im_1", "x_re_2", "x_im_2", "g_12"}
    values = _random_values(model, fields, seed=2)
    H = model.hamiltonian(values)
    np.testing.assert_allclose(H, H.conj().T, atol=1e-12)
    assert model.logical_basis() == [0, 1, 5, 6]


def test_single_atom_rabi_matrix_element():
    config = AtomArrayConfig(n_atoms=1, geometry="single")
    model, _ = build_atom_model(config, field_configuration("atoms_parallel"), GRID)
    values = {name: 0.0 for name in model.control_names}
    values["omega_up"] = config.omega_max
    H = model.hamiltonian(values)
    up, rydberg = model.basis_labels.index("u"), model.basis_labels.index("r")
    assert abs(H[rydberg, up]) == pytest.approx(config.omega_max / 2, rel=1e-12)
    assert H[rydberg, model.basis_labels.index("d")] == 0


def test_transmon_anharmonic_shift_of_second_level():
    config = TransmonPlaquetteConfig.default(1)
    model, _ = build_transmon_model(config, field_configuration("sc_noX"), TimeGrid(0.0, 1.0, 10))
    values = {name: 0.0 for name in model.control_names}
    values["omega_1"] = config.omega_rot
    H = model.hamiltonian(values)
    assert H[2, 2].real == pytest.approx(-config.alpha[0], rel=1e-12)


def test_coupler_cross_kerr_on_doubly_excited_state():
    config = TransmonPlaquetteConfig.default(2)
    model, _ = build_transmon_model(config, field_configuration("sc_noX"), TimeGrid(0.0, 1.0, 10))
    g = -30.0 * MHZ
    values = {name: 0.0 for name in model.control_names}
    values.update(omega_1=config.omega_rot, omega_2=config.omega_rot, g_12=g)
    H = model.hamiltonian(values)
    both = model.logical_index([1, 1])
    assert H[both, both].real == pytest.approx(g ** 2 / abs(config.eta), rel=1e-12)


@pytest.mark.parametrize("seed", range(25))
def test_hamiltonians_are_hermitian_for_random_controls(seed):
    atoms = AtomArrayConfig(n_atoms=3, geometry="triangle_plaquette", global_fields=False)
    model, fields = build_atom_model(atoms, field_configuration("atoms_parallel"), GRID)
    H = model.hamiltonian(_random_values(model, fields, seed=seed))
    np.testing.assert_allclose(H, H.conj().T, atol=1e-14)

    transmons = TransmonPlaquetteConfig.default(4, levels_per_transmon=3, nnn_coupling=True)
    model, fields = build_transmon_model(transmons, field_configuration("sc_full"), TimeGrid(0.0, 1.0, 10))
    H = model.hamiltonian(_random_values(model, fields, seed=seed))
    np.testing.assert_allclose(H, H.conj().T, atol=1e-12)


def test_transmon_interaction_configuration_freezes_g_at_minimum():
    config = TransmonPlaquetteConfig.default(2)
    _, fields = build_transmon_model(config, field_configuration("sc_interaction"), TimeGrid(0.0, 10.0, 50))
    by_name = {f.name: f for f in fields}
    np.testing.assert_allclose(by_name["g_12"].values, -40.0 * MHZ)
    assert by_name["x_re_1"].frozen and by_name["x_im_2"].frozen
    assert not by_name["omega_1"].frozen


def test_transmon_coupled_pairs():
    assert TransmonPlaquetteConfig.default(3).coupled_pairs == [(0, 1), (1, 2)]
    assert TransmonPlaquetteConfig.default(4).coupled_pairs == [(0, 1), (1, 2), (2, 3), (0, 3)]
    nnn = TransmonPlaquetteConfig.default(4, nnn_coupling=True)
    assert (0, 2) in nnn.coupled_pairs and (1, 3) in nnn.coupled_pairs


def test_highest_level_projector_counts_top_levels():
    config = TransmonPlaquetteConfig.default(2, levels_per_transmon=3)
    model, _ = build_transmon_model(config, field_configuration("sc_noX"), TimeGrid(0.0, 1.0, 10))
    proj = model.highest_level_projector()
    assert proj.sum() == 5  # 9 states minus the 2x2 block without a top level


def test_auxiliary_to_lab_fields():
    config = TransmonPlaquetteConfig.default(2)
    grid = TimeGrid(0.0, 10.0, 1000)
    _, fields = build_transmon_model(config, field_configuration("sc_full"), grid)
    by_name = {f.name: f for f in fields}
    amplitude, detuning = 10.0 * MHZ, 30.0 * MHZ
    t = grid.midpoints
    re = by_name["x_re_1"].with_values(amplitude * np.cos(detuning * t))
    im = by_name["x_im_1"].with_values(-amplitude * np.sin(detuning * t))
    amp, freq = auxiliary_to_lab_fields(re, im, config.omega_rot)
    assert amp.name == "drive_amplitude_1"
    np.testing.assert_allclose(amp.values, amplitude, rtol=1e-12)
    np.testing.assert_allclose(freq.values, config.omega_rot + detuning, rtol=1e-9)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
