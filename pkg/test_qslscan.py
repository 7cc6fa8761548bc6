#!/usr/bin/env python3
"""
Tests for speed-limit scans, their histograms and CSV output
"""
import csv
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from errors import ConfigurationError
from gates import make_gate
from models import (
    AtomArrayConfig,
    FieldAssignment,
    FieldConfiguration,
    FieldMode,
    TransmonPlaquetteConfig,
    field_configuration,
)
from optimizer import KrotovOptions
from qslscan import (
    ScanSpec,
    density_histogram,
    determine_qsl,
    expand_scan_specs,
    run_scan,
    write_best_eps_csv,
    write_histogram_csv,
)

ALL_OFF = FieldConfiguration("atoms_off", {
    base: FieldAssignment(FieldMode.ZERO) for base in ("omega_down", "phi_down", "omega_up", "phi_up", "delta")
})
TRIANGLE = AtomArrayConfig(n_atoms=3, geometry="triangle_plaquette")


def _small_cz_spec(**overrides):
    params = dict(
        gate=make_gate("CZ"),
        field_configuration=field_configuration("atoms_phase"),
        T_values=[60.0, 40.0],
        seed=17,
        atoms=AtomArrayConfig(),
        restarts_per_T=2,
        krotov=KrotovOptions(max_iterations=3),
    )
    params.update(overrides)
    return ScanSpec(**params)


def test_determine_qsl_stops_at_first_failure():
    T = [500, 450, 400, 350, 300]
    assert determine_qsl(T, [1e-5, 1e-4, 5e-4, 2e-3, 1e-4], 1e-3) == 400
    assert determine_qsl(T, [1e-2] * 5, 1e-3) is None
    assert determine_qsl(T, [1e-4] * 5, 1e-3) == 300


def test_scan_spec_validation():
    with pytest.raises(ConfigurationError, match="T_values"):
        _small_cz_spec(T_values=[40.0, 60.0])
    with pytest.raises(ConfigurationError):
        _small_cz_spec(transmons=TransmonPlaquetteConfig.default(2))
    with pytest.raises(ConfigurationError):
        _small_cz_spec(field_configuration=field_configuration("sc_full"))


def test_identity_scan_succeeds_at_every_duration():
    spec = ScanSpec(
        gate=make_gate("ZZZ", 0.0),
        field_configuration=ALL_OFF,
        T_values=[30.0, 20.0, 10.0],
        seed=1,
        atoms=TRIANGLE,
        restarts_per_T=2,
    )
    result = run_scan(spec)
    assert result.errors.shape == (3, 2)
    assert np.all(result.errors <= 1e-12)
    assert result.T_qsl == 10.0
    np.testing.assert_array_equal(result.success_fraction, 1.0)
    assert all(r.iterations_used == 0 for r in result.best_results.values())


def test_scan_is_reproducible_across_thread_counts():
    serial = run_scan(_small_cz_spec())
    again = run_scan(_small_cz_spec())
    threaded = run_scan(_small_cz_spec(threads=2))
    np.testing.assert_array_equal(serial.errors, again.errors)
    np.testing.assert_array_equal(serial.errors, threaded.errors)
    assert serial.T_qsl is None or serial.T_qsl in serial.T_values


def test_permuting_restart_seeds_keeps_the_speed_limit():
    forward = run_scan(_small_cz_spec(restarts_per_T=3, restart_seeds=[11, 12, 13]))
    permuted = run_scan(_small_cz_spec(restarts_per_T=3, restart_seeds=[13, 11, 12]))
    np.testing.assert_array_equal(permuted.errors, forward.errors[:, [2, 0, 1]])
    np.testing.assert_array_equal(permuted.best, forward.best)
    assert permuted.T_qsl == forward.T_qsl
    relaxed = max(forward.best) + 1e-9
    assert determine_qsl(forward.T_values, permuted.best, relaxed) == forward.T_values[-1]
    with pytest.raises(ConfigurationError, match="restart_seeds"):
        _small_cz_spec(restarts_per_T=3, restart_seeds=[1, 2])


def test_histogram_and_csv_outputs(tmp_path):
    result = run_scan(_small_cz_spec())
    table = density_histogram(result, bins=6)
    assert table.counts.shape == (2, 6)
    np.testing.assert_array_equal(table.counts.sum(axis=1), 2)
    exponents = np.log10(table.edges[[0, -1]])
    np.testing.assert_allclose(exponents, np.round(exponents))

    best = write_best_eps_csv(result, tmp_path / "best_eps_vs_T.csv")
    rows = list(csv.DictReader(best.open()))
    assert [r["T_ns"] for r in rows] == ["60", "40"]
    assert set(rows[0]) == {"label", "T_ns", "best_eps", "worst_eps", "success_fraction"}

    hist = write_histogram_csv(table, tmp_path / "histogram.csv")
    rows = list(csv.DictReader(hist.open()))
    assert len(rows) == 12
    assert sum(int(r["count"]) for r in rows) == 4


def test_histogram_of_exact_zeros_uses_floor():
    spec = ScanSpec(
        gate=make_gate("ZZZ", 0.0), field_configuration=ALL_OFF, T_values=[10.0], seed=0,
        atoms=TRIANGLE, restarts_per_T=3,
    )
    table = density_histogram(run_scan(spec), bins=2)
    assert table.counts.sum() == 3
    assert table.edges[0] <= 1e-16


def test_expand_scan_specs():
    base = ScanSpec(
        gate=make_gate("ZZZ", np.pi / 4, phase_shifted=True),
        field_configuration=field_configuration("atoms_phase"),
        T_values=[600.0, 500.0],
        seed=0,
        atoms=TRIANGLE,
        label="ZZZ",
    )
    specs = expand_scan_specs(base, gammas=[0.2, 0.4], delta_ratios=[0.1, 0.3])
    assert len(specs) == 4
    assert specs[0].label == "ZZZ;gamma=0.2;delta_ratio=0.1"
    assert specs[3].gate.gamma == pytest.approx(0.4)
    assert specs[3].gate.phase_shifted
    assert specs[3].atoms.delta_max == pytest.approx(0.3 * TRIANGLE.omega_max)
    with pytest.raises(ConfigurationError):
        expand_scan_specs(_small_cz_spec(), gammas=[0.1])


# -----------------------------
# Long reproductions of published speed limits
# -----------------------------
@pytest.mark.slow
def test_atom_cz_speed_limit():
    spec = ScanSpec(
        gate=make_gate("CZ"),
        field_configuration=field_configuration("atoms_phase"),
        T_values=[500.0, 450.0, 400.0, 350.0, 300.0, 250.0],
        seed=2024,
        atoms=AtomArrayConfig(),
        restarts_per_T=10,
        threads=4,
    )
    assert run_scan(spec).T_qsl == 350.0


@pytest.mark.slow
def test_transmon_cz_speed_limit():
    spec = ScanSpec(
        gate=make_gate("CZ"),
        field_configuration=field_configuration("sc_interaction"),
        T_values=[16.0, 14.0, 12.0, 10.0, 8.0, 6.0],
        seed=11,
        transmons=TransmonPlaquetteConfig.default(2),
        restarts_per_T=10,
        threads=4,
    )
    assert run_scan(spec).T_qsl in (8.0, 10.0, 12.0)


@pytest.mark.slow
@pytest.mark.parametrize("mode, expected", [("pseudo2d", 400.0), ("planar2d", 600.0)])
def test_atom_zzz_speed_limit(mode, expected):
    spec = ScanSpec(
        gate=make_gate("ZZZ", np.pi / 4, phase_shifted=True),
        field_configuration=field_configuration("atoms_phase"),
        T_values=[700.0, 650.0, 600.0, 550.0, 500.0, 450.0, 400.0, 350.0, 300.0],
        seed=7,
        atoms=AtomArrayConfig(n_atoms=3, geometry="triangle_plaquette", coupling_mode=mode),
        restarts_per_T=10,
        threads=4,
    )
    assert run_scan(spec).T_qsl == expected


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
