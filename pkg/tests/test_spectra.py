import json
from pathlib import Path

import numpy as np
import pytest

from LinearPencil import LinearPencil, NotSelfadjointError, flatness_constants, pencil_from_json
from Spectra import (VALIDITY_NOTE, NotSemiFlatError, cluster_eigenvalues, entropy_dimension, fisher_bounds,
                     full_spectrum, hoelder_constant, log_energy_bound)

DATA = Path(__file__).resolve().parent.parent / "data"


def load(name):
    return pencil_from_json(json.loads((DATA / name).read_text()))


def test_cluster_eigenvalues():
    assert cluster_eigenvalues(np.array([1.0, 1.0 + 1e-12, 2.0, -1.0])) == pytest.approx([-1.0, 1.0, 2.0])
    assert cluster_eigenvalues(np.array([])) == []


def test_diagonal_pencil_has_one_atom():
    report = full_spectrum(load("diag_x1_1.json"))
    assert report.candidates_checked == pytest.approx([0.0, 1.0])
    assert len(report.atoms) == 1
    atom = report.atoms[0]
    assert atom.lam == pytest.approx(1.0)
    assert atom.rho == 1
    assert atom.weight == pytest.approx(0.5)
    assert report.delta_star == pytest.approx(0.75)
    assert entropy_dimension(report) == pytest.approx(0.75)


def test_constant_pencil_is_all_atoms():
    P = LinearPencil.from_arrays([np.diag([1.0, 2.0])], selfadjoint=True)
    report = full_spectrum(P)
    assert [atom.lam for atom in report.atoms] == pytest.approx([1.0, 2.0])
    assert report.total_weight == pytest.approx(1.0)
    assert report.delta_star == pytest.approx(0.5)


def test_all_ones_has_atom_at_zero():
    report = full_spectrum(load("allones.json"))
    assert [atom.lam for atom in report.atoms] == pytest.approx([0.0])
    assert report.atoms[0].weight == pytest.approx(0.5)


def test_full_homogeneous_part_means_no_atoms():
    report = full_spectrum(load("pauli3.json"))
    assert report.homogeneous_full
    assert report.atoms == []
    assert report.delta_star == 1.0
    out = report.to_json()
    assert out["note"] == VALIDITY_NOTE
    assert out["N"] == 2


def test_atoms_need_selfadjoint_flag():
    P = LinearPencil.from_arrays([np.eye(2), np.array([[1, 2], [3, 4]])])
    with pytest.raises(NotSelfadjointError):
        full_spectrum(P)


def test_parallel_candidates_agree():
    P = LinearPencil.from_arrays([np.diag([0.0, 1.0, 1.0, 3.0]), np.diag([1.0, 0.0, 0.0, 0.0])], selfadjoint=True)
    serial = full_spectrum(P)
    parallel = full_spectrum(P, n_jobs=2)
    assert [a.lam for a in serial.atoms] == pytest.approx([a.lam for a in parallel.atoms])
    assert [a.rho for a in serial.atoms] == [2, 3]


def test_pauli_hoelder_constant():
    P = load("pauli3.json")
    flatness = flatness_constants(P, restarts=8, iters=200)
    constant = hoelder_constant(P, 3.0, flatness)
    assert constant.c == pytest.approx(2.0, abs=1e-3)
    assert constant.coefficient_norm_sq == pytest.approx(3.0)
    assert constant.C == pytest.approx(4 * (9 / 4) ** (1 / 3), rel=1e-3)
    assert log_energy_bound(P, 3.0, constant) == pytest.approx(-3 * constant.C)
    assert constant.to_json()["exponent"] == pytest.approx(2 / 3)


def test_hoelder_rejects_bad_inputs():
    P = load("pauli3.json")
    with pytest.raises(ValueError):
        hoelder_constant(P, 0.0)
    e11 = np.diag([1.0, 0.0])
    degenerate = LinearPencil.from_arrays([np.zeros((2, 2)), e11, e11], selfadjoint=True)
    with pytest.raises(NotSemiFlatError):
        hoelder_constant(degenerate, 2.0, restarts=4, iters=100)


def test_fisher_bounds():
    lower, upper = fisher_bounds(3, 1.0, 3.0)
    assert lower == pytest.approx(1.5)
    assert upper == pytest.approx(3.0)
    with pytest.raises(ValueError):
        fisher_bounds(2, 0.0, 1.0)
