import csv
import math

import numpy as np
import pytest

from demcrack.analysis import (
    AnalysisError,
    ErrorReport,
    LoadDisplacementCurve,
    antiplane_reference,
    convergence_order,
    crack_length,
    crack_speed_fit,
    fill_rates,
    l2_errors,
    reaction_force,
    write_error_reports,
    write_load_curve,
)
from demcrack.fracture import initialize_crack
from demcrack.mesh import INTERIOR, generate_structured_strip, rectangle_tags
from demcrack.runner.scenario import build_problem, builtin
from oracles import jittered_square

A = np.array([[0.3, -1.2], [0.7, 2.0]])
b = np.array([0.5, -0.25])


def test_affine_field_has_zero_error(jittered):
    u = jittered.cell_barycenters @ A.T + b
    G = np.broadcast_to(A, (jittered.n_cells, 2, 2))
    rep = l2_errors(jittered, u, G, lambda x: x @ A.T + b,
                    lambda x: np.broadcast_to(A, (len(x), 2, 2)))
    assert rep.l2_error <= 1e-10 and rep.energy_error <= 1e-10
    assert rep.n_dofs == 2 * jittered.n_cells


def test_zero_solution_gives_norm_of_reference():
    m = jittered_square(8, seed=5)
    # quadratic reference: the degree-2 rule is exact for |u|^2 of degree 2
    ref = lambda x: x[:, :1]
    rep = l2_errors(m, np.zeros(m.n_cells), np.zeros((m.n_cells, 1, 2)), ref,
                    lambda x: np.tile([[1.0, 0.0]], (len(x), 1)))
    assert rep.l2_error == pytest.approx(math.sqrt(1 / 3), rel=1e-12)
    assert rep.energy_error == pytest.approx(1.0, rel=1e-12)


def test_convergence_order_examples():
    assert convergence_order(4, 2, 100, 400) == pytest.approx(1.0)
    assert convergence_order(3, 3, 100, 400) == 0.0
    assert convergence_order(5.66e-2, 3.95e-2, 7312, 28832) == pytest.approx(0.52, abs=0.01)
    with pytest.raises(AnalysisError):
        convergence_order(1, 1, 10, 10)
    with pytest.raises(AnalysisError):
        convergence_order(0, 1, 10, 20)


def test_fill_rates():
    reps = fill_rates([ErrorReport(100, 4.0, 2.0), ErrorReport(400, 1.0, 1.0)])
    assert math.isnan(reps[0].l2_rate)
    assert reps[1].l2_rate == pytest.approx(2.0) and reps[1].energy_rate == pytest.approx(1.0)


def test_reaction_force_uniform_stress():
    m = generate_structured_strip(1.0, 1.0, 0.25, tagging=rectangle_tags(0, 0, 1, 1))
    s = 3.5
    stress = np.zeros((m.n_cells, 2, 2))
    stress[:, 1, 1] = s
    assert reaction_force(m, stress, "top", [0.0, 1.0]) == pytest.approx(s)
    assert reaction_force(m, stress, "bottom", [0.0, 1.0]) == pytest.approx(-s)
    assert reaction_force(m, np.zeros_like(stress), "top", [0.0, 1.0]) == 0.0
    with pytest.raises(AnalysisError):
        reaction_force(m, stress, "nowhere", [0.0, 1.0])
    with pytest.raises(AnalysisError, match="direction"):
        reaction_force(m, stress, "top")


def test_crack_lengths():
    problem = build_problem(builtin("crack-speed"))
    st = initialize_crack(problem.mesh, problem.initial_crack)
    assert crack_length(problem.mesh) == pytest.approx(1.0)
    m = generate_structured_strip(1.0, 1.0, 0.25)
    assert crack_length(m) == 0.0
    f = int(np.flatnonzero(m.status == INTERIOR)[0])
    m.split_facet(f)
    assert crack_length(m) == pytest.approx(m.facet_lengths[f])
    assert len(st.crack_facets) == 10


def test_crack_speed_fit():
    u = np.linspace(0, 1, 21)
    L = np.maximum(1.0, 0.5 + 4.47 * u)
    assert crack_speed_fit(u, L, 1.0) == pytest.approx(4.47)
    assert math.sqrt(0.2 * 1.0 / 0.01) == pytest.approx(4.4721, abs=1e-4)
    with pytest.raises(AnalysisError):
        crack_speed_fit(u, np.ones_like(u), 1.0)


def test_staircase_fit_is_close_to_line():
    # the large-increment curve only sees every tenth sample of the line
    u = np.arange(1, 11) * 0.1
    L = 1.0 + np.floor((4.47 * u) / 0.1 + 1e-9) * 0.1
    assert crack_speed_fit(u, L, 1.0) == pytest.approx(4.47, rel=0.051)


def test_antiplane_reference():
    u, _ = antiplane_reference(0.3, 0.0, 1.0, 1.0, 1.0)
    assert u == 0.0
    a, mu = 0.8, 1.7
    u, _ = antiplane_reference(a / 2, math.pi, mu, a, mu)
    assert u == pytest.approx(a)
    with pytest.raises(AnalysisError):
        antiplane_reference(0.0, 1.0, 1.0, 1.0, 1.0)


def test_reference_stress_is_mu_gradient():
    tau, a, mu = 3.0, 1.0, 0.5
    r, th, h = 0.02, 0.7, 1e-7

    def u_xy(x, y):
        return antiplane_reference(math.hypot(x, y), math.atan2(y, x), tau, a, mu)[0]

    x, y = r * math.cos(th), r * math.sin(th)
    grad = [(u_xy(x + h, y) - u_xy(x - h, y)) / (2 * h), (u_xy(x, y + h) - u_xy(x, y - h)) / (2 * h)]
    _, sig = antiplane_reference(r, th, tau, a, mu)
    assert np.allclose(sig, mu * np.array(grad), rtol=1e-6)


def test_load_curve_and_csv(tmp_path):
    curve = LoadDisplacementCurve()
    curve.append(0.1, 1.0)
    curve.append(0.2, 2.0, cracked=True)
    curve.append(0.3, 1.5, cracked=True)
    assert curve.crack_start == (0.2, 2.0)
    with pytest.raises(AnalysisError):
        curve.append(0.3, 0.0)
    write_load_curve(tmp_path / "c.csv", curve)
    rows = list(csv.reader((tmp_path / "c.csv").open()))
    assert rows[0] == ["u_D", "force"] and len(rows) == 4
    write_error_reports(tmp_path / "e.csv", fill_rates([ErrorReport(496, 5.84e-5, 0.122),
                                                       ErrorReport(1880, 1.77e-5, 8.16e-2)]))
    rows = list(csv.reader((tmp_path / "e.csv").open()))
    assert rows[0] == ["n_dofs", "l2_error", "l2_rate", "energy_error", "energy_rate"]
    assert float(rows[2][4]) == pytest.approx(0.57, abs=0.06)
