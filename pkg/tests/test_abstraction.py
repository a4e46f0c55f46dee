import numpy as np
import pytest

from symoc.abstraction import (
    MapReach,
    SampledReach,
    abstract_costs,
    abstraction_sidecar_text,
    build_abstraction,
    check_conservatism,
)
from symoc.core import INF, cost_model
from symoc.errors import SoundnessAlarm
from symoc.grid import build_grid_cover, discretize_inputs
from symoc.reach import SampledSystem
from symoc.sets import Box, EmptySet
from symoc.simulate import perturbed_step
from symoc.solver import is_discrete_cost, solve
from symoc.systems import LogisticMap, get_system


def logistic_setup(N):
    spec = get_system("logistic")
    cover = build_grid_cover((spec.k_lower, spec.k_upper), np.array([1.0 / N]))
    inputs = discretize_inputs(spec.input_pieces, np.array([1.0]))
    model = cost_model(spec.cost_kind, spec.target, spec.obstacle)
    ac = abstract_costs(model, cover, inputs, 0.0, 0.0)
    reach = MapReach(LogisticMap(), cover)
    problem, cert = build_abstraction(reach, cover, inputs, ac)
    return spec, cover, inputs, model, ac, reach, problem, cert


def test_logistic_40_abstraction_conservatism():
    _, cover, inputs, _, _, _, problem, cert = logistic_setup(40)
    assert cover.n_cells == 41
    assert cert.cell_diameter == 1.0 / 40.0
    assert cert.rho == 1.0 / 40.0  # dominated by the cell diameter
    assert is_discrete_cost(problem) == (1.0, 0.0)
    # overflow state: infinite terminal cost, all-infinite self loops
    over = cover.overflow
    assert problem.G[over] == INF
    succ, costs = problem.successors(over, 0)
    assert succ.tolist() == [over] and costs[0] == INF


def test_min_time_cost_abstraction_on_cells():
    _, cover, inputs, model, ac, _, _, _ = logistic_setup(40)
    for cell in range(cover.n_cells):
        lo, hi = cover.cell_bounds(cell)
        inside = model.target.cell_inside(lo, hi)
        assert (ac.G2[cell] == 0.0) == inside
        assert (ac.G2[cell] == INF) == (not inside)
        assert ac.pair_value(cell, 0) == 1.0  # no obstacle: every step costs 1


def test_pendulum_energy_cost_abstraction():
    spec = get_system("pendulum")
    eta, mu, _ = spec.presets["p1"]
    cover = build_grid_cover((spec.k_lower, spec.k_upper), eta)
    inputs = discretize_inputs(spec.input_pieces, mu)
    model = cost_model(spec.cost_kind, spec.target, spec.obstacle)
    ac = abstract_costs(model, cover, inputs, spec.A2, spec.A3)
    assert cover.counts.tolist() == [158, 76]
    assert len(inputs) == 21
    # interior cell: running cost is the squared input
    cell = cover.quantize([1.0, 0.5])
    for u_idx, u in enumerate(inputs.representatives):
        assert ac.pair_value(cell, u_idx) == pytest.approx(float(u[0]) ** 2)
    # boundary-clipped cells touch the obstacle complement: all-infinite
    edge_cell = cover.quantize([spec.k_lower[0], 0.5])
    assert ac.pair_value(edge_cell, 0) == INF
    # cells inside the target ellipse have zero terminal cost
    assert ac.G2[cover.quantize([0.0, 0.0])] == 0.0
    assert ac.G2[cover.quantize([3.0, 0.0])] == INF


def test_identity_dynamics_transitions_are_overlapping_cells():
    sys = SampledSystem(
        f=lambda x, u: np.zeros_like(x),
        w=[0.0, 0.0],
        tau=0.1,
        A0=[0.5, 0.5],
        A1=np.zeros((2, 2)),
        k_lower=[0.0, 0.0],
        k_upper=[1.0, 1.0],
        kprime_margin=0.5,
        eps=0.1,
    )
    cover = build_grid_cover(([0.0, 0.0], [1.0, 1.0]), [0.25, 0.25])
    inputs = discretize_inputs([([0.0], [0.0])], [1.0])
    model = cost_model("min_time", Box([0.4, 0.4], [0.6, 0.6], open_=True), EmptySet())
    ac = abstract_costs(model, cover, inputs, 0.0, 0.0)
    reach = SampledReach(sys, cover, inputs, k=1, theta=10.0, gamma=0.0)
    problem, _ = build_abstraction(reach, cover, inputs, ac)
    for cell in range(cover.n_cells):
        c = cover.center(cell)
        want, escape = cover.cells_overlapping_box(c - cover.eta / 2, c + cover.eta / 2)
        succ = [int(q) for q in problem.successors(cell, 0)[0]]
        assert sorted(q for q in succ if q != cover.overflow) == want
        assert (cover.overflow in succ) == escape


def test_batched_build_matches_per_cell_build():
    spec = get_system("pendulum")
    sys = spec.sampled_system()
    cover = build_grid_cover((spec.k_lower, spec.k_upper), np.array([0.8, 0.6]))
    inputs = discretize_inputs(spec.input_pieces, np.array([1.0]))
    model = cost_model(spec.cost_kind, spec.target, spec.obstacle)
    ac = abstract_costs(model, cover, inputs, spec.A2, spec.A3)
    reach = SampledReach(sys, cover, inputs, k=2, theta=1.0, gamma=1e-7)
    batched, cert_b = build_abstraction(reach, cover, inputs, ac)
    per_cell, cert_p = build_abstraction(reach.__call__, cover, inputs, ac)
    assert np.array_equal(batched.trans_ptr, per_cell.trans_ptr)
    assert np.array_equal(batched.trans_succ, per_cell.trans_succ)
    assert np.array_equal(batched.pair_costs, per_cell.pair_costs)
    assert cert_b.rho == pytest.approx(cert_p.rho, abs=1e-13)
    threaded, _ = build_abstraction(reach, cover, inputs, ac, workers=4)
    assert np.array_equal(threaded.trans_succ, batched.trans_succ)


def test_abstract_transitions_are_supersets_of_simulation():
    spec = get_system("pendulum")
    sys = spec.sampled_system()
    eta, mu, k = spec.presets["p1"]
    cover = build_grid_cover((spec.k_lower, spec.k_upper), eta)
    inputs = discretize_inputs(spec.input_pieces, mu)
    model = cost_model(spec.cost_kind, spec.target, spec.obstacle)
    ac = abstract_costs(model, cover, inputs, spec.A2, spec.A3)
    reach = SampledReach(sys, cover, inputs, k, spec.theta, spec.preset_gamma["p1"])
    problem, _ = build_abstraction(reach, cover, inputs, ac)
    rng = np.random.default_rng(31)
    for _ in range(300):
        cell = int(rng.integers(0, cover.n_cells))
        u_idx = int(rng.integers(0, len(inputs)))
        lo, hi = cover.cell_bounds(cell)
        x0 = rng.uniform(lo, hi)
        d = rng.uniform(-sys.w, sys.w, size=(8, 2))
        x1 = perturbed_step(sys, x0, inputs.representatives[u_idx], d)
        succ = set(int(q) for q in problem.successors(cell, u_idx)[0])
        landed = cover.members(x1) or [cover.overflow]
        assert set(landed) <= succ


def test_check_conservatism_logistic():
    _, cover, inputs, model, ac, reach, problem, cert = logistic_setup(40)
    rng = np.random.default_rng(33)
    ok, violations = check_conservatism(
        problem, cover, inputs, ac, reach.sample_endpoints, rho=1.0 / 40.0, rng=rng
    )
    assert ok, violations
    # a tighter claimed rho fails via the diameter condition (v)
    rng = np.random.default_rng(33)
    ok, violations = check_conservatism(
        problem, cover, inputs, ac, reach.sample_endpoints, rho=1.0 / 100.0, rng=rng
    )
    assert not ok
    assert any(tag == "v" for tag, _ in violations)


def test_check_conservatism_flags_bloated_transition():
    _, cover, inputs, model, ac, reach, problem, cert = logistic_setup(40)
    # splice one far-away successor into a transition list
    bloated_succ = problem.trans_succ.copy()
    cell = cover.quantize([0.5])
    a = problem.trans_ptr[cell * problem.m]
    far = cover.quantize([0.02])
    original = bloated_succ[a]
    assert abs(cover.center(int(original))[0] - cover.center(far)[0]) > 0.3
    bloated_succ[a] = far
    from symoc.core import FiniteProblem

    bloated = FiniteProblem(
        problem.n, problem.m, problem.G, problem.trans_ptr, bloated_succ,
        pair_costs=problem.pair_costs,
    )
    rng = np.random.default_rng(34)
    ok, violations = check_conservatism(
        bloated, cover, inputs, ac, reach.sample_endpoints, rho=1.0 / 40.0, rng=rng,
        cell_samples=cover.n_cells,
    )
    assert not ok
    assert any(tag == "iv" for tag, _ in violations)


def test_empty_callback_raises_strictness_alarm():
    _, cover, inputs, model, ac, _, _, _ = logistic_setup(40)

    def bad_callback(cell, u_idx):
        return [], False, 0.0

    with pytest.raises(SoundnessAlarm):
        build_abstraction(bad_callback, cover, inputs, ac)


def test_sidecar_text_round_trip_fields():
    _, cover, inputs, _, _, _, _, cert = logistic_setup(40)
    text = abstraction_sidecar_text(cover, inputs, cert)
    assert text.startswith("symoc-abstraction v1\n")
    assert "rho = 0.025" in text
    assert f"overflow = {cover.overflow}" in text
