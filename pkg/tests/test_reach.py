import math

import numpy as np
import pytest

from symoc.errors import InputError
from symoc.reach import IntervalUnion, SampledSystem, attain_over, attain_over_batch, growth_bound, integrate_nominal, rk4
from symoc.systems import chauffeur_nominal_exact, get_system


def make_system(f, w, A1, tau=0.1, A0=None, box=4.0, margin=None, eps=0.1):
    dim = len(w)
    A0 = np.full(dim, 1.0) if A0 is None else np.asarray(A0, float)
    margin = float(tau * A0.max() + 1.0) if margin is None else margin
    return SampledSystem(
        f=f,
        w=np.asarray(w, float),
        tau=tau,
        A0=A0,
        A1=np.asarray(A1, float),
        k_lower=np.full(dim, -box),
        k_upper=np.full(dim, box),
        kprime_margin=margin,
        eps=eps,
    )


def perturbed_endpoint(sys, x0, u, disturbances, substeps_per_piece=8):
    """Independent trajectory oracle: RK4 with a piecewise-constant
    disturbance, one piece per entry of ``disturbances``."""
    x = np.asarray(x0, dtype=float)
    h = sys.tau / len(disturbances)
    for d in disturbances:
        x = rk4(lambda y: sys.f(y, None if u is None else u) + d, x, h, substeps_per_piece)
    return x


def test_constant_zero_field_is_identity():
    sys = make_system(lambda x, u: np.zeros_like(x), w=[0.0], A1=[[0.0]])
    x = integrate_nominal(sys, np.array([0.3]), np.array([0.0]), sys.tau, 5)
    assert x[0] == 0.3


def test_exponential_flow_matches_closed_form():
    sys = make_system(lambda x, u: x, w=[0.0], A1=[[1.0]])
    x = integrate_nominal(sys, np.array([1.0]), np.array([0.0]), 0.1, 10)
    assert abs(x[0] - math.exp(0.1)) < 1e-8


def test_chauffeur_nominal_matches_rotation_oracle():
    spec = get_system("chauffeur")
    sys = spec.sampled_system()
    rng = np.random.default_rng(21)
    for _ in range(25):
        x0 = rng.uniform(-4, 4, size=2)
        u = np.array([rng.choice([-1.0, -0.4, 0.0, 0.7, 1.0])])
        got = integrate_nominal(sys, x0, u, sys.tau, 10)
        want = chauffeur_nominal_exact(x0, u, sys.tau)
        assert np.allclose(got, want, atol=1e-10)


def test_growth_bound_trivial_cases():
    sys = make_system(lambda x, u: np.zeros_like(x), w=[0.0], A1=[[0.0]])
    r = growth_bound(sys, np.array([0.5]), 0.2, 5)
    assert r[0] == 0.5
    sys = make_system(lambda x, u: np.zeros_like(x), w=[0.1], A1=[[0.0]], tau=0.2)
    r = growth_bound(sys, np.array([0.5]), 0.2, 5)
    assert r[0] == pytest.approx(0.52, abs=1e-14)


def test_growth_bound_scalar_exponential():
    a = 0.7
    sys = make_system(lambda x, u: np.zeros_like(x), w=[0.0], A1=[[a]])
    r = growth_bound(sys, np.array([0.3]), 0.5, 40)
    assert abs(r[0] - 0.3 * math.exp(a * 0.5)) < 1e-8


def test_growth_bound_positivity_and_monotonicity():
    spec = get_system("pendulum")
    sys = spec.sampled_system()
    rng = np.random.default_rng(22)
    for _ in range(50):
        r0 = rng.uniform(0, 0.3, size=2)
        r1 = growth_bound(sys, r0, sys.tau, 5)
        r2 = growth_bound(sys, r0 + rng.uniform(0, 0.2, size=2), sys.tau, 5)
        assert np.all(r1 >= 0)
        assert np.all(r2 >= r1)


def test_attain_over_identity_dynamics():
    sys = make_system(lambda x, u: np.zeros_like(x), w=[0.0, 0.0], A1=np.zeros((2, 2)))
    cell = (np.array([0.2, -0.1]), np.array([0.05, 0.05]))
    for k in (1, 2, 4):
        res = attain_over(sys, cell, np.array([0.0]), k=k, theta=3.0, gamma=0.0, eta_norm=0.1)
        assert len(res.union) == 1
        assert np.allclose(res.union.centers[0], cell[0])
        assert np.allclose(res.union.radii[0], cell[1])
        assert not res.escaped


def test_attain_over_exponential_closed_form():
    sys = make_system(lambda x, u: x, w=[0.0], A1=[[1.0]], tau=0.1, A0=[6.0])
    res = attain_over(sys, (np.array([1.0]), np.array([0.1])), np.array([0.0]), k=1, theta=100.0, gamma=0.0, eta_norm=0.1, substeps=10)
    assert len(res.union) == 1
    assert res.union.centers[0][0] == pytest.approx(math.exp(0.1), abs=1e-8)
    assert res.union.radii[0][0] == pytest.approx(0.1 * math.exp(0.1), abs=1e-8)


def test_attain_over_gamma_monotone():
    spec = get_system("pendulum")
    sys = spec.sampled_system()
    cell = (np.array([0.0, 0.0]), np.array([0.04, 0.04]))
    r_small = attain_over(sys, cell, np.array([0.0]), 1, 1.0, 1e-7, 0.08)
    r_large = attain_over(sys, cell, np.array([0.0]), 1, 1.0, 1e-3, 0.08)
    assert np.all(r_large.union.radii >= r_small.union.radii)


def test_attain_over_subdivision_tightens():
    spec = get_system("pendulum")
    sys = spec.sampled_system()
    cell = (np.array([1.0, 0.5]), np.array([0.04, 0.04]))
    u = np.array([1.0])
    coarse = attain_over(sys, cell, u, k=4, theta=1.0, gamma=0.0, eta_norm=0.08)
    fine = attain_over(sys, cell, u, k=4, theta=0.5, gamma=0.0, eta_norm=0.08)
    assert len(fine.union) >= len(coarse.union)

    rng = np.random.default_rng(23)
    # the finer union covers a subset of the coarser one (same cloud, less slop)
    lo, hi = coarse.union.bounding_boxes()
    box_lo, box_hi = lo.min(axis=0) - 0.05, hi.max(axis=0) + 0.05
    probes = rng.uniform(box_lo, box_hi, size=(5000, 2))
    n_fine = sum(fine.union.contains(p) for p in probes)
    n_coarse = sum(coarse.union.contains(p) for p in probes)
    assert n_fine <= n_coarse

    for _ in range(200):
        x0 = rng.uniform(cell[0] - cell[1], cell[0] + cell[1])
        d = rng.uniform(-sys.w, sys.w, size=(8, 2))
        endpoint = perturbed_endpoint(sys, x0, u, d)
        assert coarse.union.contains(endpoint)
        assert fine.union.contains(endpoint)


def test_attain_over_batch_matches_scalar_path():
    spec = get_system("pendulum")
    sys = spec.sampled_system()
    rng = np.random.default_rng(24)
    centers = rng.uniform(-1.0, 1.0, size=(20, 2))
    r0 = np.array([0.04, 0.04])
    for u in (np.array([-2.0]), np.array([0.2])):
        for theta in (1.0, 0.5):
            lo_b, hi_b, escaped, slack = attain_over_batch(sys, centers, r0, u, 2, theta, 1e-7, 0.08)
            for i, c in enumerate(centers):
                res = attain_over(sys, (c, r0), u, 2, theta, 1e-7, 0.08)
                got_lo = np.sort(np.array([lo[i] for lo in lo_b]), axis=0)
                got_hi = np.sort(np.array([hi[i] for hi in hi_b]), axis=0)
                want_lo, want_hi = res.union.bounding_boxes()
                assert np.allclose(got_lo, np.sort(want_lo, axis=0), atol=1e-13)
                assert np.allclose(got_hi, np.sort(want_hi, axis=0), atol=1e-13)
                assert bool(escaped[i]) == res.escaped
                assert slack == pytest.approx(res.slack, abs=1e-13)


def test_monte_carlo_containment_pendulum_origin_cell():
    spec = get_system("pendulum")
    sys = spec.sampled_system()
    eta, mu, k = spec.presets["p1"]
    cell = (np.array([0.0, 0.0]), eta / 2.0)
    res = attain_over(sys, cell, np.array([0.0]), k, spec.theta, spec.preset_gamma["p1"], float(eta.max()))
    assert not res.escaped
    rng = np.random.default_rng(25)
    for _ in range(300):
        x0 = rng.uniform(cell[0] - cell[1], cell[0] + cell[1])
        d = rng.uniform(-sys.w, sys.w, size=(10, 2))
        assert res.union.contains(perturbed_endpoint(sys, x0, np.array([0.0]), d))


def test_escape_detection():
    spec = get_system("chauffeur")
    sys = spec.sampled_system()
    # a cell outside the domain near the hull edge escapes under hard turn
    cell = (np.array([6.95, 0.0]), np.array([0.2, 0.2]))
    res = attain_over(sys, cell, np.array([1.0]), 1, 2.0, 0.0, 0.03)
    assert res.escaped


def test_attain_over_rejects_bad_parameters():
    spec = get_system("pendulum")
    sys = spec.sampled_system()
    cell = (np.zeros(2), np.full(2, 0.04))
    with pytest.raises(InputError):
        attain_over(sys, cell, np.array([0.0]), 0, 1.0, 0.0, 0.08)
    with pytest.raises(InputError):
        attain_over(sys, cell, np.array([0.0]), 1, -1.0, 0.0, 0.08)
    with pytest.raises(InputError):
        integrate_nominal(sys, np.zeros(2), np.array([0.0]), -1.0, 5)


def test_sampled_system_validation():
    with pytest.raises(InputError):
        SampledSystem(
            f=lambda x, u: x,
            w=[0.0],
            tau=0.1,
            A0=[1.0],
            A1=[[0.0, -1.0], [0.0, 0.0]],  # wrong shape and negative off-diagonal
            k_lower=[0.0],
            k_upper=[1.0],
            kprime_margin=1.0,
            eps=0.1,
        )
    with pytest.raises(InputError):
        SampledSystem(
            f=lambda x, u: x,
            w=[0.0],
            tau=1.0,
            A0=[5.0],
            A1=[[0.0]],
            k_lower=[0.0],
            k_upper=[1.0],
            kprime_margin=1.0,  # tau * ||A0|| = 5 > margin
            eps=0.1,
        )


def test_interval_union_contains():
    union = IntervalUnion(np.array([[0.0, 0.0], [2.0, 0.0]]), np.array([[1.0, 1.0], [0.5, 0.5]]))
    assert union.contains([0.5, -0.7])
    assert union.contains([2.5, 0.5])
    assert not union.contains([1.4, 0.0])
