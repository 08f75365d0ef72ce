import math

import pytest

import treecascade as tc


def test_uniform_flow():
    f = tc.Flow.uniform(3)
    assert f.depth == 3
    assert f.root_mass == 1.0
    assert f.leaves() == [0.125] * 8
    assert f.is_consistent()


def test_flow_from_levels_and_truncation():
    f = tc.Flow([[1.0], [0.4, 0.6], [0.1, 0.3, 0.2, 0.4]])
    assert f.truncated(1).leaves() == [0.4, 0.6]
    with pytest.raises(ValueError):
        tc.Flow([[1.0], [0.4]])


def test_trivial_simulation():
    times, snaps = tc.simulate(tc.Flow.uniform(0), t_end=0.0)
    assert times == [0.0]
    assert snaps[0].root_mass == 1.0


def test_simulation_is_seeded():
    a = tc.simulate(tc.Flow.uniform(6), t_end=0.3, step=0.05, seed=7)[1][-1]
    b = tc.simulate(tc.Flow.uniform(6), t_end=0.3, step=0.05, seed=7)[1][-1]
    c = tc.simulate(tc.Flow.uniform(6), t_end=0.3, step=0.05, seed=8)[1][-1]
    assert a == b
    assert a != c


def test_transport_depth_one():
    mu = tc.Flow([[1.0], [1.0, 0.0]])
    nu = tc.Flow([[1.0], [0.0, 1.0]])
    assert tc.wasserstein_exact(mu, nu)["value"] == pytest.approx(0.5)
    assert tc.wasserstein_lp(mu, nu)["value"] == pytest.approx(0.5)


def test_distance_to_a_simulated_snapshot():
    times, snaps = tc.simulate(tc.Flow.uniform(8), t_end=0.4, step=0.05, seed=2)
    last = snaps[-1].normalized()
    assert last.root_mass == pytest.approx(1.0, abs=1e-12)
    exact = tc.wasserstein_exact(snaps[0], last)["value"]
    assert tc.wasserstein_lp(snaps[0], last)["value"] == pytest.approx(exact, abs=1e-9)
    assert tc.coupling_upper_bound(snaps[0], last)["value"] >= exact - 1e-12


def test_kpz_endpoint():
    times, d = tc.kpz_solve(0.75, 2 * math.log(2), 1e-3)
    assert d[-1] == pytest.approx(0.5, abs=1e-9)
    assert tc.kpz_closed_form(0.75, times[-1]) == pytest.approx(0.5, abs=1e-12)


def test_regularity_report():
    t = 0.5
    r = tc.regularity_report(t, [0.5, 1.0, 2.0])
    for h, a in r["alpha_samples"]:
        expected = (1 - h) * math.log(2) + (h * h - h) * t / 2
        assert a == pytest.approx(expected, abs=1e-12)
    assert r["lifetime"] == pytest.approx(2 * math.log(2))


def test_suite_subset():
    report = tc.run_suite(tests=["regularity_analytics", "kpz_ode"], seed=3)
    verdicts = {t["test_name"]: t["verdict"] for t in report["reports"]}
    assert verdicts == {"regularity_analytics": "Pass", "kpz_ode": "Pass"}
    assert not report["failed"]
    assert "regularity_analytics" in tc.registered_tests()
