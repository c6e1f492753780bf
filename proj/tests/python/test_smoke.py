import math

import numpy as np
import pytest

sbmlab = pytest.importorskip("sbmlab")


@pytest.fixture
def prm():
    return sbmlab.ModelParams(c=3.0, delta=-1.0, p=0.5)


def test_params_validation():
    with pytest.raises(ValueError):
        sbmlab.ModelParams(c=1.0, delta=2.0, p=0.5)
    assert sbmlab.ModelParams(p=0.75).mbar == pytest.approx(0.5)


def test_measure_roundtrip():
    mu = sbmlab.AtomicMeasure([(0.5, 0.25), (-1.0, 0.5)])
    assert mu.mass() == pytest.approx(0.75)
    assert mu.mean() == pytest.approx((0.125 - 0.5) / 0.75)
    nu = mu + sbmlab.AtomicMeasure.dirac(0.5, 0.25)
    assert nu.normal_form().atoms == [(-1.0, 0.5), (0.5, 0.5)]


def test_psi_at_delta0(prm):
    mu = sbmlab.AtomicMeasure.dirac(0.0)
    assert sbmlab.psi_exact(mu, prm) == pytest.approx(3 * math.log(3) - 3, abs=1e-12)
    value, se = sbmlab.psi(mu, prm, n_mc=20000, seed=1)
    assert abs(value - (3 * math.log(3) - 3)) < 1e-10
    assert se == pytest.approx(0.0, abs=1e-10)


def test_free_energy_delta0_closed_form():
    prm = sbmlab.ModelParams(c=3.0, delta=0.0, p=0.6, N=8)
    mu = sbmlab.AtomicMeasure.dirac(0.5, 0.5)
    r = sbmlab.free_energy_exact(prm, t=1.0, mu=mu, n_disorder=200, seed=2)
    assert abs(r["value"] - sbmlab.delta0_free_energy(prm, 1.0, 0.5)) <= 3 * r["se"] + 1e-12
    assert abs(r["mi"]) <= 3 * r["mi_se"] + 1e-10


def test_nishimori_suite_small():
    prm = sbmlab.ModelParams(c=3.0, delta=-1.5, p=0.7, N=8)
    res = sbmlab.nishimori_suite(prm, 1.0, sbmlab.AtomicMeasure.dirac(0.5, 0.5), 100, seed=3)
    assert len(res) == 3
    for r in res:
        assert r["residual"] <= 4 * r["se"] + 1e-12


def test_gamma_zero_is_dirac_at_mbar():
    prm = sbmlab.ModelParams(c=3.0, delta=-1.0, p=0.7)
    g = sbmlab.gamma_map(sbmlab.AtomicMeasure(), prm, n_samples=1000, seed=4)
    positions = {round(x, 12) for x, _ in g.atoms}
    assert positions == {round(prm.mbar, 12)}


def test_optimize_parisi_runs(prm):
    r = sbmlab.optimize_parisi(prm, K=3, max_iter=10, n_grad=2000, n_value=4000, n_final=20000, seed=5)
    assert math.isfinite(r["value"])
    assert sum(w for _, w in r["optimizer"]) == pytest.approx(1.0, abs=1e-9)


def test_hopf_lax_at_zero_time_is_psi(prm):
    mu = sbmlab.AtomicMeasure.dirac(0.0)
    r = sbmlab.hopf_lax(0.0, mu, prm, K=2, max_iter=5, n_grad=1000, n_value=2000, n_final=5000, seed=6)
    assert r["value"] == pytest.approx(3 * math.log(3) - 3, abs=1e-8)


def test_solve_grid_shapes(prm):
    b = sbmlab.choose_b(prm)
    sol = sbmlab.solve_grid(prm, b, T=0.1, h=0.25, x_max=1.0)
    assert isinstance(sol["final"], np.ndarray)
    assert sol["final"].shape == (5, 5)
    assert np.all(np.isfinite(sol["final"]))
    assert sol["final"][0, 0] >= sol["initial"][0, 0] - 1e-12


def test_kernel(prm):
    assert sbmlab.g(0.0, prm) == pytest.approx(3 * math.log(3) - 3)
    k = sbmlab.shifted_matrix(2, sbmlab.choose_b(prm), prm)
    assert k["matrix"].shape == (8, 8)
    assert np.allclose(k["matrix"], k["matrix"].T)
    # c > 1 with delta < 0 gives an indefinite kernel; c < 1 gives a PSD one.
    assert not k["psd"]
    small = sbmlab.ModelParams(c=0.5, delta=-0.3)
    assert sbmlab.shifted_matrix(2, sbmlab.choose_b(small), small)["psd"]
