"""Acceptance criteria, one test each; a pass/fail line per criterion is printed at the end of the run."""
import csv
import json
import math
import time

import numpy as np
import pytest

from delaysde.cli import run
from delaysde.inference import SufficientStats, delta_J, loglik_ratio, mle_alpha, scaling_r, sufficient_stats
from delaysde.limit_process import (iterated_wiener, limit_delta_J, limit_mle_alpha, simulate_complex_wiener,
                                    simulate_limit_experiment, simulate_limit_system)
from delaysde.mc_harness import (LIMIT_CELL, ExperimentConfig, ar1_baseline, ks_two_sample,
                                 martingale_mean_check, mc_alpha_hat, mc_coupled_alpha_hat, mc_limit_alpha_hat)
from delaysde.measure import SignedMeasure
from delaysde.rng import make_rng
from delaysde.sdde_sim import InitialSegment, simulate_sdde
from delaysde.spectral import CharacteristicModel, Regime, RootRecord, classify, find_roots, residue_coeffs

from .conftest import model_suite, resonant_model
from .oracles import contour_coeff, oracle_radius

TWO_ATOMS = SignedMeasure(r=1.0, atoms=[(0.0, 0.6), (-1.0, 0.4)])


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


@pytest.mark.criterion(1, "spectral oracle, oscillatory critical model")
def test_c1_oscillatory_spectral_oracle():
    model = CharacteristicModel(SignedMeasure.dirac(-1.0), -math.pi / 2)
    with Timer() as t:
        roots = find_roots(model)
        summary = classify(model)
    near = [(lam, m) for lam, m in roots if abs(abs(lam) - math.pi / 2) < 1e-6]
    assert len(near) == 2 and all(m == 1 for _, m in near)
    for target in (1j * math.pi / 2, -1j * math.pi / 2):
        assert min(abs(lam - target) for lam, _ in near) <= 1e-9
    assert summary.v_star == 0.0 and summary.m_star == 0 and summary.regime is Regime.UNSTABLE
    assert t.seconds < 1.0


@pytest.mark.criterion(2, "particular case: leading coefficient equals the mass, r = 1/T")
def test_c2_particular_case_exactness():
    with Timer() as t:
        for mass in (1.0, -0.5, 2.3):
            model = CharacteristicModel(SignedMeasure(r=2.0, atoms=[(0.0, 0.5 * mass), (-1.3, 0.2 * mass)],
                                                      density=[(-2.0, -0.5, (0.2 * mass,))]), 0.0)
            assert model.measure.total_mass() == pytest.approx(mass, abs=1e-15)
            summary = classify(model)
            (rec,) = summary.dominant_roots
            assert rec.lam == 0 and rec.multiplicity == 1
            assert abs(residue_coeffs(model, 0.0, 1)[0] - mass) <= 1e-12
            assert abs(scaling_r(summary, 100.0) - 0.01) <= 1e-15
    assert t.seconds < 1.0


@pytest.mark.criterion(3, "residue coefficients match contour integration on the five-model suite")
def test_c3_residue_vs_contour():
    suite = model_suite()
    checked = {name: 0 for name in suite}
    multiple = 0
    with Timer() as t:
        for name, model in suite.items():
            roots = find_roots(model)
            lams = [lam for lam, _ in roots]
            for lam, m in roots:
                if abs(lam.imag) > 12:
                    continue
                multiple += m > 1
                rad = oracle_radius(lam, lams)
                for ell, c in enumerate(residue_coeffs(model, lam, m)):
                    assert abs(c - contour_coeff(model, lam, ell, rad)) <= 1e-8, (name, lam, ell)
                    checked[name] += 1
    assert all(checked.values()) and multiple >= 1
    assert t.seconds < 5.0


@pytest.mark.criterion(4, "pathwise reductions: OU recursion and alpha = 0 limit chain")
def test_c4_pathwise_reductions():
    with Timer() as t:
        theta, dt = -0.8, 0.01
        model = CharacteristicModel(SignedMeasure.dirac(0.0, 1.0, r=1.0), theta)
        dW = make_rng(4, 0).standard_normal(1000) * math.sqrt(dt)
        path = simulate_sdde(model, InitialSegment.constant(1.2), 10.0, dt, increments=dW)
        x = np.empty(1001)
        x[0] = 1.2
        for k in range(1000):
            x[k + 1] = x[k] + theta * x[k] * dt + dW[k]
        assert np.max(np.abs(path.values - x)) <= 1e-12

        (pair,) = classify(resonant_model(1.0)).dominant_roots
        real2 = RootRecord(0j, 3, (0.7 + 0j, -1.1 + 0j, 0.4 + 0j), 2)
        dt = 1e-3
        worst = 0.0
        for seed in range(100):
            for rec, m in ((pair, 1), (real2, 2)):
                w = simulate_complex_wiener(rec.lam.imag, dt, seed, (seed, m))
                p = simulate_limit_system(rec, m, 0.0, dt, wiener=w)
                assert np.array_equal(p.states[0], w.values)
                for ell in range(1, m + 1):
                    worst = max(worst, float(np.max(np.abs(p.states[ell] - iterated_wiener(w, ell)))))
        assert worst <= 10 * dt
    assert t.seconds < 30.0


@pytest.mark.criterion(5, "discrete likelihood identities on 1000 random cases")
def test_c5_likelihood_identities():
    rng = np.random.default_rng(2024)
    tol = 1e-10
    with Timer() as t:
        for _ in range(1000):
            s = SufficientStats(rng.normal(0, 20), rng.uniform(0, 200))
            theta, r, h = rng.normal(0, 2), rng.uniform(1e-3, 1), rng.normal(0, 5)
            d, J = delta_J(s, theta, r)
            scale = max(1.0, abs(s.I1 * r * h), s.I2 * (abs(theta) + abs(r * h)) ** 2)
            assert abs(loglik_ratio(s, theta, theta + r * h) - (h * d - 0.5 * h * h * J)) <= tol * scale

        base, T = 0.0, 10.0
        r = scaling_r(classify(CharacteristicModel(TWO_ATOMS, base)), T)
        for seed in range(1000):
            alpha = (seed % 7) - 3.0
            gen = CharacteristicModel(TWO_ATOMS, base + alpha * r)
            st = sufficient_stats(simulate_sdde(gen, None, T, 0.05, seed=(seed,)), gen.measure)
            d, J = delta_J(st, gen.theta, r)
            assert abs(d - r * st.I3) <= tol * r * max(1.0, abs(st.I1), abs(gen.theta) * st.I2)
            err = mle_alpha(st, base, r) - alpha
            assert abs(err - d / J) <= tol * max(1.0, abs(d / J))

        summary = classify(resonant_model(1.0))
        for seed in range(1000):
            alpha = (seed % 5) - 2.0
            paths = simulate_limit_experiment(summary, alpha, 1e-2, seed, (7,))
            d, J = limit_delta_J(paths)
            assert abs((limit_mle_alpha(paths) - alpha) - d / J) <= tol * max(1.0, abs(d / J))
    assert t.seconds < 10.0


@pytest.mark.criterion(6, "likelihood ratio has mean one")
def test_c6_martingale_normalisation():
    cfg = ExperimentConfig(replications=4000, model=CharacteristicModel(TWO_ATOMS, 0.0), alpha=0.5,
                           horizons=(100.0,), dt=0.01, seed=1)
    with Timer() as t:
        mean, se = martingale_mean_check(cfg)
    print(f"likelihood ratio mean {mean:.4f} +- {se:.4f}")
    assert abs(mean - 1.0) <= 4 * se
    assert t.seconds < 120.0


@pytest.mark.slow
@pytest.mark.criterion(7, "finite-horizon MLE law approaches the limit law")
def test_c7_convergence_to_limit_law():
    model = CharacteristicModel(TWO_ATOMS, 0.0)
    horizons = (25.0, 100.0, 400.0)
    with Timer() as t:
        for alpha in (0.0, 1.0):
            cfg = ExperimentConfig(replications=2000, model=model, alpha=alpha, horizons=(400.0,), dt=0.01,
                                   seed=1, limit_dt=1e-3)
            summary = classify(model)
            ks = ks_two_sample(mc_alpha_hat(cfg, summary)[400.0], mc_limit_alpha_hat(cfg, summary))
            print(f"alpha={alpha}: independent KS at T=400 is {ks:.4f}")
            assert ks <= 0.08

            batches = []
            for batch in range(5):
                cfg_b = ExperimentConfig(replications=2000, model=model, alpha=alpha, horizons=horizons,
                                         dt=0.01, seed=100 + batch, limit_dt=1e-3)
                cells, lim = mc_coupled_alpha_hat(cfg_b, summary)
                batches.append([ks_two_sample(cells[T], lim) for T in horizons])
            med = np.median(np.array(batches), axis=0)
            print(f"alpha={alpha}: median KS over batches {dict(zip(horizons, [round(float(v), 4) for v in med]))}")
            assert med[0] >= med[1] >= med[2]
    assert t.seconds < 15 * 60


@pytest.mark.criterion(8, "AR(1) near unit root matches the OU drift MLE")
def test_c8_ar1_baseline():
    with Timer() as t:
        ar, ou = ar1_baseline(0.0, 500, 2000, seed=1)
    ks = ks_two_sample(ar, ou)
    print(f"AR(1) versus OU KS {ks:.4f}")
    assert ar.failures == 0 and ou.failures == 0
    assert ks <= 0.08
    assert t.seconds < 120.0


@pytest.mark.criterion(9, "mean information equals half the squared mass")
def test_c9_information_moment():
    mass = 2.3
    model = CharacteristicModel(SignedMeasure(r=1.0, atoms=[(0.0, 1.5), (-0.5, 0.8)]), 0.0)
    summary = classify(model)
    target = mass ** 2 / 2
    n = 4000
    with Timer() as t:
        lim = np.array([limit_delta_J(simulate_limit_experiment(summary, 0.0, 1e-3, 1, (LIMIT_CELL, j)))[1]
                        for j in range(n)])
        cfg = ExperimentConfig(replications=n, model=model, horizons=(100.0,), dt=0.01, seed=1)
        r = scaling_r(summary, 100.0)
        fin = np.array([delta_J(sufficient_stats(simulate_sdde(model, None, 100.0, 0.01,
                                                                seed=make_rng(cfg.seed, 0, j, 0)),
                                                  model.measure), 0.0, r)[1] for j in range(n)])
    for name, J in (("limit", lim), ("T=100", fin)):
        se = J.std(ddof=1) / math.sqrt(n)
        print(f"E[J] {name}: {J.mean():.4f} +- {se:.4f}, target {target:.4f}")
        assert abs(J.mean() - target) <= 3 * se
    assert t.seconds < 60.0


@pytest.mark.criterion(10, "mc output is byte-identical across worker counts")
def test_c10_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("DELAYSDE_THREADS", raising=False)
    cfg = {"model": {"r": 1.0, "atoms": [{"u": 0.0, "w": 0.6}, {"u": -1.0, "w": 0.4}], "theta": 0.0},
           "alpha": 1.0, "horizons": [10.0, 20.0], "dt": 0.01, "replications": 200, "seed": 42,
           "limit": {"dt": 0.002, "replications": 200}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    for extra in ([], ["--coupled"]):
        outs = []
        for workers in ("1", "4", "4"):
            out = tmp_path / f"w{workers}{len(outs)}{len(extra)}"
            assert run(["--out-dir", str(out), "mc", "--config", str(path), "--workers", workers, *extra]) == 0
            outs.append((out / "alpha_hat.csv").read_bytes())
        assert outs[0] == outs[1] == outs[2]
        with open(out / "alpha_hat.csv") as fh:
            assert sum(1 for _ in csv.DictReader(fh)) == 600
