"""Simulate a nearly unstable path and recover the local parameter.

The data are generated at ``theta = alpha * r`` with ``r = 1 / T``.  The
estimate of ``alpha`` and its error identity ``alpha_hat - alpha = Delta / J``
are printed for a few horizons.  The error does not shrink with T: it
converges in law to a nondegenerate distribution (see demo 03).

Run: python demos/02_simulate_and_infer.py
"""
from delaysde import (CharacteristicModel, SignedMeasure, classify, delta_J, mle_alpha, scaling_r,
                      simulate_sdde, sufficient_stats)

measure = SignedMeasure(r=1.0, atoms=[(0.0, 0.6), (-1.0, 0.4)])
base = CharacteristicModel(measure, 0.0)
summary = classify(base)
alpha = 1.0

for T in (25.0, 100.0, 400.0):
    r = scaling_r(summary, T)
    truth = CharacteristicModel(measure, alpha * r)
    path = simulate_sdde(truth, None, T, 0.01, seed=7)
    stats = sufficient_stats(path, measure)
    d, J = delta_J(stats, truth.theta, r)
    est = mle_alpha(stats, base.theta, r)
    print(f"T={T:5.0f}  alpha_hat={est:+.4f}  Delta/J={d / J:+.4f}  error={est - alpha:+.4f}")
