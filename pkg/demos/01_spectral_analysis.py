"""Characteristic roots and stability class of three delay models.

Run: python demos/01_spectral_analysis.py
"""
import math

from delaysde import CharacteristicModel, SignedMeasure, classify, residue_coeffs

models = {
    # a single delayed feedback tuned so that the rightmost roots sit on the imaginary axis
    "oscillatory": CharacteristicModel(SignedMeasure.dirac(-1.0), -math.pi / 2),
    # theta = 0: the only relevant root is 0 and its coefficient is the total mass
    "zero feedback": CharacteristicModel(SignedMeasure(r=1.0, atoms=[(0.0, 0.6), (-1.0, 0.4)]), 0.0),
    # a strongly damped model for contrast
    "stable": CharacteristicModel(SignedMeasure.uniform(-1.0, 0.0), -3.0),
}

for name, model in models.items():
    s = classify(model)
    print(f"{name}: regime={s.regime.value} v*={s.v_star:+.3g} m*={s.m_star}")
    for rec in sorted(s.roots, key=lambda r: -r.lam.real)[:4]:
        print(f"    root {rec.lam:.6f} multiplicity {rec.multiplicity}")
    for rec in s.dominant_roots:
        coeffs = residue_coeffs(model, rec.lam, rec.multiplicity)
        print(f"    dominant {rec.lam:.6f}: coefficients {[f'{c:.6f}' for c in coeffs]}")
