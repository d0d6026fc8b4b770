"""From a Lojasiewicz exponent to a decay rate, on synthetic sequences.

A sequence ``F_j = j^{-1/alpha}`` satisfies the discrete gradient
inequality with exponent ``alpha``.  The script recovers ``alpha``, the
tail-sum rate ``rho = 1/alpha``, and shows the summability verdict of
``sum delta_j^beta`` switching at ``beta = 2 alpha / (1 + alpha)``.

    python demos/rates_pipeline.py [alpha]
"""
import sys

import numpy as np

from cylflow import flow, rates

alpha = float(sys.argv[1]) if len(sys.argv) > 1 else 0.5
rec = rates.synth_sequence(alpha, J_max=400)
print(f"synthetic sequence, alpha0 = {alpha}, minimal K = {rec.extra['K_min']:.4f}")
fit = flow.loja_audit(rec)
print(f"  fitted alpha      {fit.alpha:.4f}")
print(f"  fitted rho        {rates.rate_extraction(rec).rho:.4f}   (1/alpha0 = {1 / alpha:.4f})")
bar = rates.beta_threshold(alpha)
print(f"  threshold beta    {bar:.4f}")
for beta in np.round(np.linspace(bar - 0.2, bar + 0.2, 5), 3):
    v = rates.summability_check(rec, beta)
    sigma = "-" if v.sigma is None else f"{v.sigma:.3f}"
    print(f"    beta = {beta:<6} delta^beta ~ j^-{sigma:<6} {v.verdict}")

geo = rates.geometric_record(0.5)
print(f"\ngeometric sequence: rate {rates.rate_extraction(geo).as_dict()}")

print("\nGaussian tail of |x|^k e^{-|x|^2/4} outside B_R in R^m")
for m, k, R in ((1, 0, 6.0), (2, 2, 3.0), (4, 4, 1.0)):
    t = rates.gaussian_tail(m, k, R)
    print(f"  m={m} k={k} R={R}: integral {t.quadrature:.4e} <= bound {t.bound:.4e}")
