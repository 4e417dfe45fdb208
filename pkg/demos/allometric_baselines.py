"""
Log-log allometric baselines
============================

Ordinary least squares in log space for the four equation forms.  First a
sanity check on noiseless cone-shaped trees, then all four on a synthetic
inventory.
"""

import math

from biomass_uq import evaluate, fit_loglinear, split_train_test
from biomass_uq.allometry import fit_loglinear_arrays
from biomass_uq.synthetic import cone_law_arrays, inventory

# A solid cone of wood with density 500 kg/m^3: B = pi/12 * 500 * D^2 * H.
h, d, b = cone_law_arrays(50)
cone = fit_loglinear_arrays("lr3_hd", b, height=h, diameter=d)
print("cone-law fit:", cone.labelled())
print("expected intercept:", math.log(math.pi * 500 / 12))

train, test = split_train_test(inventory(2000, seed=3), 0.1, seed=0)
y = test.column("biomass_kg")
for kind in ("lr_hcd", "lr2_h", "lr3_hd", "lr_d"):
    m = fit_loglinear(kind, train)
    rep = evaluate(y, m.predict_biomass(list(test)))
    coefs = ", ".join(f"{k}={v:.3f}" for k, v in m.labelled().items())
    print(f"{kind:7s} {coefs:36s} R2={rep.r2:.3f} RMSE={rep.rmse_kg:7.1f} Bias={rep.bias:+.3f}")

# Diameter carries most of the signal; height alone leaves a lot unexplained.
print("residual sigma (ln units), LR2 vs LR3:",
      round(fit_loglinear("lr2_h", train).residual_sigma, 3),
      round(fit_loglinear("lr3_hd", train).residual_sigma, 3))
