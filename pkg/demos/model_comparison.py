"""
Comparing regressors on a held-out split
========================================

Five models fitted on the same 9:1 split, scored with R^2 (outliers
dropped), RMSE and relative bias, plus binned residuals for the GP.
"""


from biomass_uq import ForestConfig, FitOptions, binned_residuals, evaluate, fit_model, split_train_test
from biomass_uq.synthetic import inventory

train, test = split_train_test(inventory(2500, seed=7), 0.1, seed=42)
y = test.column("biomass_kg")
opts = FitOptions(forest=ForestConfig(n_trees=60, seed=42))

preds = {}
for kind, label in [("lr_hcd", "LR"), ("lr2_h", "LR2"), ("lr3_hd", "LR3"), ("rf", "RF"), ("gpr", "GPR")]:
    preds[label] = fit_model(kind, train, opts).predict_biomass(list(test))
    r = evaluate(y, preds[label])
    print(f"{label:4s} R2={r.r2:.3f}  RMSE={r.rmse_kg:7.1f} kg  Bias={r.bias:+.3f}  "
          f"excluded={r.n_outliers_excluded}")

# Residual structure along height: mean +/- half a standard deviation per bin.
binned = binned_residuals(test.column("height_m"), y - preds["GPR"], n_bins=5)
for row in binned.rows():
    print("{bin}: H {bin_low:5.1f}-{bin_high:5.1f} m  mean {mean_residual:+8.1f}  half-sd {half_std:7.1f}".format(**row))
