"""
Stand totals against an LR3 reference
=====================================

Plot biomass is the sum over trees.  With no harvest data at the stand
level, the height-diameter allometry serves as the reference and the other
models are compared by relative error and %RMSE of plot totals.
"""

from biomass_uq import fit_model, stand_report
from biomass_uq.models import FitOptions
from biomass_uq.forest import ForestConfig
from biomass_uq.synthetic import inventory

train = inventory(2000, seed=9)
stands = inventory(1200, seed=10, plots=12).by_plot()

opts = FitOptions(forest=ForestConfig(n_trees=50))
lr3 = fit_model("lr3_hd", train)
for kind, label in [("lr_hcd", "LR"), ("rf", "RF"), ("gpr", "GPR")]:
    rep = stand_report(stands, fit_model(kind, train, opts), lr3)
    worst = max(rep.per_plot_re, key=lambda p: abs(p[1]))
    print(f"{label:3s} pooled RE {rep.overall_re:+.4f}  %RMSE {100 * rep.pct_rmse:5.2f}%  "
          f"worst plot {worst[0]} ({worst[1]:+.3f})")
