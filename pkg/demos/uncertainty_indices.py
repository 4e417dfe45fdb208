"""
Model versus fitting uncertainty
================================

Model uncertainty asks how much ln(biomass) varies among trees that share
similar inputs.  Fitting uncertainty asks how far a regressor sits from the
local average.  Both are ratios on the log scale.
"""

from biomass_uq import fit_model, fitting_uncertainty, model_uncertainty
from biomass_uq.synthetic import inventory
from biomass_uq.uncertainty import pocket_geometric_means

data = inventory(3000, seed=5)

for key in ("h", "d", "cd", "h_cd"):
    print(f"model uncertainty sorted by {key:4s}: {100 * model_uncertainty(data, key).overall:5.2f}%")

for kind in ("lr2_h", "lr3_hd", "gpr"):
    rep = fitting_uncertainty(data, fit_model(kind, data).predict_biomass(list(data)))
    print(f"fitting uncertainty {kind:7s}: {100 * rep.overall:5.2f}%")

# The per-pocket geometric mean is the zero point of the fitting index.
print("geometric-mean predictor:", fitting_uncertainty(data, pocket_geometric_means(data)).overall)
