"""Synthetic tree populations for tests and demos.

Nothing here is used when fitting real data.
"""

from __future__ import annotations

import numpy as np

from .data_model import Biome, Dataset, TreeRecord


def cone_biomass(height_m, diameter_m, density=500.0):
    """Biomass of a solid cone: ``pi/12 * density * D^2 * H`` (D in meters)."""
    return np.pi / 12.0 * density * np.asarray(diameter_m) ** 2 * np.asarray(height_m)


def cone_law_arrays(n=50, density=500.0, seed=0):
    """Noiseless ``(H [m], D [m], B [kg])`` on a spread of heights and diameters."""
    rng = np.random.default_rng(seed)
    h = rng.uniform(3.0, 45.0, n)
    d = rng.uniform(0.06, 1.2, n)
    return h, d, cone_biomass(h, d, density)


def inventory(n=1000, seed=0, noise=0.35, plots=None, with_crown=True):
    """Heterogeneous population loosely shaped like field allometry data.

    Height and diameter follow a saturating height-diameter curve, crown
    diameter scales with DBH, and biomass follows a height-diameter power
    law with lognormal scatter of ``noise`` (log units).  When ``plots`` is
    given, trees are dealt round-robin into that many plot ids.
    """
    rng = np.random.default_rng(seed)
    d_cm = np.exp(rng.normal(np.log(25.0), 0.75, n))
    d_cm = np.clip(d_cm, 5.0, 250.0)
    h_max = np.exp(rng.normal(np.log(40.0), 0.25, n))
    h = 1.3 + h_max * (1.0 - np.exp(-0.035 * d_cm)) * np.exp(rng.normal(0.0, 0.12, n))
    cd = 0.25 * d_cm ** 0.75 * np.exp(rng.normal(0.0, 0.25, n))
    agb = 0.067 * (0.6 * d_cm ** 2 * h) ** 0.976 * np.exp(rng.normal(0.0, noise, n))
    agb = np.maximum(agb, 2.0)
    biomes = list(Biome)[:-1]
    recs = []
    for i in range(n):
        recs.append(TreeRecord(
            height_m=float(h[i]), biomass_kg=float(agb[i]), diameter_cm=float(d_cm[i]),
            crown_diameter_m=float(cd[i]) if with_crown else None,
            biome=biomes[i % len(biomes)],
            plot_id=None if plots is None else f"P{i % plots:02d}",
            source="synthetic"))
    return Dataset(tuple(recs), f"synthetic(n={n}, seed={seed})")
