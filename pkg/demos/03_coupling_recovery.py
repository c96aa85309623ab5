"""
Closed-form coupling recovery
=============================

With the true directions known, the banded Toeplitz coupling vector of each
target and subcarrier follows from a small ``L x L`` linear system. We
compare the estimates with the synthesized coefficients, noiseless and at
20 dB.
"""

import numpy as np

from thzdoa import ArrayConfig, SectorPlan, decompose, estimate_coupling
from thzdoa.scene import Scene, make_plan, random_betas, random_coupling, synth_snapshots

arr = ArrayConfig(64, 8, 300e9, 30e9, 16)
rng = np.random.default_rng(5)
sectors = SectorPlan.uniform(6)
scene = Scene(np.deg2rad([-31.0, 18.0]), random_betas(2, rng), random_coupling(6, 16, rng), sectors)

for snr in (None, 20.0):
    plan = make_plan(arr, 100, snr, rng)
    snaps = synth_snapshots(arr, scene, plan, rng)
    dec = decompose(snaps.Y, 2)
    m = 4
    truth = scene.true_coefficients(m)
    label = "noiseless" if snr is None else f"{snr:g} dB"
    print(f"--- {label}, subcarrier {m}")
    for k in range(2):
        c = estimate_coupling(arr, dec, plan.combiner, scene.spatial[k], m, 5)
        err = np.max(np.abs(c - truth[k]) / np.abs(truth[k]))
        print(f"target {k}: |c| = {np.round(np.abs(c), 4)}  max rel. error {err:.1e}")
