"""
RMSE versus SNR for the four estimators
=======================================

A reduced Monte-Carlo sweep on the desk profile: 10 trials per cell instead
of 50, so it finishes in about a minute. The full sweep is
``thzdoa sweep --profile desk``.
"""

from thzdoa.harness import load_profile, run_sweep, validate_config

base = load_profile("desk")
cfg = validate_config({**base, "sweep": {**base["sweep"], "snr_db": [0, 20], "trials": 10}})

table = run_sweep(cfg, progress=lambda mode, snr: print(f"  done {mode} @ {snr:g} dB"))
print()
print(f"{'mode':6s} {'SNR':>5s} {'RMSE [deg]':>11s} {'iters':>6s}")
for mode, snr, err, _, _, _, iters in table.rows:
    print(f"{mode:6s} {snr:5.0f} {err:11.4f} {iters:6.1f}")
