"""Denoising a smooth signal that drifts over a random geometric graph.

The signal diffuses across 512 sensors for 24 snapshots.  We add uniform
noise and solve a Tikhonov problem that penalizes roughness both across
vertices and across time.  The joint penalty beats either one alone, and
a single IOPA1 pass already lands close to the exact solution.
"""
from polyshift.experiments import ExperimentConfig, exp_timevarying

cfg = ExperimentConfig(experiment="exp-timevarying", trials=2, eta=[0.5])
res = exp_timevarying(cfg)
print("graph:", res["meta"]["graph"], "bridged components:", res["meta"]["bridged"])
for (eta, mode, method), s in res["summary"].items():
    if method != "IOPA1":
        continue
    print(f"eta={eta} {mode:8s} input {s['isnr']:.2f} dB -> IOPA1 {s['snr'][0]:.2f} dB "
          f"(exact {s['snr_inf']:.2f} dB, alpha={s['alpha']:.3g}, beta={s['beta']:.3g})")
