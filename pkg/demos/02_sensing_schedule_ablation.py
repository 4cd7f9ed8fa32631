"""Weight-decay schedules on low-rank matrix sensing.

Factored recovery X = U U^T of a rank-5 ground truth under different
regularization schedules.  Schedules that decay or switch off exploit the
accumulated bias (nuclear norm -> 1, the ground truth's value) and reconstruct
the target; keeping the same total strength on forever trades off training
loss and never recovers; no regularization at all overfits the measurements
while reconstructing poorly.
"""

import time

from mirrorlab import Schedule, SensingConfig, matrix_sensing_run

T_END = 1250.0  # 5000 steps at step size 0.25
SCHEDULES = {
    "no regularization": Schedule("constant", 0.0, t_end=T_END),
    "constant 0.01 (never off)": Schedule("constant", 0.01, t_end=T_END),
    "constant 0.02, off at 625": Schedule("turnoff", 0.02, turnoff_time=625.0, t_end=T_END),
    "constant 0.2, off at 62.5": Schedule("turnoff", 0.2, turnoff_time=62.5, t_end=T_END),
    "linear decay to 625": Schedule("linear-decay", 0.04, turnoff_time=625.0, t_end=T_END),
    "cosine decay to 625": Schedule("cosine-decay", 0.04, turnoff_time=625.0, t_end=T_END),
}

print(f"{'schedule':<28} {'train loss':>11} {'recon err':>11} {'nuclear':>8} {'t@1e-7':>8}")
t0 = time.time()
for name, schedule in SCHEDULES.items():
    cfg = SensingConfig(n=20, r=5, m=120, beta=0.1, eta=0.25, steps=5000,
                        schedule=schedule, seed=0, record_every=50)
    s = matrix_sensing_run(cfg).summary
    reach = "-" if s["time_to_threshold"] is None else f"{s['time_to_threshold']:.0f}"
    print(f"{name:<28} {s['final_train_loss']:>11.2e} {s['final_recon_error']:>11.2e} "
          f"{s['final_nuclear_norm']:>8.4f} {reach:>8}")
print(f"\nall runs share the same total applied strength 12.5 (except the zero run); "
      f"{time.time()-t0:.0f}s")
print("decay/turn-off schedules approach nuclear norm 1.00 and small reconstruction error;")
print("the never-off schedule plateaus, and the unregularized run overfits.")
