"""How the model confidence set picks and weights forecasters.

Run with ``python3 demos/02_model_confidence_set.py``.
"""
import numpy as np

from thinmkt.mcs import LossMatrix, combine_values, mcs_run

rng = np.random.default_rng(1)
days = tuple(range(10))

# Ten days of MAPE for five models at one block. Two are clearly better
# than the rest and roughly tied with each other.
means = np.array([2.0, 2.2, 6.0, 7.0, 9.0])
L = np.abs(means[:, None] + rng.normal(0, 0.5, (5, 10)))
names = ("HW_1", "Specf1", "svm_pca_15", "pred_ANN_nods_15", "Price Model")
ss = mcs_run(LossMatrix(names, days, L), alpha=0.10, B=1000, seed=0)

print("superior set:", ss.survivors)
print("eliminated (in order):", ss.eliminated)
for m in names:
    print(f"  {m:<18} mean loss {ss.mean_loss[m]:5.2f}  p {ss.pvalues[m]:.3f}  "
          f"weight {ss.weights.get(m, 0.0):.3f}")

# The combined forecast is the inverse-loss weighted sum of survivors.
forecasts = {m: np.array([3000.0 + 100 * i]) for i, m in enumerate(names)}
print("combined:", combine_values(ss.weights, forecasts)[0].round(1))

# A smaller alpha rejects less often, so its set can only be larger.
for alpha in (0.01, 0.10, 0.50):
    print(f"alpha={alpha:.2f}:", mcs_run(LossMatrix(names, days, L), alpha, 1000, 0).survivors)
