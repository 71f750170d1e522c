"""A walk through the synthetic thin market.

Run with ``python3 demos/01_synthetic_market.py``. Nothing is written to disk.
"""
from datetime import timedelta

import numpy as np

from thinmkt.core import BlockTimestamp, lag_diff, lag_diff_bucket
from thinmkt.sim import ShockEvent, SimConfig, inject_shock, simulate

# Three weeks of one zone. Prices are a base level plus daily, weekly and
# yearly sines, Gaussian noise and the occasional supply or demand shock.
cfg = SimConfig(days=21, seed=4)
ds = simulate(cfg)
prices = ds.prices.values.reshape(cfg.days, 96)
print(f"{cfg.days} days, {len(ds.shocks)} shocks, price range "
      f"{prices.min():.0f}..{prices.max():.0f}")
print("mean price by hour of day:",
      np.round(prices.reshape(cfg.days, 24, 4).mean(axis=(0, 2))).astype(int).tolist())

# Shocks only start between blocks 29 and 80, so nights stay calm.
for ev in ds.shocks[:5]:
    print(f"  {ev.kind:<13} {ev.start}  {ev.duration:>2} blocks  {ev.magnitude:6.0f} MW")

# Drivers are day-ahead schedules. A shock that moves prices on day d shows
# up in the driver rows stamped on day d-1, exactly 96 blocks earlier.
quiet = simulate(SimConfig(days=5, seed=0, shock_rate=0.0, noise_sd=0.0,
                           driver_noise_sd=0.0, demand_noise_sd=0.0))
event = ShockEvent(BlockTimestamp(cfg.start + timedelta(days=3), 50), "outage", 6, 800.0)
hit = inject_shock(quiet, event)
price_rows = np.flatnonzero(hit.prices.values != quiet.prices.values)
driver_rows = np.flatnonzero(np.any(hit.drivers.values != quiet.drivers.values, axis=1))
print(f"price moves at rows {price_rows[0]}..{price_rows[-1]}, "
      f"drivers at rows {driver_rows[0]}..{driver_rows[-1]} (lead {price_rows[0] - driver_rows[0]})")

# 2.5 * 800 MW on a 3000 base is a 67% jump over yesterday's block.
ld = lag_diff(hit.prices, event.start)
print(f"Lag_Diff at the shock: {ld:.1f}% -> bucket {lag_diff_bucket(ld)}")
