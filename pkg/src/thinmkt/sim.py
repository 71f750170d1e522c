"""Synthetic thin-market generator with shock-driven prices and day-ahead drivers.

Prices follow

    price(t) = max(0, base + sum_s A_s sin(2 pi t / P_s + phi_s)
                      + sum_shocks c_kind * magnitude * active(t) + eps_t)

Every shock also appears in the driver matrix, but in the rows published
96 blocks (one day) before its price impact: drivers are day-ahead
schedules, so a model reading the rows of day d-1 sees day d's shocks.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import BLOCKS_PER_DAY, BlockTimestamp, DriverMatrix, PriceSeries, check_zone
from .errors import DataError, WindowError

SHOCK_KINDS = ("outage", "contract_end", "demand_surge")
PERIODS = (BLOCKS_PER_DAY, 7 * BLOCKS_PER_DAY, 35064)
# daily peak near block 76 (19:00)
DEFAULT_PHASES = (math.pi / 2 - 2 * math.pi * 75 / BLOCKS_PER_DAY, 0.0, 0.0)
IPP_PREFIX = "ipp."
IPP_OUTAGE_SHARE = 0.5


@dataclass(frozen=True)
class SimConfig:
    days: int = 120
    zone: str = "E1"
    seed: int = 0
    start: date = date(2016, 1, 1)
    base: float = 3000.0
    amplitudes: tuple = (600.0, 60.0, 40.0)  # for periods 96, 672, 35064
    phases: tuple = DEFAULT_PHASES
    noise_sd: float = 90.0
    shock_rate: float = 0.3  # long-run mean events per day
    # shocks cluster: a two-state calm/stressed regime persists day to day and
    # the calm rate is calm_factor times the stressed rate (1.0 disables it)
    regime_stay: float = 0.9
    calm_factor: float = 0.1
    magnitude_range: tuple = (300.0, 1500.0)  # MW, uniform
    duration_range: tuple = (4, 16)  # blocks, uniform integer
    # start blocks are uniform over this inclusive range: outages and demand
    # swings hit the day and evening, nights stay quiet
    shock_blocks: tuple = (29, 80)
    kind_weights: tuple = (0.4, 0.3, 0.3)
    coefficients: Mapping = field(default_factory=lambda: {
        "outage": 2.5, "contract_end": 2.0, "demand_surge": 2.0})
    demand_base: float = 4000.0
    demand_amplitude: float = 800.0
    ipp_base: float = 1200.0
    corridor_mw: float = 1500.0
    gap_base: float = 200.0
    driver_noise_sd: float = 20.0
    demand_noise_sd: float = 120.0

    def __post_init__(self):
        if self.days < 1:
            raise ValueError("days must be at least 1")
        check_zone(self.zone)
        if len(self.amplitudes) != 3 or len(self.phases) != 3:
            raise ValueError("need three seasonal amplitudes and phases")
        if any(a < 0 for a in self.amplitudes):
            raise ValueError("seasonal amplitudes must be non-negative")
        if min(self.shock_rate, self.noise_sd, self.driver_noise_sd, self.demand_noise_sd) < 0:
            raise ValueError("rates and noise levels must be non-negative")
        if not 0 <= self.regime_stay < 1 or not 0 <= self.calm_factor <= 1:
            raise ValueError("need 0 <= regime_stay < 1 and 0 <= calm_factor <= 1")
        lo, hi = self.magnitude_range
        if not 0 <= lo <= hi:
            raise ValueError("magnitude range must satisfy 0 <= low <= high")
        dlo, dhi = self.duration_range
        if not 1 <= dlo <= dhi:
            raise ValueError("duration range must satisfy 1 <= low <= high")
        blo, bhi = self.shock_blocks
        if not 1 <= blo <= bhi <= BLOCKS_PER_DAY:
            raise ValueError(f"shock blocks must satisfy 1 <= low <= high <= {BLOCKS_PER_DAY}")
        if len(self.kind_weights) != len(SHOCK_KINDS) or min(self.kind_weights) < 0 \
                or sum(self.kind_weights) <= 0:
            raise ValueError("kind weights must be three non-negative numbers")
        coefs = dict(self.coefficients)
        if set(coefs) != set(SHOCK_KINDS):
            raise ValueError(f"coefficients must be given for {SHOCK_KINDS}")
        if not all(math.isfinite(float(v)) for v in coefs.values()):
            raise ValueError("response coefficients must be finite")

    @classmethod
    def from_dict(cls, raw: Mapping) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown simulation keys: {', '.join(sorted(unknown))}")
        kw = dict(raw)
        if "start" in kw:
            kw["start"] = date.fromisoformat(str(kw["start"]))
        for key in ("amplitudes", "phases", "magnitude_range", "duration_range", "kind_weights", "shock_blocks"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "coefficients" in kw:
            kw["coefficients"] = {**cls().coefficients, **kw["coefficients"]}
        return cls(**kw)

    def to_json(self) -> str:
        d = asdict(self)
        d["start"] = self.start.isoformat()
        return json.dumps(d, indent=2, sort_keys=True)


@dataclass(frozen=True, order=True)
class ShockEvent:
    start: BlockTimestamp
    kind: str
    duration: int  # blocks
    magnitude: float  # MW

    def __post_init__(self):
        if self.kind not in SHOCK_KINDS:
            raise ValueError(f"unknown shock kind {self.kind!r}")
        if self.duration < 1:
            raise ValueError("shock duration must be at least one block")
        if not self.magnitude >= 0:
            raise ValueError("shock magnitude must be non-negative")


def driver_columns(zone: str) -> tuple:
    return (f"demand.{zone}", "outage_mw", "contract_delta", f"{IPP_PREFIX}offer_mw",
            "corridor_mw", "ds_gap")


def _kind_columns(kind: str, zone: str):
    """Driver columns moved by one MW of a shock, with their signs."""
    own = {"outage": "outage_mw", "contract_end": "contract_delta",
           "demand_surge": f"demand.{zone}"}[kind]
    moves = [(own, 1.0), ("ds_gap", 1.0)]
    if kind == "outage":
        moves.append((f"{IPP_PREFIX}offer_mw", -IPP_OUTAGE_SHARE))
    return moves


@dataclass(frozen=True, eq=False)
class SimDataset:
    config: SimConfig
    prices: PriceSeries
    drivers: DriverMatrix
    shocks: tuple
    baseline: np.ndarray  # price before shocks and before the zero floor
    raw: np.ndarray  # price with shocks, before the zero floor


def _baseline(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    n = cfg.days * BLOCKS_PER_DAY
    t = np.arange(n, dtype=float)
    y = np.full(n, float(cfg.base))
    for a, p, phi in zip(cfg.amplitudes, PERIODS, cfg.phases):
        if a:
            y += a * np.sin(2 * np.pi * t / p + phi)
    if cfg.noise_sd:
        y += rng.normal(0.0, cfg.noise_sd, n)
    return y


def _base_drivers(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Shock-free schedules; row t describes delivery block t + 96."""
    n = cfg.days * BLOCKS_PER_DAY
    t = np.arange(n, dtype=float) + BLOCKS_PER_DAY
    daily = np.sin(2 * np.pi * t / PERIODS[0] + cfg.phases[0])
    def noise(sd=cfg.driver_noise_sd):
        return rng.normal(0.0, sd, n) if sd else np.zeros(n)

    demand = cfg.demand_base + cfg.demand_amplitude * daily + noise(cfg.demand_noise_sd)
    outage = np.zeros(n)
    contract = np.zeros(n)
    ipp = cfg.ipp_base + noise()
    corridor = np.full(n, cfg.corridor_mw)
    gap = cfg.gap_base + (demand - cfg.demand_base) * 0.25 + noise()
    return np.column_stack([demand, outage, contract, ipp, corridor, gap])


def regime_rates(cfg: SimConfig) -> tuple:
    """(calm, stressed) daily rates; both regimes are equally likely in the long run."""
    stressed = 2.0 * cfg.shock_rate / (1.0 + cfg.calm_factor)
    return cfg.calm_factor * stressed, stressed


def draw_regimes(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Per-day regime flags (True = stressed) from a symmetric two-state chain."""
    out = np.empty(cfg.days, dtype=bool)
    state = bool(rng.random() < 0.5)
    for day in range(cfg.days):
        if day and rng.random() >= cfg.regime_stay:
            state = not state
        out[day] = state
    return out


def draw_shocks(cfg: SimConfig, rng: np.random.Generator) -> list:
    weights = np.asarray(cfg.kind_weights, dtype=float)
    weights = weights / weights.sum()
    first = BlockTimestamp(cfg.start, 1).ordinal
    rates = regime_rates(cfg)
    stressed = draw_regimes(cfg, rng)
    events = []
    for day in range(cfg.days):
        for _ in range(rng.poisson(rates[int(stressed[day])])):
            block = int(rng.integers(cfg.shock_blocks[0], cfg.shock_blocks[1] + 1))
            kind = SHOCK_KINDS[int(rng.choice(len(SHOCK_KINDS), p=weights))]
            duration = int(rng.integers(cfg.duration_range[0], cfg.duration_range[1] + 1))
            magnitude = float(rng.uniform(*cfg.magnitude_range))
            start = BlockTimestamp.from_ordinal(first + day * BLOCKS_PER_DAY + block - 1)
            events.append(ShockEvent(start, kind, duration, magnitude))
    return events


def simulate(cfg: SimConfig) -> SimDataset:
    """Prices, day-ahead drivers and the shock log; deterministic in ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    baseline = _baseline(cfg, rng)
    drivers = _base_drivers(cfg, rng)
    events = draw_shocks(cfg, rng)
    start = BlockTimestamp(cfg.start, 1)
    ds = SimDataset(cfg, PriceSeries(cfg.zone, start, np.maximum(baseline, 0.0)),
                    DriverMatrix(start, driver_columns(cfg.zone), drivers), (),
                    baseline, baseline.copy())
    for ev in events:
        ds = inject_shock(ds, ev, clip=True)
    return ds


def _apply(ds: SimDataset, event: ShockEvent, coefficient, sign: float, clip: bool):
    c = ds.config.coefficients[event.kind] if coefficient is None else float(coefficient)
    i0 = event.start - ds.prices.start
    i1 = i0 + event.duration
    n = len(ds.prices)
    if not clip and (i0 < 0 or i1 > n):
        raise WindowError(f"shock window {event.start} +{event.duration} blocks "
                          f"exits the dataset {ds.prices.start}..{ds.prices.end}")
    a, b = max(i0, 0), min(i1, n)
    if a >= b:
        raise WindowError(f"shock at {event.start} lies outside the dataset")
    raw = ds.raw.copy()
    raw[a:b] += sign * c * event.magnitude
    drv = np.array(ds.drivers.values)
    ra, rb = max(a - BLOCKS_PER_DAY, 0), b - BLOCKS_PER_DAY
    if rb > ra:
        for col, w in _kind_columns(event.kind, ds.config.zone):
            j = ds.drivers.columns.index(col)
            drv[ra:rb, j] += sign * w * event.magnitude
    return raw, drv


def inject_shock(ds: SimDataset, event: ShockEvent, coefficient: float | None = None,
                 clip: bool = False) -> SimDataset:
    """Add ``event`` to prices and to the schedules published a day earlier.

    Without ``clip`` the event window must lie inside the dataset.
    """
    raw, drv = _apply(ds, event, coefficient, 1.0, clip)
    return replace(ds, prices=ds.prices.with_values(np.maximum(raw, 0.0)),
                   drivers=ds.drivers.with_values(drv), shocks=ds.shocks + (event,), raw=raw)


def remove_shock(ds: SimDataset, event: ShockEvent, coefficient: float | None = None) -> SimDataset:
    """Inverse of :func:`inject_shock` for an event in the log."""
    if event not in ds.shocks:
        raise DataError("event is not in the shock log")
    raw, drv = _apply(ds, event, coefficient, -1.0, True)
    log = list(ds.shocks)
    log.remove(event)
    return replace(ds, prices=ds.prices.with_values(np.maximum(raw, 0.0)),
                   drivers=ds.drivers.with_values(drv), shocks=tuple(log), raw=raw)


def shock_component(ds: SimDataset) -> np.ndarray:
    """Price impact reconstructed from the shock log alone."""
    out = np.zeros(len(ds.prices))
    for ev in ds.shocks:
        i0 = ev.start - ds.prices.start
        a, b = max(i0, 0), min(i0 + ev.duration, out.size)
        out[a:b] += ds.config.coefficients[ev.kind] * ev.magnitude
    return out


def shock_log_csv(events) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["kind", "start_date", "start_block", "duration", "magnitude"])
    for ev in events:
        w.writerow([ev.kind, ev.start.date.isoformat(), ev.start.block, ev.duration,
                    repr(float(ev.magnitude))])
    return out.getvalue()


def parse_shock_log(text: str) -> list:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [ShockEvent(BlockTimestamp(date.fromisoformat(r["start_date"]), int(r["start_block"])),
                       r["kind"], int(r["duration"]), float(r["magnitude"])) for r in rows]


def write_dataset(ds: SimDataset, out_dir) -> dict:
    """Write ``prices.csv``, ``drivers.csv`` and ``shocks.csv``; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"prices": out / "prices.csv", "drivers": out / "drivers.csv",
             "shocks": out / "shocks.csv"}
    paths["prices"].write_text(ds.prices.to_csv())
    paths["drivers"].write_text(ds.drivers.to_csv())
    paths["shocks"].write_text(shock_log_csv(ds.shocks))
    return paths
