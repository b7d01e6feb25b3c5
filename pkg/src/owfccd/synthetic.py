"""Synthetic market and wind data in the ingest CSV format.

Used for smoke runs and tests when no real price or met-mast data is at
hand. Prices follow a daily shape with day-level and hourly noise; wind
speeds are a Weibull-marginal AR(1) process obtained by transforming a
Gaussian AR(1) through its CDF.
"""

import json
import os

import numpy as np
import pandas as pd
from scipy import stats

from .ingest import PRICE_KINDS, PriceSeries, WindSeries, write_price_csv, write_wind_csv


def synthetic_series(n_days=60, start="2022-01-01", seed=0, weibull_shape=2.2,
                     weibull_scale=9.5, wind_rho=0.9):
    """Price series per kind and a wind series covering ``n_days`` UTC days."""
    rng = np.random.default_rng(seed)
    t0 = pd.Timestamp(start, tz="UTC")
    hours = pd.date_range(t0, periods=24 * n_days, freq="1h")
    quarters = pd.date_range(t0, periods=96 * n_days, freq="15min")

    hod = np.arange(24)
    shape = 38.0 + 8.0 * np.sin((hod - 9) * np.pi / 12) + 6.0 * np.exp(-0.5 * ((hod - 19) / 2) ** 2)
    day_level = rng.normal(0.0, 5.0, n_days)
    da = (shape[None, :] + day_level[:, None] + rng.normal(0, 2.0, (n_days, 24))).ravel()
    rt = np.repeat(da, 4) + rng.normal(0, 6.0, 96 * n_days)
    res_up = np.maximum(rng.lognormal(np.log(4.0), 0.6, 96 * n_days), 0.0)
    res_down = np.maximum(rng.lognormal(np.log(2.0), 0.6, 96 * n_days), 0.0)

    z = np.empty(24 * n_days)
    z[0] = rng.normal()
    eps = rng.normal(0, np.sqrt(1 - wind_rho ** 2), len(z))
    for i in range(1, len(z)):
        z[i] = wind_rho * z[i - 1] + eps[i]
    speed = stats.weibull_min.ppf(stats.norm.cdf(z), weibull_shape, scale=weibull_scale)

    prices = {"DA": PriceSeries("DA", hours, da), "RT": PriceSeries("RT", quarters, rt),
              "ReserveUp": PriceSeries("ReserveUp", quarters, res_up),
              "ReserveDown": PriceSeries("ReserveDown", quarters, res_down)}
    return prices, WindSeries(hours, speed)


def write_synthetic_dataset(out_dir, poi="WCASCADE", year=2022, n_days=60, seed=0):
    """Write CSVs plus a data manifest; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    prices, wind = synthetic_series(n_days, f"{year}-01-01", seed)
    tag = poi.replace(" ", "_").lower()
    entries = []
    for kind in PRICE_KINDS:
        name = f"{tag}_{year}_{kind.lower()}.csv"
        write_price_csv(prices[kind], os.path.join(out_dir, name))
        entries.append({"poi": poi, "kind": kind, "year": year, "path": name})
    name = f"{tag}_{year}_wind.csv"
    write_wind_csv(wind, os.path.join(out_dir, name))
    entries.append({"poi": poi, "kind": "wind", "year": year, "path": name})
    path = os.path.join(out_dir, "data_manifest.json")
    with open(path, "w") as fh:
        json.dump({"entries": entries}, fh, indent=1)
        fh.write("\n")
    return path
