"""Time grids, parameter bundles and economic primitives.

Everything in here is immutable after construction. Index sets are 1-based
at the public surface (hour 1 .. 24, quarter 1 .. 96) and 0-based inside
array code; ``hour_of_quarter`` and ``quarters_of_hour`` convert between the
two conventions.
"""

import math
from dataclasses import dataclass, fields

import numpy as np

QUARTERS_PER_HOUR = 4
DAYS_PER_YEAR = 365

# $/MW/km, HVDC cable material (route-length inclusive once multiplied by km)
CABLE_RATE_PER_MW_KM = 310.6
# $/km, cable installation, independent of rating
CABLE_INSTALL_PER_KM = 118_130.0
# $/MW, lithium-ion ESS rated power
ESS_UNIT_COST = 889_100.0
# $, onshore + offshore converter stations, held fixed
CONVERTER_FIXED_COST = 855.4e6
# MW, rating of one HVDC cable module used by the baseline design
CABLE_MODULE_MW = 2600.0


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


def _check(cond, msg):
    if not cond:
        raise DomainError(msg)


@dataclass(frozen=True)
class TimeGrid:
    """Hourly and quarter-hourly index sets of one market day.

    ``n_hours`` is 24 for a real day; shorter analog horizons are used for
    desk-scale checks.
    """

    n_hours: int = 24
    quarter_length_h: float = 1.0 / QUARTERS_PER_HOUR

    def __post_init__(self):
        _check(int(self.n_hours) == self.n_hours and self.n_hours >= 1,
               f"n_hours must be a positive integer, got {self.n_hours}")
        _check(math.isclose(self.quarter_length_h * QUARTERS_PER_HOUR, 1.0),
               "quarter_length_h must be 1/4 hour")

    @property
    def n_quarters(self):
        return QUARTERS_PER_HOUR * self.n_hours

    @property
    def hours(self):
        return tuple(range(1, self.n_hours + 1))

    @property
    def quarters(self):
        return tuple(range(1, self.n_quarters + 1))

    @property
    def hour_of_quarter(self):
        """0-based hour index for each 0-based quarter index."""
        return np.repeat(np.arange(self.n_hours), QUARTERS_PER_HOUR)

    def to_quarters(self, hourly):
        """Replicate an hourly array (last axis) onto its quarters."""
        hourly = np.asarray(hourly)
        if hourly.shape[-1] != self.n_hours:
            raise DomainError(f"expected {self.n_hours} hourly values, got {hourly.shape[-1]}")
        return np.repeat(hourly, QUARTERS_PER_HOUR, axis=-1)


def quarters_of_hour(grid, hour):
    """Return the four 1-based quarter indices that make up ``hour``.

    >>> quarters_of_hour(TimeGrid(), 7)
    (25, 26, 27, 28)
    """
    if not (isinstance(hour, (int, np.integer)) and 1 <= hour <= grid.n_hours):
        raise DomainError(f"hour {hour!r} is not in 1..{grid.n_hours}")
    first = QUARTERS_PER_HOUR * (int(hour) - 1)
    return tuple(first + k for k in range(1, QUARTERS_PER_HOUR + 1))


@dataclass(frozen=True)
class EconParams:
    """Cost and discounting coefficients of the design objective.

    Attributes
    ----------
    tax_credit : float
        Multiplier applied to installation cost (0.7 = 30 % credit).
    ess_unit_cost : float
        $/MW of storage rated power.
    cable_unit_cost : float
        $/MW of cable rating, already multiplied by route length.
    inflation_rate : float
        Yearly rate used by the annuity factor.
    lifetime_years : int
        Storage lifetime used by the annuity factor.
    converter_fixed_cost : float
        $ added to every reported cost; never optimised.
    cable_installation_cost : float
        $ per route, independent of rating; reported, never optimised.
    """

    tax_credit: float = 0.7
    ess_unit_cost: float = ESS_UNIT_COST
    cable_unit_cost: float = CABLE_RATE_PER_MW_KM * 545.060
    inflation_rate: float = 0.03
    lifetime_years: int = 15
    converter_fixed_cost: float = CONVERTER_FIXED_COST
    cable_installation_cost: float = CABLE_INSTALL_PER_KM * 545.060

    def __post_init__(self):
        _check(self.inflation_rate > 0, "inflation_rate must be > 0")
        _check(int(self.lifetime_years) == self.lifetime_years and self.lifetime_years >= 1,
               "lifetime_years must be an integer >= 1")
        for name in ("tax_credit", "ess_unit_cost", "cable_unit_cost",
                     "converter_fixed_cost", "cable_installation_cost"):
            _check(getattr(self, name) >= 0, f"{name} must be >= 0")

    @classmethod
    def for_route(cls, distance_km, rate_per_mw_km=CABLE_RATE_PER_MW_KM,
                  install_per_km=CABLE_INSTALL_PER_KM, **kwargs):
        _check(distance_km > 0, "distance_km must be > 0")
        return cls(cable_unit_cost=rate_per_mw_km * distance_km,
                   cable_installation_cost=install_per_km * distance_km, **kwargs)


@dataclass(frozen=True)
class EssParams:
    eta_ch: float = 0.95
    eta_dis: float = 0.95
    duration_h: float = 4.0
    cycle_limit: float = 1.0
    size_cap_fraction: float = 0.05

    def __post_init__(self):
        _check(0 < self.eta_ch <= 1, "eta_ch must be in (0, 1]")
        _check(0 < self.eta_dis <= 1, "eta_dis must be in (0, 1]")
        _check(self.duration_h > 0, "duration_h must be > 0")
        _check(self.cycle_limit > 0, "cycle_limit must be > 0")
        _check(0 <= self.size_cap_fraction <= 1, "size_cap_fraction must be in [0, 1]")


@dataclass(frozen=True)
class CableParams:
    """Two-bus HVDC link. Bus 1 is offshore, bus 2 onshore.

    ``conductance`` is in MW per pu-voltage squared so that the sending-end
    flow is ``conductance * V1 * (V1 - V2)`` MW. :func:`cable_conductance`
    derives it from route length and loop resistance.
    """

    conductance: float = 0.0
    v_min: tuple = (0.95, 0.95)
    v_max: tuple = (1.05, 1.05)
    safety_factor: float = 1.1
    distance_km: float = 545.060

    def __post_init__(self):
        if self.conductance == 0.0:
            object.__setattr__(self, "conductance", cable_conductance(self.distance_km))
        object.__setattr__(self, "v_min", tuple(float(v) for v in np.broadcast_to(self.v_min, 2)))
        object.__setattr__(self, "v_max", tuple(float(v) for v in np.broadcast_to(self.v_max, 2)))
        _check(self.conductance > 0, "conductance must be > 0")
        for lo, hi in zip(self.v_min, self.v_max):
            _check(0 < lo < hi, f"need 0 < v_min < v_max, got {lo}, {hi}")
        _check(self.safety_factor >= 1, "safety_factor must be >= 1")
        _check(self.distance_km > 0, "distance_km must be > 0")


def cable_conductance(distance_km, ohm_per_km=0.0113, base_kv=1050.0):
    """Cable conductance in MW/pu^2 from route length.

    Defaults describe a +-525 kV bipole with 2500 mm^2 copper conductors,
    treated as one loop of twice the route length.
    """
    _check(distance_km > 0 and ohm_per_km > 0 and base_kv > 0, "cable data must be positive")
    return base_kv ** 2 / (2.0 * ohm_per_km * distance_km)


@dataclass(frozen=True)
class ReserveParams:
    """Droop bounds. Gains ``k`` are MW per pu frequency, ``R`` is pu/pu."""

    df_up_max: float = 0.01
    df_down_max: float = 0.01
    r_min_wf: float = 0.1
    r_max_wf: float = 0.5
    r_min_ess: float = 0.01
    r_max_ess: float = 0.5
    r_all: float = 0.2

    def __post_init__(self):
        _check(self.df_up_max > 0 and self.df_down_max > 0, "frequency bounds must be > 0")
        _check(0 < self.r_min_wf < self.r_max_wf, "need 0 < r_min_wf < r_max_wf")
        _check(0 < self.r_min_ess < self.r_max_ess, "need 0 < r_min_ess < r_max_ess")
        _check(self.r_all > 0, "r_all must be > 0")


@dataclass(frozen=True)
class FarmParams:
    rated_power_mw: float = 1500.0
    poi_name: str = "WCASCADE"

    def __post_init__(self):
        _check(self.rated_power_mw > 0, "rated_power_mw must be > 0")


# points of interconnection: route length (km), farm rating (MW)
POIS = {
    "WCASCADE": (545.060, 1500.0),
    "JOHN DAY": (444.423, 2350.0),
    "COTTONWOOD": (324.193, 1810.0),
    "TESLA": (603.598, 2640.0),
    "MOSSLAND": (660.732, 1800.0),
}


def annuity_factor(econ):
    """Present value of one unit of daily revenue over the storage lifetime.

    ``365 * ((1 + r)**Y - 1) / (r * (1 + r)**Y)``, evaluated as
    ``365 * (1 - (1 + r)**-Y) / r`` with expm1/log1p for accuracy.
    """
    r, years = econ.inflation_rate, econ.lifetime_years
    _check(r > 0, "inflation rate must be > 0; use 365 * Y for r = 0")
    _check(years >= 1, "lifetime must be >= 1 year")
    return DAYS_PER_YEAR * -math.expm1(-years * math.log1p(r)) / r


def droop_reserve(k, df):
    """Reserve power ``k * df`` held by a droop gain ``k`` at deviation ``df``."""
    k_arr, df_arr = np.asarray(k, dtype=float), np.asarray(df, dtype=float)
    if np.any(k_arr < 0) or np.any(df_arr < 0):
        raise DomainError("droop gain and frequency deviation must be >= 0")
    out = k_arr * df_arr
    return float(out) if out.ndim == 0 else out


def params_to_dict(obj):
    return {f.name: (list(v) if isinstance(v := getattr(obj, f.name), tuple) else v)
            for f in fields(obj)}
