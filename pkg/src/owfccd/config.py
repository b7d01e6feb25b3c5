"""Run configuration and manifest files.

A config is a JSON object with optional sections; every section overrides
the package defaults field by field and unknown keys are rejected::

    {"schema": "owfccd.config/1", "poi": "WCASCADE", "year": 2022,
     "farm": {...}, "econ": {...}, "ess": {...}, "cable": {...},
     "reserve": {...}, "scengen": {...}, "solver": {...}, "freqcheck": {...}}

Choosing a ``poi`` from the built-in table sets the farm rating and route
length; explicit fields still win.
"""

import json
import os
from dataclasses import dataclass, field, fields

from .core import (CABLE_INSTALL_PER_KM, CABLE_RATE_PER_MW_KM, POIS, CableParams,
                   EconParams, EssParams, FarmParams, ReserveParams)
from .freqcheck import GridAggregate
from .scengen import DEFAULT_SHAPE
from .solver.slp import SolveOptions

CONFIG_SCHEMA = "owfccd.config/1"
RUN_SCHEMA = "owfccd.run/1"
CASES = ("ccd", "base", "noreserve", "noess")
CONFIG_DIR_ENV = "OWFCCD_CONFIG_DIR"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScengenSettings:
    pool_size: int = 10_000
    shape: tuple = DEFAULT_SHAPE
    markovian: bool = True
    batch: int = 2000
    utc_offset_hours: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if self.pool_size < 1 or self.batch < 1:
            raise ConfigError("pool_size and batch must be >= 1")


@dataclass(frozen=True)
class FreqSettings:
    trip_mw: float = 2182.3
    horizon_s: float = 60.0
    dt_s: float = 0.01
    quarter: int = None          # None: quarter of peak scheduled up-reserve
    leaf: int = None             # None: most probable leaf


@dataclass(frozen=True)
class Config:
    poi: str = "WCASCADE"
    year: int = None
    farm: FarmParams = field(default_factory=FarmParams)
    econ: EconParams = field(default_factory=EconParams)
    ess: EssParams = field(default_factory=EssParams)
    cable: CableParams = field(default_factory=CableParams)
    reserve: ReserveParams = field(default_factory=ReserveParams)
    scengen: ScengenSettings = field(default_factory=ScengenSettings)
    solver: SolveOptions = field(default_factory=SolveOptions)
    freq_grid: GridAggregate = field(default_factory=GridAggregate)
    freq: FreqSettings = field(default_factory=FreqSettings)

    def model_kwargs(self):
        return dict(farm=self.farm, econ=self.econ, ess=self.ess, cable=self.cable,
                    reserve=self.reserve)


def _build(cls, section, doc, extra=()):
    doc = dict(doc or {})
    names = {f.name for f in fields(cls)}
    unknown = set(doc) - names - set(extra)
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    return {k: v for k, v in doc.items() if k in names}


def config_from_dict(doc):
    """Build a :class:`Config`; raises :class:`ConfigError` on bad input."""
    top = {"schema", "poi", "year", "farm", "econ", "ess", "cable", "reserve", "scengen",
           "solver", "freqcheck"}
    unknown = set(doc) - top
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if doc.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
        raise ConfigError(f"unsupported config schema {doc.get('schema')!r}")
    poi = doc.get("poi", "WCASCADE")
    distance, rating = POIS.get(poi.upper(), (None, None))
    try:
        farm_kw = _build(FarmParams, "farm", doc.get("farm"))
        farm_kw.setdefault("poi_name", poi)
        if rating is not None:
            farm_kw.setdefault("rated_power_mw", rating)
        cable_kw = _build(CableParams, "cable", doc.get("cable"))
        if distance is not None:
            cable_kw.setdefault("distance_km", distance)
        econ_doc = doc.get("econ") or {}
        econ_kw = _build(EconParams, "econ", econ_doc, extra=("rate_per_mw_km", "install_per_km"))
        route = cable_kw.get("distance_km", CableParams.distance_km)
        econ_kw.setdefault("cable_unit_cost",
                           econ_doc.get("rate_per_mw_km", CABLE_RATE_PER_MW_KM) * route)
        econ_kw.setdefault("cable_installation_cost",
                           econ_doc.get("install_per_km", CABLE_INSTALL_PER_KM) * route)
        fq = dict(doc.get("freqcheck") or {})
        grid_names = {f.name for f in fields(GridAggregate)}
        grid_kw = {k: fq.pop(k) for k in list(fq) if k in grid_names}
        return Config(
            poi=poi, year=doc.get("year"),
            farm=FarmParams(**farm_kw), econ=EconParams(**econ_kw),
            ess=EssParams(**_build(EssParams, "ess", doc.get("ess"))),
            cable=CableParams(**cable_kw),
            reserve=ReserveParams(**_build(ReserveParams, "reserve", doc.get("reserve"))),
            scengen=ScengenSettings(**_build(ScengenSettings, "scengen", doc.get("scengen"))),
            solver=SolveOptions(**_build(SolveOptions, "solver", doc.get("solver"))),
            freq_grid=GridAggregate(**grid_kw),
            freq=FreqSettings(**_build(FreqSettings, "freqcheck", fq)),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(doc)


def default_config_path(name="config.json"):
    """Config file in ``$OWFCCD_CONFIG_DIR``, or ``None`` if unset/absent."""
    base = os.environ.get(CONFIG_DIR_ENV)
    if not base:
        return None
    path = os.path.join(base, name)
    return path if os.path.exists(path) else None


@dataclass(frozen=True)
class RunManifest:
    """What a pipeline run reads and where it writes."""

    config: str = None
    data: str = None
    cases: tuple = CASES
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "cases", tuple(self.cases))
        bad = [c for c in self.cases if c not in CASES]
        if bad:
            raise ConfigError(f"unknown cases {bad}; choose from {list(CASES)}")

    def check_paths(self):
        for label, path in (("config", self.config), ("data manifest", self.data)):
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"{label} file not found: {path}")


def load_run_manifest(path):
    """Read a run manifest; relative paths resolve against its directory."""
    with open(path) as fh:
        doc = json.load(fh)
    allowed = {"schema", "config", "data", "cases", "seed", "output_dir"}
    if set(doc) - allowed:
        raise ConfigError(f"unknown run manifest keys: {sorted(set(doc) - allowed)}")
    if doc.get("schema", RUN_SCHEMA) != RUN_SCHEMA:
        raise ConfigError(f"unsupported run manifest schema {doc.get('schema')!r}")
    base = os.path.dirname(os.path.abspath(path))
    rel = lambda p: None if p is None else os.path.join(base, p)
    return RunManifest(rel(doc.get("config")), rel(doc.get("data")),
                       tuple(doc.get("cases", CASES)), int(doc.get("seed", 0)),
                       rel(doc.get("output_dir", "out")))
