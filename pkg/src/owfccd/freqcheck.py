"""Post-hoc frequency response of a designed farm after a generator trip.

Single-bus swing model in per unit of the system base,

    2H d(df)/dt = (sum_i P_i - dP) / S_base - D * df,

where each asset chases its droop command ``k_i * (-df_db)`` through a
first-order lag, ``df_db`` being the deviation outside the deadband, and
the command is clipped to the asset's scheduled reserve. Integrated with
classical fourth-order Runge-Kutta on a fixed step.

The grid defaults (2H = 8 s, D = 1 pu/pu, 0.2 s lag, 100 GW base) are
illustrative placeholders, not measured system data.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import DomainError

OK = "OK"
DIVERGED = "DIVERGED"
DIVERGENCE_PU = 0.5             # |df| beyond this is treated as blow-up


@dataclass(frozen=True)
class GridAggregate:
    """Lumped grid seen from the point of interconnection.

    Attributes
    ----------
    inertia_2h : float
        ``2H`` in seconds on ``base_mw``. Illustrative default.
    load_damping : float
        ``D`` in pu power per pu frequency on ``base_mw``. Illustrative default.
    nominal_hz : float
    deadband_hz : float
        Half-width of the droop deadband.
    actuation_lag_s : float
        First-order lag of every asset's power response. Illustrative default.
    base_mw : float
        System base; a trip of ``dP`` MW is ``dP / base_mw`` pu.
    """

    inertia_2h: float = 8.0
    load_damping: float = 1.0
    nominal_hz: float = 60.0
    deadband_hz: float = 0.017
    actuation_lag_s: float = 0.2
    base_mw: float = 100_000.0

    def __post_init__(self):
        if not self.inertia_2h > 0:
            raise DomainError("inertia must be > 0")
        if self.load_damping < 0:
            raise DomainError("damping must be >= 0")
        if self.deadband_hz < 0 or self.nominal_hz <= 0:
            raise DomainError("deadband must be >= 0 and nominal frequency > 0")
        if not self.actuation_lag_s > 0 or not self.base_mw > 0:
            raise DomainError("lag and base must be > 0")

    @property
    def deadband_pu(self):
        return self.deadband_hz / self.nominal_hz

    @property
    def damping_mw(self):
        """Load damping in MW per pu frequency."""
        return self.load_damping * self.base_mw


@dataclass(frozen=True)
class Asset:
    """Droop-responding asset.

    ``gain`` is in MW per pu frequency; ``up_mw`` and ``down_mw`` cap the
    response to under- and over-frequency (``inf`` disables the cap).
    """

    name: str
    gain: float
    up_mw: float = np.inf
    down_mw: float = np.inf

    def __post_init__(self):
        if self.gain < 0 or self.up_mw < 0 or self.down_mw < 0:
            raise DomainError(f"{self.name}: gain and reserve must be >= 0")


def _as_assets(assets):
    out = []
    for i, a in enumerate(assets):
        if isinstance(a, Asset):
            out.append(a)
        elif len(a) == 2:
            out.append(Asset(f"asset{i}", float(a[0]), float(a[1]), float(a[1])))
        elif len(a) == 3:
            out.append(Asset(f"asset{i}", float(a[0]), float(a[1]), float(a[2])))
        else:
            raise DomainError("assets are Asset, (k, reserve) or (k, up, down)")
    return out


@dataclass(eq=False)
class FreqTrajectory:
    time: np.ndarray            # s
    frequency: np.ndarray       # Hz
    power: np.ndarray           # (n_assets, n_steps + 1) MW delivered
    names: tuple
    trip_mw: float
    grid: GridAggregate
    status: str = OK
    caps: np.ndarray = field(default=None, repr=False)   # (n_assets, 2) up, down

    @property
    def deviation_pu(self):
        return (self.frequency - self.grid.nominal_hz) / self.grid.nominal_hz

    @property
    def nadir_hz(self):
        """Extreme frequency in the direction of the disturbance."""
        return float(self.frequency.min() if self.trip_mw >= 0 else self.frequency.max())

    @property
    def nadir_time(self):
        f = self.frequency
        return float(self.time[np.argmin(f) if self.trip_mw >= 0 else np.argmax(f)])

    @property
    def steady_state_pu(self):
        return float(self.deviation_pu[-1])

    @property
    def steady_state_power(self):
        return self.power[:, -1].copy()


def deadband(df, band):
    """Deviation outside a symmetric deadband, sign preserved."""
    return np.sign(df) * np.maximum(np.abs(df) - band, 0.0)


def simulate_trip(grid, trip_mw, assets, horizon_s=60.0, dt_s=0.01):
    """Frequency trajectory after losing ``trip_mw`` of generation at t = 0.

    Parameters
    ----------
    grid : GridAggregate
    trip_mw : float
        Lost generation; negative values model a load trip.
    assets : sequence
        :class:`Asset` objects or ``(k, reserve)`` / ``(k, up, down)`` tuples.
    horizon_s, dt_s : float
        Simulated time and fixed RK4 step; ``dt_s`` must not exceed a fifth
        of the actuation lag.

    Returns
    -------
    FreqTrajectory
        Status is ``DIVERGED`` if the state leaves a sane range or becomes
        non-finite; the trajectory is then truncated there.
    """
    assets = _as_assets(assets)
    if not dt_s > 0 or not horizon_s > 0:
        raise DomainError("dt and horizon must be > 0")
    if dt_s > grid.actuation_lag_s / 5 * (1 + 1e-12):
        raise DomainError(f"dt_s={dt_s} exceeds actuation lag / 5 = {grid.actuation_lag_s / 5}")
    n_steps = int(round(horizon_s / dt_s))
    gains = np.array([a.gain for a in assets], dtype=float)
    up = np.array([a.up_mw for a in assets], dtype=float)
    down = np.array([a.down_mw for a in assets], dtype=float)
    db, tau, base = grid.deadband_pu, grid.actuation_lag_s, grid.base_mw
    dp = trip_mw / base

    def rhs(state):
        df, p = state[0], state[1:]
        cmd = np.clip(-gains * deadband(df, db), -down, up)
        ddf = (p.sum() / base - dp - grid.load_damping * df) / grid.inertia_2h
        return np.concatenate([[ddf], (cmd - p) / tau])

    state = np.zeros(1 + len(assets))
    out = np.empty((n_steps + 1, len(state)))
    out[0] = state
    status, last = OK, n_steps
    for k in range(n_steps):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * dt_s * k1)
        k3 = rhs(state + 0.5 * dt_s * k2)
        k4 = rhs(state + dt_s * k3)
        state = state + dt_s / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(state)) or abs(state[0]) > DIVERGENCE_PU:
            status, last = DIVERGED, k
            break
        out[k + 1] = state
    out = out[:last + 1]
    t = dt_s * np.arange(last + 1)
    return FreqTrajectory(t, grid.nominal_hz * (1.0 + out[:, 0]), out[:, 1:].T,
                          tuple(a.name for a in assets), float(trip_mw), grid, status,
                          np.column_stack([up, down]))


def steady_state_deviation(grid, gains, trip_mw, use_deadband=True):
    """Settling deviation in pu when no asset hits its cap.

    Solves ``sum(k) * (|df| - db) + D * S * |df| = dP`` for ``|df|``.
    """
    k = float(np.sum(gains))
    d = grid.damping_mw
    db = grid.deadband_pu if use_deadband else 0.0
    if k + d <= 0:
        raise DomainError("no damping and no droop: no steady state")
    mag = (abs(trip_mw) + k * db) / (k + d)
    if mag <= db:
        mag = abs(trip_mw) / d
    return -np.sign(trip_mw) * mag


def scale_trip(trip_mw, from_system_mw, to_system_mw):
    """Trip of the same relative size on a system of a different size."""
    return trip_mw * to_system_mw / from_system_mw


def assets_from_solution(solution, quarter, leaf=0):
    """Wind and storage droop assets at one (leaf, quarter) of a design."""
    s = lambda name: float(solution.schedule(name)[leaf, quarter])
    return [Asset("wind", s("kW"), s("rWU"), s("rWD")),
            Asset("ess", s("kB"), s("rBU"), s("rBD"))]


def verify_reserve_delivery(solution, quarter, trajectory, leaf=0, rel_tol=0.01, abs_tol=1e-6):
    """Compare steady-state delivery with the reserve schedule.

    Each asset must deliver no more than its scheduled reserve in the
    direction of the event, and exactly ``k * |df_db|`` (within
    ``rel_tol``) when that stays below the cap.

    Returns
    -------
    dict
        ``ok`` plus per-asset scheduled, expected and delivered MW.
    """
    assets = assets_from_solution(solution, quarter, leaf)
    df = trajectory.steady_state_pu
    band = deadband(df, trajectory.grid.deadband_pu)
    under = trajectory.trip_mw >= 0
    delivered = trajectory.steady_state_power
    rows, ok = {}, trajectory.status == OK
    for a, p in zip(assets, delivered):
        cap = a.up_mw if under else a.down_mw
        want = a.gain * abs(band)
        got = abs(p)
        capped = want >= cap
        within = got <= cap + abs_tol
        matches = abs(got - min(want, cap)) <= rel_tol * max(min(want, cap), 0.0) + abs_tol
        rows[a.name] = {"scheduled_mw": cap, "expected_mw": min(want, cap), "delivered_mw": got,
                        "capped": bool(capped), "within_cap": bool(within), "matches": bool(matches)}
        ok = ok and within and matches
    return {"ok": bool(ok), "quarter": int(quarter), "leaf": int(leaf),
            "steady_state_pu": df, "assets": rows}


def write_trajectory_csv(trajectory, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "frequency_hz"] + [f"{n}_mw" for n in trajectory.names])
        for i, t in enumerate(trajectory.time):
            w.writerow([f"{t:.6f}", f"{trajectory.frequency[i]:.9f}"]
                       + [f"{p:.6f}" for p in trajectory.power[:, i]])
