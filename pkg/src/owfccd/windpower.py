"""Piecewise-quadratic turbine power curves.

A curve is a list of knots ``cut_in = s0 < s1 < ... < sm = rated_speed`` and
one quadratic ``c0 + c1*v + c2*v**2`` (MW) per interval. Outside the knots the
curve is 0 below cut-in, ``rated_power`` on ``[rated_speed, cut_out)`` and 0
from cut-out on. Evaluation is clamped to ``[0, rated_power]``.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .core import DomainError

# GE 1.5 MW class anchors, m/s
DEFAULT_CUT_IN = 3.5
DEFAULT_RATED_SPEED = 14.0
DEFAULT_CUT_OUT = 25.0
DEFAULT_RATED_POWER = 1.5


class UnderdeterminedSegmentError(DomainError):
    pass


@dataclass(frozen=True)
class PowerCurve:
    knots: tuple
    coefficients: tuple  # one (c0, c1, c2) per segment, MW, MW s/m, MW s^2/m^2
    rated_power: float
    cut_out: float = DEFAULT_CUT_OUT
    rms_residual: float = field(default=0.0, compare=False)

    def __post_init__(self):
        knots = tuple(float(k) for k in self.knots)
        coefs = tuple(tuple(float(c) for c in row) for row in self.coefficients)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "coefficients", coefs)
        if len(knots) < 2 or len(coefs) != len(knots) - 1:
            raise DomainError("need m+1 knots for m segments")
        if any(len(row) != 3 for row in coefs):
            raise DomainError("each segment needs three coefficients")
        if np.any(np.diff(knots) <= 0):
            raise DomainError("knots must be strictly increasing")
        if not 0 < knots[0] < knots[-1] < self.cut_out:
            raise DomainError("need 0 < cut_in < rated_speed < cut_out")
        if self.rated_power <= 0:
            raise DomainError("rated_power must be > 0")

    @property
    def cut_in(self):
        return self.knots[0]

    @property
    def rated_speed(self):
        return self.knots[-1]

    def joint_gaps(self):
        """Absolute jump of the polynomial pieces at each interior knot."""
        gaps = []
        for j, v in enumerate(self.knots[1:-1]):
            left = np.polyval(self.coefficients[j][::-1], v)
            right = np.polyval(self.coefficients[j + 1][::-1], v)
            gaps.append(abs(left - right))
        return np.array(gaps)

    def __call__(self, speed):
        return power_at(self, speed)


def power_at(curve, speed):
    """Power in MW at wind ``speed`` (m/s); scalar in, scalar out."""
    v = np.asarray(speed, dtype=float)
    if np.any(v < 0) or np.any(~np.isfinite(v)):
        raise DomainError("wind speed must be finite and >= 0")
    knots = np.asarray(curve.knots)
    coefs = np.asarray(curve.coefficients)
    seg = np.clip(np.searchsorted(knots, v, side="right") - 1, 0, len(coefs) - 1)
    c = coefs[seg]
    p = c[..., 0] + c[..., 1] * v + c[..., 2] * v * v
    p = np.clip(p, 0.0, curve.rated_power)
    p = np.where(v < curve.cut_in, 0.0, p)
    p = np.where((v >= curve.rated_speed) & (v < curve.cut_out), curve.rated_power, p)
    p = np.where(v >= curve.cut_out, 0.0, p)
    return float(p) if p.ndim == 0 else p


def upscale(curve, farm_rating):
    """Scale every power output by ``farm_rating / curve.rated_power``."""
    if farm_rating <= 0:
        raise DomainError("farm rating must be > 0")
    s = farm_rating / curve.rated_power
    coefs = tuple(tuple(s * c for c in row) for row in curve.coefficients)
    return PowerCurve(curve.knots, coefs, float(farm_rating), curve.cut_out,
                      curve.rms_residual * s)


def fit_power_curve(samples, knots, cut_out=DEFAULT_CUT_OUT, rated_power=None):
    """Least-squares piecewise quadratic, continuous at interior knots.

    Parameters
    ----------
    samples : array_like, shape (n, 2)
        (speed m/s, power MW) pairs sorted by speed. Samples outside
        ``[knots[0], knots[-1]]`` are ignored.
    knots : sequence of float
        Segment boundaries; the first is the cut-in and the last the rated
        speed.
    rated_power : float, optional
        Plateau power; defaults to the largest sample power.

    Returns
    -------
    PowerCurve
        With ``rms_residual`` set to the RMS misfit over the used samples.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise DomainError("samples must be an (n, 2) array of (speed, power)")
    if np.any(np.diff(data[:, 0]) < 0):
        raise DomainError("samples must be sorted by speed")
    knots = np.asarray(knots, dtype=float)
    m = len(knots) - 1
    if m < 1:
        raise DomainError("need at least two knots")

    v, p = data[:, 0], data[:, 1]
    inside = (v >= knots[0]) & (v <= knots[-1])
    v, p = v[inside], p[inside]
    seg = np.clip(np.searchsorted(knots, v, side="right") - 1, 0, m - 1)
    counts = np.bincount(seg, minlength=m)
    for j in range(m):
        if counts[j] < 3:
            raise UnderdeterminedSegmentError(
                f"segment {j} [{knots[j]}, {knots[j + 1]}] has {counts[j]} samples, need >= 3")

    n_par = 3 * m
    design = np.zeros((len(v), n_par))
    for power in range(3):
        design[np.arange(len(v)), 3 * seg + power] = v ** power
    cons = np.zeros((m - 1, n_par))
    for j in range(m - 1):
        kv = knots[j + 1] ** np.arange(3)
        cons[j, 3 * j:3 * j + 3] = kv
        cons[j, 3 * j + 3:3 * j + 6] = -kv
    # equality-constrained least squares through the KKT system
    kkt = np.block([[design.T @ design, cons.T],
                    [cons, np.zeros((m - 1, m - 1))]])
    rhs = np.concatenate([design.T @ p, np.zeros(m - 1)])
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:n_par]
    resid = design @ sol - p
    rated = float(np.max(data[:, 1])) if rated_power is None else float(rated_power)
    return PowerCurve(tuple(knots), tuple(tuple(sol[3 * j:3 * j + 3]) for j in range(m)),
                      rated, cut_out, float(np.sqrt(np.mean(resid ** 2))))


def default_curve(rated_power=DEFAULT_RATED_POWER, cut_in=DEFAULT_CUT_IN,
                  rated_speed=DEFAULT_RATED_SPEED, cut_out=DEFAULT_CUT_OUT):
    """Smooth two-piece S curve through (cut_in, 0) and (rated_speed, rated).

    A convex parabola rising from cut-in meets a concave one that flattens
    into the rated plateau; value and slope match at the midpoint.
    """
    mid = 0.5 * (cut_in + rated_speed)
    half = mid - cut_in
    a = rated_power / (2.0 * half * half)
    rising = (a * cut_in ** 2, -2.0 * a * cut_in, a)
    flattening = (rated_power - a * rated_speed ** 2, 2.0 * a * rated_speed, -a)
    return PowerCurve((cut_in, mid, rated_speed), (rising, flattening), rated_power, cut_out)


def save_curve(curve, path):
    doc = {"schema": "owfccd.power_curve/1", "knots": list(curve.knots),
           "coefficients": [list(c) for c in curve.coefficients],
           "rated_power": curve.rated_power, "cut_out": curve.cut_out}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def load_curve(path):
    """Read a curve file holding either coefficients or raw samples.

    Sample files carry ``{"samples": [[v, p], ...], "knots": [...]}`` and
    are fitted on load.
    """
    with open(path) as fh:
        doc = json.load(fh)
    allowed = {"schema", "knots", "coefficients", "samples", "rated_power", "cut_out"}
    unknown = set(doc) - allowed
    if unknown:
        raise DomainError(f"unknown keys in curve file: {sorted(unknown)}")
    cut_out = doc.get("cut_out", DEFAULT_CUT_OUT)
    if "samples" in doc:
        return fit_power_curve(doc["samples"], doc["knots"], cut_out, doc.get("rated_power"))
    return PowerCurve(tuple(doc["knots"]), tuple(map(tuple, doc["coefficients"])),
                      doc["rated_power"], cut_out)


def write_curve_csv(curve, path, step=0.1, max_speed=30.0):
    """Emit speed/power pairs for plotting the curve."""
    speeds = np.round(np.arange(0.0, max_speed + step / 2, step), 10)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["speed_mps", "power_mw"])
        for v, p in zip(speeds, power_at(curve, speeds)):
            w.writerow([repr(float(v)), repr(float(p))])
