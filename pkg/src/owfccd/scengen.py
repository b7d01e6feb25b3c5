"""Scenario trees from historical days.

Pipeline: fit a Weibull to wind speeds as a goodness-of-fit diagnostic,
draw a large pool of synthetic days from a sequentially weighted kernel
density estimate of the history, then reduce the pool to a tree
``[1, n_da, n_rt, 1, 1, 1]`` by nested k-means.

Days are handled as ``(T, K)`` hourly feature blocks; see
:func:`owfccd.ingest.history_array` for the channel layout.
"""

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats
from sklearn.cluster import KMeans

from .core import DomainError, QUARTERS_PER_HOUR
from .windpower import power_at

logger = logging.getLogger(__name__)

TREE_SCHEMA = "owfccd.scenario_tree/1"
DEFAULT_SHAPE = (1, 20, 5, 1, 1, 1)

# channel slices inside an hourly feature block
DA = slice(0, 1)
RT = slice(1, 5)
RES_UP = slice(5, 9)
RES_DOWN = slice(9, 13)
WIND = slice(13, 14)
N_CHANNELS = 14


@dataclass(frozen=True)
class WeibullFit:
    shape: float
    scale: float
    ks_statistic: float
    ks_pvalue: float
    n: int

    @property
    def ks_pass(self):
        return self.ks_pvalue > 0.05


def fit_weibull(speeds):
    """Maximum-likelihood two-parameter Weibull with a KS goodness-of-fit test.

    ``speeds`` may be an array or a :class:`WindSeries`. Zero speeds are
    dropped (the support is ``v > 0``).
    """
    v = np.asarray(getattr(speeds, "speeds", speeds), dtype=float).ravel()
    v = v[v > 0]
    if len(v) < 100:
        raise DomainError(f"need >= 100 positive wind samples, got {len(v)}")
    if np.ptp(v) <= 1e-12 * np.max(v):
        raise DomainError("degenerate wind series: all samples equal")
    k, _, lam = stats.weibull_min.fit(v, floc=0)
    ks = stats.kstest(v, "weibull_min", args=(k, 0, lam))
    return WeibullFit(float(k), float(lam), float(ks.statistic), float(ks.pvalue), len(v))


def _silverman(x, w):
    """Per-channel Silverman bandwidth of weighted samples.

    ``x`` is (N, K) and ``w`` is (M, N) with rows summing to one; returns
    bandwidths (M, K) and effective sample sizes (M,).
    """
    n_eff = 1.0 / np.sum(w * w, axis=1)
    # centre first so identical rows give an exact zero variance
    xc = x - x.mean(axis=0)
    mean = w @ xc
    var = w @ (xc * xc) - mean * mean
    std = np.sqrt(np.maximum(var, 0.0))
    d = x.shape[1]
    return std * ((4.0 / ((d + 2.0) * n_eff)) ** (1.0 / (d + 4.0)))[:, None], n_eff


def _sample_batch(hist, markovian, rng, size):
    n, t_len, k = hist.shape
    w = np.full((size, n), 1.0 / n)
    out = np.empty((size, t_len, k))
    for t in range(t_len):
        w = w / w.sum(axis=1, keepdims=True)
        x = hist[:, t, :]
        h, _ = _silverman(x, w)
        # inverse-CDF pick of one historical day per trajectory
        u = rng.random(size)
        pick = np.minimum((np.cumsum(w, axis=1) < u[:, None]).sum(axis=1), n - 1)
        draw = x[pick] + h * rng.standard_normal((size, k))
        out[:, t, :] = draw
        if markovian:
            safe = np.where(h > 0, h, 1.0)
            z = (x[None, :, :] - draw[:, None, :]) / safe[:, None, :]
            z = np.where((h > 0)[:, None, :], z, 0.0)
            logw = -0.5 * np.einsum("mnk,mnk->mn", z, z)
            w = np.exp(logw - logw.max(axis=1, keepdims=True))
        else:
            w = np.full((size, n), 1.0 / n)
    return out


def _check_history(history):
    hist = np.asarray(history, dtype=float)
    if hist.ndim != 3 or hist.shape[0] == 0:
        raise DomainError("history must be a non-empty (N, T, K) array")
    if hist.shape[0] < 2:
        raise DomainError("need at least two historical trajectories")
    if np.isnan(hist).any():
        raise DomainError("history has missing entries")
    return hist


def kde_sample_trajectory(history, markovian=True, rng=None):
    """Draw one synthetic trajectory from a sequential weighted KDE.

    At each step the weights over historical days are normalised, the
    effective sample size and per-channel bandwidth are computed, a day is
    picked by weight and jittered with Gaussian kernel noise. With
    ``markovian`` the next step's weights are the kernel affinity of each
    day's current value to the drawn value, so the trajectory tends to
    follow days that resemble it now; otherwise every step restarts from
    uniform weights and only the per-step marginals are reproduced.

    Parameters
    ----------
    history : ndarray, shape (N, T, K)
    markovian : bool
    rng : int or numpy.random.Generator

    Returns
    -------
    ndarray, shape (T, K)
    """
    hist = _check_history(history)
    return _sample_batch(hist, markovian, np.random.default_rng(rng), 1)[0]


def generate_pool(history, size, seed=0, markovian=True, batch=2000):
    """Pool of ``size`` trajectories.

    Work is split into batches, each driven by its own child of the root
    seed, so the pool is reproducible and batches can run independently.
    """
    hist = _check_history(history)
    n_batches = -(-size // batch)
    children = np.random.SeedSequence(seed).spawn(n_batches)
    parts = [_sample_batch(hist, markovian, np.random.default_rng(c),
                           min(batch, size - i * batch))
             for i, c in enumerate(children)]
    return np.concatenate(parts)


def clean_pool(pool):
    """Floor negative reserve prices and wind speeds at zero.

    Returns the cleaned copy and the number of floored reserve entries.
    """
    pool = np.array(pool, dtype=float)
    res = pool[..., RES_UP.start:RES_DOWN.stop]
    n_floored = int(np.sum(res < 0))
    pool[..., RES_UP.start:RES_DOWN.stop] = np.maximum(res, 0.0)
    pool[..., WIND] = np.maximum(pool[..., WIND], 0.0)
    if n_floored:
        logger.info("floored %d negative reserve prices at 0", n_floored)
    return pool, n_floored


@dataclass(frozen=True, eq=False)
class DANode:
    probability: float
    da_price: np.ndarray              # (T,)
    leaves: tuple                     # of RTLeaf, conditional probabilities


@dataclass(frozen=True, eq=False)
class RTLeaf:
    probability: float                # conditional on the parent DA node
    rt_price: np.ndarray              # (4T,)
    reserve_up: np.ndarray            # (4T,)
    reserve_down: np.ndarray          # (4T,)
    wind: np.ndarray                  # (T,) m/s or MW, see ScenarioTree.wind_unit


@dataclass(frozen=True, eq=False)
class ScenarioTree:
    """Design root -> DA nodes -> RT leaves.

    ``wind_unit`` is ``"m/s"`` straight out of clustering and ``"MW"`` after
    :func:`wind_to_power_tree`.
    """

    da_nodes: tuple
    wind_unit: str = "m/s"
    shape: tuple = field(default=None)

    @property
    def n_hours(self):
        return len(self.da_nodes[0].da_price)

    @property
    def n_leaves(self):
        return sum(len(n.leaves) for n in self.da_nodes)

    def expected_wind(self, node):
        """Probability-weighted wind over the leaves of one DA node."""
        leaves = self.da_nodes[node].leaves
        return sum(lf.probability * lf.wind for lf in leaves)

    def leaves(self):
        """Yield ``(da_index, leaf_index, absolute_probability, leaf)``."""
        for a, node in enumerate(self.da_nodes):
            for b, lf in enumerate(node.leaves):
                yield a, b, node.probability * lf.probability, lf

    def validate(self, tol=1e-9):
        p_da = sum(n.probability for n in self.da_nodes)
        if abs(p_da - 1) > tol:
            raise DomainError(f"DA probabilities sum to {p_da}")
        t = self.n_hours
        for a, node in enumerate(self.da_nodes):
            p_rt = sum(lf.probability for lf in node.leaves)
            if abs(p_rt - 1) > tol:
                raise DomainError(f"RT probabilities under DA node {a} sum to {p_rt}")
            if len(node.da_price) != t:
                raise DomainError(f"DA node {a} has {len(node.da_price)} hours, expected {t}")
            for b, lf in enumerate(node.leaves):
                q = QUARTERS_PER_HOUR * t
                if not (len(lf.rt_price) == len(lf.reserve_up) == len(lf.reserve_down) == q
                        and len(lf.wind) == t):
                    raise DomainError(f"leaf ({a}, {b}) has inconsistent horizon lengths")
        return self


def _standardize(x):
    sd = x.std(axis=0)
    return (x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def _kmeans(features, n_clusters, seed, min_size=1):
    """k-means labels with every cluster holding at least ``min_size`` points."""
    n = len(features)
    if n_clusters == 1:
        return np.zeros(n, dtype=int)
    if n_clusters == n:
        return np.arange(n)
    km = KMeans(n_clusters=n_clusters, n_init=10, random_state=seed).fit(features)
    labels = km.labels_.copy()
    centers = km.cluster_centers_
    dist = ((features[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    # greedy repair: pull the closest surplus point into each short cluster
    while True:
        sizes = np.bincount(labels, minlength=n_clusters)
        short = np.flatnonzero(sizes < min_size)
        if not len(short):
            return labels
        c = short[0]
        donors = sizes[labels] > min_size
        cand = np.flatnonzero(donors)
        j = cand[np.argmin(dist[cand, c])]
        labels[j] = c


def _medoid(features, members):
    centre = features[members].mean(axis=0)
    return members[np.argmin(((features[members] - centre) ** 2).sum(axis=1))]


def build_tree(pool, shape=DEFAULT_SHAPE, seed=0):
    """Reduce a pool of ``(T, 14)`` trajectories to a scenario tree.

    The DA price profile (standardised) is clustered into ``shape[1]``
    groups; within each group the RT-stage channels (RT, reserve prices
    and wind) are clustered into ``shape[2]`` groups. A node takes the
    values of its cluster medoid, the member closest to the centroid, and
    its probability is the cluster's share of the pool. Trailing ones in
    ``shape`` mark the stages after the RT stage, which carry no further
    branching.
    """
    pool = np.asarray(pool, dtype=float)
    shape = tuple(int(s) for s in shape)
    if len(shape) < 3 or shape[0] != 1 or any(s != 1 for s in shape[3:]) or min(shape) < 1:
        raise DomainError(f"tree shape must be [1, n_da, n_rt, 1, ...], got {list(shape)}")
    n_da, n_rt = shape[1], shape[2]
    m, t_len, k = pool.shape
    if k != N_CHANNELS:
        raise DomainError(f"trajectories need {N_CHANNELS} channels, got {k}")
    if m < n_da * n_rt:
        raise DomainError(f"pool of {m} trajectories is smaller than the {n_da * n_rt} leaves")

    da_feat = _standardize(pool[:, :, DA].reshape(m, -1))
    rt_feat = _standardize(pool[:, :, RT.start:].reshape(m, -1))
    da_labels = _kmeans(da_feat, n_da, seed, min_size=n_rt)
    nodes = []
    for a in range(n_da):
        members = np.flatnonzero(da_labels == a)
        da_rep = _medoid(da_feat, members)
        sub = _kmeans(rt_feat[members], n_rt, seed + 1 + a)
        leaves = []
        for b in range(n_rt):
            sub_members = members[sub == b]
            rep = pool[_medoid(rt_feat, sub_members)]
            leaves.append(RTLeaf(len(sub_members) / len(members),
                                 rep[:, RT].ravel(), rep[:, RES_UP].ravel(),
                                 rep[:, RES_DOWN].ravel(), rep[:, WIND].ravel()))
        nodes.append(DANode(len(members) / m, pool[da_rep, :, 0].copy(), tuple(leaves)))
    return ScenarioTree(tuple(nodes), "m/s", shape).validate()


def wind_to_power_tree(tree, curve):
    """Replace leaf wind speeds by farm power through ``curve``."""
    if tree.wind_unit != "m/s":
        raise DomainError("tree wind channel is already power")
    nodes = tuple(replace(n, leaves=tuple(replace(lf, wind=power_at(curve, lf.wind))
                                          for lf in n.leaves))
                  for n in tree.da_nodes)
    return replace(tree, da_nodes=nodes, wind_unit="MW")


def tree_from_arrays(da_prices, da_probs, rt_probs, rt_prices, reserve_up, reserve_down,
                     wind, wind_unit="MW"):
    """Assemble a tree from nested arrays indexed ``[da]`` / ``[da][rt]``."""
    nodes = []
    for a, p in enumerate(da_probs):
        leaves = tuple(RTLeaf(float(rt_probs[a][b]), np.asarray(rt_prices[a][b], float),
                              np.asarray(reserve_up[a][b], float),
                              np.asarray(reserve_down[a][b], float),
                              np.asarray(wind[a][b], float))
                       for b in range(len(rt_probs[a])))
        nodes.append(DANode(float(p), np.asarray(da_prices[a], float), leaves))
    shape = (1, len(nodes), max(len(n.leaves) for n in nodes), 1, 1, 1)
    return ScenarioTree(tuple(nodes), wind_unit, shape).validate()


def tree_to_dict(tree):
    """Flat node list: stage, id, parent, probability, channel arrays."""
    nodes = [{"stage": "design", "id": 0, "parent": None, "probability": 1.0}]
    next_id = 1
    for node in tree.da_nodes:
        da_id = next_id
        nodes.append({"stage": "DA", "id": da_id, "parent": 0,
                      "probability": node.probability, "da_price": node.da_price.tolist()})
        next_id += 1
        for lf in node.leaves:
            nodes.append({"stage": "RT", "id": next_id, "parent": da_id,
                          "probability": lf.probability, "rt_price": lf.rt_price.tolist(),
                          "reserve_up": lf.reserve_up.tolist(),
                          "reserve_down": lf.reserve_down.tolist(), "wind": lf.wind.tolist()})
            next_id += 1
    return {"schema": TREE_SCHEMA, "wind_unit": tree.wind_unit,
            "shape": list(tree.shape) if tree.shape else None, "nodes": nodes}


def tree_from_dict(doc):
    if doc.get("schema") != TREE_SCHEMA:
        raise DomainError(f"unsupported tree schema {doc.get('schema')!r}")
    da, leaves = {}, {}
    for rec in doc["nodes"]:
        if rec["stage"] == "DA":
            da[rec["id"]] = rec
            leaves[rec["id"]] = []
    for rec in doc["nodes"]:
        if rec["stage"] == "RT":
            leaves[rec["parent"]].append(
                RTLeaf(rec["probability"], np.array(rec["rt_price"], float),
                       np.array(rec["reserve_up"], float), np.array(rec["reserve_down"], float),
                       np.array(rec["wind"], float)))
    nodes = tuple(DANode(da[i]["probability"], np.array(da[i]["da_price"], float),
                         tuple(leaves[i])) for i in sorted(da))
    shape = tuple(doc["shape"]) if doc.get("shape") else None
    return ScenarioTree(nodes, doc["wind_unit"], shape).validate()


def save_tree(tree, path):
    with open(path, "w") as fh:
        json.dump(tree_to_dict(tree), fh, indent=1)


def load_tree(path):
    with open(path) as fh:
        return tree_from_dict(json.load(fh))
