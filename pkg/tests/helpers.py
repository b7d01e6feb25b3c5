"""Small scenario trees for tests."""

import numpy as np

from owfccd.scengen import tree_from_arrays


def random_tree(n_da=2, n_rt=2, hours=4, seed=0, rated=1500.0, da=(40.0, 50.0), rt=(40.0, 50.0),
                res_up=(0.0, 5.0), res_down=(0.0, 3.0), wind=None):
    """Uniform-probability tree with prices and wind drawn uniformly."""
    rng = np.random.default_rng(seed)
    u = lambda lo_hi, size: lo_hi[0] + (lo_hi[1] - lo_hi[0]) * rng.random(size)
    q = 4 * hours
    da_p = [u(da, hours) for _ in range(n_da)]
    rt_p = [[u(rt, q) for _ in range(n_rt)] for _ in range(n_da)]
    ru = [[u(res_up, q) for _ in range(n_rt)] for _ in range(n_da)]
    rd = [[u(res_down, q) for _ in range(n_rt)] for _ in range(n_da)]
    if wind is None:
        w = [[rated * rng.random(hours) for _ in range(n_rt)] for _ in range(n_da)]
    else:
        w = [[np.asarray(wind(a, b, rng), float) for b in range(n_rt)] for a in range(n_da)]
    return tree_from_arrays(da_p, [1 / n_da] * n_da, [[1 / n_rt] * n_rt] * n_da,
                            rt_p, ru, rd, w)


def flat_tree(n_da=2, n_rt=2, hours=4, price=5.0, reserve=0.0, rated=1500.0, seed=0):
    """Flat energy prices everywhere, constant reserve prices, random wind."""
    return random_tree(n_da, n_rt, hours, seed, rated, (price, price), (price, price),
                       (reserve, reserve), (reserve, reserve))
