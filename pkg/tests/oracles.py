"""Independent reference computations shared by the unit and acceptance tests."""

import numpy as np

from visbeam import beamnet as bn
from visbeam import txid

FD_STEP = 1e-5


def random_gradcheck_case(rng, hidden=8, num_classes=8, batch=4, with_mask=False, p=0.3):
    """Random params/batch; inputs are redrawn until no unit sits within 1e-4 of the relu kink."""
    params = bn.init_params(hidden, num_classes, seed=int(rng.integers(1 << 31)))
    while True:
        x = rng.normal(size=(batch, 2))
        pre = x @ params.W1.T + params.b1
        if np.min(np.abs(pre)) > 1e-4:
            break
    y = rng.integers(0, num_classes, batch)
    mask = bn.dropout_mask((batch, hidden), p, rng) if with_mask else None
    return params, x, y, mask


def finite_difference_grads(params, x, y, mask=None, h=FD_STEP):
    """Central differences of the mean cross-entropy, one coordinate at a time."""
    out = {}
    for name in bn.PARAM_NAMES:
        arr = getattr(params, name)
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            lp, _ = bn.loss_and_grad(params, x, y, mask=mask)
            arr[idx] = orig - h
            lm, _ = bn.loss_and_grad(params, x, y, mask=mask)
            arr[idx] = orig
            g[idx] = (lp - lm) / (2 * h)
        out[name] = g
    return out


def max_relative_error(analytic, numeric):
    """max |a - n| / max(|a|, |n|) over all coordinates (0/0 counts as 0)."""
    worst = 0.0
    for name in bn.PARAM_NAMES:
        a = getattr(analytic, name)
        n = numeric[name]
        den = np.maximum(np.abs(a), np.abs(n))
        rel = np.divide(np.abs(a - n), den, out=np.zeros_like(den), where=den > 0)
        worst = max(worst, float(rel.max()))
    return worst


def gradcheck(rng, with_mask):
    params, x, y, mask = random_gradcheck_case(rng, with_mask=with_mask)
    _, grads = bn.loss_and_grad(params, x, y, mask=mask)
    return max_relative_error(grads, finite_difference_grads(params, x, y, mask))


def planted(n=200, seed=0, include_bias=True):
    """Targets produced exactly by a cubic in the normalized GPS."""
    rng = np.random.default_rng(seed)
    g = rng.normal([300.0, -40.0], [15.0, 4.0], size=(n, 2))
    A = 10 if include_bias else 9
    W = rng.normal(size=(A, 2))
    norm = txid.Normalizer.fit(g)
    return g, txid.poly_expand(norm(g), include_bias) @ W, W


def brute_select(B, b):
    best, idx = np.inf, None
    for i, row in enumerate(B):
        d = (row[0] - b[0]) ** 2 + (row[1] - b[1]) ** 2
        if d < best:
            best, idx = d, i
    return idx
