"""Small numeric helpers: deterministic sums, 4D cross products, RNG."""

import numpy as np


def tree_sum(values) -> float:
    """Sum contributions reproducibly, independent of input order.

    Contributions are sorted by value and folded pairwise, so any relabeling
    of faces or vertices that permutes the contribution array produces
    bit-identical totals regardless of thread count or iteration order.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        return 0.0
    x = np.sort(x)
    while x.size > 1:
        if x.size % 2:
            x = np.append(x, 0.0)
        x = x[0::2] + x[1::2]
    return float(x[0])


def cross4(u, v, w):
    """Generalized cross product in R^4.

    Returns the vector d with d . x = det([x, u, v, w]) for every x, i.e.
    the Hodge dual of u ^ v ^ w. Accepts arrays of shape (..., 4) and
    broadcasts over leading axes.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)

    def minor(a, b, c):
        # det of the 3x3 matrix with rows u[a,b,c)], v[...], w[...]
        return (
            u[..., a] * (v[..., b] * w[..., c] - v[..., c] * w[..., b])
            - u[..., b] * (v[..., a] * w[..., c] - v[..., c] * w[..., a])
            + u[..., c] * (v[..., a] * w[..., b] - v[..., b] * w[..., a])
        )

    d = np.empty(u.shape, dtype=np.float64)
    d[..., 0] = minor(1, 2, 3)
    d[..., 1] = -minor(0, 2, 3)
    d[..., 2] = minor(0, 1, 3)
    d[..., 3] = -minor(0, 1, 2)
    return d


def row_norms(a):
    return np.sqrt(np.sum(np.asarray(a, dtype=np.float64) ** 2, axis=-1))


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; the single randomness source of the artifact."""
    return np.random.Generator(np.random.Philox(seed))
