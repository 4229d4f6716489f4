"""Shared test helpers: independent oracles and small instance builders."""

import numpy as np

from admmq.sets import Binary, DiscreteProductSet, ExplicitGrid, ScaledLattice


def fd_gradient(f, x, h=1e-6):
    """Central finite differences of f.value, the gradient oracle."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h * max(1.0, abs(x[i]))
        g[i] = (f.value(x + e) - f.value(x - e)) / (2 * e[i])
    return g


def oracle_project(dset, x):
    """Independent projection oracle: per-coordinate exhaustive nearest member
    with the documented tie rule (binary: +1 at 0; otherwise smaller member)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(dset.dim)
    for i, c in enumerate(dset.coords):
        vals = c.members()
        d = np.abs(vals - x[i])
        cands = vals[d == d.min()]
        if isinstance(c, Binary) and x[i] >= 0:
            out[i] = cands.max()
        else:
            out[i] = cands.min()
    return out


def random_product_set(rng, max_members=10_000):
    """A random small finite product set mixing all three coordinate kinds."""
    dim = int(rng.integers(1, 6))
    coords = []
    total = 1
    for _ in range(dim):
        kind = rng.integers(0, 3)
        if kind == 0:
            c = Binary()
        elif kind == 1:
            v = float(rng.choice([0.5, 1.0, 2.0, 8.0]))
            k0 = int(rng.integers(-5, 1))
            k1 = k0 + int(rng.integers(0, 6))
            c = ScaledLattice(v, a=v * k0, b=v * k1)
        else:
            m = int(rng.integers(1, 7))
            vals = np.sort(rng.normal(size=m) * 3)
            while np.any(np.diff(vals) <= 1e-9):
                vals = np.sort(rng.normal(size=m) * 3)
            c = ExplicitGrid(values=tuple(vals))
        if total * c.cardinality() > max_members:
            break
        total *= int(c.cardinality())
        coords.append(c)
    if not coords:
        coords = [Binary()]
    return DiscreteProductSet(coords=tuple(coords))


def random_psd_quadratic(rng, d, sigma_sq=4.0, b_scale=None):
    """Small PSD quadratic in the style of the benchmark generator."""
    from admmq.objectives import QuadraticObjective

    qt = rng.normal(size=(d, d))
    qv = np.sqrt(sigma_sq) * rng.normal(size=d)
    Q = qt.T @ qt + np.outer(qv, qv)
    if b_scale is None:
        b_scale = np.sqrt(d * sigma_sq)
    b = b_scale * rng.normal(size=d)
    return QuadraticObjective(Q=0.5 * (Q + Q.T), b=b)
