"""Rough paths of finite p-variation, p in [2, 3), and rough integration.

A RoughPath stores the sampled base path plus one second-level atom per grid
segment; values over arbitrary grid intervals are assembled through the Chen
relation from cached prefix developments, so queries cost O(1) and are
consistent across overlapping intervals by construction.

Conventions: zeta2[a, b] approximates int zeta^a d zeta^b over the segment.
A Gubinelli derivative carries a trailing driver axis, so an integrand
controlled path has values (n, ..., d) and derivative (n, ..., d, d).
"""

import numpy as np

from . import _kernels, paths
from .errors import ArgumentError, DivergenceError


class RoughPath:
    """Base path with per-segment second-level atoms and Chen prefix cache."""

    __slots__ = ("base", "seg2", "z1", "z2", "geometric")

    def __init__(self, base, seg2, geometric=False):
        n, d = base.n_samples, base.dim
        seg2 = np.ascontiguousarray(seg2, dtype=np.float64)
        if seg2.shape != (n - 1, d, d):
            raise ArgumentError("seg2 must have shape (n-1, d, d)")
        if not np.all(np.isfinite(seg2)):
            raise ArgumentError("non-finite second-level data")
        self.base = base
        self.seg2 = seg2
        self.geometric = bool(geometric)
        inc = base.values[1:] - base.values[:-1]
        z1 = np.vstack([np.zeros((1, d)), np.cumsum(inc, axis=0)])
        z2 = np.empty((n, d, d))
        z2[0] = 0.0
        for k in range(n - 1):
            z2[k + 1] = z2[k] + seg2[k] + np.multiply.outer(z1[k], inc[k])
        z1.flags.writeable = False
        z2.flags.writeable = False
        self.z1 = z1
        self.z2 = z2

    @property
    def dim(self):
        return self.base.dim

    @property
    def times(self):
        return self.base.times

    def first_level(self, s, t):
        i, j = self.base.grid_index(s), self.base.grid_index(t)
        if i > j:
            raise ArgumentError("need s <= t")
        return self.z1[j] - self.z1[i]

    def second_level(self, s, t):
        i, j = self.base.grid_index(s), self.base.grid_index(t)
        if i > j:
            raise ArgumentError("need s <= t")
        return self._second_by_index(i, j)

    def _second_by_index(self, i, j):
        return self.z2[j] - self.z2[i] - np.multiply.outer(self.z1[i], self.z1[j] - self.z1[i])

    def __repr__(self):
        return "RoughPath(n=%d, dim=%d, geometric=%r)" % (self.base.n_samples, self.dim, self.geometric)


def canonical_lift(path):
    """Geometric lift of a piecewise-linear path: segment atoms 0.5 dX (x) dX."""
    inc = path.values[1:] - path.values[:-1]
    seg2 = 0.5 * inc[:, :, None] * inc[:, None, :]
    return RoughPath(path, seg2, geometric=True)


def restrict_rough_path(rp, s, t):
    """Sub rough path over grid nodes [s, t]; the clock restarts at zero."""
    i, j = rp.base.grid_index(s), rp.base.grid_index(t)
    if i >= j:
        raise ArgumentError("need s < t on the grid")
    base = paths.SampledPath(rp.times[i:j + 1] - rp.times[i], rp.base.values[i:j + 1])
    return RoughPath(base, rp.seg2[i:j], geometric=rp.geometric)


def brownian_rough_path(seed, n_segments, T=1.0, dim=1):
    """Canonical lift of a Brownian sample on a uniform grid; deterministic in seed."""
    rng = np.random.default_rng(seed)
    dt = float(T) / n_segments
    inc = rng.normal(scale=np.sqrt(dt), size=(n_segments, dim))
    values = np.vstack([np.zeros((1, dim)), np.cumsum(inc, axis=0)])
    return canonical_lift(paths.SampledPath(paths.uniform_times(T, n_segments), values))


def chen_extend(rp, s, r, t):
    """Second level over [s, t] assembled through the midpoint r."""
    i, j, k = rp.base.grid_index(s), rp.base.grid_index(r), rp.base.grid_index(t)
    if not (i <= j <= k):
        raise ArgumentError("need s <= r <= t")
    a_sr = rp._second_by_index(i, j)
    a_rt = rp._second_by_index(j, k)
    z_sr = rp.z1[j] - rp.z1[i]
    z_rt = rp.z1[k] - rp.z1[j]
    return a_sr + a_rt + np.multiply.outer(z_sr, z_rt)


def chen_check(rp):
    """Max entry-wise Chen defect over all grid triples."""
    return _kernels.chen_max_residual(rp.z1, rp.z2)


def symmetry_check(rp):
    """Max over grid pairs of |Sym(zeta2) - 0.5 zeta (x) zeta|; zero iff geometric."""
    n = rp.base.n_samples
    best = 0.0
    for i in range(n - 1):
        zinc = rp.z1[i + 1:] - rp.z1[i]
        a = rp.z2[i + 1:] - rp.z2[i] - rp.z1[i][None, :, None] * zinc[:, None, :]
        sym = 0.5 * (a + np.swapaxes(a, 1, 2))
        res = sym - 0.5 * zinc[:, :, None] * zinc[:, None, :]
        m = float(np.abs(res).max())
        if m > best:
            best = m
    return best


def _pair_dist_level2(rp1, rp2):
    """Matrix of max-entry |A1(i,j) - A2(i,j)| over grid pairs i < j."""
    n = rp1.base.n_samples
    out = np.zeros((n, n))
    for i in range(n - 1):
        z1inc = rp1.z1[i + 1:] - rp1.z1[i]
        z2inc = rp2.z1[i + 1:] - rp2.z1[i]
        a1 = rp1.z2[i + 1:] - rp1.z2[i] - rp1.z1[i][None, :, None] * z1inc[:, None, :]
        a2 = rp2.z2[i + 1:] - rp2.z2[i] - rp2.z1[i][None, :, None] * z2inc[:, None, :]
        out[i, i + 1:] = np.abs(a1 - a2).max(axis=(1, 2))
    return out


def rough_metric(rp1, rp2, p, mode="pvar"):
    """Inhomogeneous distance: level-1 p-variation plus level-2 p/2-variation.

    Both paths must share a sample grid (resample beforehand).  Level-2
    distances use the max-entry matrix norm.  mode="holder" replaces the
    variation seminorms with Holder quotients |.| / dt^(1/p), |.| / dt^(2/p).
    """
    if not (2.0 <= p < 3.0):
        raise ArgumentError("need p in [2, 3)")
    if not np.array_equal(rp1.times, rp2.times):
        raise ArgumentError("rough paths must share a grid")
    if rp1.dim != rp2.dim:
        raise ArgumentError("dimension mismatch")
    d2 = _pair_dist_level2(rp1, rp2)
    diff = paths.SampledPath(rp1.times, rp1.base.values - rp2.base.values)
    if mode == "pvar":
        lvl1 = paths.p_variation(diff, p)
        lvl2 = float(_kernels.pvar_cumulative(d2 ** (p / 2.0))[-1]) ** (2.0 / p)
        return lvl1 + lvl2
    if mode == "holder":
        n = rp1.base.n_samples
        iu = np.triu_indices(n, k=1)
        dt = (rp1.times[None, :] - rp1.times[:, None])[iu]
        d1 = paths._pairwise_power(diff.values, 1.0)[iu]
        lvl1 = float(np.max(d1 / dt ** (1.0 / p))) if len(dt) else 0.0
        lvl2 = float(np.max(d2[iu] / dt ** (2.0 / p))) if len(dt) else 0.0
        return lvl1 + lvl2
    raise ArgumentError("mode must be 'pvar' or 'holder'")


class ControlledPath:
    """Path controlled by a rough driver: values plus Gubinelli derivative.

    values has shape (n, *S); gubinelli has shape (n, *S, d) and predicts
    increments via contraction with driver increments over the last axis.
    """

    __slots__ = ("reference", "values", "gubinelli")

    def __init__(self, reference, values, gubinelli):
        values = np.ascontiguousarray(values, dtype=np.float64)
        gubinelli = np.ascontiguousarray(gubinelli, dtype=np.float64)
        n, d = reference.base.n_samples, reference.dim
        if values.shape[0] != n:
            raise ArgumentError("values must have one row per grid node")
        if gubinelli.shape != values.shape + (d,):
            raise ArgumentError("gubinelli must have shape values.shape + (d,)")
        self.reference = reference
        self.values = values
        self.gubinelli = gubinelli

    @property
    def times(self):
        return self.reference.times


def controlled_from_functions(rp, f, fprime, gamma=None):
    """Controlled path t -> f(zeta_t[, gamma_t]) with supplied derivative."""
    xs = rp.base.values
    if gamma is None:
        vals = np.stack([np.asarray(f(x), dtype=np.float64) for x in xs])
        gub = np.stack([np.asarray(fprime(x), dtype=np.float64) for x in xs])
    else:
        if not np.array_equal(gamma.times, rp.times):
            raise ArgumentError("gamma must share the driver grid")
        vals = np.stack([np.asarray(f(x, a), dtype=np.float64) for x, a in zip(xs, gamma.values)])
        gub = np.stack([np.asarray(fprime(x, a), dtype=np.float64) for x, a in zip(xs, gamma.values)])
    return ControlledPath(rp, vals, gub)


def _cell_contributions(Y, rp):
    """Per-cell compensated Riemann terms of the rough integral."""
    zinc = rp.z1[1:] - rp.z1[:-1]
    term1 = np.einsum("i...j,ij->i...", Y.values[:-1, ..., :], zinc)
    term2 = np.einsum("i...jk,ikj->i...", Y.gubinelli[:-1], rp.seg2)
    return term1 + term2


def rough_integral(Y, rp=None, s=None, t=None):
    """Compensated-sum rough integral of a controlled integrand against rp.

    Y.values must carry a trailing driver axis; the result drops it.  s, t
    default to the full interval and must be grid nodes.
    """
    rp = Y.reference if rp is None else rp
    if not np.array_equal(Y.times, rp.times):
        raise ArgumentError("integrand and driver must share a grid")
    if Y.values.shape[-1] != rp.dim:
        raise ArgumentError("integrand lacks the trailing driver axis")
    i = 0 if s is None else rp.base.grid_index(s)
    j = rp.base.n_samples - 1 if t is None else rp.base.grid_index(t)
    if i > j:
        raise ArgumentError("need s <= t")
    cells = _cell_contributions(Y, rp)
    return cells[i:j].sum(axis=0)


def rough_integral_path(Y, rp=None):
    """Running rough integral as a SampledPath (scalar or vector values)."""
    rp = Y.reference if rp is None else rp
    cells = _cell_contributions(Y, rp)
    flat = cells.reshape(cells.shape[0], -1)
    running = np.vstack([np.zeros((1, flat.shape[1])), np.cumsum(flat, axis=0)])
    return paths.SampledPath(rp.times, running)


def young_integral(Y, X, p, q):
    """Left-point Young integral of Y against X, running value path.

    Requires 1/p + 1/q > 1 and a shared grid.  Supported value shapes:
    scalar Y against vector X, vector Y against scalar X (scaling), or equal
    dims (dot product); the first sample of the result is 0.
    """
    if p < 1 or q < 1 or 1.0 / p + 1.0 / q <= 1.0:
        raise ArgumentError("Young condition 1/p + 1/q > 1 fails")
    if not np.array_equal(Y.times, X.times):
        raise ArgumentError("paths must share a grid (resample beforehand)")
    dx = X.values[1:] - X.values[:-1]
    y = Y.values[:-1]
    if Y.dim == 1:
        cells = y * dx
    elif X.dim == 1:
        cells = y * dx
    elif Y.dim == X.dim:
        cells = (y * dx).sum(axis=1, keepdims=True)
    else:
        raise ArgumentError("incompatible dims %d vs %d" % (Y.dim, X.dim))
    running = np.vstack([np.zeros((1, cells.shape[1])), np.cumsum(cells, axis=0)])
    return paths.SampledPath(X.times, running)


def davie_increment(bval, lamval, dlamval, dt, zinc, z2seg):
    """One step of the second-order scheme; dlam[i, j, k] = d lam[i,j] / d x_k."""
    out = lamval @ zinc
    if bval is not None:
        out = out + bval * dt
    if dlamval is not None:
        gub2 = np.einsum("ijk,kl->ijl", dlamval, lamval)
        out = out + np.einsum("ijl,lj->i", gub2, z2seg)
    return out


def _finite_diff_jacobian(lam, x, a, h):
    m = x.shape[0]
    cols = []
    for k in range(m):
        e = np.zeros(m)
        e[k] = h
        cols.append((np.asarray(lam(x + e, a)) - np.asarray(lam(x - e, a))) / (2 * h))
    return np.stack(cols, axis=-1)


def solve_rde(b, lam, dlam, gamma, rp, x0, check_derivative=True):
    """March dX = b dt + lam(X, gamma) d zeta with second-order driver terms.

    lam(x, a) -> (m, d), dlam(x, a) -> (m, d, m) with dlam[i, j, k] the
    x_k-derivative of lam[i, j]; dlam is validated against finite differences
    at the initial point.  Returns the solution as a ControlledPath with
    Gubinelli derivative lam(X, gamma).  Raises DivergenceError when the
    state leaves float range.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    m, d = x0.shape[0], rp.dim
    times = rp.times
    n = len(times)
    if gamma is None:
        gamma = paths.constant_path(times, [0.0])
    if not np.array_equal(gamma.times, times):
        raise ArgumentError("gamma must share the driver grid")
    a0 = gamma.values[0]
    if lam is not None and dlam is not None and check_derivative:
        got = np.asarray(dlam(x0, a0), dtype=np.float64)
        if got.shape != (m, d, m):
            raise ArgumentError("dlam must return shape (m, d, m)")
        fd = _finite_diff_jacobian(lam, x0, a0, 1e-6 * max(1.0, float(np.abs(x0).max())))
        scale = max(1.0, float(np.abs(fd).max()))
        if float(np.abs(got - fd).max()) > 1e-4 * scale:
            raise ArgumentError("dlam disagrees with finite differences at x0")
    X = np.empty((n, m))
    gub = np.zeros((n, m, d))
    X[0] = x0
    for i in range(n - 1):
        xi, ai = X[i], gamma.values[i]
        lam_i = np.asarray(lam(xi, ai), dtype=np.float64) if lam is not None else np.zeros((m, d))
        gub[i] = lam_i
        dt = times[i + 1] - times[i]
        bval = np.asarray(b(xi, ai), dtype=np.float64) if b is not None else None
        dlam_i = np.asarray(dlam(xi, ai), dtype=np.float64) if (lam is not None and dlam is not None) else None
        zinc = rp.z1[i + 1] - rp.z1[i]
        X[i + 1] = xi + davie_increment(bval, lam_i, dlam_i, dt, zinc, rp.seg2[i])
        if not np.all(np.isfinite(X[i + 1])):
            raise DivergenceError("state left float range at step %d" % (i + 1), step=i + 1)
    gub[n - 1] = np.asarray(lam(X[n - 1], gamma.values[n - 1]), dtype=np.float64) if lam is not None else 0.0
    return ControlledPath(rp, X, gub)


def _subpath(path, i0, i1):
    return paths.SampledPath(path.times[i0:i1 + 1] - path.times[i0], path.values[i0:i1 + 1])


def _remainder_matrix(Y, rp):
    """Max-entry |Y_{i,j} - Y'_i zeta_{i,j}| over grid pairs."""
    n = Y.values.shape[0]
    flatv = Y.values.reshape(n, -1)
    flatg = Y.gubinelli.reshape(n, -1, rp.dim)
    out = np.zeros((n, n))
    for i in range(n - 1):
        zinc = rp.z1[i + 1:] - rp.z1[i]
        pred = flatg[i] @ zinc.T
        res = flatv[i + 1:] - flatv[i] - pred.T
        out[i, i + 1:] = np.abs(res).max(axis=1)
    return out


def _two_param_pvar(dist, q, i0=0, i1=None):
    sub = dist if i1 is None else dist[i0:i1 + 1, i0:i1 + 1]
    if sub.shape[0] < 2:
        return 0.0
    return float(_kernels.pvar_cumulative(sub**q)[-1]) ** (1.0 / q)


def _level2_abs_matrix(rp):
    n = rp.base.n_samples
    out = np.zeros((n, n))
    for i in range(n - 1):
        zinc = rp.z1[i + 1:] - rp.z1[i]
        a = rp.z2[i + 1:] - rp.z2[i] - rp.z1[i][None, :, None] * zinc[:, None, :]
        out[i, i + 1:] = np.abs(a).max(axis=(1, 2))
    return out


def remainder_estimate_check(Y, rp, p, s, t):
    """Compare the local integral defect against its sewing-type bound.

    lhs = |int_s^t Y d zeta - Y_s zeta_{s,t} - Y'_s zeta2_{s,t}|; the bound is
    ||R^Y||_{p/2} ||zeta||_p + ||Y'||_p ||zeta2||_{p/2} over [s, t].  Returns
    the pieces and the implied constant lhs/rhs.
    """
    rp = Y.reference if rp is None else rp
    i0, i1 = rp.base.grid_index(s), rp.base.grid_index(t)
    if i0 >= i1:
        raise ArgumentError("need s < t")
    zinc = rp.z1[i1] - rp.z1[i0]
    z2 = rp._second_by_index(i0, i1)
    local = np.einsum("...j,j->...", Y.values[i0], zinc) + np.einsum("...jk,kj->...", Y.gubinelli[i0], z2)
    lhs = float(np.abs(rough_integral(Y, rp, s=s, t=t) - local).max())
    if not np.isfinite(lhs):
        raise DivergenceError("integral defect is not finite")
    q = p / 2.0
    rem_q = _two_param_pvar(_remainder_matrix(Y, rp), q, i0, i1)
    zeta_p = paths.p_variation(_subpath(rp.base, i0, i1), p)
    gflat = Y.gubinelli.reshape(len(Y.times), -1)
    yprime_p = paths.p_variation(_subpath(paths.SampledPath(rp.times, gflat), i0, i1), p)
    z2_q = _two_param_pvar(_level2_abs_matrix(rp), q, i0, i1)
    rhs = rem_q * zeta_p + yprime_p * z2_q
    return {
        "lhs": lhs,
        "rhs": rhs,
        "implied_constant": lhs / rhs if rhs > 0 else 0.0,
        "remainder_pvar": rem_q,
        "zeta_pvar": zeta_p,
        "gubinelli_pvar": yprime_p,
        "level2_pvar": z2_q,
    }


def regularity_report(X, gamma, psi, dpsi, p):
    """Empirical ratios for the a-priori solution estimates.

    X is an RDE solution (ControlledPath over its driver), gamma the slow
    path on the same grid, psi(x, a) -> (d,) with dpsi(x, a) -> (d, m) its
    x-Jacobian.  Each record reports lhs, rhs and lhs/rhs for one estimate.
    """
    rp = X.reference
    if not np.array_equal(gamma.times, rp.times):
        raise ArgumentError("gamma must share the driver grid")
    q = p / 2.0
    xs_path = paths.SampledPath(rp.times, X.values)
    x_p = paths.p_variation(xs_path, p)
    rx_q = _two_param_pvar(_remainder_matrix(X, rp), q)
    g_q = paths.p_variation(gamma, q)
    psi_vals = np.stack([np.asarray(psi(x, a), dtype=np.float64) for x, a in zip(X.values, gamma.values)])
    dpsi_vals = np.stack([np.asarray(dpsi(x, a), dtype=np.float64) for x, a in zip(X.values, gamma.values)])
    psi_prime = np.einsum("njm,nmk->njk", dpsi_vals, X.gubinelli)
    psi_ctrl = ControlledPath(rp, psi_vals, psi_prime)
    pp_path = paths.SampledPath(rp.times, psi_prime.reshape(len(rp.times), -1))
    est = []

    def add(name, lhs, rhs):
        est.append({"estimate": name, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0})

    add("psi_prime_pvar", paths.p_variation(pp_path, p), x_p + g_q)
    add("psi_remainder", _two_param_pvar(_remainder_matrix(psi_ctrl, rp), q), x_p**2 + rx_q + g_q)
    add("solution_pvar", x_p, 1.0 + g_q ** (1.0 + p))
    add("solution_remainder", rx_q, 1.0 + g_q ** (2.0 + p))
    return est


def _resample_lift(rp, new_times):
    if not rp.geometric:
        raise ArgumentError("can only resample geometric lifts exactly")
    return canonical_lift(paths.resample(rp.base, new_times))


def driver_stability_probe(b, lam, dlam, psi, dpsi, x0, y0, gamma, vartheta, rp1, rp2, p):
    """Quantify continuity of the solution map in the driver and slow path.

    Solves the same RDE under (rp1, gamma) and (rp2, vartheta), integrates
    psi along each solution, and reports lhs = p-variation of the difference
    of the running integrals against rhs = |x0 - y0| + sup|gamma - vartheta|
    + p-variation of the difference + the rough-path distance.  Drivers are
    resampled onto the union grid (exact for geometric piecewise-linear
    lifts) before comparison.
    """
    X = solve_rde(b, lam, dlam, gamma, rp1, x0, check_derivative=False)
    Y = solve_rde(b, lam, dlam, vartheta, rp2, y0, check_derivative=False)

    def integrand(sol, gam, rp):
        vals = np.stack([np.asarray(psi(x, a), dtype=np.float64) for x, a in zip(sol.values, gam.values)])
        dvals = np.stack([np.asarray(dpsi(x, a), dtype=np.float64) for x, a in zip(sol.values, gam.values)])
        gub = np.einsum("njm,nmk->njk", dvals, sol.gubinelli)
        return ControlledPath(rp, vals, gub)

    g1 = gamma if gamma is not None else paths.constant_path(rp1.times, [0.0])
    g2 = vartheta if vartheta is not None else paths.constant_path(rp2.times, [0.0])
    i1 = rough_integral_path(integrand(X, g1, rp1), rp1)
    i2 = rough_integral_path(integrand(Y, g2, rp2), rp2)
    grid = paths.union_times(i1, i2)
    diff = paths.SampledPath(grid, paths.resample(i1, grid).values - paths.resample(i2, grid).values)
    lhs = paths.p_variation(diff, p)
    gdiff = paths.SampledPath(grid, paths.resample(g1, grid).values - paths.resample(g2, grid).values)
    metric = rough_metric(_resample_lift(rp1, grid), _resample_lift(rp2, grid), p)
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    y0 = np.atleast_1d(np.asarray(y0, dtype=np.float64))
    rhs = (
        float(np.abs(x0 - y0).max())
        + float(np.abs(gdiff.values).max())
        + paths.p_variation(gdiff, p)
        + metric
    )
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0, "rough_distance": metric}
