"""Pathwise optimal-control lab over rough drivers.

State pair: dX = b(X, gamma) ds + lam(X, gamma) dzeta and dgamma = h(gamma, u) ds
with u piecewise constant on a knot grid.  Cost: trapezoid of f(X, gamma),
plus the rough integral of psi(X, gamma) against the driver, plus
g(X_T, gamma_T), plus the regularizing term eps int |u|^q ds.  The last term
is accumulated per grid cell from the left-point control value, so it is
exactly additive across any split at a grid node; f and the rough integral
are accumulated per cell as well, which is what makes the dynamic-programming
check a float-reassociation identity rather than an approximation.

Values minimize cost over a finite lattice of piecewise-constant controls:
exhaustive when the lattice is small, deterministic coordinate descent
otherwise, with the lexicographically smallest control breaking ties.  The
HJB residual, degeneracy table and continuity scan treat drivers as the
piecewise-linear paths they are (slope field eta' per cell).

Scalar-lab restriction: hjb_residual, value_table and verification_probe
assume one-dimensional x and a (dense tables); cost/value/dpp_check are
dimension-agnostic.
"""

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import paths, rough_core
from ._par import parallel_map as _parallel_map
from .errors import ArgumentError

_EXHAUSTIVE_LIMIT = 100_000


def _as_vector(value, name):
    out = np.atleast_1d(np.asarray(value, dtype=np.float64))
    if out.ndim != 1:
        raise ArgumentError("%s must be a vector" % name)
    return out


@dataclass(frozen=True)
class ControlProblem:
    """Coefficients of the controlled system; any of b, lam, psi may be None.

    Shapes (m = dim x, k = dim gamma, d = driver dim): b(x,a)->(m,),
    lam(x,a)->(m,d), dlam(x,a)->(m,d,m) with dlam[i,j,l] = d lam[i,j]/d x_l,
    f(x,a)->real, psi(x,a)->(d,), dpsi(x,a)->(d,m), g(x,a)->real,
    h(a,u)->(k,).
    """

    b: object
    lam: object
    dlam: object
    f: object
    psi: object
    dpsi: object
    g: object
    h: object
    driver: object
    eps: float = 0.0
    q_exp: float = 2.0
    T: float = 1.0

    def __post_init__(self):
        if self.eps < 0:
            raise ArgumentError("eps must be nonnegative")
        if self.q_exp < 1:
            raise ArgumentError("q_exp must be at least 1")
        if self.driver is None:
            raise ArgumentError("a driver rough path is required")
        if abs(float(self.driver.times[-1]) - self.T) > 1e-12 * max(1.0, self.T):
            raise ArgumentError("horizon T must equal the driver's final time")
        if self.lam is not None and self.dlam is None:
            raise ArgumentError("lam requires its x-derivative dlam")
        if self.psi is not None and self.dpsi is None:
            raise ArgumentError("psi requires its x-derivative dpsi")


class PiecewiseControl:
    """Piecewise-constant control: values[j] applies on [knots[j], knots[j+1])."""

    __slots__ = ("knots", "values")

    def __init__(self, knots, values):
        knots = np.asarray(knots, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if knots.ndim != 1 or knots.shape[0] != values.shape[0]:
            raise ArgumentError("need one value row per knot")
        if knots.shape[0] == 0 or np.any(np.diff(knots) <= 0):
            raise ArgumentError("knots must be nonempty and strictly increasing")
        self.knots = knots
        self.values = values

    @classmethod
    def constant(cls, u, t=0.0):
        return cls(np.array([t]), np.atleast_1d(np.asarray(u, dtype=np.float64))[None, :])

    def at(self, t):
        j = int(np.searchsorted(self.knots, t + 1e-12, side="right")) - 1
        return self.values[max(j, 0)]


@dataclass(frozen=True)
class ControlGrid:
    """Lattice spec: n_knots uniform knots, per-coordinate box and level count."""

    n_knots: int
    u_bounds: object
    u_levels: object = 3

    def __post_init__(self):
        if self.n_knots < 1:
            raise ArgumentError("need at least one knot")
        bounds = np.atleast_2d(np.asarray(self.u_bounds, dtype=np.float64))
        if bounds.shape[1] != 2 or np.any(bounds[:, 0] > bounds[:, 1]):
            raise ArgumentError("u_bounds must be rows of (lo, hi) with lo <= hi")
        levels = np.atleast_1d(np.asarray(self.u_levels, dtype=np.intp))
        if levels.shape[0] == 1:
            levels = np.repeat(levels, bounds.shape[0])
        if levels.shape[0] != bounds.shape[0] or np.any(levels < 1):
            raise ArgumentError("u_levels must give a positive count per coordinate")
        object.__setattr__(self, "u_bounds", bounds)
        object.__setattr__(self, "u_levels", levels)

    @property
    def u_dim(self):
        return self.u_bounds.shape[0]

    def knot_options(self):
        """All per-knot control values, lexicographic in (coordinate levels)."""
        axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.u_bounds, self.u_levels)]
        return [np.array(combo) for combo in itertools.product(*axes)]


def _fd_columns(fn, x, a, h):
    cols = []
    for l in range(x.shape[0]):
        e = np.zeros_like(x)
        e[l] = h
        cols.append((np.asarray(fn(x + e, a)) - np.asarray(fn(x - e, a))) / (2 * h))
    return np.stack(cols, axis=-1)


def check_derivatives(problem, x, a):
    """Finite-difference validation of dlam and dpsi at (x, a), rel tol 1e-4."""
    x = _as_vector(x, "x")
    a = _as_vector(a, "a")
    h = 1e-6 * max(1.0, float(np.abs(x).max()))
    for fn, dfn, name, shape in (
        (problem.lam, problem.dlam, "dlam", (x.shape[0], problem.driver.dim, x.shape[0])),
        (problem.psi, problem.dpsi, "dpsi", (problem.driver.dim, x.shape[0])),
    ):
        if fn is None:
            continue
        got = np.asarray(dfn(x, a), dtype=np.float64)
        if got.shape != shape:
            raise ArgumentError("%s must return shape %s" % (name, (shape,)))
        fd = _fd_columns(fn, x, a, h)
        scale = max(1.0, float(np.abs(fd).max()))
        if float(np.abs(got - fd).max()) > 1e-4 * scale:
            raise ArgumentError("%s disagrees with finite differences" % name)


def _march(problem, t, x, a, u):
    """Forward march on [t, T]: per-cell cost pieces and terminal states."""
    sub = rough_core.restrict_rough_path(problem.driver, t, problem.T)
    tau = sub.times
    n = tau.shape[0]
    k = a.shape[0]
    gamma = np.empty((n, k))
    gamma[0] = a
    u_grid = np.empty((n - 1, u.values.shape[1]))
    for i in range(n - 1):
        u_grid[i] = u.at(t + tau[i])
        step = problem.h(gamma[i], u_grid[i]) if problem.h is not None else 0.0
        gamma[i + 1] = gamma[i] + np.asarray(step, dtype=np.float64) * (tau[i + 1] - tau[i])
    gamma_path = paths.SampledPath(tau, gamma)
    sol = rough_core.solve_rde(problem.b, problem.lam, problem.dlam, gamma_path,
                               sub, x, check_derivative=False)
    X = sol.values
    dts = tau[1:] - tau[:-1]
    if problem.f is not None:
        f_nodes = np.array([problem.f(X[i], gamma[i]) for i in range(n)], dtype=np.float64)
        f_cells = 0.5 * (f_nodes[:-1] + f_nodes[1:]) * dts
    else:
        f_cells = np.zeros(n - 1)
    if problem.psi is not None:
        d = sub.dim
        vals = np.empty((n, d))
        gub = np.zeros((n, d, d))
        for i in range(n):
            vals[i] = np.asarray(problem.psi(X[i], gamma[i]), dtype=np.float64)
            if problem.lam is not None:
                dpsi_i = np.asarray(problem.dpsi(X[i], gamma[i]), dtype=np.float64)
                gub[i] = dpsi_i @ sol.gubinelli[i]
        cp = rough_core.ControlledPath(sub, vals, gub)
        psi_cells = rough_core._cell_contributions(cp, sub)
    else:
        psi_cells = np.zeros(n - 1)
    reg_cells = problem.eps * np.linalg.norm(u_grid, axis=1) ** problem.q_exp * dts
    return tau, X, gamma, f_cells, psi_cells, reg_cells


def cost(problem, t, x, a, u, validate=True):
    """Cost of the piecewise-constant control u over [t, T]."""
    x = _as_vector(x, "x")
    a = _as_vector(a, "a")
    if abs(t - problem.T) <= 1e-12 * max(1.0, problem.T):
        return float(problem.g(x, a))
    if validate:
        check_derivatives(problem, x, a)
    tau, X, gamma, f_cells, psi_cells, reg_cells = _march(problem, t, x, a, u)
    total = float(f_cells.sum() + psi_cells.sum() + reg_cells.sum())
    return total + float(problem.g(X[-1], gamma[-1]))


def _running_cost(problem, t, r, x, a, u):
    """Cost pieces on [t, r] without the terminal g; returns (cost, X_r, gamma_r)."""
    tau, X, gamma, f_cells, psi_cells, reg_cells = _march(problem, t, x, a, u)
    j = paths.SampledPath(tau, X).grid_index(r - t)
    run = float(f_cells[:j].sum() + psi_cells[:j].sum() + reg_cells[:j].sum())
    return run, X[j], gamma[j]


def _uniform_knots(t, T, n_knots):
    return t + (T - t) * np.arange(n_knots) / n_knots


def _lattice_value(problem, t, x, a, knots, options):
    """Exhaustive or coordinate-descent minimum over the product lattice."""
    n_knots = knots.shape[0]
    per = len(options)
    total = per ** n_knots
    best_val = math.inf
    best_idx = None

    def eval_idx(idx):
        u = PiecewiseControl(knots, np.stack([options[j] for j in idx]))
        return cost(problem, t, x, a, u, validate=False)

    if total <= _EXHAUSTIVE_LIMIT:
        combos = list(itertools.product(range(per), repeat=n_knots))
        values = _parallel_map(eval_idx, combos)
        for idx, val in zip(combos, values):
            if val < best_val:
                best_val, best_idx = val, idx
    else:
        zero = min(range(per), key=lambda j: (float(np.linalg.norm(options[j])), j))
        starts = [(zero,) * n_knots, (0,) * n_knots, (per - 1,) * n_knots,
                  (per // 2,) * n_knots]
        for start in starts:
            idx = list(start)
            val = eval_idx(tuple(idx))
            for _ in range(50):
                improved = False
                for pos in range(n_knots):
                    trial_vals = _parallel_map(
                        lambda j, pos=pos, idx=idx: eval_idx(
                            tuple(idx[:pos]) + (j,) + tuple(idx[pos + 1:])),
                        range(per))
                    j_best = int(np.argmin(trial_vals))
                    if trial_vals[j_best] < val:
                        val, idx[pos] = trial_vals[j_best], j_best
                        improved = True
                if not improved:
                    break
            cand = (val, tuple(idx))
            if cand[0] < best_val or (cand[0] == best_val and cand[1] < best_idx):
                best_val, best_idx = cand
    control = PiecewiseControl(knots, np.stack([options[j] for j in best_idx]))
    return best_val, control


def value(problem, t, x, a, grid, knots=None):
    """Minimal cost over the control lattice; returns (value, best control)."""
    x = _as_vector(x, "x")
    a = _as_vector(a, "a")
    if abs(t - problem.T) <= 1e-12 * max(1.0, problem.T):
        return float(problem.g(x, a)), PiecewiseControl.constant(
            np.zeros(grid.u_dim), problem.T)
    check_derivatives(problem, x, a)
    if knots is None:
        knots = _uniform_knots(t, problem.T, grid.n_knots)
    else:
        knots = np.asarray(knots, dtype=np.float64)
    return _lattice_value(problem, t, x, a, knots, grid.knot_options())


def dpp_check(problem, t, r, x, a, grid, tol=1e-12):
    """Split-at-r dynamic-programming identity on the product lattice."""
    x = _as_vector(x, "x")
    a = _as_vector(a, "a")
    T = problem.T
    if not (t <= r <= T):
        raise ArgumentError("need t <= r <= T")
    knots = _uniform_knots(t, T, grid.n_knots)
    on_knot = bool(np.any(np.abs(knots - r) <= 1e-12)) or abs(r - T) <= 1e-12
    try:
        problem.driver.base.grid_index(r)
    except ArgumentError:
        on_knot = False
    if not on_knot:
        raise ArgumentError("r must align with a control knot on the driver grid")
    check_derivatives(problem, x, a)
    lhs, _ = value(problem, t, x, a, grid, knots=knots)

    prefix = knots[knots < r - 1e-12]
    suffix = knots[knots >= r - 1e-12]
    options = grid.knot_options()
    if prefix.shape[0] == 0:
        rhs = value(problem, r, x, a, grid,
                    knots=suffix if suffix.shape[0] else None)[0]
        n_prefix = 0
    else:
        def eval_prefix(idx):
            u = PiecewiseControl(prefix, np.stack([options[j] for j in idx]))
            run, xr, ar = _running_cost(problem, t, r, x, a, u)
            if suffix.shape[0] == 0:
                inner = float(problem.g(xr, ar))
            else:
                inner = _lattice_value(problem, r, xr, ar, suffix, options)[0]
            return run + inner

        combos = list(itertools.product(range(len(options)), repeat=prefix.shape[0]))
        rhs = min(_parallel_map(eval_prefix, combos))
        n_prefix = len(combos)
    gap = abs(lhs - rhs)
    return {"lhs": lhs, "rhs": rhs, "gap": gap, "tol": tol, "pass": gap <= tol,
            "n_prefix": n_prefix, "n_suffix": int(suffix.shape[0])}


def _segment_square_integral(path):
    """Exact int (eta_T - eta_s)^2 ds for a piecewise-linear scalar path."""
    vals = path.values[:, 0]
    k = vals[-1] - vals
    dts = path.times[1:] - path.times[:-1]
    return float(np.sum(dts * (k[:-1] ** 2 + k[:-1] * k[1:] + k[1:] ** 2) / 3.0))


def degeneracy_demo(family, Q, eps_list, x=0.0):
    """Trading values across driver meshes: unregularized vs regularized.

    The unregularized column picks the best inventory in {-Q, 0, Q} per linear
    segment (the segment-wise optimum of the inventory-bounded problem), which
    sums to x + Q * (1-variation).  Regularized columns solve the
    speed-penalized relaxation d gamma = u ds, gamma_t = 0, exactly: by parts
    the gain is int u_s (eta_T - eta_s) ds, so u* = (eta_T - eta_s)/(2 eps)
    and the value is x + int (eta_T - eta_s)^2 ds / (4 eps).
    """
    if Q < 0:
        raise ArgumentError("inventory bound must be nonnegative")
    for e in eps_list:
        if e <= 0:
            raise ArgumentError("regularized columns need eps > 0")
    rows = []
    for path in family:
        if path.dim != 1:
            raise ArgumentError("degeneracy demo expects scalar drivers")
        dz = np.diff(path.values[:, 0])
        greedy = float(sum(max(Q * d, 0.0, -Q * d) for d in dz))
        sq = _segment_square_integral(path)
        rows.append({
            "n_segments": path.n_samples - 1,
            "one_variation": float(np.abs(dz).sum()),
            "value_eps0": x + greedy,
            "values_regularized": [x + sq / (4.0 * e) for e in eps_list],
        })
    return rows


def value_table(problem, t_nodes, x_nodes, a_nodes, grid):
    """Dense value table over scalar (t, x, a) nodes; t_nodes on the driver grid."""
    t_nodes = np.asarray(t_nodes, dtype=np.float64)
    x_nodes = np.asarray(x_nodes, dtype=np.float64)
    a_nodes = np.asarray(a_nodes, dtype=np.float64)
    table = np.empty((t_nodes.shape[0], x_nodes.shape[0], a_nodes.shape[0]))
    pairs = list(itertools.product(range(x_nodes.shape[0]), range(a_nodes.shape[0])))
    for it, t in enumerate(t_nodes):
        def one(pair, t=float(t)):
            jx, ja = pair
            return value(problem, t, [x_nodes[jx]], [a_nodes[ja]], grid)[0]

        vals = _parallel_map(one, pairs)
        for (jx, ja), v in zip(pairs, vals):
            table[it, jx, ja] = v
    return table


def hjb_residual(problem, v_table, t_nodes, x_nodes, a_nodes, grid):
    """Finite-difference residual of the scalar HJB equation along the driver.

    residual = -dv/dt - b dv/dx - inf_u { h dv/da + eps |u|^q } - f
               - (lam dv/dx + psi) . eta'   (forward in t, central in x, a).
    """
    t_nodes = np.asarray(t_nodes, dtype=np.float64)
    x_nodes = np.asarray(x_nodes, dtype=np.float64)
    a_nodes = np.asarray(a_nodes, dtype=np.float64)
    for name, nodes in (("t", t_nodes), ("x", x_nodes), ("a", a_nodes)):
        if nodes.shape[0] < 3:
            raise ArgumentError("need at least 3 %s nodes" % name)
    v = np.asarray(v_table, dtype=np.float64)
    if v.shape != (t_nodes.shape[0], x_nodes.shape[0], a_nodes.shape[0]):
        raise ArgumentError("v_table shape does not match the node grids")
    z = problem.driver.base
    options = grid.knot_options()
    res = np.empty((t_nodes.shape[0] - 1, x_nodes.shape[0] - 2, a_nodes.shape[0] - 2))
    for it in range(t_nodes.shape[0] - 1):
        dt = t_nodes[it + 1] - t_nodes[it]
        slope = (z.value_at(t_nodes[it + 1]) - z.value_at(t_nodes[it])) / dt
        for jx in range(1, x_nodes.shape[0] - 1):
            for ja in range(1, a_nodes.shape[0] - 1):
                xv = np.array([x_nodes[jx]])
                av = np.array([a_nodes[ja]])
                vt = (v[it + 1, jx, ja] - v[it, jx, ja]) / dt
                vx = (v[it, jx + 1, ja] - v[it, jx - 1, ja]) / (x_nodes[jx + 1] - x_nodes[jx - 1])
                va = (v[it, jx, ja + 1] - v[it, jx, ja - 1]) / (a_nodes[ja + 1] - a_nodes[ja - 1])
                ham = math.inf
                for u in options:
                    hval = float(np.asarray(problem.h(av, u))[0]) if problem.h is not None else 0.0
                    ham = min(ham, hval * va + problem.eps * float(np.linalg.norm(u)) ** problem.q_exp)
                fval = float(problem.f(xv, av)) if problem.f is not None else 0.0
                lam_row = (np.asarray(problem.lam(xv, av), dtype=np.float64)[0]
                           if problem.lam is not None else np.zeros(z.dim))
                psi_row = (np.asarray(problem.psi(xv, av), dtype=np.float64)
                           if problem.psi is not None else np.zeros(z.dim))
                rough_term = float((vx * lam_row + psi_row) @ slope)
                res[it, jx - 1, ja - 1] = -vt - (float(np.asarray(problem.b(xv, av))[0]) * vx
                                                 if problem.b is not None else 0.0) \
                    - ham - fval - rough_term
    return {"residual": res, "max_abs": float(np.abs(res).max())}


def verification_probe(problem, w, u_star, t_nodes, x_nodes, a_nodes, grid):
    """Residual of w, cost of u_star vs lattice value, and |w - value| table."""
    t_nodes = np.asarray(t_nodes, dtype=np.float64)
    x_nodes = np.asarray(x_nodes, dtype=np.float64)
    a_nodes = np.asarray(a_nodes, dtype=np.float64)
    w_table = np.array([[[float(w(t, xv, av)) for av in a_nodes]
                         for xv in x_nodes] for t in t_nodes])
    residual = hjb_residual(problem, w_table, t_nodes, x_nodes, a_nodes, grid)
    vt = value_table(problem, t_nodes, x_nodes, a_nodes, grid)
    t0 = float(t_nodes[0])
    x0 = float(x_nodes[x_nodes.shape[0] // 2])
    a0 = float(a_nodes[a_nodes.shape[0] // 2])
    knots = _uniform_knots(t0, problem.T, grid.n_knots)
    u = PiecewiseControl(knots, np.stack([np.atleast_1d(u_star(k)) for k in knots]))
    c_star = cost(problem, t0, [x0], [a0], u)
    v0 = vt[0, x_nodes.shape[0] // 2, a_nodes.shape[0] // 2]
    return {
        "max_residual": residual["max_abs"],
        "cost_minus_value": c_star - v0,
        "max_value_gap": float(np.abs(w_table - vt).max()),
    }


def driver_continuity_scan(problem, driver_pairs, p, t, x, a, grid):
    """|value gap| against the rough metric for pairs of driver samples.

    Pairs are piecewise-linear paths; the coarser of each pair is resampled
    onto the finer grid (exact for nested grids) and both are canonically
    lifted there, so values and metric share one grid.  Zero-metric rows are
    skipped.
    """
    rows = []
    for path1, path2 in driver_pairs:
        fine = path1 if path1.n_samples >= path2.n_samples else path2
        lifted = []
        for pth in (path1, path2):
            if pth.n_samples != fine.n_samples or not np.array_equal(pth.times, fine.times):
                pth = paths.resample(pth, fine.times)
            lifted.append(rough_core.canonical_lift(pth))
        metric = rough_core.rough_metric(lifted[0], lifted[1], p)
        if metric == 0.0:
            continue
        vals = [value(replace(problem, driver=rp, T=float(rp.times[-1])),
                      t, x, a, grid)[0] for rp in lifted]
        gap = abs(vals[0] - vals[1])
        rows.append({"metric": metric, "value_gap": gap, "ratio": gap / metric})
    return rows


def integral_growth_report(problem, t, x, a, u, p):
    """Observed ratio of |rough psi-integral| to 1 + |gamma|_{p/2}^{2(1+p)}."""
    x = _as_vector(x, "x")
    a = _as_vector(a, "a")
    tau, X, gamma, _, psi_cells, _ = _march(problem, t, x, a, u)
    psi_int = abs(float(psi_cells.sum()))
    gvar = paths.p_variation(paths.SampledPath(tau, gamma), p / 2.0)
    bound = 1.0 + gvar ** (2.0 * (1.0 + p))
    return {"psi_integral": psi_int, "gamma_p2_variation": gvar,
            "growth_bound_ratio": psi_int / bound}


def _desk_inventory(mesh=64, seed=2027):
    driver = rough_core.brownian_rough_path(seed, mesh)
    problem = ControlProblem(
        b=None,
        lam=lambda x, a: np.array([[a[0]]]),
        dlam=lambda x, a: np.zeros((1, 1, 1)),
        f=lambda x, a: 0.5 * a[0] ** 2,
        psi=None, dpsi=None,
        g=lambda x, a: -x[0],
        h=lambda a, u: u,
        driver=driver, eps=0.1, q_exp=2.0, T=1.0)
    grid = ControlGrid(n_knots=4, u_bounds=[[-2.0, 2.0]], u_levels=3)
    return problem, grid, {"x": [0.0], "a": [0.0], "t": 0.0, "r": 0.5}


def _desk_tracking(mesh=64, seed=2028):
    driver = rough_core.brownian_rough_path(seed, mesh)
    problem = ControlProblem(
        b=lambda x, a: np.array([-0.5 * x[0]]),
        lam=lambda x, a: np.array([[0.3]]),
        dlam=lambda x, a: np.zeros((1, 1, 1)),
        f=lambda x, a: (x[0] - a[0]) ** 2,
        psi=lambda x, a: np.array([0.4 * x[0]]),
        dpsi=lambda x, a: np.array([[0.4]]),
        g=lambda x, a: x[0] ** 2,
        h=lambda a, u: u,
        driver=driver, eps=0.05, q_exp=2.0, T=1.0)
    grid = ControlGrid(n_knots=4, u_bounds=[[-1.0, 1.0]], u_levels=3)
    return problem, grid, {"x": [0.2], "a": [0.0], "t": 0.0, "r": 0.5}


def _desk_mean_revert(mesh=64, seed=2029):
    driver = rough_core.brownian_rough_path(seed, mesh)
    problem = ControlProblem(
        b=lambda x, a: np.array([a[0] - x[0]]),
        lam=lambda x, a: np.array([[0.2 + 0.1 * math.sin(x[0])]]),
        dlam=lambda x, a: np.array([[[0.1 * math.cos(x[0])]]]),
        f=lambda x, a: 0.2 * a[0] ** 2,
        psi=lambda x, a: np.array([0.1 * a[0]]),
        dpsi=lambda x, a: np.array([[0.0]]),
        g=lambda x, a: (x[0] - 1.0) ** 2,
        h=lambda a, u: u - 0.2 * a,
        driver=driver, eps=0.02, q_exp=2.0, T=1.0)
    grid = ControlGrid(n_knots=4, u_bounds=[[-1.5, 1.5]], u_levels=3)
    return problem, grid, {"x": [0.5], "a": [0.3], "t": 0.0, "r": 0.5}


DESK_INSTANCES = {
    "inventory": _desk_inventory,
    "tracking": _desk_tracking,
    "mean-revert": _desk_mean_revert,
}


def desk_instance(name, **kwargs):
    """Named desk problem: returns (problem, grid, base point metadata)."""
    if name not in DESK_INSTANCES:
        raise ArgumentError("unknown desk instance %r (have: %s)"
                            % (name, ", ".join(sorted(DESK_INSTANCES))))
    return DESK_INSTANCES[name](**kwargs)
