"""Kalman-Bucy filtering and penalty-based robust state estimation.

The linear-Gaussian model is

    dS = alpha S dt + sigma dB1,   dY = c S dt + dB2,   d<B1, B2> = rho dt,

with S in R^m, Y in R^d (Y_0 = 0) and S_0 ~ N(mu0, Sigma0).  The filter mean
follows dq = alpha q dt + (R c' + sigma rho)(dY - c q dt) and the covariance
the matching Riccati ODE, both marched by explicit Euler on the observation
grid with per-step symmetrization of R.

Likelihoods come in two discretizations of the same quantity: left-point Ito
sums, and a pathwise form that integrates psi = -cq against the geometric
lift of the observation (Gubinelli derivative -c(Rc' + sigma rho)) plus the
trace correction.  The penalty of a candidate model is prior cost plus the
pathwise negative log-likelihood; robust estimates maximize Gaussian
expectation minus a power of the penalty over a finite candidate set.

Likelihoods are defined only up to an additive constant, so penalties enter
the robust objective through their positive part; raw penalty values are
still returned for candidate ranking.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import paths, rough_core
from ._par import parallel_map as _parallel_map
from .errors import ArgumentError, DivergenceError, DomainError

_ADMISSIBLE_TOL = 1e-10


class Schedule:
    """Piecewise-constant matrix-valued function of time (right-continuous)."""

    __slots__ = ("knots", "values")

    def __init__(self, knots, values):
        knots = np.asarray(knots, dtype=np.float64)
        values = np.ascontiguousarray(values, dtype=np.float64)
        if knots.ndim != 1 or len(knots) == 0:
            raise ArgumentError("knots must be a nonempty 1-d array")
        if knots[0] != 0.0 or np.any(np.diff(knots) <= 0):
            raise ArgumentError("knots must start at 0 and increase strictly")
        if values.ndim != 3 or values.shape[0] != len(knots):
            raise ArgumentError("values must stack one matrix per knot")
        if not np.all(np.isfinite(values)):
            raise ArgumentError("non-finite schedule values")
        self.knots = knots
        self.values = values

    @classmethod
    def constant(cls, matrix):
        return cls([0.0], np.asarray(matrix, dtype=np.float64)[None, :, :])

    @property
    def shape(self):
        return self.values.shape[1:]

    def at(self, t):
        idx = int(np.searchsorted(self.knots, t + 1e-12, side="right")) - 1
        return self.values[max(idx, 0)]

    def to_dict(self):
        if len(self.knots) == 1:
            return self.values[0].tolist()
        return {"knots": self.knots.tolist(), "values": self.values.tolist()}


def _as_schedule(spec, name):
    if isinstance(spec, Schedule):
        return spec
    if isinstance(spec, dict):
        return Schedule(spec["knots"], np.asarray(spec["values"], dtype=np.float64))
    if isinstance(spec, tuple) and len(spec) == 2:
        return Schedule(spec[0], np.asarray(spec[1], dtype=np.float64))
    arr = np.atleast_2d(np.asarray(spec, dtype=np.float64))
    if arr.ndim != 2:
        raise ArgumentError("%s must be a matrix or a knot schedule" % name)
    return Schedule.constant(arr)


class LinearGaussianModel:
    """Signal/observation coefficients plus the initial signal law.

    alpha (m,m), sigma (m,l), c (d,m), rho (l,d); each either a constant
    matrix or a (knots, values) piecewise-constant schedule.  Shape checks are
    hard errors; correlation admissibility (I - rho rho' PSD at every knot)
    is recorded and enforced only by the operations that need it, so that an
    inadmissible candidate can still be priced at infinite penalty.
    """

    __slots__ = ("alpha", "sigma", "c", "rho", "mu0", "Sigma0", "m", "l", "d",
                 "_rho_eig_min")

    def __init__(self, alpha, sigma, c, rho, mu0, Sigma0):
        self.alpha = _as_schedule(alpha, "alpha")
        self.sigma = _as_schedule(sigma, "sigma")
        self.c = _as_schedule(c, "c")
        self.rho = _as_schedule(rho, "rho")
        m, m2 = self.alpha.shape
        if m != m2:
            raise ArgumentError("alpha must be square")
        if self.sigma.shape[0] != m:
            raise ArgumentError("sigma must have m rows")
        l = self.sigma.shape[1]
        if self.c.shape[1] != m:
            raise ArgumentError("c must have m columns")
        d = self.c.shape[0]
        if self.rho.shape != (l, d):
            raise ArgumentError("rho must have shape (l, d)")
        mu0 = np.atleast_1d(np.asarray(mu0, dtype=np.float64))
        Sigma0 = np.atleast_2d(np.asarray(Sigma0, dtype=np.float64))
        if mu0.shape != (m,) or Sigma0.shape != (m, m):
            raise ArgumentError("mu0/Sigma0 must match the signal dimension")
        if float(np.abs(Sigma0 - Sigma0.T).max()) > 1e-12:
            raise ArgumentError("Sigma0 must be symmetric within 1e-12")
        self.mu0 = mu0
        self.Sigma0 = 0.5 * (Sigma0 + Sigma0.T)
        self.m, self.l, self.d = m, l, d
        eye = np.eye(l)
        self._rho_eig_min = min(
            float(np.linalg.eigvalsh(eye - r @ r.T).min()) for r in self.rho.values
        )

    @property
    def is_admissible(self):
        return self._rho_eig_min >= -_ADMISSIBLE_TOL

    def check_admissible(self):
        if not self.is_admissible:
            raise DomainError(
                "I - rho rho' has eigenvalue %.3e below tolerance" % self._rho_eig_min
            )

    def coefficients_at(self, t):
        return self.alpha.at(t), self.sigma.at(t), self.c.at(t), self.rho.at(t)

    def to_dict(self):
        return {
            "alpha": self.alpha.to_dict(),
            "sigma": self.sigma.to_dict(),
            "c": self.c.to_dict(),
            "rho": self.rho.to_dict(),
            "mu0": self.mu0.tolist(),
            "Sigma0": self.Sigma0.tolist(),
        }

    @classmethod
    def from_dict(cls, spec):
        return cls(spec["alpha"], spec["sigma"], spec["c"], spec["rho"],
                   spec["mu0"], spec["Sigma0"])


@dataclass(frozen=True)
class FilterState:
    t: float
    q: np.ndarray
    R: np.ndarray
    clamped: bool = False


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty knobs: beta = int z(q, R, gamma) ds + g(mu0, Sigma0) + NLL.

    When reference is set, the likelihood part is measured relative to that
    model (its own pathwise NLL is subtracted), matching the Radon-Nikodym
    form of the likelihood.  A reference among the candidates then has zero
    penalty under a null prior, which pins the robust interval ordering
    without tying any candidate's penalty to the rest of the set.
    """

    k1: float
    k2: float = 1.0
    z: object = None
    g: object = None
    reference: object = None

    def __post_init__(self):
        if not self.k1 > 0:
            raise ArgumentError("k1 must be positive")
        if self.k2 < 1:
            raise ArgumentError("k2 must be at least 1")
        if self.reference is not None and not self.reference.is_admissible:
            raise ArgumentError("reference model must be admissible")


def _psd_sqrt(matrix):
    w, v = np.linalg.eigh(0.5 * (matrix + matrix.T))
    return v @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ v.T


def simulate_pair(model, seed, n_steps, T=1.0):
    """Euler-Maruyama draw of (signal, observation) on a uniform grid."""
    model.check_admissible()
    rng = np.random.default_rng(seed)
    m, l, d = model.m, model.l, model.d
    dt = float(T) / n_steps
    root_dt = math.sqrt(dt)
    s = model.mu0 + _psd_sqrt(model.Sigma0) @ rng.normal(size=m)
    db2 = rng.normal(size=(n_steps, d)) * root_dt
    dw = rng.normal(size=(n_steps, l)) * root_dt
    times = paths.uniform_times(T, n_steps)
    sig = np.empty((n_steps + 1, m))
    obs = np.empty((n_steps + 1, d))
    sig[0] = s
    obs[0] = 0.0
    for k in range(n_steps):
        alpha, sigma, c, rho = model.coefficients_at(times[k])
        mix = _psd_sqrt(np.eye(l) - rho @ rho.T)
        db1 = rho @ db2[k] + mix @ dw[k]
        obs[k + 1] = obs[k] + c @ sig[k] * dt + db2[k]
        sig[k + 1] = sig[k] + alpha @ sig[k] * dt + sigma @ db1
    return paths.SampledPath(times, sig), paths.SampledPath(times, obs)


def _require_uniform(observation):
    dts = np.diff(observation.times)
    if len(dts) == 0:
        raise ArgumentError("observation needs at least one step")
    if float(np.abs(dts - dts[0]).max()) > 1e-9 * max(dts[0], 1.0):
        raise ArgumentError("observation must live on a uniform grid")
    return float(dts[0])


def _report_state(t, q, R):
    w = np.linalg.eigvalsh(R)
    if float(w.min()) < 0.0:
        ww, v = np.linalg.eigh(R)
        R = v @ np.diag(np.clip(ww, 0.0, None)) @ v.T
        return FilterState(float(t), q.copy(), 0.5 * (R + R.T), clamped=True)
    return FilterState(float(t), q.copy(), R.copy(), clamped=False)


def kalman_bucy(model, observation, q0=None, R0=None):
    """Explicit-Euler march of the filter mean and Riccati covariance.

    Returns one FilterState per grid node; reported covariances are
    eigenvalue-clamped to PSD with the clamp flagged, while the march itself
    runs on the raw symmetrized recursion.
    """
    if observation.dim != model.d:
        raise ArgumentError("observation dimension does not match the model")
    dt = _require_uniform(observation)
    times = observation.times
    y = observation.values
    q = model.mu0.copy() if q0 is None else np.atleast_1d(np.asarray(q0, dtype=np.float64)).copy()
    R = model.Sigma0.copy() if R0 is None else np.atleast_2d(np.asarray(R0, dtype=np.float64)).copy()
    if q.shape != (model.m,) or R.shape != (model.m, model.m):
        raise ArgumentError("initial state must match the signal dimension")
    states = [_report_state(times[0], q, R)]
    # overflow is caught by the finiteness guard, so keep numpy quiet here
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(len(times) - 1):
            alpha, sigma, c, rho = model.coefficients_at(times[k])
            gain = R @ c.T + sigma @ rho
            dy = y[k + 1] - y[k]
            q = q + alpha @ q * dt + gain @ (dy - c @ q * dt)
            R = R + dt * (sigma @ sigma.T + alpha @ R + R @ alpha.T
                          - gain @ (c @ R + rho.T @ sigma.T))
            R = 0.5 * (R + R.T)
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(R))):
                raise DivergenceError("filter state left float range at step %d" % (k + 1),
                                      step=k + 1)
            states.append(_report_state(times[k + 1], q, R))
    return states


def _state_arrays(states):
    times = np.array([s.t for s in states])
    qs = np.stack([s.q for s in states])
    Rs = np.stack([s.R for s in states])
    return times, qs, Rs


def innovation(model, observation, states):
    """Accumulated innovations dV = dY - c q dt as a SampledPath from zero."""
    times, qs, _ = _state_arrays(states)
    if not np.array_equal(times, observation.times):
        raise ArgumentError("states and observation must share a grid")
    dt = np.diff(times)
    cq = np.stack([model.c.at(t) @ q for t, q in zip(times, qs)])
    dv = np.diff(observation.values, axis=0) - cq[:-1] * dt[:, None]
    return paths.SampledPath(times, np.vstack([np.zeros((1, model.d)), np.cumsum(dv, axis=0)]))


def neg_log_likelihood_ito(model, observation, states):
    """Left-point discretization of -int cq . dY + 0.5 int |cq|^2 ds."""
    times, qs, _ = _state_arrays(states)
    if not np.array_equal(times, observation.times):
        raise ArgumentError("states and observation must share a grid")
    dt = np.diff(times)
    cq = np.stack([model.c.at(t) @ q for t, q in zip(times, qs)])
    dy = np.diff(observation.values, axis=0)
    stoch = float(np.sum(cq[:-1] * dy))
    quad = float(np.sum(np.sum(cq[:-1] ** 2, axis=1) * dt))
    return -stoch + 0.5 * quad


def neg_log_likelihood_pathwise(model, rough_observation, states):
    """Rough-integral form: -int cq d(lifted Y) plus the trace correction.

    The integrand psi = -cq is controlled by the observation with Gubinelli
    derivative -c(Rc' + sigma rho); with the geometric (Stratonovich) lift
    this reproduces the Ito value up to O(mesh).
    """
    times, qs, Rs = _state_arrays(states)
    if not np.array_equal(times, rough_observation.times):
        raise ArgumentError("states and rough observation must share a grid")
    n = len(times)
    psi = np.empty((n, model.d))
    gub = np.empty((n, model.d, model.d))
    quad = np.empty(n)
    for i, t in enumerate(times):
        _, sigma, c, rho = model.coefficients_at(t)
        gain = Rs[i] @ c.T + sigma @ rho
        cq = c @ qs[i]
        psi[i] = -cq
        gub[i] = -(c @ gain)
        quad[i] = float(cq @ cq) + float(np.trace(c @ gain))
    controlled = rough_core.ControlledPath(rough_observation, psi, gub)
    stoch = float(rough_core.rough_integral(controlled, rough_observation))
    return stoch + 0.5 * float(np.trapezoid(quad, times))


def filtering_cost(gamma, q0, R0, rough_observation, cfg, t=None):
    """Forward cost int z + 0.5(|cq|^2 + trace) ds + int psi d(lift) + g(q0, R0).

    gamma supplies the coefficient schedules (a LinearGaussianModel; its
    mu0/Sigma0 are ignored in favor of the explicit initial state).  With a
    constant candidate gamma started at the candidate's own (mu0, Sigma0)
    this equals penalty() exactly, by sharing the same march and quadrature.
    """
    gamma.check_admissible()
    rp = rough_observation if t is None else rough_core.restrict_rough_path(
        rough_observation, 0.0, t)
    states = kalman_bucy(gamma, rp.base, q0=q0, R0=R0)
    times, qs, Rs = _state_arrays(states)
    cost = neg_log_likelihood_pathwise(gamma, rp, states)
    if cfg.reference is not None:
        ref_states = kalman_bucy(cfg.reference, rp.base)
        cost -= neg_log_likelihood_pathwise(cfg.reference, rp, ref_states)
    if cfg.z is not None:
        zvals = np.array([
            cfg.z(qs[i], Rs[i], gamma.coefficients_at(times[i])) for i in range(len(times))
        ], dtype=np.float64)
        cost += float(np.trapezoid(zvals, times))
    if cfg.g is not None:
        cost += float(cfg.g(states[0].q, states[0].R))
    return cost


def _clip_observation(observation, t):
    if t is None:
        return observation
    j = observation.grid_index(t)
    if j < 1:
        raise ArgumentError("t must be a positive grid time")
    return paths.SampledPath(observation.times[:j + 1], observation.values[:j + 1])


def penalty(model, observation, cfg, t=None):
    """Candidate penalty: prior cost plus pathwise NLL; inf if inadmissible."""
    if not model.is_admissible:
        return math.inf
    clipped = _clip_observation(observation, t)
    return filtering_cost(model, model.mu0, model.Sigma0,
                          rough_core.canonical_lift(clipped), cfg)


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(20)
_MC_SAMPLES = 100_000
_MC_SEED = 20160915


def gaussian_expectation(phi, mean, cov):
    """E[phi(X)] for X ~ N(mean, cov): Gauss-Hermite for m <= 2, else MC."""
    mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    m = mean.shape[0]
    root = _psd_sqrt(cov)
    if m == 1:
        pts = mean[0] + math.sqrt(2.0) * root[0, 0] * _GH_NODES
        vals = np.array([float(phi(np.array([p]))) for p in pts])
        return float(_GH_WEIGHTS @ vals) / math.sqrt(math.pi)
    if m == 2:
        xx, yy = np.meshgrid(_GH_NODES, _GH_NODES, indexing="ij")
        z = math.sqrt(2.0) * np.stack([xx.ravel(), yy.ravel()], axis=1)
        pts = mean + z @ root.T
        vals = np.array([float(phi(p)) for p in pts])
        wts = np.outer(_GH_WEIGHTS, _GH_WEIGHTS).ravel()
        return float(wts @ vals) / math.pi
    rng = np.random.default_rng(np.random.SeedSequence(entropy=_MC_SEED, spawn_key=(m,)))
    pts = mean + rng.normal(size=(_MC_SAMPLES, m)) @ root.T
    return float(np.mean([float(phi(p)) for p in pts]))


def _penalty_power(beta, cfg):
    if not math.isfinite(beta):
        return math.inf
    return (max(beta, 0.0) / cfg.k1) ** cfg.k2


def _candidate_stats(phi, candidates, observation, cfg, t, with_square=False):
    if len(candidates) == 0:
        raise ArgumentError("candidate set must be nonempty")

    def one(model):
        beta = penalty(model, observation, cfg, t)
        if not math.isfinite(beta):
            return beta, math.nan, math.nan
        states = kalman_bucy(model, _clip_observation(observation, t))
        mean, cov = states[-1].q, states[-1].R
        m1 = gaussian_expectation(phi, mean, cov)
        m2 = gaussian_expectation(lambda x: float(phi(x)) ** 2, mean, cov) if with_square else math.nan
        return beta, m1, m2

    rows = _parallel_map(one, list(candidates))
    if all(not math.isfinite(r[0]) for r in rows):
        raise ArgumentError("every candidate has infinite penalty")
    return rows


def robust_report(phi, candidates, observation, cfg, t=None):
    """Value, per-candidate objectives and penalties of the robust expectation."""
    rows = _candidate_stats(phi, candidates, observation, cfg, t)
    objectives = []
    for beta, m1, _ in rows:
        objectives.append(-math.inf if not math.isfinite(beta) else m1 - _penalty_power(beta, cfg))
    best = int(np.argmax(objectives))
    return {
        "value": objectives[best],
        "best_candidate": best,
        "objectives": objectives,
        "penalties": [r[0] for r in rows],
        "means": [r[1] for r in rows],
    }


def robust_expectation(phi, candidates, observation, cfg, t=None):
    """sup over candidates of E[phi(S_t) | Y] - ((beta)+ / k1)^k2."""
    return robust_report(phi, candidates, observation, cfg, t)["value"]


def robust_confidence_interval(phi, candidates, observation, cfg, t=None):
    """[-E(-phi), E(phi)]; ordered whenever some candidate carries zero penalty."""
    rows = _candidate_stats(phi, candidates, observation, cfg, t)
    hi = -math.inf
    lo = math.inf
    for beta, m1, _ in rows:
        if not math.isfinite(beta):
            continue
        pen = _penalty_power(beta, cfg)
        hi = max(hi, m1 - pen)
        lo = min(lo, m1 + pen)
    return lo, hi


def _golden_section(fn, lo, hi, tol=1e-12, max_iter=300):
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a < tol * max(1.0, abs(a), abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def robust_point_estimate(candidates, observation, cfg, t=None, phi=None):
    """Minimizer of the robust mean-squared error, by golden-section search."""
    if phi is None:
        first = candidates[0] if candidates else None
        if first is not None and first.m != 1:
            raise ArgumentError("phi is required for signal dimension above 1")
        phi = lambda x: float(x[0])
    rows = _candidate_stats(phi, candidates, observation, cfg, t, with_square=True)
    usable = [(m1, m2, _penalty_power(beta, cfg))
              for beta, m1, m2 in rows if math.isfinite(beta)]
    means = [m1 for m1, _, _ in usable]
    spread = max(math.sqrt(max(m2 - m1 * m1, 0.0)) for m1, m2, _ in usable)
    lo = min(means) - 6.0 * max(spread, 1e-9)
    hi = max(means) + 6.0 * max(spread, 1e-9)

    def objective(xi):
        return max(m2 - 2.0 * xi * m1 + xi * xi - pen for m1, m2, pen in usable)

    return _golden_section(objective, lo, hi)
