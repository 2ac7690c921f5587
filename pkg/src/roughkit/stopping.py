"""Randomized stopping driven by signature functionals, valuation, pricing.

A policy is a linear functional l on words over the time-augmented alphabet
(letter 1 is time, 2..d+1 space); its intensity is theta_t = <l, sig_{0,t}>.
Stopping is randomized by an Expo(1) threshold on the running integral of
theta^2.  Paths passed to these functions are raw price paths; augmentation
happens internally.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels, paths, signatures, tensor_algebra as ta
from ._par import parallel_map as _parallel_map
from .errors import ArgumentError


@dataclass(frozen=True)
class StoppingPolicy:
    functional: ta.LinearFunctional
    truncation: int = 4

    def __post_init__(self):
        if self.functional.degree() > self.truncation:
            raise ArgumentError("policy degree exceeds truncation")


@dataclass(frozen=True)
class RandomizerConfig:
    distribution: str = "expo"
    rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.distribution != "expo" or self.rate != 1.0:
            raise ArgumentError("only the unit-rate exponential randomizer ships")


@dataclass(frozen=True)
class PayoffSpec:
    kind: str  # american_call | american_put | custom
    strike: float = 0.0
    rate: float = 0.0
    evaluator: object = None  # fn(time, prefix path) -> real; must be adapted

    def __post_init__(self):
        if self.kind in ("american_call", "american_put"):
            if self.strike < 0:
                raise ArgumentError("strike must be nonnegative")
        elif self.kind == "custom":
            if self.evaluator is None:
                raise ArgumentError("custom payoff needs an evaluator")
        else:
            raise ArgumentError("unknown payoff kind %r" % self.kind)


@dataclass(frozen=True)
class MCConfig:
    n_paths: int
    n_steps: int
    seed: int
    truncation: int = 4
    k_budget: float = 10.0
    n_starts: int = 3
    max_fevals: int = 1200
    out_of_sample: int = 0  # 0 means n_paths

    def __post_init__(self):
        if min(self.n_paths, self.n_steps, self.truncation, self.n_starts, self.max_fevals) <= 0:
            raise ArgumentError("MCConfig fields must be positive")
        if self.k_budget <= self.truncation:
            raise ArgumentError("k_budget must exceed the truncation level")


@dataclass
class PolicySearchResult:
    policy: StoppingPolicy
    value: float  # out-of-sample
    std_error: float
    in_sample_value: float
    budget_exhausted: bool
    trace: list = field(default_factory=list)


def _theta_features(path, depth):
    aug = signatures.time_augment(path)
    return signatures.signature_trajectory(aug, depth)


def policy_theta(policy, path):
    """<l, sig of augmented path> at every grid node."""
    l = policy.functional
    depth = l.degree()
    feats = _theta_features(path, depth)
    return feats @ ta.functional_to_flat(l, path.dim + 1, depth)


def _trapezoid_running(theta_sq, times):
    cells = 0.5 * (theta_sq[1:] + theta_sq[:-1]) * np.diff(times)
    return np.concatenate([[0.0], np.cumsum(cells)])


def running_intensity(policy, path):
    """Running trapezoid integral of theta^2 at the grid nodes."""
    theta = policy_theta(policy, path)
    return _trapezoid_running(theta * theta, path.times)


def _signature_intensity(policy, path):
    """Running integral of theta^2 evaluated exactly through the signature."""
    l = policy.functional
    needed = 2 * l.degree() + 1
    aug = signatures.time_augment(path)
    feats = signatures.signature_trajectory(aug, needed)
    quad = ta.append_letter(ta.shuffle_functional(l, l), 1)
    return feats @ ta.functional_to_flat(quad, path.dim + 1, needed)


def randomized_stop_time(policy, path, z):
    """First time the running intensity integral reaches z; inf if never.

    The crossing is located by linear interpolation of the running integral
    inside its grid cell.
    """
    if z <= 0:
        raise ArgumentError("need z > 0 (the randomizer has no mass at 0)")
    I = running_intensity(policy, path)
    if I[-1] < z:
        return math.inf
    j = int(np.searchsorted(I, z, side="left"))
    if j == 0:
        return 0.0
    t0, t1 = path.times[j - 1], path.times[j]
    return float(t0 + (z - I[j - 1]) / (I[j] - I[j - 1]) * (t1 - t0))


def hitting_time(policy, path):
    """First grid time with <l, sig_{0,t}> >= 1, else inf."""
    theta = policy_theta(policy, path)
    hits = np.nonzero(theta >= 1.0)[0]
    return float(path.times[hits[0]]) if len(hits) else math.inf


def survival_weight(policy, path, t):
    """P(no stop by t) = exp(-integral of theta^2), interpolated between nodes."""
    if not (0.0 <= t <= path.T):
        raise ArgumentError("t outside [0, T]")
    I = running_intensity(policy, path)
    return float(np.exp(-np.interp(t, path.times, I)))


def payoff_values(payoff, path):
    """Discounted payoff Y at every grid node."""
    t = path.times
    s = path.values[:, 0]
    if payoff.kind == "american_call":
        return np.exp(-payoff.rate * t) * np.maximum(s - payoff.strike, 0.0)
    if payoff.kind == "american_put":
        return np.exp(-payoff.rate * t) * np.maximum(payoff.strike - s, 0.0)
    out = np.empty(path.n_samples)
    for i in range(path.n_samples):
        prefix = paths.SampledPath(t[:i + 1], path.values[:i + 1])
        out[i] = payoff.evaluator(float(t[i]), prefix)
    return out


def _abel_value(weights, Y, cutoff_mask=None):
    """Y_0 + sum over cells of w_i (Y_{i+1} - Y_i), optionally cut at S_k."""
    dY = Y[1:] - Y[:-1]
    w = weights[:-1]
    if cutoff_mask is not None:
        w = w * cutoff_mask
    return float(Y[0] + (w * dY).sum())


def conditional_value(policy, path, payoff, intensity="trapezoid"):
    """Expected stopped payoff over the randomizer, pathwise.

    Y_0 + int exp(-I_t) dY_t with left-point payoff increments on the grid.
    intensity="signature" evaluates the running integral of theta^2 exactly
    through the level-(2 deg + 1) signature instead of the trapezoid rule.
    """
    if intensity == "trapezoid":
        I = running_intensity(policy, path)
    elif intensity == "signature":
        I = _signature_intensity(policy, path)
    else:
        raise ArgumentError("intensity must be 'trapezoid' or 'signature'")
    Y = payoff_values(payoff, path)
    return _abel_value(np.exp(-I), Y)


def conditional_value_linearized(policy, path, payoff, N, k=None, p=2.0):
    """Linearized value: survival weights replaced by an exponential shuffle.

    Y_0 + int_0^{S_k} <exp-shuffle(-(l sh l)1), sig^{<=N}> dY_t, where S_k is
    the first time the augmented path's running p-variation reaches k (T if
    k is None or never reached).
    """
    l = policy.functional
    quad = ta.append_letter(ta.shuffle_functional(l, l), 1)
    if quad.degree() > N:
        raise ArgumentError("need N >= deg((l sh l)1) = %d" % quad.degree())
    aug = signatures.time_augment(path)
    E = ta.exp_shuffle(-quad, N)
    feats = signatures.signature_trajectory(aug, N)
    weights = feats @ ta.functional_to_flat(E, path.dim + 1, N)
    Y = payoff_values(payoff, path)
    if k is None:
        mask = None
    else:
        sk = signatures.pvar_threshold_time(aug, k, p)
        mask = (path.times[:-1] < sk).astype(np.float64)
    return _abel_value(weights, Y, mask)


def brownian_motion_model(s0=1.0, sigma=0.2, T=1.0, n_steps=256):
    """Arithmetic Brownian price model S = s0 + sigma B on a uniform grid."""
    times = paths.uniform_times(T, n_steps)
    dt = T / n_steps

    def gen(seed):
        rng = np.random.default_rng(seed)
        inc = rng.normal(scale=sigma * math.sqrt(dt), size=n_steps)
        return paths.SampledPath(times, s0 + np.concatenate([[0.0], np.cumsum(inc)]))

    return gen


def gbm_model(s0=100.0, rate=0.05, sigma=0.2, T=1.0, n_steps=256):
    """Geometric Brownian motion under the pricing measure, exact increments."""
    times = paths.uniform_times(T, n_steps)
    dt = T / n_steps

    def gen(seed):
        rng = np.random.default_rng(seed)
        z = rng.normal(size=n_steps)
        logret = (rate - 0.5 * sigma**2) * dt + sigma * math.sqrt(dt) * z
        return paths.SampledPath(times, s0 * np.exp(np.concatenate([[0.0], np.cumsum(logret)])))

    return gen


def _path_seeds(seed, stream, n):
    return [np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), i)) for i in range(n)]


def _generate_batch(model, seeds):
    ps = [model(s) for s in seeds]
    t0 = ps[0].times
    for q in ps[1:]:
        if q.dim != ps[0].dim or not np.array_equal(q.times, t0):
            return t0, None, ps
    return t0, np.stack([q.values for q in ps]), ps


def _batch_features(times, values, depth):
    B, n, d = values.shape
    inc = np.empty((B, n - 1, d + 1))
    inc[:, :, 0] = np.diff(times)[None, :]
    inc[:, :, 1:] = values[:, 1:] - values[:, :-1]
    return _kernels.sig_trajectory_batch(inc, depth)


def _batch_payoff(payoff, times, values):
    s = values[:, :, 0]
    disc = np.exp(-payoff.rate * times)[None, :]
    if payoff.kind == "american_call":
        return disc * np.maximum(s - payoff.strike, 0.0)
    if payoff.kind == "american_put":
        return disc * np.maximum(payoff.strike - s, 0.0)
    raise ArgumentError("batch payoff needs call/put kind")


def _batch_values(feats, times, Y, lvec):
    theta = feats @ lvec
    sq = theta * theta
    cells = 0.5 * (sq[:, 1:] + sq[:, :-1]) * np.diff(times)[None, :]
    I = np.cumsum(cells, axis=1)
    expo = np.empty_like(Y[:, :-1])
    expo[:, 0] = 1.0
    expo[:, 1:] = np.exp(-I[:, :-1])
    return Y[:, 0] + (expo * (Y[:, 1:] - Y[:, :-1])).sum(axis=1)


def _chunked_policy_values(policy, payoff, model, seeds):
    """Per-path conditional values, batched per chunk when grids align."""
    l = policy.functional
    depth = l.degree()
    out = []
    chunk = 2048
    for lo in range(0, len(seeds), chunk):
        part = seeds[lo:lo + chunk]
        times, values, ps = _generate_batch(model, part)
        if values is None or payoff.kind == "custom":
            out.extend(_parallel_map(lambda q: conditional_value(policy, q, payoff), ps))
            continue
        feats = _batch_features(times, values, depth)
        lvec = ta.functional_to_flat(l, values.shape[2] + 1, depth)
        Y = _batch_payoff(payoff, times, values)
        out.extend(_batch_values(feats, times, Y, lvec).tolist())
    return np.asarray(out)


def mc_value(policy, payoff, model, cfg):
    """Mean conditional value over cfg.n_paths paths with spawned sub-seeds."""
    seeds = _path_seeds(cfg.seed, 0, cfg.n_paths)
    vals = _chunked_policy_values(policy, payoff, model, seeds)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return mean, se


def _basis_words(dim_price, depth):
    words = []
    for deg in range(depth + 1):
        words.extend(ta.all_words(dim_price + 1, deg))
    return words


def _project_budget(x, word_degs, K):
    nz = np.abs(x) > 0.0
    if not nz.any():
        return x
    deg = int(word_degs[nz].max())
    l1 = float(np.abs(x).sum())
    if l1 + deg > K:
        x = x * ((K - deg) / l1)
    return x


def _functional_from_vector(words, x):
    return ta.LinearFunctional({w: c for w, c in zip(words, x) if c != 0.0})


def optimize_policy(payoff, model, cfg):
    """Direct search over policy coefficients with common random numbers.

    The basis is every word up to degree cfg.truncation; candidate vectors
    are projected onto the budget |l| + deg(l) <= cfg.k_budget.  Multi-start
    Nelder-Mead maximizes the in-sample Monte Carlo value on one fixed path
    set; the winner is re-evaluated on a fresh out-of-sample set.
    """
    probe = model(np.random.SeedSequence(entropy=int(cfg.seed), spawn_key=(9, 0)))
    d = probe.dim
    words = _basis_words(d, cfg.truncation)
    word_degs = np.array([len(w) for w in words])
    depth = cfg.truncation

    seeds = _path_seeds(cfg.seed, 0, cfg.n_paths)
    times, values, _ = _generate_batch(model, seeds)
    if values is None:
        raise ArgumentError("optimize_policy needs a common-grid model")
    feats = _batch_features(times, values, depth).astype(np.float32)
    Y = _batch_payoff(payoff, times, values).astype(np.float32)
    dtimes = times.astype(np.float32)

    trace = []
    feval_counter = [0]

    def in_sample_value(x):
        x = _project_budget(np.asarray(x, dtype=np.float64), word_degs, cfg.k_budget)
        v = float(_batch_values(feats, dtimes, Y, x.astype(np.float32)).mean())
        feval_counter[0] += 1
        trace.append((feval_counter[0], v))
        return v

    per_start = max(50, cfg.max_fevals // cfg.n_starts)
    starts = [np.zeros(len(words))]
    for i in range(cfg.n_starts - 1):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=int(cfg.seed), spawn_key=(7, i)))
        x = rng.normal(scale=0.25, size=len(words))
        starts.append(_project_budget(x, word_degs, cfg.k_budget))

    best_x, best_val, exhausted = starts[0], -math.inf, False
    for x0 in starts:
        res = minimize(
            lambda x: -in_sample_value(x),
            x0,
            method="Nelder-Mead",
            options={"maxfev": per_start, "xatol": 1e-3, "fatol": 1e-6, "adaptive": True},
        )
        if res.nfev >= per_start:
            exhausted = True
        val = -res.fun
        if val > best_val:
            best_val, best_x = val, np.asarray(res.x, dtype=np.float64)

    best_x = _project_budget(best_x, word_degs, cfg.k_budget)
    policy = StoppingPolicy(_functional_from_vector(words, best_x), cfg.truncation)

    n_out = cfg.out_of_sample or cfg.n_paths
    out_seeds = _path_seeds(cfg.seed, 1, n_out)
    out_vals = _chunked_policy_values(policy, payoff, model, out_seeds)
    out_mean = float(out_vals.mean())
    out_se = float(out_vals.std(ddof=1) / math.sqrt(len(out_vals)))
    return PolicySearchResult(
        policy=policy,
        value=out_mean,
        std_error=out_se,
        in_sample_value=best_val,
        budget_exhausted=exhausted,
        trace=trace,
    )


def price_american_option(strike=20.0, rate=0.0, model=None, cfg=None, kind="american_call"):
    """Optimize a signature stopping policy for a discounted option payoff."""
    if model is None or cfg is None:
        raise ArgumentError("model and cfg are required")
    if kind in ("call", "put"):
        kind = "american_" + kind
    payoff = PayoffSpec(kind=kind, strike=float(strike), rate=float(rate))
    result = optimize_policy(payoff, model, cfg)
    return result.value, result.policy, result
