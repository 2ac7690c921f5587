"""Path signatures of piecewise-linear paths and shuffle-algebra identities.

Signatures are exact: each linear segment contributes a tensor exponential
and segments combine multiplicatively.  Functionals on time-augmented paths
use letter 1 for the time coordinate and 2..d+1 for space.
"""

import math

import numpy as np

from . import _kernels, paths, tensor_algebra as ta
from .errors import ArgumentError


class Signature(ta.TruncatedTensor):
    """Truncated signature together with the interval it was computed on."""

    __slots__ = ("interval",)

    def __init__(self, dim, level, coeffs, interval):
        super().__init__(dim, level, coeffs)
        self.interval = (float(interval[0]), float(interval[1]))

    def __repr__(self):
        return "Signature(dim=%d, level=%d, interval=(%g, %g))" % (
            self.dim, self.level, self.interval[0], self.interval[1])


def signature(path, N, s=None, t=None):
    """Signature of the piecewise-linear path over [s, t], truncated at N."""
    if N < 0:
        raise ArgumentError("need N >= 0")
    s = 0.0 if s is None else float(s)
    t = path.T if t is None else float(t)
    if not (0.0 <= s <= t <= path.T):
        raise ArgumentError("need 0 <= s <= t <= T")
    inside = path.times[(path.times > s) & (path.times < t)]
    nodes = np.concatenate([[s], inside, [t]])
    vals = np.stack([path.value_at(u) for u in nodes])
    inc = vals[1:] - vals[:-1]
    flat = _kernels.sig_trajectory(inc, N)[-1]
    tensor = ta.tensor_from_flat(flat, path.dim, N)
    return Signature(path.dim, N, tensor.coeffs, (s, t))


def signature_trajectory(path, N):
    """Flat prefix signatures at every grid node: array (n, D)."""
    inc = path.values[1:] - path.values[:-1]
    return _kernels.sig_trajectory(inc, N)


def chen_concat(s1, s2):
    """Combine signatures over adjacent intervals multiplicatively."""
    if s1.interval[1] != s2.interval[0]:
        raise ArgumentError("intervals %r and %r are not adjacent" % (s1.interval, s2.interval))
    prod = ta.tensor_mul(s1, s2)
    return Signature(prod.dim, prod.level, prod.coeffs, (s1.interval[0], s2.interval[1]))


def signature_reversal(sig):
    """Signature of the time-reversed path: the group inverse."""
    inv = ta.tensor_inverse(sig)
    if isinstance(sig, Signature):
        return Signature(inv.dim, inv.level, inv.coeffs, sig.interval)
    return inv


def time_augment(path):
    """Prepend the running time as coordinate 1; space moves to letters 2..d+1."""
    return paths.SampledPath(path.times, np.hstack([path.times[:, None], path.values]))


def _require_time_augmented(path):
    if path.dim < 2 or not np.allclose(path.values[:, 0], path.times, atol=1e-12, rtol=0.0):
        raise ArgumentError("path must be time-augmented (first coordinate equals time)")


def is_group_like(g, n_trials=200, tol=1e-9, seed=0):
    """Sampled check of <w,g><v,g> = <w shuffle v, g> for random word pairs."""
    rng = np.random.default_rng(seed)
    N, d = g.level, g.dim
    worst = 0.0
    for _ in range(int(n_trials)):
        da = int(rng.integers(0, N + 1))
        db = int(rng.integers(0, N - da + 1))
        w = tuple(int(x) for x in rng.integers(1, d + 1, size=da))
        v = tuple(int(x) for x in rng.integers(1, d + 1, size=db))
        lhs = ta.pair(ta.from_word(w), g) * ta.pair(ta.from_word(v), g)
        rhs = ta.pair(ta.shuffle_functional(ta.from_word(w), ta.from_word(v)), g)
        scale = max(1.0, abs(lhs), abs(rhs))
        worst = max(worst, abs(lhs - rhs) / scale)
    return {"ok": worst <= tol, "max_defect": worst, "n_trials": int(n_trials)}


def pvar_threshold_time(path, k, p=2.0):
    """First grid time where the running p-variation reaches k, else T."""
    if k <= 0:
        raise ArgumentError("need k > 0")
    running = paths.running_p_variation(path, p)
    hits = np.nonzero(running >= k)[0]
    return float(path.times[hits[0]]) if len(hits) else path.T


def quadratic_shuffle_identity_check(l, path, t=None, N=None, refine=1):
    """Numerically verify int_0^t <l, sig>^2 ds = <(l sh l)1, sig_{0,t}>.

    path must be time-augmented.  The right side is exact at truncation
    2 deg(l) + 1; N (default that value) must be at least it.  The left side
    uses the trapezoid rule with each grid cell split into `refine` pieces.
    """
    _require_time_augmented(path)
    t = path.T if t is None else float(t)
    it = path.grid_index(t)
    if it == 0:
        raise ArgumentError("need t > 0")
    deg = l.degree()
    needed = 2 * deg + 1
    N = needed if N is None else int(N)
    if N < needed:
        raise ArgumentError("truncation %d below required %d" % (N, needed))
    if refine < 1:
        raise ArgumentError("refine must be >= 1")
    # refined grid over [0, t]
    base = path.times[:it + 1]
    pieces = [np.linspace(base[i], base[i + 1], refine + 1)[:-1] for i in range(it)]
    grid = np.concatenate(pieces + [[base[-1]]])
    vals = np.stack([path.value_at(u) for u in grid])
    inc = vals[1:] - vals[:-1]
    feats = _kernels.sig_trajectory(inc, deg)
    theta = feats @ ta.functional_to_flat(l, path.dim, deg)
    lhs = float(np.trapezoid(theta**2, grid))
    rhs_l = ta.append_letter(ta.shuffle_functional(l, l), 1)
    rhs = ta.pair(rhs_l, signature(path, N, 0.0, t))
    denom = max(abs(lhs), abs(rhs), 1e-300)
    return {"lhs": lhs, "rhs": rhs, "abs_err": abs(lhs - rhs), "rel_err": abs(lhs - rhs) / denom}


def exp_shuffle_truncation_error(l, g, N):
    """Defect of the truncated exponential shuffle against exp(<l, g>).

    Returns the observed defect, the factorial-type bound, and whether the
    smallness hypothesis on N held.  Norms: l1 on functionals, max-entry on
    tensor levels.
    """
    if N < 0 or g.level < N:
        raise ArgumentError("need 0 <= N <= g.level")
    if l.degree() > g.level:
        raise ArgumentError("deg(l) exceeds tensor level")
    exact = math.exp(ta.pair(l, g))
    approx = ta.pair(ta.exp_shuffle(l, N), g)
    defect = abs(exact - approx)
    q = l.degree()
    if q == 0:
        return {"defect": defect, "bound": 0.0, "hypothesis_ok": True, "exact": exact, "approx": approx}
    ell = l.l1_norm()
    a0 = l.coefficient(())
    g_levels = ta.tensor_linf(g, max_level=q)
    g_top = float(np.max(np.abs(g.coeffs[q])))
    hypothesis_ok = N > 2.0 * ell * q * g_top
    m = N // q + 1
    bound = 4.0 * math.exp(a0) * (ell * g_levels) ** m / math.factorial(m)
    return {
        "defect": defect,
        "bound": bound,
        "hypothesis_ok": bool(hypothesis_ok),
        "exact": exact,
        "approx": approx,
    }


def exp_shuffle_derivative_check(l, path, N):
    """Compare d/dt <exp-shuffle(l1), sig^{<=N}> with its product-rule form.

    path must be time-augmented.  The time derivative of a pairing with
    time-appended words is continuous, so interior central differences agree
    with the identity up to curvature terms.
    """
    _require_time_augmented(path)
    if path.n_samples < 3:
        raise ArgumentError("need at least three samples")
    d = path.dim
    deg_l = l.degree()
    if deg_l + 1 > N:
        raise ArgumentError("truncation N too small for l1")
    E = ta.exp_shuffle(ta.append_letter(l, 1), N)
    feats = signature_trajectory(path, N)
    F = feats @ ta.functional_to_flat(E, d, N)
    rhs = np.zeros(path.n_samples)
    for w, coeff in l.terms.items():
        cutoff = N - len(w) - 1
        if cutoff < 0:
            continue
        trunc = ta.LinearFunctional({u: c for u, c in E.terms.items() if len(u) <= cutoff})
        term = feats @ ta.functional_to_flat(ta.from_word(w, coeff), d, N)
        rhs += term * (feats @ ta.functional_to_flat(trunc, d, N))
    tt = path.times
    fd = (F[2:] - F[:-2]) / (tt[2:] - tt[:-2])
    err = np.abs(fd - rhs[1:-1])
    return {
        "max_abs_err": float(err.max()),
        "mesh": float(np.max(np.diff(tt))),
        "times": tt[1:-1],
        "derivative_fd": fd,
        "derivative_identity": rhs[1:-1],
    }
