"""NumPy reference implementations of the hot kernels.

The compiled module in ``_native.pyx`` mirrors these routines operation for
operation (same accumulation order), so either backend produces bit-identical
results.
"""

import numpy as np


def level_offsets(dim, depth):
    """Start index of each tensor level in the flat layout, plus total size."""
    off = [0]
    for k in range(depth + 1):
        off.append(off[-1] + dim**k)
    return off


def pvar_cumulative(dist_pow):
    """Running maxima of partition sums.

    dist_pow[i, j] holds |X_{t_i, t_j}|^p for i < j.  Returns cum with
    cum[j] = max over partitions of {0..j} of the sum of entries, so
    cum[-1] is the p-variation raised to the p.
    """
    n = dist_pow.shape[0]
    cum = np.zeros(n)
    for j in range(1, n):
        cum[j] = np.max(cum[:j] + dist_pow[:j, j])
    return cum


def sig_trajectory_batch(increments, depth):
    """Prefix signatures of piecewise-linear paths, batched.

    increments: (B, n, d) segment increments.  Returns (B, n+1, D) flat
    tensors over levels 0..depth, D = 1 + d + ... + d^depth.  Row i is the
    signature of the first i segments.
    """
    B, n, d = increments.shape
    off = level_offsets(d, depth)
    D = off[depth + 1]
    out = np.empty((B, n + 1, D))
    out[:, 0, 0] = 1.0
    out[:, 0, 1:] = 0.0
    S = [np.ones((B, 1))] + [np.zeros((B, d**k)) for k in range(1, depth + 1)]
    for i in range(n):
        dx = increments[:, i, :]
        E = [np.ones((B, 1))]
        for k in range(1, depth + 1):
            E.append((E[k - 1][:, :, None] * dx[:, None, :] / k).reshape(B, -1))
        # top-down so lower levels read pre-step values
        for lvl in range(depth, 0, -1):
            acc = S[lvl] + E[lvl]
            for k in range(1, lvl):
                acc = acc + (S[k][:, :, None] * E[lvl - k][:, None, :]).reshape(B, -1)
            S[lvl] = acc
        for lvl in range(1, depth + 1):
            out[:, i + 1, off[lvl]:off[lvl + 1]] = S[lvl]
        out[:, i + 1, 0] = 1.0
    return out


def sig_trajectory(increments, depth):
    """Single-path version of sig_trajectory_batch: (n, d) -> (n+1, D)."""
    return sig_trajectory_batch(increments[None, :, :], depth)[0]


def chen_max_residual(z1, z2):
    """Largest entry-wise Chen defect over all grid triples s < r < t.

    z1[i], z2[i] are the level-1/level-2 developments over [t_0, t_i].  The
    interval value on [s, t] is A = z2[t] - z2[s] - z1[s] (x) (z1[t] - z1[s]);
    the defect is A(s,t) - A(s,r) - A(r,t) - z(s,r) (x) z(r,t).
    """
    n = z1.shape[0]
    best = 0.0
    for r in range(1, n - 1):
        zs = z1[:r]
        zt = z1[r + 1:]
        zsr = z1[r] - zs
        zrt = zt - z1[r]
        a_sr = z2[r] - z2[:r] - zs[:, :, None] * zsr[:, None, :]
        a_rt = z2[r + 1:] - z2[r] - z1[r][None, :, None] * zrt[:, None, :]
        a_st = (
            z2[r + 1:][None, :]
            - z2[:r][:, None]
            - zs[:, None, :, None] * (zt[None, :] - zs[:, None])[:, :, None, :]
        )
        res = a_st - a_sr[:, None] - a_rt[None, :] - zsr[:, None, :, None] * zrt[None, :, None, :]
        m = np.abs(res).max()
        if m > best:
            best = m
    return float(best)
