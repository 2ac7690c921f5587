"""Sampled paths on [0, T] and their variation functionals.

A path is a finite sequence of samples interpreted piecewise-linearly.  All
variation quantities are taken over sub-partitions of the sample grid, where
they are attained exactly for piecewise-linear paths.
"""

import csv
import io

import numpy as np

from . import _kernels
from ._fmt import fmt_float
from .errors import ArgumentError, DomainError


class SampledPath:
    """Immutable path sample: strictly increasing times from 0, values (n, d)."""

    __slots__ = ("times", "values")

    def __init__(self, times, values):
        times = np.ascontiguousarray(times, dtype=np.float64)
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or values.ndim != 2:
            raise ArgumentError("times must be 1-d and values (n, d)")
        if times.shape[0] != values.shape[0]:
            raise ArgumentError("times and values length mismatch")
        if times.shape[0] < 1:
            raise ArgumentError("need at least one sample")
        if times[0] != 0.0:
            raise ArgumentError("times must start at 0")
        if times.shape[0] > 1 and np.any(np.diff(times) <= 0.0):
            raise ArgumentError("times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ArgumentError("non-finite sample data")
        times.flags.writeable = False
        values.flags.writeable = False
        self.times = times
        self.values = values

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def n_samples(self):
        return self.times.shape[0]

    @property
    def T(self):
        return float(self.times[-1])

    def value_at(self, t):
        """Piecewise-linear evaluation at t in [0, T]."""
        t = float(t)
        if t < 0.0 or t > self.T:
            raise DomainError("time %g outside [0, %g]" % (t, self.T))
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        if k >= self.n_samples - 1:
            return self.values[-1].copy()
        t0, t1 = self.times[k], self.times[k + 1]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * self.values[k] + w * self.values[k + 1]

    def grid_index(self, t, tol=1e-12):
        """Index of t in the sample grid; ArgumentError if t is not a node."""
        t = float(t)
        k = int(np.searchsorted(self.times, t))
        for j in (k - 1, k, k + 1):
            if 0 <= j < self.n_samples and abs(self.times[j] - t) <= tol * max(1.0, self.T):
                return j
        raise ArgumentError("time %g is not a grid node" % t)

    def __repr__(self):
        return "SampledPath(n=%d, dim=%d, T=%s)" % (self.n_samples, self.dim, fmt_float(self.T))


class Partition:
    """Validated index partition 0 = i_0 < i_1 < ... < i_k = n-1 of a grid."""

    __slots__ = ("indices",)

    def __init__(self, indices, n_samples):
        idx = np.asarray(indices, dtype=np.intp)
        if idx.ndim != 1 or idx.shape[0] < 2:
            raise ArgumentError("partition needs at least two indices")
        if idx[0] != 0 or idx[-1] != n_samples - 1 or np.any(np.diff(idx) <= 0):
            raise ArgumentError("partition indices must run strictly from 0 to n-1")
        idx.flags.writeable = False
        self.indices = idx


def uniform_times(T, n_segments):
    """Grid 0, T/n, ..., T."""
    if n_segments < 1 or T <= 0:
        raise ArgumentError("need n_segments >= 1 and T > 0")
    return np.linspace(0.0, float(T), n_segments + 1)


def constant_path(times, value):
    value = np.atleast_1d(np.asarray(value, dtype=np.float64))
    return SampledPath(times, np.tile(value, (len(times), 1)))


def increment(path, s, t):
    """X_t - X_s with piecewise-linear evaluation; requires 0 <= s <= t <= T."""
    if not (0.0 <= s <= t <= path.T):
        raise DomainError("need 0 <= s <= t <= T")
    return path.value_at(t) - path.value_at(s)


def resample(path, new_times):
    """Piecewise-linear resampling onto a new grid inside [0, T]."""
    new_times = np.asarray(new_times, dtype=np.float64)
    vals = np.stack([path.value_at(t) for t in new_times])
    return SampledPath(new_times, vals)


def reverse_path(path):
    """Run the path backwards in time, re-anchored to start at 0."""
    new_times = path.T - path.times[::-1]
    new_times[0] = 0.0
    return SampledPath(new_times, path.values[::-1])


def union_times(*paths_or_arrays):
    """Sorted union of sample grids (exact float union, no tolerance merge)."""
    arrs = []
    for p in paths_or_arrays:
        arrs.append(p.times if isinstance(p, SampledPath) else np.asarray(p, dtype=np.float64))
    return np.unique(np.concatenate(arrs))


def _pairwise_power(values, p):
    """Matrix |X_j - X_i|^p (Euclidean norm); shared by the DP and oracles."""
    diff = values[None, :, :] - values[:, None, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    return dist**p


def variation_sum(path, partition, p):
    """Sum over partition cells of |increment|^p, accumulated left to right."""
    if not isinstance(partition, Partition):
        partition = Partition(partition, path.n_samples)
    idx = partition.indices
    vals = path.values[idx]
    diff = vals[1:] - vals[:-1]
    terms = np.sqrt((diff * diff).sum(axis=-1)) ** p
    total = 0.0
    for term in terms:
        total += term
    return total


def p_variation(path, p):
    """p-variation over sub-partitions of the sample grid, p >= 1."""
    if p < 1.0:
        raise ArgumentError("need p >= 1")
    if path.n_samples < 2:
        return 0.0
    powers = _pairwise_power(path.values, p)
    cum = _kernels.pvar_cumulative(powers)
    return float(cum[-1]) ** (1.0 / p)


def running_p_variation(path, p):
    """p-variation of each prefix path: array with entry j for [0, t_j]."""
    if p < 1.0:
        raise ArgumentError("need p >= 1")
    powers = _pairwise_power(path.values, p)
    return _kernels.pvar_cumulative(powers) ** (1.0 / p)


def holder_seminorm(path, alpha):
    """sup over grid pairs of |X_{s,t}| / (t-s)^alpha, alpha in (0, 1]."""
    if not (0.0 < alpha <= 1.0):
        raise ArgumentError("need alpha in (0, 1]")
    if path.n_samples < 2:
        return 0.0
    dist = _pairwise_power(path.values, 1.0)
    dt = path.times[None, :] - path.times[:, None]
    iu = np.triu_indices(path.n_samples, k=1)
    return float(np.max(dist[iu] / dt[iu] ** alpha))


def path_length_1var(path, t):
    """Polygonal arc length of the path restricted to [0, t]."""
    if not (0.0 <= t <= path.T):
        raise DomainError("time outside [0, T]")
    seg = path.values[1:] - path.values[:-1]
    seg_len = np.sqrt((seg * seg).sum(axis=-1))
    k = int(np.searchsorted(path.times, t, side="right")) - 1
    total = float(seg_len[:k].sum())
    if k < path.n_samples - 1 and t > path.times[k]:
        frac = (t - path.times[k]) / (path.times[k + 1] - path.times[k])
        total += frac * float(seg_len[k])
    return total


def write_csv(path, fileobj):
    """Header t,x1,...,xd; one row per sample, 17 significant digits."""
    close = False
    if isinstance(fileobj, str):
        fileobj = open(fileobj, "w", newline="")
        close = True
    try:
        fileobj.write(",".join(["t"] + ["x%d" % (i + 1) for i in range(path.dim)]) + "\n")
        for t, row in zip(path.times, path.values):
            fileobj.write(",".join([fmt_float(t)] + [fmt_float(v) for v in row]) + "\n")
    finally:
        if close:
            fileobj.close()


def read_csv(fileobj):
    """Inverse of write_csv; raises ArgumentError with the offending line."""
    close = False
    if isinstance(fileobj, str):
        try:
            fileobj = open(fileobj, "r", newline="")
        except OSError as e:
            raise ArgumentError("cannot read path file: %s" % e) from None
        close = True
    try:
        reader = csv.reader(fileobj)
        try:
            header = next(reader)
        except StopIteration:
            raise ArgumentError("empty CSV") from None
        if len(header) < 2 or header[0].strip() != "t":
            raise ArgumentError("line 1: header must be t,x1,...,xd")
        dim = len(header) - 1
        times, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise ArgumentError("line %d: expected %d fields, got %d" % (lineno, dim + 1, len(row)))
            try:
                nums = [float(x) for x in row]
            except ValueError:
                raise ArgumentError("line %d: non-numeric field" % lineno) from None
            times.append(nums[0])
            values.append(nums[1:])
        try:
            return SampledPath(np.array(times), np.array(values))
        except ArgumentError as e:
            raise ArgumentError("invalid path data: %s" % e) from None
    finally:
        if close:
            fileobj.close()


def path_to_json(path):
    """JSON-ready array of records [{"t": ..., "x": [...]}, ...]."""
    return [{"t": float(t), "x": list(map(float, row))} for t, row in zip(path.times, path.values)]


def path_from_json(records):
    try:
        times = [r["t"] for r in records]
        values = [r["x"] for r in records]
    except (TypeError, KeyError) as e:
        raise ArgumentError("malformed path records: %s" % e) from None
    return SampledPath(np.array(times, dtype=np.float64), np.array(values, dtype=np.float64))


def csv_round_trip_equal(path):
    """True when write/read through CSV reproduces the samples bit-exactly."""
    buf = io.StringIO()
    write_csv(path, buf)
    buf.seek(0)
    back = read_csv(buf)
    return np.array_equal(path.times, back.times) and np.array_equal(path.values, back.values)
