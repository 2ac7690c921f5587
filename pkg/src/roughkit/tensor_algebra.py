"""Truncated tensor algebra over R^d and the shuffle algebra on words.

Tensors are stored densely, one flat row-major array per level.  Words are
tuples of letters in 1..d; a linear functional is a finite formal combination
of words.
"""

import math
from functools import lru_cache

import numpy as np

from ._fmt import fmt_float
from .errors import ArgumentError


class TruncatedTensor:
    """Element of the tensor algebra truncated at a level N."""

    __slots__ = ("dim", "level", "coeffs")

    def __init__(self, dim, level, coeffs):
        if dim < 1 or level < 0:
            raise ArgumentError("need dim >= 1 and level >= 0")
        if len(coeffs) != level + 1:
            raise ArgumentError("expected %d levels" % (level + 1))
        self.dim = int(dim)
        self.level = int(level)
        self.coeffs = []
        for k, c in enumerate(coeffs):
            c = np.ascontiguousarray(c, dtype=np.float64).reshape(-1)
            if c.shape[0] != dim**k:
                raise ArgumentError("level %d must have %d entries" % (k, dim**k))
            self.coeffs.append(c)

    def copy(self):
        return TruncatedTensor(self.dim, self.level, [c.copy() for c in self.coeffs])

    def scalar(self):
        return float(self.coeffs[0][0])

    def __repr__(self):
        return "TruncatedTensor(dim=%d, level=%d)" % (self.dim, self.level)


def unit_tensor(dim, level):
    t = zero_tensor(dim, level)
    t.coeffs[0][0] = 1.0
    return t


def zero_tensor(dim, level):
    return TruncatedTensor(dim, level, [np.zeros(dim**k) for k in range(level + 1)])


def tensor_from_flat(flat, dim, level):
    """Split a flat concatenated-levels vector into a TruncatedTensor."""
    flat = np.asarray(flat, dtype=np.float64)
    coeffs, pos = [], 0
    for k in range(level + 1):
        coeffs.append(flat[pos:pos + dim**k])
        pos += dim**k
    if pos != flat.shape[0]:
        raise ArgumentError("flat vector has wrong length")
    return TruncatedTensor(dim, level, coeffs)


def tensor_to_flat(a):
    return np.concatenate(a.coeffs)


def tensor_add(a, b):
    _check_compat(a, b)
    n = min(a.level, b.level)
    return TruncatedTensor(a.dim, n, [a.coeffs[k] + b.coeffs[k] for k in range(n + 1)])


def tensor_scale(a, c):
    return TruncatedTensor(a.dim, a.level, [c * x for x in a.coeffs])


def _check_compat(a, b):
    if a.dim != b.dim:
        raise ArgumentError("tensor dims differ: %d vs %d" % (a.dim, b.dim))


def tensor_mul(a, b):
    """Truncated tensor product; output level is min(a.level, b.level)."""
    _check_compat(a, b)
    n = min(a.level, b.level)
    d = a.dim
    out = []
    for lvl in range(n + 1):
        acc = np.zeros(d**lvl)
        for k in range(lvl + 1):
            acc += np.multiply.outer(a.coeffs[k], b.coeffs[lvl - k]).reshape(-1)
        out.append(acc)
    return TruncatedTensor(d, n, out)


def tensor_inverse(a):
    """Multiplicative inverse; requires a nonzero scalar component."""
    a0 = a.scalar()
    if a0 == 0.0:
        raise ArgumentError("tensor has zero scalar part, not invertible")
    # geometric series in x = 1 - a/a0, evaluated Horner style
    x = tensor_scale(a, -1.0 / a0)
    x.coeffs[0][0] = 0.0
    acc = unit_tensor(a.dim, a.level)
    for _ in range(a.level):
        acc = tensor_mul(x, acc)
        acc.coeffs[0][0] += 1.0
    return tensor_scale(acc, 1.0 / a0)


def tensor_linf(a, max_level=None):
    """Largest |entry| over levels 0..max_level (default: all)."""
    n = a.level if max_level is None else min(max_level, a.level)
    return max(float(np.max(np.abs(a.coeffs[k]))) for k in range(n + 1))


def word_index(word, dim):
    """Row-major position of a word inside its level block."""
    idx = 0
    for letter in word:
        if not (1 <= letter <= dim):
            raise ArgumentError("letter %r outside alphabet 1..%d" % (letter, dim))
        idx = idx * dim + (letter - 1)
    return idx


def all_words(dim, degree):
    """All words of exactly the given degree, in row-major order."""
    if degree == 0:
        return [()]
    shorter = all_words(dim, degree - 1)
    return [w + (letter,) for w in shorter for letter in range(1, dim + 1)]


@lru_cache(maxsize=None)
def shuffle(w, v):
    """Shuffle product of two words as a dict word -> integer coefficient."""
    if not w:
        return {tuple(v): 1}
    if not v:
        return {tuple(w): 1}
    out = {}
    for u, c in shuffle(w[:-1], v).items():
        key = u + (w[-1],)
        out[key] = out.get(key, 0) + c
    for u, c in shuffle(w, v[:-1]).items():
        key = u + (v[-1],)
        out[key] = out.get(key, 0) + c
    return out


class LinearFunctional:
    """Finite formal combination of words, the dual pairing side."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for w, c in terms.items():
                w = tuple(int(x) for x in w)
                if any(x < 1 for x in w):
                    raise ArgumentError("letters must be >= 1")
                c = float(c)
                if c != 0.0:
                    self.terms[w] = self.terms.get(w, 0.0) + c

    def degree(self):
        return max((len(w) for w in self.terms), default=0)

    def l1_norm(self):
        return sum(abs(c) for c in self.terms.values())

    def coefficient(self, word):
        return self.terms.get(tuple(word), 0.0)

    def __add__(self, other):
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, 0.0) + c
        return LinearFunctional(out)

    def __rmul__(self, c):
        return LinearFunctional({w: c * x for w, x in self.terms.items()})

    def __neg__(self):
        return (-1.0) * self

    def __sub__(self, other):
        return self + (-other)

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return "LinearFunctional(%s)" % (to_text(self) if len(self.terms) <= 8 else "%d terms" % len(self.terms))


def from_word(word, coeff=1.0):
    return LinearFunctional({tuple(word): coeff})


def append_letter(l, letter):
    """Right-append a letter to every word of l."""
    return LinearFunctional({w + (int(letter),): c for w, c in l.terms.items()})


def shuffle_functional(l1, l2, max_degree=None):
    """Bilinear extension of the word shuffle, optionally degree-truncated."""
    out = {}
    for w, cw in l1.terms.items():
        for v, cv in l2.terms.items():
            if max_degree is not None and len(w) + len(v) > max_degree:
                continue
            c = cw * cv
            for u, m in shuffle(w, v).items():
                out[u] = out.get(u, 0.0) + c * m
    return LinearFunctional(out)


def exp_shuffle(l, N):
    """Shuffle exponential truncated at word degree N.

    The empty-word component exponentiates to a scalar factor; the rest is
    summed as shuffle powers, which is exact at degree <= N because shuffle
    adds degrees.
    """
    if N < 0:
        raise ArgumentError("need N >= 0")
    a0 = l.coefficient(())
    tail = LinearFunctional({w: c for w, c in l.terms.items() if len(w) > 0})
    result = LinearFunctional({(): 1.0})
    power = LinearFunctional({(): 1.0})
    for r in range(1, N + 1):
        power = shuffle_functional(power, tail, max_degree=N)
        if not power.terms:
            break
        result = result + (1.0 / math.factorial(r)) * power
    return math.exp(a0) * result


def pair(l, a):
    """Dual pairing <l, a>; every word degree must be <= a.level."""
    total = 0.0
    for w, c in sorted(l.terms.items(), key=lambda kv: (len(kv[0]), kv[0])):
        if len(w) > a.level:
            raise ArgumentError("word degree %d exceeds tensor level %d" % (len(w), a.level))
        total += c * float(a.coeffs[len(w)][word_index(w, a.dim)])
    return total


def functional_to_flat(l, dim, depth):
    """Scatter coefficients into the flat levels-0..depth layout."""
    if l.degree() > depth:
        raise ArgumentError("functional degree %d exceeds depth %d" % (l.degree(), depth))
    offsets = [0]
    for k in range(depth + 1):
        offsets.append(offsets[-1] + dim**k)
    flat = np.zeros(offsets[-1])
    for w, c in l.terms.items():
        flat[offsets[len(w)] + word_index(w, dim)] = c
    return flat


def to_text(l):
    """Canonical text form, e.g. "3*12 + -1*e"; letters must be single digits."""
    if not l.terms:
        return "0"
    parts = []
    for w, c in sorted(l.terms.items(), key=lambda kv: (len(kv[0]), kv[0])):
        if any(x > 9 for x in w):
            raise ArgumentError("text form only supports letters 1..9")
        word_s = "e" if not w else "".join(str(x) for x in w)
        parts.append("%s*%s" % (fmt_float(c), word_s))
    return " + ".join(parts)


def from_text(s):
    """Parse the to_text form."""
    s = s.strip()
    if not s or s == "0":
        return LinearFunctional()
    terms = {}
    for part in s.split("+"):
        part = part.strip()
        if not part:
            raise ArgumentError("empty term in functional text")
        if "*" not in part:
            raise ArgumentError("term %r lacks coeff*word form" % part)
        coeff_s, word_s = part.split("*", 1)
        try:
            c = float(coeff_s.strip())
        except ValueError:
            raise ArgumentError("bad coefficient %r" % coeff_s) from None
        word_s = word_s.strip()
        if word_s == "e":
            w = ()
        elif word_s.isdigit() and "0" not in word_s:
            w = tuple(int(ch) for ch in word_s)
        else:
            raise ArgumentError("bad word %r" % word_s)
        terms[w] = terms.get(w, 0.0) + c
    return LinearFunctional(terms)
