"""Canonical text encodings: 17-significant-digit floats and stable JSON.

Every persisted artifact goes through these helpers so that a given
config/seed pair produces byte-identical files.
"""

import json
import math

import numpy as np


def fmt_float(x):
    """Shortest 17-significant-digit decimal; round-trips float64 exactly."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def parse_float(s):
    return float(s)


def _emit(obj, out):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        # strict JSON has no non-finite literals
        if math.isfinite(x):
            out.append(fmt_float(x))
        else:
            out.append(json.dumps(fmt_float(x)))
    elif isinstance(obj, dict):
        out.append("{")
        first = True
        for k, v in obj.items():
            if not first:
                out.append(",")
            first = False
            out.append(json.dumps(str(k)))
            out.append(":")
            _emit(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        first = True
        for v in obj:
            if not first:
                out.append(",")
            first = False
            _emit(v, out)
        out.append("]")
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), out)
    else:
        raise TypeError("cannot serialize %r" % type(obj))


def canonical_json(obj):
    """Serialize with insertion-order keys and fmt_float numbers."""
    out = []
    _emit(obj, out)
    return "".join(out)


def write_json(obj, path):
    with open(path, "w") as f:
        f.write(canonical_json(obj))
        f.write("\n")
