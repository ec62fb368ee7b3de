"""Deterministic numeric text output.

All numeric output is printed with 9 significant digits, which round-trips
f32 exactly and keeps golden files stable.  The formatter is idempotent:
format(parse(format(x))) == format(x), so rewriting a parsed file is
byte-identical.
"""

import math

from .errors import ValidationError


def format_g9(x: float) -> str:
    """Decimal with 9 significant digits; rejects NaN/Inf."""
    if not math.isfinite(x):
        raise ValidationError(f"cannot format non-finite value {x!r}")
    return f"{x:.9g}"


def _render(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        import json

        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_g9(obj))
    elif isinstance(obj, dict):
        out.append("{")
        first = True
        for k, v in obj.items():
            if not isinstance(k, str):
                raise ValidationError(f"JSON object keys must be strings, got {k!r}")
            if not first:
                out.append(",")
            first = False
            _render(k, out)
            out.append(":")
            _render(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _render(v, out)
        out.append("]")
    else:
        try:
            import numpy as np

            if isinstance(obj, np.integer):
                out.append(str(int(obj)))
                return
            if isinstance(obj, np.floating):
                out.append(format_g9(float(obj)))
                return
            if isinstance(obj, np.ndarray):
                _render(obj.tolist(), out)
                return
        except ImportError:
            pass
        raise ValidationError(f"cannot serialize {type(obj)} to JSON")


def json9_dumps(obj) -> str:
    """Compact JSON with floats at 9 significant digits; key order preserved."""
    out: list = []
    _render(obj, out)
    return "".join(out)
