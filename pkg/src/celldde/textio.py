"""Number formatting and output-file headers shared by the writers."""
from __future__ import annotations

import hashlib
import math

__all__ = ["fmt17", "config_hash", "header_line"]


def fmt17(x: float) -> str:
    """17 significant digits, exponent without padding: ``2.3076923076923078e-1``.

    Seventeen digits guarantee that parsing the text returns the same double.
    """
    x = float(x)
    if not math.isfinite(x):
        return repr(x)
    mant, exp = f"{x:.16e}".split("e")
    return f"{mant}e{int(exp)}"


def config_hash(text: str) -> str:
    """Short SHA-256 digest of a canonical configuration text."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def header_line(version: str, chash: str) -> str:
    return f"# celldde {version} config={chash}\n"
