"""Shared helpers for strict scenario-dictionary parsing.

Sections reject unknown keys so typos fail loudly instead of silently
keeping a default.  Uncertain quantities accept either a plain number
or a {nominal, half_range} table.
"""

from __future__ import annotations

from .lft import UncertainParam


def _num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"{where} must be a number")
    return float(v)


def _uq(v, name: str, where: str) -> UncertainParam:
    """Uncertain quantity: plain number or {nominal=..., half_range=...}."""
    if isinstance(v, dict):
        extra = set(v) - {"nominal", "half_range"}
        if extra:
            raise ValueError(f"{where}: unknown keys {sorted(extra)}")
        if "nominal" not in v:
            raise ValueError(f"{where}: missing 'nominal'")
        nom = _num(v["nominal"], f"{where}.nominal")
        half = _num(v.get("half_range", 0.0), f"{where}.half_range")
        if half < 0:
            raise ValueError(f"{where}: negative half_range")
        return UncertainParam(name, nom, half)
    return UncertainParam(name, _num(v, where), 0.0)


def _take(section: dict, keys, where: str) -> dict:
    extra = set(section) - set(keys)
    if extra:
        raise ValueError(f"{where}: unknown keys {sorted(extra)}")
    missing = set(keys) - set(section)
    if missing:
        raise ValueError(f"{where}: missing keys {sorted(missing)}")
    return section
