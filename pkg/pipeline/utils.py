"""Shared helpers for stable numeric formatting and content hashing."""

import hashlib
import json
import math

from solver_config import DEFAULT_SETTINGS


def round_significant(value: float, digits: int = DEFAULT_SETTINGS.significant_digits) -> float:
    """Round a real to ``digits`` significant digits.

    Args:
        value: Real number to format.
        digits: Number of significant digits kept.
    Goal:
        Keep reruns byte-identical in text outputs regardless of float noise.
    Returns:
        float rounded through its ``%g`` representation.
    Raises:
        None
    """
    if not math.isfinite(value):
        return value
    return float(format(value, f".{digits}g"))


def rounded_payload(payload, digits: int = DEFAULT_SETTINGS.significant_digits):
    """Walk dicts and lists, rounding every float and leaving other values alone."""
    if isinstance(payload, bool):
        return payload
    if isinstance(payload, float):
        return round_significant(payload, digits)
    if isinstance(payload, dict):
        return {str(key): rounded_payload(value, digits) for key, value in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [rounded_payload(value, digits) for value in payload]
    return payload


def dump_json(payload, digits: int = DEFAULT_SETTINGS.significant_digits) -> str:
    """Serialize with sorted keys, fixed indentation and a trailing newline."""
    return json.dumps(rounded_payload(payload, digits), sort_keys=True, indent=2) + "\n"


def stable_digest(payload) -> str:
    """SHA-256 of the canonical compact JSON form of ``payload``."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
