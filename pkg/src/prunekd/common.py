"""Small shared helpers: errors, rounding, hashing, float round-tripping."""

import hashlib

import numpy as np

__all__ = ["InputError", "round_half_up", "fmt_float", "sha256_bytes", "array_digest"]


class InputError(ValueError):
    """Structurally invalid input to a library operation."""


def round_half_up(x):
    """round(x) with halves rounded up, for reproducible subset sizes."""
    return int(np.floor(x + 0.5))


def fmt_float(x):
    """Shortest decimal string that round-trips the float exactly."""
    return repr(float(x))


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def array_digest(*arrays):
    """sha256 over dtype/shape/bytes of each array, order-sensitive."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()
