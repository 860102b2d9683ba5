"""Compiled inner loop for parsing run-length / universal-coded symbol streams."""

import numba
import numpy as np

TRUNCATED = -1
TOO_LONG = -2
RUN_OVERFLOW = -3

_MAX_ZEROS = 61


@numba.njit(cache=True)
def _read_code(bits, pos, delta):
    n = bits.size
    zeros = 0
    while pos < n and bits[pos] == 0:
        zeros += 1
        pos += 1
        if zeros > _MAX_ZEROS:
            return TOO_LONG, pos
    if pos + zeros + 1 > n:
        return TRUNCATED, pos
    v = 0
    for k in range(zeros + 1):
        v = (v << 1) | bits[pos + k]
    pos += zeros + 1
    if delta:
        nb = v - 1
        if nb > _MAX_ZEROS:
            return TOO_LONG, pos
        if pos + nb > n:
            return TRUNCATED, pos
        w = 1
        for k in range(nb):
            w = (w << 1) | bits[pos + k]
        pos += nb
        v = w
    return v, pos


@numba.njit(cache=True)
def decode_runs(bits, d, delta):
    """Parse ``d`` symbols. Returns (symbols, bit position, status, error offset)."""
    out = np.zeros(d, dtype=np.int64)
    n = bits.size
    pos = 0
    i = 0
    while i < d:
        start = pos
        run, pos = _read_code(bits, pos, delta)
        if run < 0:
            return out, pos, run, start
        i += run - 1
        if i > d:
            return out, pos, RUN_OVERFLOW, start
        if i == d:
            break
        if pos >= n:
            return out, pos, TRUNCATED, pos
        sign = bits[pos]
        pos += 1
        start = pos
        mag, pos = _read_code(bits, pos, delta)
        if mag < 0:
            return out, pos, mag, start
        out[i] = -mag if sign else mag
        i += 1
    return out, pos, 0, pos
