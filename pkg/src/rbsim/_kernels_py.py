"""Pure-Python/numpy versions of the compiled kernels."""

import numpy as np


def first_exceedance(rows, bounds):
    """Index of the first row whose maximum exceeds its bound, or -1."""
    rows = np.asarray(rows, dtype=float)
    if rows.shape[0] == 0:
        return -1
    hit = np.flatnonzero(rows.max(axis=1) > np.asarray(bounds, dtype=float))
    return int(hit[0]) if hit.size else -1


def max_plus_update(acc, rows, shifts):
    """In place: acc[i] = max(acc[i], max_k rows[k, i] + shifts[k])."""
    rows = np.asarray(rows, dtype=float)
    if rows.shape[0]:
        np.maximum(acc, (rows + np.asarray(shifts, dtype=float)[:, None]).max(axis=0), out=acc)
    return acc


def midpoint_refine(vals, offsets):
    """One level of midpoint displacement for many rows.

    ``vals`` has shape (r, p+1) and ``offsets`` shape (r, p); the result has
    shape (r, 2p+1) with the old values at even positions and the averages
    of neighbours plus the offsets at odd positions.
    """
    vals = np.asarray(vals, dtype=float)
    out = np.empty((vals.shape[0], 2 * vals.shape[1] - 1))
    out[:, 0::2] = vals
    out[:, 1::2] = 0.5 * (vals[:, :-1] + vals[:, 1:]) + offsets
    return out
