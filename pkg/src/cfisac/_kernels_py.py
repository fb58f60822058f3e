"""Pure-numpy implementations of the hot kernels (fallback backend)."""

import numpy as np


def segment_sum(values, segments, n_segments):
    """Row-wise sum of ``values`` (E, d) grouped by ``segments`` (E,)."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    out = np.zeros((n_segments, values.shape[1]))
    np.add.at(out, np.asarray(segments, dtype=np.int64), values)
    return out


def segment_max(values, segments, n_segments):
    """Per-segment maximum of ``values`` (E, H); empty segments give -inf."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    out = np.full((n_segments, values.shape[1]), -np.inf)
    np.maximum.at(out, np.asarray(segments, dtype=np.int64), values)
    return out


def repair_spacing(p, d0, p_min, p_max):
    """Min-spacing repair of a sorted, clipped position vector."""
    p = np.array(p, dtype=np.float64)
    n = p.size
    for i in range(1, n):
        if p[i] < p[i - 1] + d0:
            p[i] = p[i - 1] + d0
    if n and p[-1] > p_max:
        p[-1] = p_max
        for i in range(n - 2, -1, -1):
            if p[i] > p[i + 1] - d0:
                p[i] = p[i + 1] - d0
    return p


def pa_sample_moments(s, c):
    """Sample moments ``(E[c s^H], E[s s^H])`` over the columns of (N, n) arrays."""
    s = np.asarray(s, dtype=np.complex128)
    c = np.asarray(c, dtype=np.complex128)
    n = s.shape[1]
    return c @ s.conj().T / n, s @ s.conj().T / n
