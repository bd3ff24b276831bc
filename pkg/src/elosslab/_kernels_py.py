"""Pure numpy implementations of the hot kernels.

Same signatures and results as the compiled ``_kernels`` module; used when
the extension is unavailable or ``ELOSSLAB_BACKEND=python``.

Coefficient scheme codes: 0 constant, 1 inverse distance, 2 inverse
squared distance, 3 exponential decay. ``param`` is the constant, the
distance floor, or the decay length respectively.
"""
from __future__ import annotations

import numpy as np

GROUND_TIE_TOL = 1e-9
_CHUNK_BITS = 16
_PAIR_BLOCK = 1 << 20


def _coeff(r, scheme, param):
    if scheme == 0:
        return np.full_like(r, param)
    if scheme == 1:
        return 1.0 / np.maximum(r, param)
    if scheme == 2:
        return 1.0 / np.maximum(r, param) ** 2
    if scheme == 3:
        return np.exp(-r / param)
    raise ValueError(f"unknown coefficient scheme {scheme}")


def _pair_terms(pred, target, ii, jj, scheme, param, eps):
    u = pred[:, ii, :] - pred[:, jj, :]
    v = target[:, ii, :] - target[:, jj, :]
    r = np.sqrt(np.sum(v * v, axis=-1))
    rhat = np.sqrt(np.sum(u * u, axis=-1) + eps * eps)
    k = _coeff(r, scheme, param)
    resid = r - rhat
    values = np.sum(k * resid * resid, axis=-1)
    # d/du of k (r - rhat)^2 = -2 k (r - rhat) u / rhat
    w = (-2.0 * k * resid / rhat)[..., None] * u
    return values, w


def _scatter(w, ii, jj, n):
    b, _, d = w.shape
    offset = (np.arange(b) * n)[:, None]
    ii_all = np.ravel(ii[None, :] + offset)
    jj_all = np.ravel(jj[None, :] + offset)
    grad = np.empty((b * n, d))
    for c in range(d):
        wc = np.ravel(w[:, :, c])
        grad[:, c] = (np.bincount(ii_all, weights=wc, minlength=b * n)
                      - np.bincount(jj_all, weights=wc, minlength=b * n))
    return grad.reshape(b, n, d)


def pair_energy(pred, target, scheme, param, eps):
    """Sum over i<j of k_ij (|t_i - t_j| - |p_i - p_j|_eps)^2 and its gradient.

    ``pred`` and ``target`` are ``(B, n, d)``; returns ``(values[B], grad)``.
    """
    b, n, _ = pred.shape
    values = np.zeros(b)
    grad = np.zeros(pred.shape)
    # blocks of rows keep the pair arrays bounded in memory
    rows_per_block = max(1, _PAIR_BLOCK // max(n, 1))
    for start in range(0, n - 1, rows_per_block):
        stop = min(n - 1, start + rows_per_block)
        ii, jj = _upper_pairs(n, start, stop)
        v, w = _pair_terms(pred, target, ii, jj, scheme, param, eps)
        values += v
        grad += _scatter(w, ii, jj, n)
    return values, grad


def _upper_pairs(n, start, stop):
    counts = n - 1 - np.arange(start, stop)
    ii = np.repeat(np.arange(start, stop), counts)
    offsets = np.cumsum(counts) - counts
    jj = np.arange(ii.size) - np.repeat(offsets, counts) + ii + 1
    return ii, jj


def edge_energy(pred, target, edges, scheme, param, eps):
    """As :func:`pair_energy` but summed over the rows of ``edges`` only."""
    n = pred.shape[1]
    edges = np.asarray(edges, dtype=np.int64)
    ii, jj = edges[:, 0], edges[:, 1]
    values, w = _pair_terms(pred, target, ii, jj, scheme, param, eps)
    return values, _scatter(w, ii, jj, n)


def _lattice_edges(rows, cols):
    ii, jj = [], []
    for r in range(rows):
        for c in range(cols - 1):
            ii.append(r * cols + c)
            jj.append(r * cols + c + 1)
    for r in range(rows - 1):
        for c in range(cols):
            ii.append(r * cols + c)
            jj.append((r + 1) * cols + c)
    return np.array(ii, dtype=np.int64), np.array(jj, dtype=np.int64)


def ising_ground_state(jh, jv):
    """Exhaustive minimum of ``-sum J s_i s_j`` on an open rows x cols lattice.

    ``jh`` is ``(rows, cols-1)`` and ``jv`` is ``(rows-1, cols)``; sites are
    numbered row-major.

    Site 0 is pinned to +1; the remaining sites are bits of an integer
    pattern ``b`` (bit k-1 set means site k is -1). Among configurations
    within ``GROUND_TIE_TOL`` of the minimum the smallest ``b`` wins.
    Returns ``(b, energy)``.
    """
    rows, cols = jh.shape[0], jh.shape[1] + 1
    n = rows * cols
    ii, jj = _lattice_edges(rows, cols)
    couplings = np.concatenate([np.ravel(jh), np.ravel(jv)])
    total = 1 << (n - 1)
    chunk = min(total, 1 << _CHUNK_BITS)
    shifts = np.arange(n - 1, dtype=np.int64)

    energies = np.empty(total)
    for start in range(0, total, chunk):
        b = np.arange(start, start + chunk, dtype=np.int64)
        bits = (b[:, None] >> shifts) & 1
        spins = np.ones((chunk, n), dtype=np.float64)
        spins[:, 1:] = 1.0 - 2.0 * bits
        prods = spins[:, ii] * spins[:, jj]
        energies[start:start + chunk] = -(prods @ couplings)
    best = energies.min()
    idx = int(np.flatnonzero(energies <= best + GROUND_TIE_TOL)[0])
    return idx, float(energies[idx])
