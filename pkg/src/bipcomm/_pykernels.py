"""Numpy implementations of the kernels in ``_ckernels.pyx``.

Same signatures and return conventions; used when the extension is not
built or when ``BIPCOMM_PURE_PYTHON`` is set.
"""
import numpy as np
import scipy.sparse as sp


def _gather(indptr, rows):
    """Flat CSR positions of all entries in ``rows`` plus the owning row index."""
    starts = indptr[rows]
    lengths = indptr[rows + 1] - starts
    owner = np.repeat(np.arange(len(rows)), lengths)
    offsets = np.cumsum(lengths) - lengths
    flat = np.arange(lengths.sum(), dtype=np.int64) - np.repeat(offsets, lengths)
    return np.repeat(starts, lengths) + flat, owner


def csr_matmat(indptr, indices, data, X):
    n = len(indptr) - 1
    A = sp.csr_matrix((data, indices, indptr), shape=(n, X.shape[0]))
    return np.ascontiguousarray(A @ X)


def sweep_links(indptr, indices, weights, order, side):
    n = len(indptr) - 1
    m = len(order)
    pos = np.full(n, -1, dtype=np.int64)
    pos[order] = np.arange(m)
    flat, owner = _gather(indptr, order)
    q = pos[indices[flat]]
    earlier = (q >= 0) & (q < owner)
    owner, q, w = owner[earlier], q[earlier], weights[flat][earlier]
    same_side = side[q] == side[owner]
    same = np.bincount(owner[same_side], weights=w[same_side], minlength=m)
    opp = np.bincount(owner[~same_side], weights=w[~same_side], minlength=m)
    return same.astype(np.float64), opp.astype(np.float64)


def pair_weights(indptr, indices, weights, members, label):
    flat, owner = _gather(indptr, members)
    w = weights[flat]
    lu = label[members][owner]
    lv = label[indices[flat]]
    vol = float(w.sum())
    boundary = float(w[lv == 0].sum())
    inside = float(w[(lv != 0) & (lv == lu)].sum()) * 0.5
    cross = float(w[(lv != 0) & (lv != lu)].sum()) * 0.5
    return vol, cross, inside, boundary


def fwht(a):
    n = a.shape[0]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < n:
        v = a.reshape(-1, 2, h)
        x = v[:, 0, :].copy()
        v[:, 0, :] += v[:, 1, :]
        v[:, 1, :] = x - v[:, 1, :]
        h *= 2
