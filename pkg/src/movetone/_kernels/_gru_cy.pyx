# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled GRU sequence scan: the time recurrence runs as C loops while the
batched input-side and weight-gradient matmuls stay on BLAS via numpy.

Cache layout and gate conventions match movetone._kernels.gru_numpy exactly.
"""

import numpy as np

from cython cimport floating
from libc.math cimport exp, tanh


def _scan_forward(floating[:, :, ::1] gx, floating[:, ::1] h0,
                  floating[:, ::1] wh, floating[::1] bh,
                  floating[:, :, ::1] states, floating[:, :, ::1] gr,
                  floating[:, :, ::1] gz, floating[:, :, ::1] cand,
                  floating[:, :, ::1] rec_n):
    cdef Py_ssize_t t_len = gx.shape[0]
    cdef Py_ssize_t batch = gx.shape[1]
    cdef Py_ssize_t hidden = wh.shape[1]
    cdef Py_ssize_t t, b, i, k
    cdef floating acc_r, acc_z, acc_n, rv, zv, nv, hp
    cdef floating[:, ::1] h = h0

    for t in range(t_len):
        for b in range(batch):
            for i in range(hidden):
                acc_r = bh[i]
                acc_z = bh[hidden + i]
                acc_n = bh[2 * hidden + i]
                for k in range(hidden):
                    hp = h[b, k]
                    acc_r += wh[i, k] * hp
                    acc_z += wh[hidden + i, k] * hp
                    acc_n += wh[2 * hidden + i, k] * hp
                rv = 1.0 / (1.0 + exp(-(gx[t, b, i] + acc_r)))
                zv = 1.0 / (1.0 + exp(-(gx[t, b, hidden + i] + acc_z)))
                nv = tanh(gx[t, b, 2 * hidden + i] + rv * acc_n)
                gr[t, b, i] = rv
                gz[t, b, i] = zv
                cand[t, b, i] = nv
                rec_n[t, b, i] = acc_n
                states[t, b, i] = (1.0 - zv) * nv + zv * h[b, i]
        h = states[t]


def _scan_backward(floating[:, :, ::1] dstates, floating[:, :, ::1] states,
                   floating[:, ::1] h0, floating[:, ::1] wh,
                   floating[:, :, ::1] gr, floating[:, :, ::1] gz,
                   floating[:, :, ::1] cand, floating[:, :, ::1] rec_n,
                   floating[:, :, ::1] dgx, floating[:, :, ::1] dgh,
                   floating[:, ::1] dh):
    cdef Py_ssize_t t_len = dstates.shape[0]
    cdef Py_ssize_t batch = dstates.shape[1]
    cdef Py_ssize_t hidden = dstates.shape[2]
    cdef Py_ssize_t t, b, i, k, row
    cdef floating dht, hp, rv, zv, nv, nhv, dz, dn, dan, dar, daz, acc

    for t in range(t_len - 1, -1, -1):
        for b in range(batch):
            for i in range(hidden):
                dht = dh[b, i] + dstates[t, b, i]
                hp = states[t - 1, b, i] if t > 0 else h0[b, i]
                rv = gr[t, b, i]
                zv = gz[t, b, i]
                nv = cand[t, b, i]
                nhv = rec_n[t, b, i]
                dz = dht * (hp - nv)
                dn = dht * (1.0 - zv)
                dan = dn * (1.0 - nv * nv)
                dar = dan * nhv * rv * (1.0 - rv)
                daz = dz * zv * (1.0 - zv)
                dgx[t, b, i] = dar
                dgx[t, b, hidden + i] = daz
                dgx[t, b, 2 * hidden + i] = dan
                dgh[t, b, i] = dar
                dgh[t, b, hidden + i] = daz
                dgh[t, b, 2 * hidden + i] = dan * rv
                dh[b, i] = dht * zv
            for k in range(hidden):
                acc = 0.0
                for row in range(3 * hidden):
                    acc += dgh[t, b, row] * wh[row, k]
                dh[b, k] += acc


def gru_sequence_forward(x, h0, wx, wh, bx, bh):
    """Same contract as gru_numpy.gru_sequence_forward."""
    x = np.ascontiguousarray(x)
    t_len, batch, _ = x.shape
    hidden = wh.shape[1]
    gx = np.ascontiguousarray(
        (x.reshape(t_len * batch, -1) @ wx.T + bx).reshape(t_len, batch, 3 * hidden)
    )
    states = np.empty((t_len, batch, hidden), dtype=x.dtype)
    gr = np.empty_like(states)
    gz = np.empty_like(states)
    cand = np.empty_like(states)
    rec_n = np.empty_like(states)
    h0c = np.ascontiguousarray(h0)
    whc = np.ascontiguousarray(wh)
    bhc = np.ascontiguousarray(bh)
    _scan_forward(gx, h0c, whc, bhc, states, gr, gz, cand, rec_n)
    cache = (x, h0c, wx, whc, states, gr, gz, cand, rec_n)
    return states, cache


def gru_sequence_backward(dstates, cache):
    """Same contract as gru_numpy.gru_sequence_backward."""
    x, h0, wx, wh, states, gr, gz, cand, rec_n = cache
    t_len, batch, hidden = dstates.shape
    dstates = np.ascontiguousarray(dstates)
    dgx = np.empty((t_len, batch, 3 * hidden), dtype=x.dtype)
    dgh = np.empty((t_len, batch, 3 * hidden), dtype=x.dtype)
    dh = np.zeros((batch, hidden), dtype=x.dtype)
    _scan_backward(dstates, states, h0, wh, gr, gz, cand, rec_n, dgx, dgh, dh)

    h_prev_seq = np.concatenate([h0[None], states[:-1]], axis=0)
    dgx_flat = dgx.reshape(t_len * batch, 3 * hidden)
    dgh_flat = dgh.reshape(t_len * batch, 3 * hidden)
    dx = (dgx_flat @ wx).reshape(x.shape)
    dwx = dgx_flat.T @ x.reshape(t_len * batch, -1)
    dwh = dgh_flat.T @ h_prev_seq.reshape(t_len * batch, hidden)
    dbx = dgx_flat.sum(axis=0)
    dbh = dgh_flat.sum(axis=0)
    return dx, dh, dwx, dwh, dbx, dbh
