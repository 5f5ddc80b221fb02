"""Pure numpy GRU sequence scan, forward and backprop-through-time.

Gate layout along the 3H axis is [reset; update; candidate].  Update rule:

    r = sigmoid(Wx_r x + bx_r + Wh_r h + bh_r)
    z = sigmoid(Wx_z x + bx_z + Wh_z h + bh_z)
    n = tanh(Wx_n x + bx_n + r * (Wh_n h + bh_n))
    h' = (1 - z) * n + z * h

Input-side matmuls for all steps are batched outside the time loop; only the
recurrent half runs step by step.
"""

import numpy as np


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def gru_sequence_forward(x, h0, wx, wh, bx, bh):
    """Run the scan over x of shape (T, B, I) with initial state h0 (B, H).

    Returns (states, cache): states is (T, B, H); cache feeds the backward.
    """
    t_len, batch, _ = x.shape
    hidden = wh.shape[1]
    gx = (x.reshape(t_len * batch, -1) @ wx.T + bx).reshape(t_len, batch, 3 * hidden)
    states = np.empty((t_len, batch, hidden), dtype=x.dtype)
    gates_r = np.empty((t_len, batch, hidden), dtype=x.dtype)
    gates_z = np.empty((t_len, batch, hidden), dtype=x.dtype)
    cand = np.empty((t_len, batch, hidden), dtype=x.dtype)
    rec_n = np.empty((t_len, batch, hidden), dtype=x.dtype)

    h = h0
    for t in range(t_len):
        gh = h @ wh.T + bh
        r = _sigmoid(gx[t, :, :hidden] + gh[:, :hidden])
        z = _sigmoid(gx[t, :, hidden : 2 * hidden] + gh[:, hidden : 2 * hidden])
        nh = gh[:, 2 * hidden :]
        n = np.tanh(gx[t, :, 2 * hidden :] + r * nh)
        h = (1.0 - z) * n + z * h
        states[t] = h
        gates_r[t] = r
        gates_z[t] = z
        cand[t] = n
        rec_n[t] = nh

    cache = (x, h0, wx, wh, states, gates_r, gates_z, cand, rec_n)
    return states, cache


def gru_sequence_backward(dstates, cache):
    """Backprop-through-time; dstates is (T, B, H) with all upstream gradients
    (including any final-state contribution folded into dstates[-1]).

    Returns (dx, dh0, dwx, dwh, dbx, dbh).
    """
    x, h0, wx, wh, states, gates_r, gates_z, cand, rec_n = cache
    t_len, batch, hidden = dstates.shape
    dgx = np.empty((t_len, batch, 3 * hidden), dtype=x.dtype)
    dgh = np.empty((t_len, batch, 3 * hidden), dtype=x.dtype)

    dh = np.zeros((batch, hidden), dtype=x.dtype)
    for t in range(t_len - 1, -1, -1):
        dh = dh + dstates[t]
        h_prev = states[t - 1] if t > 0 else h0
        r, z, n, nh = gates_r[t], gates_z[t], cand[t], rec_n[t]
        dz = dh * (h_prev - n)
        dn = dh * (1.0 - z)
        dh = dh * z
        dan = dn * (1.0 - n * n)
        dar = dan * nh * r * (1.0 - r)
        daz = dz * z * (1.0 - z)
        dgx[t, :, :hidden] = dar
        dgx[t, :, hidden : 2 * hidden] = daz
        dgx[t, :, 2 * hidden :] = dan
        dgh[t, :, :hidden] = dar
        dgh[t, :, hidden : 2 * hidden] = daz
        dgh[t, :, 2 * hidden :] = dan * r
        dh = dh + dgh[t] @ wh

    h_prev_seq = np.concatenate([h0[None], states[:-1]], axis=0)
    dgx_flat = dgx.reshape(t_len * batch, 3 * hidden)
    dgh_flat = dgh.reshape(t_len * batch, 3 * hidden)
    dx = (dgx_flat @ wx).reshape(x.shape)
    dwx = dgx_flat.T @ x.reshape(t_len * batch, -1)
    dwh = dgh_flat.T @ h_prev_seq.reshape(t_len * batch, hidden)
    dbx = dgx_flat.sum(axis=0)
    dbh = dgh_flat.sum(axis=0)
    return dx, dh, dwx, dwh, dbx, dbh
