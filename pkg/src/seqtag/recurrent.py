"""LSTM and simple-RNN cells plus sequence/context bidirectional runs.

The LSTM is the standard input/forget/output-gate formulation without
peepholes:

    i = sig(W_xi x + W_hi h + b_i)      f = sig(W_xf x + W_hf h + b_f)
    o = sig(W_xo x + W_ho h + b_o)      g = tanh(W_xg x + W_hg h + b_g)
    c' = f * c + i * g                  h' = o * tanh(c')

Gate weights are stored stacked row-wise in [i, f, g, o] order inside one
(4H x D) input matrix, one (4H x H) recurrent matrix and one (4H,) bias, so
a step costs two matvecs; per-gate views are exposed for inspection and
tests.  Each step is recorded as two fused tape nodes (cell state, then
hidden state) with hand-derived backward rules; gradient soundness is
covered by finite-difference checks in the test suite.

Initial states are zero vectors.
"""

import numpy as np

from .autodiff import BACKWARD, Parameter, Tensor, _sigmoid, concat, glorot


class RnnState:
    """Hidden (and for LSTMs, cell) activations after a step."""

    __slots__ = ("h", "c")

    def __init__(self, h, c=None):
        self.h = h
        self.c = c


class LstmCell:
    kind = "lstm"

    def __init__(self, name, input_dim, hidden_dim, rng=None):
        self.name = name
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        h, d = hidden_dim, input_dim
        if rng is None:
            wx = np.zeros((4 * h, d))
            wh = np.zeros((4 * h, h))
        else:
            wx = np.vstack([glorot(rng, h, d) for _ in range(4)])
            wh = np.vstack([glorot(rng, h, h) for _ in range(4)])
        self.W_x = Parameter(f"{name}.W_x", wx)
        self.W_h = Parameter(f"{name}.W_h", wh)
        self.b = Parameter(f"{name}.b", np.zeros(4 * h))

    def _block(self, mat, gate):
        h = self.hidden_dim
        return mat[gate * h : (gate + 1) * h]

    # per-gate views in storage order [i, f, g, o]
    @property
    def W_xi(self):
        return self._block(self.W_x.v, 0)

    @property
    def W_xf(self):
        return self._block(self.W_x.v, 1)

    @property
    def W_xg(self):
        return self._block(self.W_x.v, 2)

    @property
    def W_xo(self):
        return self._block(self.W_x.v, 3)

    @property
    def W_hi(self):
        return self._block(self.W_h.v, 0)

    @property
    def W_hf(self):
        return self._block(self.W_h.v, 1)

    @property
    def W_hg(self):
        return self._block(self.W_h.v, 2)

    @property
    def W_ho(self):
        return self._block(self.W_h.v, 3)

    @property
    def b_i(self):
        return self._block(self.b.v, 0)

    @property
    def b_f(self):
        return self._block(self.b.v, 1)

    @property
    def b_g(self):
        return self._block(self.b.v, 2)

    @property
    def b_o(self):
        return self._block(self.b.v, 3)

    def parameters(self):
        return [self.W_x, self.W_h, self.b]


class SimpleRnnCell:
    """Elman cell: h' = tanh(W_x x + W_h h + b)."""

    kind = "simple_rnn"

    def __init__(self, name, input_dim, hidden_dim, rng=None):
        self.name = name
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        if rng is None:
            wx = np.zeros((hidden_dim, input_dim))
            wh = np.zeros((hidden_dim, hidden_dim))
        else:
            wx = glorot(rng, hidden_dim, input_dim)
            wh = glorot(rng, hidden_dim, hidden_dim)
        self.W_x = Parameter(f"{name}.W_x", wx)
        self.W_h = Parameter(f"{name}.W_h", wh)
        self.b = Parameter(f"{name}.b", np.zeros(hidden_dim))

    def parameters(self):
        return [self.W_x, self.W_h, self.b]


def cell_step(cell, x, state, tape=None):
    """One recurrence step; `state=None` means the zero initial state."""
    xv = x.v if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if xv.shape != (cell.input_dim,):
        raise ValueError(f"cell_step: input shape {xv.shape}, expected ({cell.input_dim},)")
    hdim = cell.hidden_dim
    hv = np.zeros(hdim) if state is None else state.h.v
    xn = x.node if isinstance(x, Tensor) else None
    hn = None if state is None else state.h.node

    if cell.kind == "simple_rnn":
        hv2 = np.tanh(cell.W_x.v @ xv + cell.W_h.v @ hv + cell.b.v)
        if tape is None:
            return RnnState(Tensor(hv2))
        wx, wh, b = tape.leaf(cell.W_x), tape.leaf(cell.W_h), tape.leaf(cell.b)
        h2 = tape.record(
            "rnn_h", (wx.node, wh.node, b.node, xn, hn), hv2, (wx.v, wh.v, xv, hv)
        )
        return RnnState(h2)

    cv = np.zeros(hdim) if state is None else state.c.v
    cn = None if state is None else state.c.node
    a = cell.W_x.v @ xv + cell.W_h.v @ hv + cell.b.v
    s = _sigmoid(a[: 2 * hdim])
    i, f = s[:hdim], s[hdim:]
    g = np.tanh(a[2 * hdim : 3 * hdim])
    o = _sigmoid(a[3 * hdim :])
    cv2 = f * cv + i * g
    t = np.tanh(cv2)
    hv2 = o * t
    if tape is None:
        return RnnState(Tensor(hv2), Tensor(cv2))
    wx, wh, b = tape.leaf(cell.W_x), tape.leaf(cell.W_h), tape.leaf(cell.b)
    c2 = tape.record(
        "lstm_c",
        (wx.node, wh.node, b.node, xn, hn, cn),
        cv2,
        (wx.v, wh.v, xv, hv, cv, i, f, g),
    )
    h2 = tape.record(
        "lstm_h",
        (c2.node, wx.node, wh.node, b.node, xn, hn),
        hv2,
        (wx.v, wh.v, xv, hv, o, t),
    )
    return RnnState(h2, c2)


def _bw_lstm_h(tape, idx, g):
    cn, wxn, whn, bn, xn, hn = tape.parents[idx]
    wxv, whv, xv, hv, o, t = tape.aux[idx]
    hdim = o.shape[0]
    dt = g * o
    tape.acc(cn, dt * (1.0 - t * t))
    dao = (g * t) * o * (1.0 - o)
    rows = slice(3 * hdim, 4 * hdim)
    if wxn is not None:
        tape.gbuf(wxn)[rows] += np.outer(dao, xv)
    if whn is not None:
        tape.gbuf(whn)[rows] += np.outer(dao, hv)
    if bn is not None:
        tape.gbuf(bn)[rows] += dao
    if xn is not None:
        tape.gbuf(xn)
        tape.grads[xn] += wxv[rows].T @ dao
    if hn is not None:
        tape.gbuf(hn)
        tape.grads[hn] += whv[rows].T @ dao


def _bw_lstm_c(tape, idx, g):
    wxn, whn, bn, xn, hn, cn = tape.parents[idx]
    wxv, whv, xv, hv, cv, i, f, gate_g = tape.aux[idx]
    hdim = i.shape[0]
    da = np.empty(3 * hdim)
    da[:hdim] = (g * gate_g) * i * (1.0 - i)
    da[hdim : 2 * hdim] = (g * cv) * f * (1.0 - f)
    da[2 * hdim :] = (g * i) * (1.0 - gate_g * gate_g)
    rows = slice(0, 3 * hdim)
    if wxn is not None:
        tape.gbuf(wxn)[rows] += np.outer(da, xv)
    if whn is not None:
        tape.gbuf(whn)[rows] += np.outer(da, hv)
    if bn is not None:
        tape.gbuf(bn)[rows] += da
    if xn is not None:
        tape.gbuf(xn)
        tape.grads[xn] += wxv[rows].T @ da
    if hn is not None:
        tape.gbuf(hn)
        tape.grads[hn] += whv[rows].T @ da
    tape.acc(cn, g * f)


def _bw_rnn_h(tape, idx, g):
    wxn, whn, bn, xn, hn = tape.parents[idx]
    wxv, whv, xv, hv = tape.aux[idx]
    y = tape.values[idx]
    da = g * (1.0 - y * y)
    if wxn is not None:
        tape.gbuf(wxn)
        tape.grads[wxn] += np.outer(da, xv)
    if whn is not None:
        tape.gbuf(whn)
        tape.grads[whn] += np.outer(da, hv)
    tape.acc(bn, da)
    if xn is not None:
        tape.gbuf(xn)
        tape.grads[xn] += wxv.T @ da
    if hn is not None:
        tape.gbuf(hn)
        tape.grads[hn] += whv.T @ da


BACKWARD.update({"lstm_c": _bw_lstm_c, "lstm_h": _bw_lstm_h, "rnn_h": _bw_rnn_h})


def run(cell, xs, direction="forward", tape=None):
    """States from a zero start, consuming xs in the given direction.

    Output order matches consumption order: run("reverse", xs) equals
    run("forward", reversed(xs)).
    """
    if not xs:
        raise ValueError("run: empty sequence")
    if direction not in ("forward", "reverse"):
        raise ValueError(f"run: bad direction {direction!r}")
    seq = xs if direction == "forward" else xs[::-1]
    out = []
    state = None
    for x in seq:
        state = cell_step(cell, x, state, tape)
        out.append(state)
    return out


def birnn_seq(cell_f, cell_r, xs, tape=None):
    """Concatenated final states of a forward and a reverse pass."""
    fwd = run(cell_f, xs, "forward", tape)
    rev = run(cell_r, xs, "reverse", tape)
    return concat(tape, [fwd[-1].h, rev[-1].h])


def birnn_ctx(cell_f, cell_r, xs, tape=None):
    """Per-position encodings v_1..v_n over the whole sequence.

    v_i concatenates the forward state after consuming x_1..x_i with the
    reverse state after consuming x_n..x_i; both halves include position i.
    """
    fwd = run(cell_f, xs, "forward", tape)
    rev = run(cell_r, xs, "reverse", tape)
    n = len(xs)
    return [concat(tape, [fwd[i].h, rev[n - 1 - i].h]) for i in range(n)]
