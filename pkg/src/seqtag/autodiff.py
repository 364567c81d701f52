"""Dense float64 tensors with tape-based reverse-mode differentiation.

The engine is deliberately small: rank <= 2 arrays, a flat operation tape,
and exactly the primitives the taggers need.  Everything runs in 64-bit
floats so gradient checks are limited by truncation error, not precision.

Gradients for a table parameter accessed through ``lookup_row`` are kept as
sparse per-row updates (see :class:`SparseRows`); all other gradients are
dense arrays of the parameter's shape.
"""

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix64(z):
    """splitmix64 output function on a Python int."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """Deterministic counter-based pseudo-random stream (splitmix64).

    Draw k of the stream is ``mix64(seed + (k+1) * GAMMA)`` where ``mix64``
    is the splitmix64 finalizer and GAMMA is the 64-bit golden ratio
    constant.  Because each draw is a pure function of (seed, k), scalar and
    vectorized draws produce the same stream, and identical seeds give
    bit-identical sequences on any platform.

    Gaussians come from Box-Muller: each pair of uniforms (u1, u2) yields
    z0 = sqrt(-2 ln u1) cos(2 pi u2) and z1 = sqrt(-2 ln u1) sin(2 pi u2).
    A scalar draw consumes one full pair and discards z1; a batch of n
    consumes ceil(n/2) pairs.

    ``child(tag)`` derives an independent stream from the *original* seed,
    so derived streams do not depend on how much of the parent was consumed.
    """

    def __init__(self, seed):
        self._seed = seed & _MASK64
        self._ctr = 0

    def u64(self):
        self._ctr += 1
        return _mix64((self._seed + self._ctr * _GAMMA) & _MASK64)

    def u64_array(self, n):
        idx = np.arange(self._ctr + 1, self._ctr + n + 1, dtype=np.uint64)
        self._ctr += n
        with np.errstate(over="ignore"):
            z = np.uint64(self._seed) + idx * np.uint64(_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            return z ^ (z >> np.uint64(31))

    def uniform(self):
        """One double in [0, 1), from the top 53 bits of a u64."""
        return (self.u64() >> 11) * 2.0**-53

    def uniform_array(self, n):
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def below(self, n):
        """Unbiased integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("below() needs n >= 1")
        lim = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.u64()
            if u < lim:
                return u % n

    def shuffle(self, items):
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def normal(self, n, sigma=1.0):
        """n Gaussian draws N(0, sigma^2) as a float64 array (Box-Muller)."""
        m = (n + 1) // 2
        u1 = 1.0 - self.uniform_array(m)  # (0, 1]: keeps log finite
        u2 = self.uniform_array(m)
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * m)
        out[0::2] = r * np.cos(2.0 * np.pi * u2)
        out[1::2] = r * np.sin(2.0 * np.pi * u2)
        return sigma * out[:n]

    def gauss(self, sigma=1.0):
        return float(self.normal(1, sigma)[0])

    def child(self, tag):
        """Independent derived stream; depends only on (seed, tag)."""
        return Rng(_mix64((self._seed + (tag + 1) * _GAMMA) & _MASK64))


class Tensor:
    """A float64 array plus an optional handle into the active tape."""

    __slots__ = ("v", "node")

    def __init__(self, value, node=None):
        self.v = value
        self.node = node

    @property
    def shape(self):
        return self.v.shape

    def __repr__(self):
        return f"Tensor(shape={self.v.shape}, node={self.node})"


def as_tensor(x):
    if isinstance(x, Tensor):
        return x
    if isinstance(x, Parameter):
        return Tensor(x.v)
    return Tensor(np.asarray(x, dtype=np.float64))


def wrap(tape, x):
    """Tensor view of x; Parameters become (cached) leaf nodes on the tape."""
    if isinstance(x, Parameter) and tape is not None:
        return tape.leaf(x)
    return as_tensor(x)


class Parameter:
    """A named trainable array."""

    __slots__ = ("name", "v", "trainable")

    def __init__(self, name, value, trainable=True):
        self.name = name
        self.v = np.asarray(value, dtype=np.float64)
        self.trainable = trainable

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.v.shape})"


class SparseRows:
    """Row-indexed gradient accumulator for embedding tables."""

    __slots__ = ("shape", "rows")

    def __init__(self, shape):
        self.shape = shape
        self.rows = {}

    def add(self, i, g):
        if i in self.rows:
            self.rows[i] += g
        else:
            self.rows[i] = g.copy()

    def to_dense(self):
        out = np.zeros(self.shape)
        for i, g in self.rows.items():
            out[i] += g
        return out


# kind -> fn(tape, node_index, incoming_grad); extended by recurrent.py
BACKWARD = {}


class Tape:
    """Ordered record of forward operations for one reverse sweep.

    Node i stores (kind, parent node ids, forward value, aux payload) where
    aux carries whatever the backward rule needs (input values, cached
    activations).  Parent ids are None for constants, which receive no
    gradient.  Topological order is construction order.
    """

    def __init__(self):
        self.kinds = []
        self.parents = []
        self.values = []
        self.aux = []
        self.grads = None
        self._leaves = {}  # id(Parameter) -> node index

    def __len__(self):
        return len(self.kinds)

    def record(self, kind, parents, value, aux=None):
        self.kinds.append(kind)
        self.parents.append(parents)
        self.values.append(value)
        self.aux.append(aux)
        return Tensor(value, len(self.kinds) - 1)

    def leaf(self, param):
        """Tensor view of a parameter, one tape node per parameter."""
        node = self._leaves.get(id(param))
        if node is None:
            t = self.record("leaf", (), param.v, param)
            self._leaves[id(param)] = t.node
            return t
        return Tensor(self.values[node], node)

    # gradient buffers ----------------------------------------------------

    def gbuf(self, node):
        """Dense gradient buffer for a node, zero-initialized on first use."""
        g = self.grads[node]
        if g is None:
            g = np.zeros(self.values[node].shape)
            self.grads[node] = g
        return g

    def sbuf(self, node):
        """Sparse row-gradient buffer for a table leaf."""
        g = self.grads[node]
        if g is None:
            g = SparseRows(self.values[node].shape)
            self.grads[node] = g
        return g

    def acc(self, node, g):
        if node is not None:
            self.gbuf(node)
            self.grads[node] += g

    # reverse sweep -------------------------------------------------------

    def backward(self, loss):
        """Populate gradients of `loss` w.r.t. every ancestor node."""
        if loss.node is None:
            raise ValueError("loss was not recorded on this tape")
        if loss.v.size != 1:
            raise ValueError(f"loss must be scalar, got shape {loss.v.shape}")
        self.grads = [None] * len(self.kinds)
        self.grads[loss.node] = np.ones(loss.v.shape)
        for i in range(loss.node, -1, -1):
            g = self.grads[i]
            if g is None:
                continue
            kind = self.kinds[i]
            if kind == "leaf":
                continue
            BACKWARD[kind](self, i, g)

    def grad(self, param):
        """Gradient accumulated for a parameter, or None if unused."""
        if self.grads is None:
            raise ValueError("backward() has not run on this tape")
        node = self._leaves.get(id(param))
        if node is None:
            return None
        return self.grads[node]

    def gradients(self, params):
        """name -> gradient map; raises if a trainable parameter has none."""
        out = {}
        for p in params:
            g = self.grad(p)
            if g is None and p.trainable:
                raise ValueError(f"no gradient for trainable parameter {p.name!r}")
            if g is not None:
                out[p.name] = g
        return out


# primitives ---------------------------------------------------------------


def add(tape, a, b):
    a, b = wrap(tape, a), wrap(tape, b)
    if a.v.shape != b.v.shape:
        raise ValueError(f"add: shape mismatch {a.v.shape} vs {b.v.shape}")
    out = a.v + b.v
    if tape is None:
        return Tensor(out)
    return tape.record("add", (a.node, b.node), out)


def _bw_add(tape, i, g):
    pa, pb = tape.parents[i]
    tape.acc(pa, g)
    tape.acc(pb, g)


def pointwise_mul(tape, a, b):
    a, b = wrap(tape, a), wrap(tape, b)
    if a.v.shape != b.v.shape:
        raise ValueError(f"pointwise_mul: shape mismatch {a.v.shape} vs {b.v.shape}")
    out = a.v * b.v
    if tape is None:
        return Tensor(out)
    return tape.record("mul", (a.node, b.node), out, (a.v, b.v))


def _bw_mul(tape, i, g):
    pa, pb = tape.parents[i]
    av, bv = tape.aux[i]
    tape.acc(pa, g * bv)
    tape.acc(pb, g * av)


def matvec(tape, w, x):
    w, x = wrap(tape, w), wrap(tape, x)
    if w.v.ndim != 2 or x.v.ndim != 1 or w.v.shape[1] != x.v.shape[0]:
        raise ValueError(f"matvec: bad shapes {w.v.shape} @ {x.v.shape}")
    out = w.v @ x.v
    if tape is None:
        return Tensor(out)
    return tape.record("matvec", (w.node, x.node), out, (w.v, x.v))


def _bw_matvec(tape, i, g):
    pw, px = tape.parents[i]
    wv, xv = tape.aux[i]
    if pw is not None:
        tape.gbuf(pw)
        tape.grads[pw] += np.outer(g, xv)
    if px is not None:
        tape.gbuf(px)
        tape.grads[px] += wv.T @ g
    # (sparse tables are never used as matvec operands)


def affine(tape, w, x, b):
    w, x, b = wrap(tape, w), wrap(tape, x), wrap(tape, b)
    if w.v.ndim != 2 or w.v.shape[1] != x.v.shape[0] or b.v.shape != (w.v.shape[0],):
        raise ValueError(f"affine: bad shapes {w.v.shape}, {x.v.shape}, {b.v.shape}")
    out = w.v @ x.v + b.v
    if tape is None:
        return Tensor(out)
    return tape.record("affine", (w.node, x.node, b.node), out, (w.v, x.v))


def _bw_affine(tape, i, g):
    pw, px, pb = tape.parents[i]
    wv, xv = tape.aux[i]
    if pw is not None:
        tape.gbuf(pw)
        tape.grads[pw] += np.outer(g, xv)
    if px is not None:
        tape.gbuf(px)
        tape.grads[px] += wv.T @ g
    tape.acc(pb, g)


def concat(tape, parts):
    parts = [wrap(tape, p) for p in parts]
    if not parts:
        raise ValueError("concat of zero parts")
    for p in parts:
        if p.v.ndim != 1:
            raise ValueError("concat expects vectors")
    out = np.concatenate([p.v for p in parts])
    if tape is None:
        return Tensor(out)
    sizes = tuple(p.v.shape[0] for p in parts)
    return tape.record("concat", tuple(p.node for p in parts), out, sizes)


def _bw_concat(tape, i, g):
    off = 0
    for parent, size in zip(tape.parents[i], tape.aux[i]):
        tape.acc(parent, g[off : off + size])
        off += size


def tanh(tape, x):
    x = wrap(tape, x)
    out = np.tanh(x.v)
    if tape is None:
        return Tensor(out)
    return tape.record("tanh", (x.node,), out)


def _bw_tanh(tape, i, g):
    y = tape.values[i]
    tape.acc(tape.parents[i][0], g * (1.0 - y * y))


def _sigmoid(x):
    # numerically stable split on the sign of x
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def logistic(tape, x):
    x = wrap(tape, x)
    out = _sigmoid(x.v)
    if tape is None:
        return Tensor(out)
    return tape.record("logistic", (x.node,), out)


def _bw_logistic(tape, i, g):
    y = tape.values[i]
    tape.acc(tape.parents[i][0], g * y * (1.0 - y))


def lookup_row(tape, table, i):
    """Row i of an embedding table; gradient is a sparse row update."""
    table = wrap(tape, table)
    tv = table.v
    if not 0 <= i < tv.shape[0]:
        raise IndexError(f"lookup_row: row {i} outside table of {tv.shape[0]}")
    out = tv[i].copy()
    if tape is None:
        return Tensor(out)
    return tape.record("lookup", (table.node,), out, i)


def _bw_lookup(tape, i, g):
    parent = tape.parents[i][0]
    if parent is not None:
        tape.sbuf(parent).add(tape.aux[i], g)


def softmax_xent(tape, logits, gold):
    """Scalar -log softmax(logits)[gold], computed via log-sum-exp."""
    z = wrap(tape, logits)
    if z.v.ndim != 1:
        raise ValueError("softmax_xent expects a logits vector")
    if not 0 <= gold < z.v.shape[0]:
        raise IndexError(f"gold index {gold} outside {z.v.shape[0]} classes")
    m = z.v.max()
    ez = np.exp(z.v - m)
    total = ez.sum()
    out = np.asarray(m + math.log(total) - z.v[gold])
    if tape is None:
        return Tensor(out)
    return tape.record("xent", (z.node,), out, (ez / total, gold))


def _bw_xent(tape, i, g):
    probs, gold = tape.aux[i]
    d = probs * g
    d[gold] -= g
    tape.acc(tape.parents[i][0], d)


def gaussian_noise(tape, x, sigma, rng):
    """x + eps with eps ~ N(0, sigma^2) elementwise; identity gradient."""
    x = wrap(tape, x)
    out = x.v + rng.normal(x.v.shape[0], sigma)
    if tape is None:
        return Tensor(out)
    return tape.record("noise", (x.node,), out)


def _bw_noise(tape, i, g):
    tape.acc(tape.parents[i][0], g)


BACKWARD.update(
    {
        "add": _bw_add,
        "mul": _bw_mul,
        "matvec": _bw_matvec,
        "affine": _bw_affine,
        "concat": _bw_concat,
        "tanh": _bw_tanh,
        "logistic": _bw_logistic,
        "lookup": _bw_lookup,
        "xent": _bw_xent,
        "noise": _bw_noise,
    }
)

_DISPATCH = {
    "add": add,
    "pointwise_mul": pointwise_mul,
    "matvec": matvec,
    "affine": affine,
    "concat": concat,
    "tanh": tanh,
    "logistic": logistic,
    "lookup_row": lookup_row,
    "softmax_xent": softmax_xent,
    "gaussian_noise": gaussian_noise,
}


def primitive_forward(tape, kind, *inputs, **kw):
    """Validated dispatcher over the primitive set.

    Rejects unknown kinds and non-finite tensor inputs; the named op
    functions skip the finiteness scan for speed (training instead guards
    the loss, see tagger.train).
    """
    try:
        fn = _DISPATCH[kind]
    except KeyError:
        raise ValueError(f"unknown primitive kind {kind!r}") from None
    for x in inputs:
        if isinstance(x, (Tensor, Parameter, np.ndarray, list, tuple)) and not isinstance(x, str):
            arr = x.v if isinstance(x, (Tensor, Parameter)) else np.asarray(x, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"non-finite input to {kind}")
    if kind == "concat":
        return fn(tape, inputs[0] if len(inputs) == 1 else list(inputs), **kw)
    return fn(tape, *inputs, **kw)


def backward(tape, loss):
    """Module-level alias for Tape.backward."""
    tape.backward(loss)


# optimizer ------------------------------------------------------------------


def sgd_step(params, grads, lr):
    """p <- p - lr * grad(p) for every trainable parameter; clears `grads`.

    `grads` maps parameter name to a dense array or SparseRows, as produced
    by Tape.gradients().
    """
    for p in params:
        if not p.trainable:
            continue
        if p.name not in grads:
            raise ValueError(f"no gradient for trainable parameter {p.name!r}")
        g = grads[p.name]
        if isinstance(g, SparseRows):
            for row, vec in g.rows.items():
                p.v[row] -= lr * vec
        else:
            p.v -= lr * g
    grads.clear()


def glorot(rng, fan_out, fan_in):
    """Glorot-uniform matrix of shape (fan_out, fan_in)."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    u = rng.uniform_array(fan_out * fan_in)
    return (limit * (2.0 * u - 1.0)).reshape(fan_out, fan_in)


# finite-difference oracle -----------------------------------------------------


def gradient_check(loss_fn, params, h=1e-5):
    """Max relative error between tape gradients and central differences.

    `loss_fn(tape)` must build and return the scalar loss on the given tape
    (or evaluate without recording when tape is None) and must be
    deterministic: no noise, no RNG consumption that differs between calls.
    The per-component error is |analytic - numeric| / max(1e-8,
    |analytic| + |numeric|); the max over all components of all `params`
    is returned.
    """
    tape = Tape()
    loss = loss_fn(tape)
    if not np.all(np.isfinite(loss.v)):
        raise FloatingPointError("non-finite loss in gradient_check")
    tape.backward(loss)

    worst = 0.0
    for p in params:
        g = tape.grad(p)
        if g is None:
            g = np.zeros(p.v.shape)
        elif isinstance(g, SparseRows):
            g = g.to_dense()
        flat = p.v.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for i in range(flat.shape[0]):
            keep = flat[i]
            flat[i] = keep + h
            f_plus = float(loss_fn(None).v.reshape(()))
            flat[i] = keep - h
            f_minus = float(loss_fn(None).v.reshape(()))
            flat[i] = keep
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise FloatingPointError("non-finite evaluation in gradient_check")
            num = (f_plus - f_minus) / (2.0 * h)
            err = abs(gflat[i] - num) / max(1e-8, abs(gflat[i]) + abs(num))
            if err > worst:
                worst = err
    return worst
