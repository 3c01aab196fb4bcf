"""Dense float64 tensors with a minimal reverse-mode autodiff engine.

The primitive set covers exactly what the super-resolution network needs:
2D convolution (with groups and strides), linear maps, layer/batch
normalization, row-wise softmax, ReLU/leaky-ReLU/GELU activations, pixel
shuffling, concatenation, reshapes and the arithmetic required by an
l1 training loss. Everything is double precision; non-finite values are
raised as errors the moment they appear instead of propagating.

A computation is recorded as a DAG through parent links. ``backward`` on a
scalar replays the graph once in reverse topological order, accumulating
vector-Jacobian products into ``.grad`` of every tensor that requires one.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "NonFiniteError",
    "ShapeError",
    "tensor",
    "conv2d",
    "linear",
    "layer_norm",
    "batch_norm",
    "softmax",
    "relu",
    "leaky_relu",
    "gelu",
    "pixel_shuffle",
    "pixel_unshuffle",
    "concat",
    "reshape",
    "transpose",
    "matmul",
    "tsum",
    "tmean",
    "tabs",
    "l1_loss",
]


class NonFiniteError(FloatingPointError):
    """A tensor operation produced NaN or Inf."""


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


# Finite checks on every op creation. Tests may flip this off to exercise
# pathological inputs; the default honors the no-silent-NaN rule.
CHECK_FINITE = True

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    """A float64 array value, optionally recorded on the autodiff graph.

    Leaf tensors created with ``requires_grad=True`` receive gradients on
    ``backward``; intermediate tensors carry a vjp closure and parent links.
    Treat ``data`` as immutable once the tensor participates in a graph.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp", "name")

    def __init__(self, data, requires_grad=False, _parents=(), _vjp=None, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        if CHECK_FINITE and not np.all(np.isfinite(self.data)):
            raise NonFiniteError(f"non-finite values in tensor {name or ''}".strip())
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._vjp = _vjp
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag}, requires_grad={self.requires_grad})"

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return add(self, neg(_as_tensor(other)))

    def __rsub__(self, other):
        return add(_as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    # -- backward pass -----------------------------------------------------

    def backward(self):
        """Accumulate gradients of this scalar into every reachable leaf."""
        if self.data.size != 1:
            raise ShapeError("backward() requires a scalar loss")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._vjp is None or node.grad is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(node.grad)):
                if pg is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = pg
                else:
                    parent.grad = parent.grad + pg


def _toposort(root):
    """Iterative DFS postorder; deterministic given parent tuple order."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def tensor(data, requires_grad=False, name=None):
    return Tensor(data, requires_grad=requires_grad, name=name)


def _unbroadcast(g, shape):
    """Sum gradient g down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise arithmetic -------------------------------------------------


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Tensor(out_data, _parents=(a, b), _vjp=vjp)


def neg(a):
    a = _as_tensor(a)
    return Tensor(-a.data, _parents=(a,), _vjp=lambda g: (-g,))


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return Tensor(out_data, _parents=(a, b), _vjp=vjp)


def tabs(a):
    """Elementwise absolute value; subgradient at 0 is 0 (symmetric tie rule)."""
    a = _as_tensor(a)
    sign = np.sign(a.data)
    return Tensor(np.abs(a.data), _parents=(a,), _vjp=lambda g: (g * sign,))


def tsum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g
        if not keepdims:
            gg = np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return Tensor(out_data, _parents=(a,), _vjp=vjp)


def tmean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    n = a.data.size if axis is None else np.prod([a.data.shape[i] for i in np.atleast_1d(axis)])
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def l1_loss(pred, target):
    """Sum of absolute differences (the network's training objective)."""
    return tsum(tabs(pred - _as_tensor(target)))


# -- shape manipulation -------------------------------------------------------


def reshape(a, shape):
    a = _as_tensor(a)
    out_data = a.data.reshape(shape)
    return Tensor(out_data, _parents=(a,), _vjp=lambda g: (g.reshape(a.data.shape),))


def transpose(a, axes):
    a = _as_tensor(a)
    inv = np.argsort(axes)
    return Tensor(
        a.data.transpose(axes),
        _parents=(a,),
        _vjp=lambda g: (g.transpose(inv),),
    )


def concat(parts, axis):
    parts = [_as_tensor(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(out_data, _parents=tuple(parts), _vjp=vjp)


def pixel_shuffle(a, r):
    """Depth-to-space: out[c, h*r+i, w*r+j] = in[c*r*r + i*r + j, h, w].

    Accepts (C, H, W) or batched (N, C, H, W); channels must divide by r*r.
    """
    a = _as_tensor(a)
    x, squeeze = _as_batched(a.data)
    n, c, h, w = x.shape
    if c % (r * r) != 0:
        raise ShapeError(f"pixel_shuffle: channels {c} not divisible by r^2={r * r}")
    co = c // (r * r)
    out = (
        x.reshape(n, co, r, r, h, w)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(n, co, h * r, w * r)
    )
    if squeeze:
        out = out[0]

    def vjp(g):
        gb = g[None] if squeeze else g
        gin = (
            gb.reshape(n, co, h, r, w, r)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(n, c, h, w)
        )
        return (gin[0] if squeeze else gin,)

    return Tensor(out, _parents=(a,), _vjp=vjp)


def pixel_unshuffle(a, r):
    """Space-to-depth inverse of :func:`pixel_shuffle`."""
    a = _as_tensor(a)
    x, squeeze = _as_batched(a.data)
    n, c, h, w = x.shape
    if h % r != 0 or w % r != 0:
        raise ShapeError("pixel_unshuffle: spatial extents not divisible by r")
    ho, wo = h // r, w // r
    out = (
        x.reshape(n, c, ho, r, wo, r)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(n, c * r * r, ho, wo)
    )
    if squeeze:
        out = out[0]

    def vjp(g):
        gb = g[None] if squeeze else g
        gin = (
            gb.reshape(n, c, r, r, ho, wo)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(n, c, h, w)
        )
        return (gin[0] if squeeze else gin,)

    return Tensor(out, _parents=(a,), _vjp=vjp)


def _as_batched(x):
    """Promote (C,H,W) to (1,C,H,W); report whether to squeeze afterwards."""
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected 3D or 4D array, got shape {x.shape}")


# -- dense linear algebra -----------------------------------------------------


def matmul(a, b):
    """Batched matrix product.

    Supports ``a`` with arbitrary leading dims against a 2D ``b`` (dense
    layers), or identical leading dims (attention arithmetic).
    """
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data @ b.data

    def vjp(g):
        if b.data.ndim == 2:
            ga = g @ b.data.T
            gb = np.tensordot(a.data, g, axes=(tuple(range(a.data.ndim - 1)),) * 2)
        else:
            if a.data.shape[:-2] != b.data.shape[:-2]:
                raise ShapeError("matmul vjp: mismatched leading dimensions")
            ga = g @ np.swapaxes(b.data, -1, -2)
            gb = np.swapaxes(a.data, -1, -2) @ g
        return ga, gb

    return Tensor(out_data, _parents=(a, b), _vjp=vjp)


def linear(x, weight, bias=None):
    """Affine map on the last axis: ``x @ weight + bias``; weight is (in, out)."""
    out = matmul(x, weight)
    if bias is not None:
        out = add(out, bias)
    return out


# -- convolution --------------------------------------------------------------


def _conv_out_extent(n, k, stride, pad):
    return (n + 2 * pad - k) // stride + 1


def _im2col(x, k, stride, pad):
    """(N,C,H,W) -> column view (N, C, k, k, Ho, Wo) as a contiguous copy."""
    n, c, h, w = x.shape
    ho = _conv_out_extent(h, k, stride, pad)
    wo = _conv_out_extent(w, k, stride, pad)
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d: non-positive output extent ({ho}x{wo})")
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    s = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, c, ho, wo, k, k),
        strides=(s[0], s[1], s[2] * stride, s[3] * stride, s[2], s[3]),
        writeable=False,
    )
    return np.ascontiguousarray(view.transpose(0, 1, 4, 5, 2, 3)), ho, wo


def _col2im(gcols, x_shape, k, stride, pad, ho, wo):
    """Adjoint of _im2col: scatter-add (N,C,k,k,Ho,Wo) back onto (N,C,H,W)."""
    n, c, h, w = x_shape
    gxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad))
    for i in range(k):
        for j in range(k):
            gxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += gcols[:, :, i, j]
    if pad:
        return gxp[:, :, pad:-pad, pad:-pad]
    return gxp


def conv2d(x, weight, bias=None, stride=1, pad=0, groups=1):
    """2D cross-correlation with zero padding.

    x: (C_in, H, W) or (N, C_in, H, W); weight: (C_out, C_in/groups, k, k);
    ``groups == C_in`` gives a depthwise convolution. Output extents must be
    positive.
    """
    x, weight = _as_tensor(x), _as_tensor(weight)
    xd, squeeze = _as_batched(x.data)
    c_out, c_in_g, kh, kw = weight.data.shape
    if kh != kw:
        raise ShapeError("conv2d: only square kernels supported")
    k = kh
    n, c_in, h, w = xd.shape
    if c_in != c_in_g * groups or c_out % groups != 0:
        raise ShapeError(
            f"conv2d: {c_in} input channels incompatible with weight {weight.data.shape} and groups={groups}"
        )
    cols, ho, wo = _im2col(xd, k, stride, pad)
    cols_g = cols.reshape(n, groups, c_in_g * k * k, ho * wo)
    w_g = weight.data.reshape(groups, c_out // groups, c_in_g * k * k)
    out = np.einsum("gok,ngkl->ngol", w_g, cols_g, optimize=True)
    out = out.reshape(n, c_out, ho, wo)
    if bias is not None:
        bias = _as_tensor(bias)
        out = out + bias.data.reshape(1, c_out, 1, 1)
    out_final = out[0] if squeeze else out

    parents = (x, weight) if bias is None else (x, weight, bias)

    def vjp(g):
        gb4 = g[None] if squeeze else g
        gout = gb4.reshape(n, groups, c_out // groups, ho * wo)
        gw = np.einsum("ngol,ngkl->gok", gout, cols_g, optimize=True)
        gw = gw.reshape(weight.data.shape)
        gcols = np.einsum("gok,ngol->ngkl", w_g, gout, optimize=True)
        gcols = gcols.reshape(n, c_in, k, k, ho, wo)
        gx = _col2im(gcols, xd.shape, k, stride, pad, ho, wo)
        gx = gx[0] if squeeze else gx
        if bias is None:
            return gx, gw
        gbias = gb4.sum(axis=(0, 2, 3))
        return gx, gw, gbias

    return Tensor(out_final, _parents=parents, _vjp=vjp)


# -- normalization ------------------------------------------------------------


def layer_norm(x, gain, bias, eps=1e-5):
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = gain.data * xhat + bias.data

    def vjp(g):
        gxhat = g * gain.data
        m1 = gxhat.mean(axis=-1, keepdims=True)
        m2 = (gxhat * xhat).mean(axis=-1, keepdims=True)
        gx = inv * (gxhat - m1 - xhat * m2)
        red = tuple(range(g.ndim - 1))
        return gx, (g * xhat).sum(axis=red), g.sum(axis=red)

    return Tensor(out, _parents=(x, gain, bias), _vjp=vjp)


def batch_norm(x, gain, bias, running_mean, running_var, training, momentum=0.1, eps=1e-5):
    """Per-channel normalization of (N, C, H, W) maps.

    Training mode uses batch statistics and returns updated running stats
    (running = (1-momentum)*running + momentum*batch); inference mode uses
    the supplied running stats and returns them unchanged.

    Returns ``(out, new_running_mean, new_running_var)``; the running stats
    are plain arrays outside the autodiff graph.
    """
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    xd, squeeze = _as_batched(x.data)
    n, c, h, w = xd.shape
    axes = (0, 2, 3)

    if training:
        mu = xd.mean(axis=axes)
        var = xd.var(axis=axes)
        cnt = n * h * w
        new_mean = (1 - momentum) * running_mean + momentum * mu
        # unbiased variance for the running estimate, per common convention
        new_var = (1 - momentum) * running_var + momentum * var * cnt / max(cnt - 1, 1)
    else:
        mu, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var

    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu[:, None, None]) * inv[:, None, None]
    out = gain.data[:, None, None] * xhat + bias.data[:, None, None]
    out_final = out[0] if squeeze else out

    def vjp(g):
        gb4 = g[None] if squeeze else g
        gxhat = gb4 * gain.data[:, None, None]
        if training:
            m1 = gxhat.mean(axis=axes)
            m2 = (gxhat * xhat).mean(axis=axes)
            gx = inv[:, None, None] * (
                gxhat - m1[:, None, None] - xhat * m2[:, None, None]
            )
        else:
            gx = gxhat * inv[:, None, None]
        gx = gx[0] if squeeze else gx
        ggain = (gb4 * xhat).sum(axis=axes)
        gbias = gb4.sum(axis=axes)
        return gx, ggain, gbias

    out_t = Tensor(out_final, _parents=(x, gain, bias), _vjp=vjp)
    return out_t, new_mean, new_var


# -- activations --------------------------------------------------------------


def relu(a):
    a = _as_tensor(a)
    mask = a.data > 0
    return Tensor(np.where(mask, a.data, 0.0), _parents=(a,), _vjp=lambda g: (g * mask,))


def leaky_relu(a, slope=0.01):
    a = _as_tensor(a)
    mask = a.data > 0
    scale = np.where(mask, 1.0, slope)
    return Tensor(a.data * scale, _parents=(a,), _vjp=lambda g: (g * scale,))


def gelu(a):
    """Exact Gaussian-error-linear unit: x * Phi(x)."""
    a = _as_tensor(a)
    phi = 0.5 * (1.0 + erf(a.data * _INV_SQRT2))
    pdf = np.exp(-0.5 * a.data**2) * _INV_SQRT_2PI
    return Tensor(a.data * phi, _parents=(a,), _vjp=lambda g: (g * (phi + a.data * pdf),))


def softmax(a):
    """Row-wise softmax over the last axis (stability-shifted)."""
    a = _as_tensor(a)
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        inner = (g * s).sum(axis=-1, keepdims=True)
        return (s * (g - inner),)

    return Tensor(s, _parents=(a,), _vjp=vjp)
