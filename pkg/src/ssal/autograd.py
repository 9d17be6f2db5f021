"""Reverse-mode automatic differentiation over float64 numpy arrays.

A Tensor wraps an ndarray. Differentiable operations append a record to the
active Tape; backprop replays the tape in reverse. Everything is 64-bit and
deterministic: no implicit broadcasting except scalar-with-tensor, and every
op validates that its output is finite.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


class Tensor:
    """n-dimensional float64 array with optional gradient tracking."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        _check_finite("tensor", arr)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar; scalars broadcast, arrays must match shapes exactly
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)


class Tape:
    """Ordered record of executed differentiable ops for one training step."""

    def __init__(self):
        self.records = []
        self._out_ids = set()

    def __enter__(self):
        _push_tape(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _pop_tape(self)
        return False

    def owns(self, t: Tensor) -> bool:
        return id(t) in self._out_ids

    def _append(self, name, out, parents, backward):
        self.records.append((name, out, parents, backward))
        self._out_ids.add(id(out))


_TAPE_STACK: list[Tape] = []


def _push_tape(tape: Tape):
    _TAPE_STACK.append(tape)


def _pop_tape(tape: Tape):
    if not _TAPE_STACK or _TAPE_STACK[-1] is not tape:
        raise RuntimeError("tape stack corrupted")
    _TAPE_STACK.pop()


def active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _check_finite(name: str, arr: np.ndarray):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values produced by '{name}'")


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _emit(name: str, out_data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    """Create the output tensor and record the op if a tape is listening.

    `backward(grad_out)` must return one gradient array (or None) per parent.
    """
    _check_finite(name, out_data)
    requires = any(p.requires_grad for p in parents)
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.requires_grad = requires
    out.grad = None
    tape = active_tape()
    if requires and tape is not None:
        tape._append(name, out, parents, backward)
    return out


def backprop(loss: Tensor, tape: Tape) -> None:
    """Fill `.grad` on every requires_grad tensor reachable from `loss`.

    Tensors that participate in the tape but not in `loss` get zero grads.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backprop needs a scalar loss, got shape {loss.data.shape}")
    if not tape.owns(loss) and loss.requires_grad:
        raise ValueError("loss was not produced on this tape")
    for _, out, parents, _ in tape.records:
        out.grad = None
        for p in parents:
            p.grad = None
    loss.grad = np.ones_like(loss.data)
    for name, out, parents, backward in reversed(tape.records):
        if out.grad is None:
            continue
        grads = backward(out.grad)
        for p, g in zip(parents, grads):
            if g is None or not p.requires_grad:
                continue
            if p.grad is None:
                p.grad = np.array(g)
            else:
                p.grad += g
    for _, out, parents, _ in tape.records:
        for p in parents:
            if p.requires_grad and p.grad is None:
                p.grad = np.zeros_like(p.data)


def _binary_shapes(name: str, a: Tensor, b: Tensor):
    # scalar-with-tensor is the only permitted broadcast
    if a.data.shape != b.data.shape and a.data.size != 1 and b.data.size != 1:
        raise ShapeError(f"{name}: shape mismatch {a.data.shape} vs {b.data.shape}")


def _reduce_to(grad: np.ndarray, shape) -> np.ndarray:
    if grad.shape == tuple(shape):
        return grad
    # only the scalar broadcast case can land here
    return np.sum(grad).reshape(shape)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("add", a, b)
    out = a.data + b.data

    def backward(g):
        return _reduce_to(g, a.data.shape), _reduce_to(g, b.data.shape)

    return _emit("add", out, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("sub", a, b)
    out = a.data - b.data

    def backward(g):
        return _reduce_to(g, a.data.shape), _reduce_to(-g, b.data.shape)

    return _emit("sub", out, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("mul", a, b)
    out = a.data * b.data

    def backward(g):
        return _reduce_to(g * b.data, a.data.shape), _reduce_to(g * a.data, b.data.shape)

    return _emit("mul", out, (a, b), backward)


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        return (-g,)

    return _emit("neg", -a.data, (a,), backward)


def square(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        return (g * 2.0 * a.data,)

    return _emit("square", a.data * a.data, (a,), backward)


def log(a) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data <= 0):
        raise FloatingPointError("log of non-positive value")
    out = np.log(a.data)

    def backward(g):
        return (g / a.data,)

    return _emit("log", out, (a,), backward)


def clamp(a, lo: float, hi: float) -> Tensor:
    a = _as_tensor(a)
    out = np.clip(a.data, lo, hi)
    mask = (a.data >= lo) & (a.data <= hi)

    def backward(g):
        return (g * mask,)

    return _emit("clamp", out, (a,), backward)


def activation(a, kind: str) -> Tensor:
    """Elementwise nonlinearity; sigmoid outputs are strictly inside (0, 1)."""
    a = _as_tensor(a)
    if kind == "relu":
        out = np.maximum(a.data, 0.0)
        mask = a.data > 0

        def backward(g):
            return (g * mask,)

        return _emit("relu", out, (a,), backward)
    if kind == "sigmoid":
        out = 1.0 / (1.0 + np.exp(-a.data))

        def backward(g):
            return (g * out * (1.0 - out),)

        return _emit("sigmoid", out, (a,), backward)
    raise ValueError(f"unknown activation kind '{kind}'")


def relu(a) -> Tensor:
    return activation(a, "relu")


def sigmoid(a) -> Tensor:
    return activation(a, "sigmoid")


def reduce(a, kind: str, axes=None) -> Tensor:
    """Sum or mean over `axes` (all axes when None)."""
    a = _as_tensor(a)
    if kind not in ("sum", "mean"):
        raise ValueError(f"unknown reduce kind '{kind}'")
    if axes is None:
        axes_t = tuple(range(a.data.ndim))
    else:
        axes_t = tuple(int(ax) % a.data.ndim for ax in np.atleast_1d(axes))
    count = 1
    for ax in axes_t:
        count *= a.data.shape[ax]
    if count == 0:
        raise ShapeError("reduce over empty axes")
    out = np.sum(a.data, axis=axes_t) if kind == "sum" else np.mean(a.data, axis=axes_t)
    scale = 1.0 if kind == "sum" else 1.0 / count

    def backward(g):
        g_exp = np.expand_dims(g, axes_t) if g.ndim != a.data.ndim else g
        return (np.broadcast_to(g_exp, a.data.shape) * scale,)

    return _emit(f"reduce_{kind}", np.asarray(out, dtype=np.float64), (a,), backward)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    out = a.data.reshape(shape)

    def backward(g):
        return (g.reshape(a.data.shape),)

    return _emit("reshape", out, (a,), backward)


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis; gradient scatters back into zeros."""
    a = _as_tensor(a)
    axis = int(axis) % a.data.ndim
    if start < 0 or start + length > a.data.shape[axis]:
        raise ShapeError(
            f"narrow: [{start}, {start + length}) outside axis {axis} of shape {a.data.shape}"
        )
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)
    out = np.ascontiguousarray(a.data[sl])

    def backward(g):
        dx = np.zeros_like(a.data)
        dx[sl] = g
        return (dx,)

    return _emit("narrow", out, (a,), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _emit("matmul", out, (a, b), backward)


def bias_add(x, b) -> Tensor:
    """Add a per-channel bias `b` of shape [C] to a channels-last [..., C] tensor."""
    x, b = _as_tensor(x), _as_tensor(b)
    if b.data.ndim != 1 or x.data.ndim < 2 or x.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(f"bias_add: bias {b.data.shape} does not match input {x.data.shape}")
    out = x.data + b.data
    sum_axes = tuple(range(x.data.ndim - 1))

    def backward(g):
        return g, g.sum(axis=sum_axes)

    return _emit("bias_add", out, (x, b), backward)


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(int(ax) for ax in axes)
    inv = tuple(int(i) for i in np.argsort(axes))
    out = np.ascontiguousarray(a.data.transpose(axes))

    def backward(g):
        return (g.transpose(inv),)

    return _emit("transpose", out, (a,), backward)


def _conv_out_dim(n: int, k: int, s: int, p: int) -> int:
    return (n + 2 * p - k) // s + 1


def conv3d_cl(x, kernel, stride=(1, 1, 1), pad=(0, 0, 0)) -> Tensor:
    """Channels-last cross-correlation: [N, T, H, W, Cin] x [kT, kH, kW, Cin, Cout].

    Implemented as one matrix product per kernel offset over strided views,
    which keeps the contraction on the contiguous channel axis.
    """
    x, kernel = _as_tensor(x), _as_tensor(kernel)
    if x.data.ndim != 5 or kernel.data.ndim != 5:
        raise ShapeError(
            f"conv3d: expected 5-D input and kernel, got {x.data.shape} and {kernel.data.shape}"
        )
    n, t, h, w, cin = x.data.shape
    kt, kh, kw, kcin, cout = kernel.data.shape
    if kcin != cin:
        raise ShapeError(f"conv3d: channel axis mismatch, input has {cin}, kernel expects {kcin}")
    stride = tuple(int(s) for s in stride)
    pad = tuple(int(p) for p in pad)
    out_dims = tuple(
        _conv_out_dim(d, k, s, p)
        for d, k, s, p in zip((t, h, w), (kt, kh, kw), stride, pad)
    )
    for axis, od in zip("THW", out_dims):
        if od < 1:
            raise ShapeError(f"conv3d: kernel/stride/pad leave no output along axis {axis}")
    to, ho, wo = out_dims
    st, sh, sw = stride

    xp = np.pad(x.data, ((0, 0), (pad[0], pad[0]), (pad[1], pad[1]), (pad[2], pad[2]), (0, 0)))
    out = np.zeros((n, to, ho, wo, cout))
    for dt in range(kt):
        for dh in range(kh):
            for dw in range(kw):
                xs = xp[:, dt : dt + to * st : st, dh : dh + ho * sh : sh, dw : dw + wo * sw : sw, :]
                out += xs @ kernel.data[dt, dh, dw]
    _check_finite("conv3d", out)

    def backward(g):
        g2 = g.reshape(-1, cout)
        dk = np.empty_like(kernel.data)
        for dt in range(kt):
            for dh in range(kh):
                for dw in range(kw):
                    sl = (
                        slice(None),
                        slice(dt, dt + to * st, st),
                        slice(dh, dh + ho * sh, sh),
                        slice(dw, dw + wo * sw, sw),
                        slice(None),
                    )
                    xs = np.ascontiguousarray(xp[sl]).reshape(-1, cin)
                    dk[dt, dh, dw] = xs.T @ g2

        if stride == (1, 1, 1):
            # input gradient as a full correlation with the flipped kernel
            kf = np.ascontiguousarray(kernel.data[::-1, ::-1, ::-1].transpose(0, 1, 2, 4, 3))
            gp = np.pad(g, ((0, 0), (kt - 1, kt - 1), (kh - 1, kh - 1), (kw - 1, kw - 1), (0, 0)))
            dxp = np.zeros_like(xp)
            a0, a1, a2 = to + kt - 1, ho + kh - 1, wo + kw - 1
            full = np.zeros((n, a0, a1, a2, cin))
            for dt in range(kt):
                for dh in range(kh):
                    for dw in range(kw):
                        gs = gp[:, dt : dt + a0, dh : dh + a1, dw : dw + a2, :]
                        full += gs @ kf[dt, dh, dw]
            dxp[:, :a0, :a1, :a2, :] = full
        else:
            dxp = np.zeros_like(xp)
            for dt in range(kt):
                for dh in range(kh):
                    for dw in range(kw):
                        sl = (
                            slice(None),
                            slice(dt, dt + to * st, st),
                            slice(dh, dh + ho * sh, sh),
                            slice(dw, dw + wo * sw, sw),
                            slice(None),
                        )
                        dxp[sl] += g @ kernel.data[dt, dh, dw].T
        dx = dxp[:, pad[0] : pad[0] + t, pad[1] : pad[1] + h, pad[2] : pad[2] + w, :]
        return dx, dk

    return _emit("conv3d", out, (x, kernel), backward)


def conv3d(x, kernel, stride=(1, 1, 1), pad=(0, 0, 0)) -> Tensor:
    """Cross-correlate a [N, Cin, T, H, W] input with a [Cout, Cin, kT, kH, kW] kernel."""
    x, kernel = _as_tensor(x), _as_tensor(kernel)
    if x.data.ndim != 5 or kernel.data.ndim != 5:
        raise ShapeError(
            f"conv3d: expected 5-D input and kernel, got {x.data.shape} and {kernel.data.shape}"
        )
    x_cl = transpose(x, (0, 2, 3, 4, 1))
    k_cl = transpose(kernel, (2, 3, 4, 1, 0))
    out_cl = conv3d_cl(x_cl, k_cl, stride, pad)
    return transpose(out_cl, (0, 4, 1, 2, 3))


def upsample2x(x) -> Tensor:
    """Nearest-neighbour 2x upsampling of the H, W axes of a [N, T, H, W, C] tensor."""
    x = _as_tensor(x)
    if x.data.ndim != 5:
        raise ShapeError(f"upsample2x expects a 5-D tensor, got {x.data.shape}")
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def backward(g):
        return (
            g[:, :, 0::2, 0::2, :]
            + g[:, :, 0::2, 1::2, :]
            + g[:, :, 1::2, 0::2, :]
            + g[:, :, 1::2, 1::2, :],
        )

    return _emit("upsample2x", out, (x,), backward)


def global_max_pool(x) -> Tensor:
    """Max over all but the first and last axes: [N, ..., C] -> [N, C]."""
    x = _as_tensor(x)
    if x.data.ndim < 3:
        raise ShapeError(f"global_max_pool expects >= 3 dims, got {x.data.shape}")
    n, c = x.data.shape[0], x.data.shape[-1]
    flat = x.data.reshape(n, -1, c)
    idx = flat.argmax(axis=1)
    out = np.take_along_axis(flat, idx[:, None, :], axis=1)[:, 0, :]

    def backward(g):
        dflat = np.zeros_like(flat)
        np.put_along_axis(dflat, idx[:, None, :], g[:, None, :], axis=1)
        return (dflat.reshape(x.data.shape),)

    return _emit("global_max_pool", out, (x,), backward)


def _window_bounds(i: int, n: int, win: int):
    half = win // 2
    return max(0, i - half), min(n, i + half + 1)


def temporal_smooth(x, win: int, axis: int = 0) -> Tensor:
    """Moving average along `axis` with window `win`, truncated at the ends.

    The divisor is the number of frames actually inside the window, so the
    output stays a proper mean at the boundaries.
    """
    x = _as_tensor(x)
    if win < 1 or win % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {win}")
    n = x.data.shape[axis]
    xm = np.moveaxis(x.data, axis, 0)
    out = np.empty_like(xm)
    for i in range(n):
        lo, hi = _window_bounds(i, n, win)
        out[i] = xm[lo:hi].mean(axis=0)
    out = np.moveaxis(out, 0, axis)

    def backward(g):
        gm = np.moveaxis(g, axis, 0)
        dx = np.zeros_like(xm)
        for i in range(n):
            lo, hi = _window_bounds(i, n, win)
            dx[lo:hi] += gm[i] / (hi - lo)
        return (np.moveaxis(dx, 0, axis),)

    return _emit("temporal_smooth", out, (x,), backward)
