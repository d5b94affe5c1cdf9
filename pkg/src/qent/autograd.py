"""Minimal reverse-mode autodiff over float64 numpy arrays.

Exactly the layers the classifiers need: valid-padding 2-D cross-correlation,
dense affine maps, ReLU, sigmoid, binary cross entropy, and a handful of
elementwise/reduction ops for composing consistency penalties.  Heavy
contractions are phrased as matrix products so BLAS does the work.

Graphs are built eagerly; ``backward()`` on a scalar accumulates gradients
into every reachable tensor with ``requires_grad``.  No op mutates its
inputs; gradients are the only mutable channel and are cleared explicitly.
"""

import struct

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BCE_CLAMP = 1e-7

CHECKPOINT_MAGIC = b"QENM"
CHECKPOINT_VERSION = 1


class Tensor:
    """Array node of the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def accumulate(self, g: np.ndarray) -> None:
        # First contribution copies (g may alias another node's grad buffer).
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-accumulate gradients from a scalar node."""
        if self.data.size != 1:
            raise ValueError("backward() starts from a scalar loss")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # small composition helpers -------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, scalar):
        return scale(self, scalar)

    __rmul__ = __mul__

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _node(data, parents, backward) -> Tensor:
    """Result tensor; graph edges only where a parent can want gradients."""
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(g)

    return _node(a.data + b.data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(-g)

    return _node(a.data - b.data, (a, b), bwd)


def scale(a: Tensor, scalar) -> Tensor:
    s = float(scalar)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(s * g)

    return _node(s * a.data, (a,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    orig = a.data.shape

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g.reshape(orig))

    return _node(a.data.reshape(shape), (a,), bwd)


def absolute(a: Tensor) -> Tensor:
    sign = np.sign(a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * sign)

    return _node(np.abs(a.data), (a,), bwd)


def square(a: Tensor) -> Tensor:
    def bwd(g):
        if a.requires_grad:
            a.accumulate(2.0 * g * a.data)

    return _node(np.square(a.data), (a,), bwd)


def mean(a: Tensor) -> Tensor:
    n = a.data.size

    def bwd(g):
        if a.requires_grad:
            a.accumulate(np.full_like(a.data, float(g) / n))

    return _node(np.array(a.data.mean()), (a,), bwd)


def take_columns(a: Tensor, idx) -> Tensor:
    """Reorder/select columns of a 2-D tensor (used for label-index remaps)."""
    idx = np.asarray(idx, dtype=np.intp)
    if a.data.ndim != 2:
        raise ValueError("take_columns expects a 2-D tensor")

    def bwd(g):
        if a.requires_grad:
            ga = np.zeros_like(a.data)
            np.add.at(ga, (slice(None), idx), g)
            a.accumulate(ga)

    return _node(a.data[:, idx], (a,), bwd)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * mask)

    return _node(np.where(mask, a.data, 0.0), (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * out * (1.0 - out))

    return _node(out, (a,), bwd)


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map: rows of x through weight matrix w plus bias b."""
    if x.data.ndim != 2 or w.data.ndim != 2 or b.data.ndim != 1:
        raise ValueError("dense expects x[B,F], w[F,U], b[U]")
    if x.data.shape[1] != w.data.shape[0] or w.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"dense: incompatible shapes x{x.data.shape} w{w.data.shape} b{b.data.shape}"
        )

    def bwd(g):
        if x.requires_grad:
            x.accumulate(g @ w.data.T)
        if w.requires_grad:
            w.accumulate(x.data.T @ g)
        if b.requires_grad:
            b.accumulate(g.sum(axis=0))

    return _node(x.data @ w.data + b.data, (x, w, b), bwd)


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """Valid-padding cross-correlation: x[B,C,H,W] * kernels[O,C,kh,kw] + bias[O].

    Output spatial size is (H-kh+1, W-kw+1).  Input gradients come from the
    full correlation of the output gradient with the flipped kernels.
    """
    if x.data.ndim != 4 or kernels.data.ndim != 4 or bias.data.ndim != 1:
        raise ValueError("conv2d expects x[B,C,H,W], kernels[O,C,kh,kw], bias[O]")
    bsz, c_in, h, w = x.data.shape
    c_out, c_k, kh, kw = kernels.data.shape
    if c_k != c_in:
        raise ValueError(f"conv2d: {c_in} input channels vs kernels for {c_k}")
    if bias.data.shape[0] != c_out:
        raise ValueError("conv2d: bias length must equal output channels")
    if kh > h or kw > w:
        raise ValueError(f"conv2d: kernel ({kh},{kw}) larger than input ({h},{w})")
    ho, wo = h - kh + 1, w - kw + 1

    def window_matrix(arr):
        win = sliding_window_view(arr, (kh, kw), axis=(2, 3))
        return win.transpose(0, 2, 3, 1, 4, 5).reshape(-1, arr.shape[1] * kh * kw)

    kmat = kernels.data.reshape(c_out, c_in * kh * kw)
    wmat = window_matrix(x.data)  # kept for the kernel-gradient contraction
    out = (wmat @ kmat.T).reshape(bsz, ho, wo, c_out)
    out = out.transpose(0, 3, 1, 2) + bias.data[None, :, None, None]

    def bwd(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(-1, c_out)
        if kernels.requires_grad:
            kernels.accumulate((gmat.T @ wmat).reshape(kernels.data.shape))
        if bias.requires_grad:
            bias.accumulate(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gp = np.zeros((bsz, c_out, h + kh - 1, w + kw - 1))
            gp[:, :, kh - 1 : kh - 1 + ho, kw - 1 : kw - 1 + wo] = g
            kflip = kernels.data[:, :, ::-1, ::-1]
            kfmat = kflip.transpose(1, 0, 2, 3).reshape(c_in, c_out * kh * kw)
            gx = (window_matrix(gp) @ kfmat.T).reshape(bsz, h, w, c_in)
            x.accumulate(gx.transpose(0, 3, 1, 2))

    return _node(out, (x, kernels, bias), bwd)


def bce_mean(p: Tensor, targets) -> Tensor:
    """Binary cross entropy averaged over every element.

    Probabilities are clamped to [BCE_CLAMP, 1 - BCE_CLAMP] before the logs;
    the clamp is treated as a hard gate in the backward pass.  Raises
    ArithmeticError when the loss comes out non-finite (NaN poisoning is
    caught here rather than mid-graph).
    """
    q = np.asarray(targets, dtype=np.float64)
    if q.shape != p.data.shape:
        raise ValueError(f"bce_mean: targets {q.shape} vs predictions {p.data.shape}")
    pc = np.clip(p.data, BCE_CLAMP, 1.0 - BCE_CLAMP)
    loss = -(q * np.log(pc) + (1.0 - q) * np.log(1.0 - pc)).mean()
    if not np.isfinite(loss):
        raise ArithmeticError("binary cross entropy is not finite")

    def bwd(g):
        if p.requires_grad:
            inside = (p.data > BCE_CLAMP) & (p.data < 1.0 - BCE_CLAMP)
            grad = np.where(inside, -(q / pc - (1.0 - q) / (1.0 - pc)), 0.0)
            p.accumulate(float(g) * grad / q.size)

    return _node(np.array(loss), (p,), bwd)


class Adam:
    """Adaptive-moment gradient descent over a fixed parameter list."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            denom = np.sqrt(v / c2)
            denom += self.eps
            update = m / denom
            update *= self.lr / c1
            p.data = p.data - update

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def save_params(path, arrays) -> None:
    """Write float64 arrays to a checkpoint; round-trips bit-exactly."""
    with open(path, "wb") as f:
        f.write(struct.pack("<4sII", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(arrays)))
        for a in arrays:
            a = np.ascontiguousarray(a, dtype="<f8")
            f.write(struct.pack("<I", a.ndim))
            f.write(struct.pack(f"<{a.ndim}I", *a.shape))
            f.write(a.tobytes())


def load_params(path) -> list:
    with open(path, "rb") as f:
        raw = f.read()
    head = struct.calcsize("<4sII")
    if len(raw) < head:
        raise ValueError(f"{path}: not a checkpoint (too short)")
    magic, version, n_arrays = struct.unpack_from("<4sII", raw)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    arrays = []
    off = head
    for _ in range(n_arrays):
        (ndim,) = struct.unpack_from("<I", raw, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}I", raw, off)
        off += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        if off + 8 * count > len(raw):
            raise ValueError(f"{path}: checkpoint truncated")
        arrays.append(
            np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        )
        off += 8 * count
    if off != len(raw):
        raise ValueError(f"{path}: {len(raw) - off} trailing bytes")
    return arrays
