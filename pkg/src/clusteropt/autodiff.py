"""Dense-matrix reverse-mode autodiff.

Everything is a 2-D float64 numpy array. A Node wraps a value plus the
closure that pushes an upstream gradient to its parents; `backward` runs a
reverse topological sweep from a scalar (1x1) loss and accumulates into
every leaf created with requires_grad=True.

Kept deliberately small: only the primitives the pipeline needs, no
broadcasting beyond row-vector-to-matrix, no higher-order derivatives.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


def _as_matrix(value) -> np.ndarray:
    a = np.asarray(value, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    elif a.ndim != 2:
        raise ShapeError(f"expected at most 2-D data, got shape {a.shape}")
    return a


class Node:
    """One vertex of the computation graph.

    value: 2-D float64 array. parents: upstream Nodes. _push: closure that
    receives this node's gradient and adds each parent's share to
    parent.grad. Leaves have no parents; only requires_grad leaves (and
    interior nodes that depend on one) receive gradients.
    """

    __slots__ = ("value", "parents", "_push", "requires_grad", "grad", "name")

    def __init__(self, value, parents=(), push=None, requires_grad=False, name=""):
        self.value = _as_matrix(value)
        self.parents = tuple(parents)
        self._push = push
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Node{tag}(shape={self.value.shape}, requires_grad={self.requires_grad})"


def leaf(value, requires_grad=False, name="") -> Node:
    return Node(value, requires_grad=requires_grad, name=name)


def constant(value, name="") -> Node:
    return Node(value, name=name)


def _node(value, parents, push) -> Node:
    out = Node(value, parents=parents, push=push)
    if not out.requires_grad:
        out._push = None
    return out


def _accum(parent: Node, g: np.ndarray):
    if not parent.requires_grad:
        return
    if parent.grad is None:
        parent.grad = np.zeros_like(parent.value)
    parent.grad += g


def dump_csv(x: Node | np.ndarray, path):
    """Debugging aid: write the value as comma-separated rows."""
    v = x.value if isinstance(x, Node) else np.asarray(x)
    np.savetxt(path, v, delimiter=",")


def assert_finite(x: Node | np.ndarray, what="tensor"):
    v = x.value if isinstance(x, Node) else x
    if not np.all(np.isfinite(v)):
        bad = int(np.size(v) - np.sum(np.isfinite(v)))
        raise FloatingPointError(f"{what} has {bad} non-finite entries")


def _check_same_shape(a: Node, b: Node, op: str):
    if a.value.shape != b.value.shape:
        raise ShapeError(f"{op}: shape mismatch {a.value.shape} vs {b.value.shape}")


# ---------------------------------------------------------------------------
# primitives

def add(a: Node, b: Node) -> Node:
    # row-vector-to-matrix broadcast is the only one allowed
    if a.value.shape != b.value.shape:
        if b.value.shape == (1, a.value.shape[1]):
            def push(g):
                _accum(a, g)
                _accum(b, g.sum(axis=0, keepdims=True))
            return _node(a.value + b.value, (a, b), push)
        raise ShapeError(f"add: shape mismatch {a.value.shape} vs {b.value.shape}")

    def push(g):
        _accum(a, g)
        _accum(b, g)
    return _node(a.value + b.value, (a, b), push)


def sub(a: Node, b: Node) -> Node:
    return add(a, scale(b, -1.0))


def scale(a: Node, c: float) -> Node:
    c = float(c)

    def push(g):
        _accum(a, c * g)
    return _node(c * a.value, (a,), push)


def mul(a: Node, b: Node) -> Node:
    av, bv = a.value, b.value
    if av.shape != bv.shape:
        if bv.shape == (1, av.shape[1]):
            def push(g):
                _accum(a, g * bv)
                _accum(b, (g * av).sum(axis=0, keepdims=True))
            return _node(av * bv, (a, b), push)
        raise ShapeError(f"mul: shape mismatch {av.shape} vs {bv.shape}")

    def push(g):
        _accum(a, g * bv)
        _accum(b, g * av)
    return _node(av * bv, (a, b), push)


def mul_scalar(a: Node, s: Node) -> Node:
    """Multiply a matrix by a 1x1 node (explicit scalar broadcast)."""
    if s.value.shape != (1, 1):
        raise ShapeError(f"mul_scalar: scalar must be 1x1, got {s.value.shape}")
    av, sv = a.value, s.value[0, 0]

    def push(g):
        _accum(a, g * sv)
        _accum(s, np.array([[np.sum(g * av)]]))
    return _node(av * sv, (a, s), push)


def reciprocal(a: Node) -> Node:
    y = 1.0 / a.value

    def push(g):
        _accum(a, -g * y * y)
    return _node(y, (a,), push)


def matmul(a: Node, b: Node) -> Node:
    if a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(f"matmul: inner dims {a.value.shape} @ {b.value.shape}")
    av, bv = a.value, b.value

    def push(g):
        _accum(a, g @ bv.T)
        _accum(b, av.T @ g)
    return _node(av @ bv, (a, b), push)


def transpose(a: Node) -> Node:
    def push(g):
        _accum(a, g.T)
    return _node(a.value.T, (a,), push)


def rowsum(a: Node) -> Node:
    n = a.value.shape[1]

    def push(g):
        _accum(a, np.repeat(g, n, axis=1))
    return _node(a.value.sum(axis=1, keepdims=True), (a,), push)


def colsum(a: Node) -> Node:
    n = a.value.shape[0]

    def push(g):
        _accum(a, np.repeat(g, n, axis=0))
    return _node(a.value.sum(axis=0, keepdims=True), (a,), push)


def sum_all(a: Node) -> Node:
    shape = a.value.shape

    def push(g):
        _accum(a, np.full(shape, g[0, 0]))
    return _node(np.array([[a.value.sum()]]), (a,), push)


def mean_all(a: Node) -> Node:
    return scale(sum_all(a), 1.0 / a.value.size)


def relu(a: Node) -> Node:
    mask = a.value > 0

    def push(g):
        _accum(a, g * mask)
    return _node(a.value * mask, (a,), push)


def sigmoid(a: Node) -> Node:
    v = a.value
    y = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                 np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))

    def push(g):
        _accum(a, g * y * (1.0 - y))
    return _node(y, (a,), push)


def exp(a: Node) -> Node:
    y = np.exp(a.value)

    def push(g):
        _accum(a, g * y)
    return _node(y, (a,), push)


def log(a: Node) -> Node:
    av = a.value

    def push(g):
        _accum(a, g / av)
    return _node(np.log(av), (a,), push)


def softplus(a: Node) -> Node:
    v = a.value
    y = np.maximum(v, 0.0) + np.log1p(np.exp(-np.abs(v)))
    sig = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                   np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))

    def push(g):
        _accum(a, g * sig)
    return _node(y, (a,), push)


def clamp(a: Node, lo: float, hi: float) -> Node:
    v = a.value
    mask = (v > lo) & (v < hi)

    def push(g):
        _accum(a, g * mask)
    return _node(np.clip(v, lo, hi), (a,), push)


def softmax_rows(a: Node, temperature: float = 1.0) -> Node:
    """Row-wise softmax of temperature*a, shift-stabilized."""
    t = float(temperature)
    z = t * a.value
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)

    def push(g):
        inner = (g * y).sum(axis=1, keepdims=True)
        _accum(a, t * y * (g - inner))
    return _node(y, (a,), push)


def softmin_rows(a: Node, temperature: float = 1.0) -> Node:
    """Row-wise softmin: softmax of -temperature*a. temperature 0 is uniform."""
    return softmax_rows(a, -float(temperature))


def l2_normalize_rows(a: Node, eps: float = 1e-12) -> Node:
    v = a.value
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    safe = np.maximum(norms, eps)
    y = v / safe

    def push(g):
        # rows at the eps floor are plain 1/eps scalings
        floored = norms <= eps
        gn = g / safe - v * ((g * v).sum(axis=1, keepdims=True)) / safe**3
        _accum(a, np.where(floored, g / eps, gn))
    return _node(y, (a,), push)


def cosine_similarity(a: Node, b: Node, eps: float = 1e-12, strict: bool = False) -> Node:
    """Pairwise cosine similarity: rows of a (n x p) vs rows of b (K x p) -> n x K."""
    if a.value.shape[1] != b.value.shape[1]:
        raise ShapeError(f"cosine_similarity: dims {a.value.shape} vs {b.value.shape}")
    if strict:
        for m, who in ((a.value, "a"), (b.value, "b")):
            if np.any(np.linalg.norm(m, axis=1) == 0):
                raise ValueError(f"cosine_similarity: zero-norm row in {who}")
    return matmul(l2_normalize_rows(a, eps), transpose(l2_normalize_rows(b, eps)))


def dropout(a: Node, p: float, rng) -> Node:
    """Inverted dropout: zero entries with prob p, rescale the rest by 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout: p={p} outside [0,1)")
    if p == 0.0:
        return a
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    keep = (rng.random(a.value.shape) >= p) / (1.0 - p)

    def push(g):
        _accum(a, g * keep)
    return _node(a.value * keep, (a,), push)


def concat(nodes, axis: int = 1) -> Node:
    nodes = list(nodes)
    sizes = [n.value.shape[axis] for n in nodes]
    offsets = np.cumsum([0] + sizes)

    def push(g):
        for node, lo, hi in zip(nodes, offsets[:-1], offsets[1:]):
            _accum(node, g[:, lo:hi] if axis == 1 else g[lo:hi, :])
    return _node(np.concatenate([n.value for n in nodes], axis=axis), tuple(nodes), push)


def detach(a: Node) -> Node:
    return Node(a.value.copy())


def pair_dot(z: Node, u_idx, v_idx) -> Node:
    """Row-pair dot products: out[e] = z[u[e]] . z[v[e]], an (E x 1) node."""
    u = np.asarray(u_idx, dtype=np.intp)
    v = np.asarray(v_idx, dtype=np.intp)
    zv = z.value
    y = np.einsum("ij,ij->i", zv[u], zv[v]).reshape(-1, 1)

    def push(g):
        gz = np.zeros_like(zv)
        np.add.at(gz, u, g * zv[v])
        np.add.at(gz, v, g * zv[u])
        _accum(z, gz)
    return _node(y, (z,), push)


# ---------------------------------------------------------------------------
# reverse sweep

def backward(loss: Node) -> dict:
    """Backpropagate from a scalar loss; returns {node: grad} for grad leaves.

    Gradients accumulate (+=) across fan-out, so shared subexpressions are
    handled correctly. Also left on node.grad for every reachable
    requires_grad node.
    """
    if loss.value.shape != (1, 1):
        raise ShapeError(f"backward: loss must be 1x1, got {loss.value.shape}")

    order: list[Node] = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            order.append(node)
        else:
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))

    for node in order:
        node.grad = None
    loss.grad = np.ones((1, 1))
    for node in reversed(order):
        if node._push is not None and node.grad is not None:
            node._push(node.grad)

    return {n: n.grad for n in order if n.grad is not None and not n.parents}


# ---------------------------------------------------------------------------
# Adam

class AdamState:
    """Standard Adam with bias correction over a dict of named parameters."""

    def __init__(self, params: dict, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}


def adam_step(params: dict, grads: dict, state: AdamState) -> AdamState:
    """One Adam update, in place on the arrays in `params`."""
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for k, p in params.items():
        g = grads.get(k)
        if g is None:
            continue
        state.m[k] = b1 * state.m[k] + (1 - b1) * g
        state.v[k] = b2 * state.v[k] + (1 - b2) * g * g
        mhat = state.m[k] / (1 - b1**t)
        vhat = state.v[k] / (1 - b2**t)
        p -= state.lr * mhat / (np.sqrt(vhat) + state.eps)
    return state
