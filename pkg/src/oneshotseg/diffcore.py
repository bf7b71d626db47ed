"""Reverse-mode differentiation over dense rank-3 grids.

A Graph is a static, append-only list of operation records over float64
arrays shaped (height, width, channels). Leaves are named inputs (bound at
evaluation time), named parameters (held by the graph, shared across
rebuilds), and inline constants. A forward pass caches every node value so
a backward pass can accumulate exact gradients in reverse topological
order; construction order is the topological order by design.

The operation set is fixed and deliberately small: just enough for a
stride-1 zero-padded convnet and the segmentation losses built on top of
it. There is no broadcasting beyond what the individual ops define, no
higher-order differentiation, and no dynamic shapes: a graph is rebuilt
whenever an input size changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GraphError",
    "Node",
    "Graph",
    "Evaluation",
    "run_graph",
    "eval_graph",
    "backprop",
    "finite_diff_check",
    "FiniteDiffReport",
    "LeafCheck",
    "OP_KINDS",
    "SCALAR_SHAPE",
]

SCALAR_SHAPE = (1, 1, 1)

# The closed operation vocabulary. Anything the model or a loss needs must
# compile to these kinds; tests enumerate compiled graphs against this set.
OP_KINDS = frozenset(
    {
        "input",
        "param",
        "const",
        "conv2d",
        "relu",
        "hinge",
        "sigmoid",
        "clamp",
        "log",
        "add",
        "sub",
        "mul",
        "scale",
        "channel_select",
        "gather",
        "sum",
        "mean",
        "spatial_mean",
        "rownorm",
    }
)


class GraphError(ValueError):
    """Malformed graph, bad bindings, or misuse of the eval/backprop API."""


def _as_grid(value, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(value, dtype=np.float64)
    if arr.ndim != 3:
        raise GraphError(f"{what}: expected a rank-3 (H, W, C) grid, got shape {arr.shape}")
    if any(d < 1 for d in arr.shape):
        raise GraphError(f"{what}: grid dimensions must be positive, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise GraphError(f"{what}: grid contains non-finite values")
    return arr


@dataclass(frozen=True)
class Node:
    """One operation record: kind, input node ids, output shape, attributes."""

    idx: int
    op: str
    inputs: tuple[int, ...]
    shape: tuple[int, ...]
    attrs: dict = field(default_factory=dict)

    def label(self) -> str:
        return f"node {self.idx} ({self.op})"


class Graph:
    """Static operation graph with named parameters and named outputs.

    Parameters live in ``self.params`` (name -> float64 ndarray). The dict
    may be shared between several graphs built over the same parameters
    (e.g. one graph per image size); optimizers mutate the arrays in place.
    """

    def __init__(self, params: dict[str, np.ndarray] | None = None):
        self.nodes: list[Node] = []
        self.params: dict[str, np.ndarray] = params if params is not None else {}
        self.outputs: dict[str, int] = {}
        self.input_nodes: dict[str, int] = {}
        self.param_nodes: dict[str, int] = {}
        self.last_evaluation: Evaluation | None = None

    # -- construction ----------------------------------------------------

    def _node(self, op: str, inputs: tuple[int, ...], shape: tuple[int, ...], **attrs) -> int:
        for j in inputs:
            if not 0 <= j < len(self.nodes):
                raise GraphError(f"{op}: input id {j} out of range")
        node = Node(len(self.nodes), op, inputs, tuple(shape), attrs)
        self.nodes.append(node)
        return node.idx

    def _shape(self, idx: int) -> tuple[int, ...]:
        return self.nodes[idx].shape

    def input(self, name: str, shape: tuple[int, int, int]) -> int:
        if name in self.input_nodes:
            raise GraphError(f"input leaf {name!r} declared twice")
        if len(shape) != 3 or any(d < 1 for d in shape):
            raise GraphError(f"input {name!r}: bad shape {shape}")
        idx = self._node("input", (), tuple(shape), name=name)
        self.input_nodes[name] = idx
        return idx

    def param(self, name: str, value: np.ndarray | None = None) -> int:
        """Declare a named parameter leaf.

        ``value`` initializes the parameter on first declaration; a graph
        rebuilt over a shared params dict omits it and reuses the stored
        array. Parameter arrays may be any rank (conv kernels are 4-d).
        """
        if name in self.param_nodes:
            raise GraphError(f"parameter {name!r} declared twice in one graph")
        if value is not None:
            if name in self.params:
                raise GraphError(f"parameter {name!r} already initialized")
            arr = np.ascontiguousarray(value, dtype=np.float64)
            if not np.isfinite(arr).all():
                raise GraphError(f"parameter {name!r}: non-finite initial value")
            self.params[name] = arr
        elif name not in self.params:
            raise GraphError(f"parameter {name!r} has no stored value")
        idx = self._node("param", (), self.params[name].shape, name=name)
        self.param_nodes[name] = idx
        return idx

    def const(self, value) -> int:
        arr = _as_grid(value, "const")
        arr.setflags(write=False)
        return self._node("const", (), arr.shape, value=arr)

    def conv2d(self, x: int, w: int, b: int) -> int:
        """3-input convolution: activations, kernel (kh, kw, cin, cout), bias (cout,).

        Zero padding, stride 1, odd kernel sides only; spatial size is
        preserved.
        """
        xs, ws, bs = self._shape(x), self._shape(w), self._shape(b)
        if len(ws) != 4:
            raise GraphError(f"conv2d: kernel must be rank-4, got {ws}")
        kh, kw, cin, cout = ws
        if kh % 2 == 0 or kw % 2 == 0:
            raise GraphError(f"conv2d: kernel sides must be odd, got {kh}x{kw}")
        if len(xs) != 3 or xs[2] != cin:
            raise GraphError(f"conv2d: input {xs} does not match kernel channels {cin}")
        if bs != (cout,):
            raise GraphError(f"conv2d: bias shape {bs} does not match {cout} output channels")
        return self._node("conv2d", (x, w, b), (xs[0], xs[1], cout))

    def _unary(self, op: str, x: int, **attrs) -> int:
        return self._node(op, (x,), self._shape(x), **attrs)

    def relu(self, x: int) -> int:
        return self._unary("relu", x)

    def hinge(self, x: int) -> int:
        """max(0, x) elementwise; subgradient at exactly 0 is 0."""
        return self._unary("hinge", x)

    def sigmoid(self, x: int) -> int:
        return self._unary("sigmoid", x)

    def clamp(self, x: int, lo: float, hi: float) -> int:
        if not lo < hi:
            raise GraphError(f"clamp: need lo < hi, got [{lo}, {hi}]")
        return self._unary("clamp", x, lo=float(lo), hi=float(hi))

    def log(self, x: int) -> int:
        return self._unary("log", x)

    def _binary(self, op: str, a: int, b: int) -> int:
        sa, sb = self._shape(a), self._shape(b)
        if sa != sb:
            raise GraphError(f"{op}: shape mismatch {sa} vs {sb}")
        return self._node(op, (a, b), sa)

    def add(self, a: int, b: int) -> int:
        return self._binary("add", a, b)

    def sub(self, a: int, b: int) -> int:
        return self._binary("sub", a, b)

    def mul(self, a: int, b: int) -> int:
        return self._binary("mul", a, b)

    def scale(self, x: int, factor: float) -> int:
        return self._unary("scale", x, factor=float(factor))

    def channel_select(self, x: int, k: int) -> int:
        s = self._shape(x)
        if not 0 <= k < s[2]:
            raise GraphError(f"channel_select: channel {k} out of range for {s}")
        return self._node("channel_select", (x,), (s[0], s[1], 1), k=int(k))

    def gather(self, x: int, rows, cols) -> int:
        """Gather point vectors: output row i is x[rows[i], cols[i], :]."""
        s = self._shape(x)
        r = np.ascontiguousarray(rows, dtype=np.intp)
        c = np.ascontiguousarray(cols, dtype=np.intp)
        if r.ndim != 1 or r.shape != c.shape:
            raise GraphError("gather: rows/cols must be equal-length 1-d index arrays")
        if r.size < 1:
            raise GraphError("gather: need at least one point")
        if r.min() < 0 or r.max() >= s[0] or c.min() < 0 or c.max() >= s[1]:
            raise GraphError(f"gather: point out of bounds for grid {s}")
        r.setflags(write=False)
        c.setflags(write=False)
        return self._node("gather", (x,), (r.size, 1, s[2]), rows=r, cols=c)

    def sum(self, x: int) -> int:
        return self._node("sum", (x,), SCALAR_SHAPE)

    def mean(self, x: int) -> int:
        return self._node("mean", (x,), SCALAR_SHAPE)

    def spatial_mean(self, x: int) -> int:
        """Mean over the two spatial axes, keeping channels: (H, W, C) -> (1, 1, C)."""
        s = self._shape(x)
        return self._node("spatial_mean", (x,), (1, 1, s[2]))

    def rownorm(self, x: int) -> int:
        """Euclidean norm over channels per position: (H, W, C) -> (H, W, 1)."""
        s = self._shape(x)
        return self._node("rownorm", (x,), (s[0], s[1], 1))

    def mark_output(self, name: str, idx: int) -> None:
        if not 0 <= idx < len(self.nodes):
            raise GraphError(f"output {name!r}: node id {idx} out of range")
        self.outputs[name] = idx


# -- forward ------------------------------------------------------------


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _conv2d_forward(x: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Zero-padded stride-1 correlation. Returns (output without bias, im2col matrix)."""
    h, wd, _ = x.shape
    kh, kw, cin, cout = w.shape
    xp = np.pad(x, ((kh // 2, kh // 2), (kw // 2, kw // 2), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(0, 1))
    # windows: (H, W, Cin, kh, kw) -> columns ordered (kh, kw, cin) to match w
    cols = np.ascontiguousarray(windows.transpose(0, 1, 3, 4, 2)).reshape(h * wd, kh * kw * cin)
    out = cols @ w.reshape(kh * kw * cin, cout)
    return out.reshape(h, wd, cout), cols


def _conv2d_input_grad(g: np.ndarray, w: np.ndarray) -> np.ndarray:
    # Gradient w.r.t. the activations of a same-padded stride-1 correlation is
    # the same correlation of g with the spatially flipped, channel-swapped kernel.
    w_rot = np.ascontiguousarray(w[::-1, ::-1].transpose(0, 1, 3, 2))
    out, _ = _conv2d_forward(g, w_rot)
    return out


class Evaluation:
    """One cached forward pass over a graph.

    ``values[i]`` is node i's output; ``aux`` holds per-node scratch reused
    by the backward pass (im2col matrices, row norms); ``pattern`` is the
    concatenated activation pattern of every kinked op (relu/hinge sign
    masks, clamp interval masks, zero-norm masks), used by the
    finite-difference harness to detect non-differentiable crossings.
    """

    def __init__(self, graph: Graph, bindings: dict[str, np.ndarray]):
        self.graph = graph
        self.bindings = bindings
        self.values: list[np.ndarray] = []
        self.aux: dict[int, np.ndarray] = {}
        pattern_parts: list[bytes] = []

        for name in bindings:
            if name not in graph.input_nodes:
                raise GraphError(f"binding {name!r} does not match any input leaf")
        for name in graph.input_nodes:
            if name not in bindings:
                raise GraphError(f"unbound input leaf {name!r}")

        for node in graph.nodes:
            v = self._forward(node, bindings, pattern_parts)
            if not np.isfinite(v).all():
                raise GraphError(f"{node.label()}: non-finite value in forward pass")
            self.values.append(v)
        self.pattern: tuple[bytes, ...] = tuple(pattern_parts)

    def _forward(self, node: Node, bindings, pattern_parts: list[bytes]) -> np.ndarray:
        op = node.op
        vals = self.values
        if op == "input":
            arr = _as_grid(bindings[node.attrs["name"]], f"binding {node.attrs['name']!r}")
            if arr.shape != node.shape:
                raise GraphError(
                    f"binding {node.attrs['name']!r}: shape {arr.shape} does not match "
                    f"declared {node.shape}"
                )
            return arr
        if op == "param":
            return self.graph.params[node.attrs["name"]]
        if op == "const":
            return node.attrs["value"]
        x = vals[node.inputs[0]]
        if op == "conv2d":
            w = vals[node.inputs[1]]
            b = vals[node.inputs[2]]
            out, cols = _conv2d_forward(x, w)
            self.aux[node.idx] = cols
            return out + b
        if op in ("relu", "hinge"):
            pattern_parts.append((x > 0.0).tobytes())
            return np.maximum(x, 0.0)
        if op == "sigmoid":
            return _stable_sigmoid(x)
        if op == "clamp":
            lo, hi = node.attrs["lo"], node.attrs["hi"]
            pattern_parts.append(((x > lo) & (x < hi)).tobytes())
            return np.clip(x, lo, hi)
        if op == "log":
            if x.min() <= 0.0:
                raise GraphError(f"{node.label()}: log of a non-positive value")
            return np.log(x)
        if op == "add":
            return x + vals[node.inputs[1]]
        if op == "sub":
            return x - vals[node.inputs[1]]
        if op == "mul":
            return x * vals[node.inputs[1]]
        if op == "scale":
            return x * node.attrs["factor"]
        if op == "channel_select":
            k = node.attrs["k"]
            return np.ascontiguousarray(x[:, :, k : k + 1])
        if op == "gather":
            return np.ascontiguousarray(
                x[node.attrs["rows"], node.attrs["cols"], :][:, None, :]
            )
        if op == "sum":
            return np.full(SCALAR_SHAPE, x.sum())
        if op == "mean":
            return np.full(SCALAR_SHAPE, x.mean())
        if op == "spatial_mean":
            return x.mean(axis=(0, 1))[None, None, :]
        if op == "rownorm":
            r = np.sqrt(np.square(x).sum(axis=2, keepdims=True))
            self.aux[node.idx] = r
            pattern_parts.append((r > 0.0).tobytes())
            return r
        raise GraphError(f"unknown op kind {op!r}")  # pragma: no cover

    def output(self, name: str) -> np.ndarray:
        return self.values[self.graph.outputs[name]]

    def named_outputs(self) -> dict[str, np.ndarray]:
        return {name: self.values[idx] for name, idx in self.graph.outputs.items()}

    # -- backward --------------------------------------------------------

    def backward(
        self,
        output: int | None = None,
        seeds: dict[int, np.ndarray] | None = None,
    ) -> dict[str, np.ndarray]:
        """Accumulate d(scalar)/d(leaf) for every parameter and bound input.

        Either ``output`` names a scalar node (seed gradient 1), or
        ``seeds`` maps node ids to upstream gradients — the result is then
        the gradient of sum_i <seed_i, node_i>. Leaves with no path to the
        seeded nodes receive exactly-zero gradients.
        """
        n = len(self.graph.nodes)
        grads: list[np.ndarray | None] = [None] * n
        if seeds is None:
            if output is None:
                raise GraphError("backward: need an output node or explicit seeds")
            node = self.graph.nodes[output]
            if node.shape != SCALAR_SHAPE:
                raise GraphError(f"backprop output must be scalar (1,1,1), got {node.shape}")
            grads[output] = np.ones(SCALAR_SHAPE)
        else:
            for idx, g in seeds.items():
                g = np.ascontiguousarray(g, dtype=np.float64)
                if g.shape != self.graph.nodes[idx].shape:
                    raise GraphError(
                        f"seed for {self.graph.nodes[idx].label()}: shape {g.shape} "
                        f"does not match {self.graph.nodes[idx].shape}"
                    )
                grads[idx] = g.copy()

        def acc(idx: int, delta: np.ndarray) -> None:
            if grads[idx] is None:
                grads[idx] = np.zeros(self.graph.nodes[idx].shape)
            grads[idx] += delta

        for node in reversed(self.graph.nodes):
            g = grads[node.idx]
            if g is None or not node.inputs:
                continue
            self._backward(node, g, acc)

        result: dict[str, np.ndarray] = {}
        for name, arr in self.graph.params.items():
            idx = self.graph.param_nodes.get(name)
            got = grads[idx] if idx is not None else None
            result[name] = got if got is not None else np.zeros(arr.shape)
        for name, idx in self.graph.input_nodes.items():
            got = grads[idx]
            result[name] = got if got is not None else np.zeros(self.graph.nodes[idx].shape)
        for name, arr in result.items():
            if not np.isfinite(arr).all():
                raise GraphError(f"non-finite gradient for leaf {name!r}")
        return result

    def _backward(self, node: Node, g: np.ndarray, acc) -> None:
        op = node.op
        vals = self.values
        x = vals[node.inputs[0]]
        if op == "conv2d":
            w = vals[node.inputs[1]]
            cols = self.aux[node.idx]
            kh, kw, cin, cout = w.shape
            gf = g.reshape(-1, cout)
            acc(node.inputs[1], (cols.T @ gf).reshape(kh, kw, cin, cout))
            acc(node.inputs[2], gf.sum(axis=0))
            acc(node.inputs[0], _conv2d_input_grad(g, w))
        elif op in ("relu", "hinge"):
            acc(node.inputs[0], g * (x > 0.0))
        elif op == "sigmoid":
            s = vals[node.idx]
            acc(node.inputs[0], g * s * (1.0 - s))
        elif op == "clamp":
            inside = (x > node.attrs["lo"]) & (x < node.attrs["hi"])
            acc(node.inputs[0], g * inside)
        elif op == "log":
            acc(node.inputs[0], g / x)
        elif op == "add":
            acc(node.inputs[0], g)
            acc(node.inputs[1], g)
        elif op == "sub":
            acc(node.inputs[0], g)
            acc(node.inputs[1], -g)
        elif op == "mul":
            acc(node.inputs[0], g * vals[node.inputs[1]])
            acc(node.inputs[1], g * x)
        elif op == "scale":
            acc(node.inputs[0], g * node.attrs["factor"])
        elif op == "channel_select":
            dx = np.zeros(self.graph.nodes[node.inputs[0]].shape)
            dx[:, :, node.attrs["k"] : node.attrs["k"] + 1] = g
            acc(node.inputs[0], dx)
        elif op == "gather":
            dx = np.zeros(self.graph.nodes[node.inputs[0]].shape)
            np.add.at(dx, (node.attrs["rows"], node.attrs["cols"]), g[:, 0, :])
            acc(node.inputs[0], dx)
        elif op == "sum":
            acc(node.inputs[0], np.full(x.shape, g[0, 0, 0]))
        elif op == "mean":
            acc(node.inputs[0], np.full(x.shape, g[0, 0, 0] / x.size))
        elif op == "spatial_mean":
            h, wd, _ = x.shape
            acc(node.inputs[0], np.broadcast_to(g / (h * wd), x.shape).copy())
        elif op == "rownorm":
            r = self.aux[node.idx]
            safe = np.where(r > 0.0, r, 1.0)
            acc(node.inputs[0], np.where(r > 0.0, g / safe, 0.0) * x)
        else:  # pragma: no cover
            raise GraphError(f"unknown op kind {op!r}")


def run_graph(graph: Graph, bindings: dict[str, np.ndarray]) -> Evaluation:
    """Forward pass returning the full Evaluation (values + backward capability)."""
    return Evaluation(graph, bindings)


def eval_graph(graph: Graph, bindings: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Evaluate the graph; returns its named outputs. Deterministic."""
    ev = Evaluation(graph, bindings)
    graph.last_evaluation = ev
    return ev.named_outputs()


def backprop(graph: Graph, output: int) -> dict[str, np.ndarray]:
    """Gradients of the designated scalar node w.r.t. every leaf.

    Requires a prior `eval_graph` on this graph instance (the cached forward
    values are reused).
    """
    if graph.last_evaluation is None:
        raise GraphError("backprop: graph has not been evaluated")
    return graph.last_evaluation.backward(output=output)


# -- finite-difference harness -------------------------------------------


@dataclass
class LeafCheck:
    name: str
    max_rel_err: float
    worst_index: int
    n_checked: int
    n_excluded: int
    failures: list[tuple[int, float, float, float]]  # (flat index, analytic, numeric, rel err)


@dataclass
class FiniteDiffReport:
    step: float
    tolerance: float
    leaves: list[LeafCheck]

    @property
    def passed(self) -> bool:
        return all(not leaf.failures for leaf in self.leaves)

    @property
    def max_rel_err(self) -> float:
        return max((leaf.max_rel_err for leaf in self.leaves), default=0.0)

    @property
    def n_excluded(self) -> int:
        return sum(leaf.n_excluded for leaf in self.leaves)

    def format(self) -> str:
        lines = [f"finite-difference check  step={self.step:g}  tolerance={self.tolerance:g}"]
        for leaf in self.leaves:
            status = "ok" if not leaf.failures else f"FAIL ({len(leaf.failures)} entries)"
            lines.append(
                f"  {leaf.name:<24} max_rel_err={leaf.max_rel_err:.3e} "
                f"checked={leaf.n_checked} excluded={leaf.n_excluded}  {status}"
            )
        return "\n".join(lines)


def _sole_scalar_output(graph: Graph) -> int:
    if len(graph.outputs) != 1:
        raise GraphError(
            f"finite_diff_check: graph must mark exactly one output, has {len(graph.outputs)}"
        )
    idx = next(iter(graph.outputs.values()))
    if graph.nodes[idx].shape != SCALAR_SHAPE:
        raise GraphError("finite_diff_check: designated output is not scalar")
    return idx


def finite_diff_check(
    graph: Graph,
    bindings: dict[str, np.ndarray],
    step: float = 1e-3,
    tolerance: float = 1e-4,
) -> FiniteDiffReport:
    """Compare backprop gradients against central finite differences.

    For every entry of every leaf (parameters and bound inputs), the
    numeric derivative (f(x+h) - f(x-h)) / 2h is compared to the analytic
    one with relative error |a-b| / max(1e-8, |a|+|b|). An entry is only
    checked where the numeric reference is itself trustworthy; otherwise
    it is counted as excluded, for either of two reasons detected from
    finite-difference data alone:

    - the +h/-h evaluations land on different activation patterns (a relu,
      hinge, clamp, or zero-norm boundary was crossed inside the interval,
      where a central difference is meaningless), or
    - the h and h/2 central differences disagree beyond a quarter of the
      tolerance: the O(h^2) truncation error has not converged at this
      step, which happens at high-curvature points and where a sum of
      terms nearly cancels.
    """
    if step <= 0:
        raise GraphError("finite_diff_check: step must be positive")
    out = _sole_scalar_output(graph)
    work = {name: np.array(arr, dtype=np.float64) for name, arr in bindings.items()}
    base = Evaluation(graph, work)
    analytic = base.backward(output=out)

    def value_and_pattern() -> tuple[float, tuple[bytes, ...]]:
        ev = Evaluation(graph, work)
        return float(ev.values[out][0, 0, 0]), ev.pattern

    leaves: list[LeafCheck] = []
    targets = [(name, graph.params[name]) for name in graph.params]
    targets += [(name, work[name]) for name in graph.input_nodes]
    for name, arr in targets:
        flat = arr.reshape(-1)
        ana = analytic[name].reshape(-1)
        max_err, worst, excluded = 0.0, -1, 0
        failures: list[tuple[int, float, float, float]] = []
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_hi, pat_hi = value_and_pattern()
            flat[i] = orig - step
            f_lo, pat_lo = value_and_pattern()
            flat[i] = orig + 0.5 * step
            f_hi_half, _ = value_and_pattern()
            flat[i] = orig - 0.5 * step
            f_lo_half, _ = value_and_pattern()
            flat[i] = orig
            if pat_hi != pat_lo:
                excluded += 1
                continue
            numeric = (f_hi - f_lo) / (2.0 * step)
            # Step-halving convergence test: the central difference carries
            # O(h^2) truncation error, so where the h and h/2 quadratures
            # disagree (high curvature, or a near-cancelling sum of terms)
            # the numeric value is not a trustworthy reference and the
            # component is excluded, using finite-difference data alone.
            halved = (f_hi_half - f_lo_half) / step
            drift = abs(numeric - halved) / max(1e-8, abs(numeric) + abs(halved))
            if drift > 0.25 * tolerance:
                excluded += 1
                continue
            rel = abs(numeric - ana[i]) / max(1e-8, abs(numeric) + abs(ana[i]))
            if rel > max_err:
                max_err, worst = rel, i
            if rel > tolerance:
                failures.append((i, float(ana[i]), numeric, rel))
        leaves.append(LeafCheck(name, max_err, worst, flat.size - excluded, excluded, failures))
    return FiniteDiffReport(step, tolerance, leaves)
