"""Child-Sum Tree-LSTM: forward recursion, backward pass, model file I/O.

Per node t with children C(t), input embedding w_t and per-child states
(h_k, c_k):

    f_tk = sigmoid(W_for w_t + U_for h_k + b_for)      (one gate per child)
    h~   = sum_k h_k
    i_t  = sigmoid(W_in w_t + U_in h~ + b_in)
    c~_t = tanh(W_ce w_t + U_ce h~ + b_ce)
    c_t  = i_t * c~_t + sum_k f_tk * c_k
    o_t  = sigmoid(W_out w_t + U_out h~ + b_out)
    h_t  = o_t * tanh(c_t)

Leaves use h~ = 0 and an empty forget sum. Children are aggregated by sum, so
the state is invariant to child order. Trees are flattened to post-order
arrays once and reused; both passes are iterative, never recursive, so depth
is bounded by the configured limit rather than the interpreter stack.

During pretraining an optional dropout mask pair is applied to the embedding
input w_t and to the aggregate h~ (inverted scaling, so inference needs no
adjustment).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jsonio
from .corpus import EncodedTree, Vocabulary
from .embedding import EmbeddingMatrix, INIT_SCALE, init_embeddings
from .errors import DepthLimitError, DocumentError
from .rng import stream

DEFAULT_DEPTH_LIMIT = 10000

GATE_NAMES = ("forget", "input", "cell", "output")


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form: stable for any magnitude without overflow warnings
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


@dataclass
class GateParams:
    W: np.ndarray  # (hidden_dim, d)
    U: np.ndarray  # (hidden_dim, hidden_dim)
    b: np.ndarray  # (hidden_dim,)


@dataclass
class NodeState:
    h: np.ndarray
    c: np.ndarray


@dataclass
class TreeLstmModel:
    vocab: Vocabulary
    embeddings: EmbeddingMatrix
    forget: GateParams
    input: GateParams
    cell: GateParams
    output: GateParams
    hidden_dim: int

    @property
    def d(self) -> int:
        return self.embeddings.dim

    def gates(self) -> tuple[tuple[str, GateParams], ...]:
        return (("forget", self.forget), ("input", self.input),
                ("cell", self.cell), ("output", self.output))


def init_model(vocab: Vocabulary, d: int = 32, hidden_dim: int | None = None,
               seed: int = 0) -> TreeLstmModel:
    """Model with uniform [-0.05, 0.05] weights and zero biases, drawn from
    the "init" stream of `seed` in a fixed order (embeddings, then W and U of
    forget/input/cell/output)."""
    if hidden_dim is None:
        hidden_dim = d
    if hidden_dim < 1:
        raise ValueError(f"hidden_dim must be >= 1, got {hidden_dim}")
    rng = stream(seed, "init")
    embeddings = init_embeddings(d, len(vocab), rng=rng)
    gates = []
    for _ in GATE_NAMES:
        W = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(hidden_dim, d))
        U = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(hidden_dim, hidden_dim))
        gates.append(GateParams(W, U, np.zeros(hidden_dim)))
    return TreeLstmModel(vocab, embeddings, *gates, hidden_dim=hidden_dim)


def param_arrays(model: TreeLstmModel) -> dict[str, np.ndarray]:
    """Live views of every trainable tensor, keyed by a stable name."""
    out = {"embeddings": model.embeddings.values}
    for name, gate in model.gates():
        out[f"{name}.W"] = gate.W
        out[f"{name}.U"] = gate.U
        out[f"{name}.b"] = gate.b
    return out


@dataclass
class FlatTree:
    """Post-order array form of one EncodedTree (root is the last node).

    Edges (parent, child) are stored grouped by parent: node i's incoming
    child edges occupy edge_child[edge_start[i]:edge_start[i+1]].
    """

    indices: np.ndarray       # (n,) vocab index per node
    children: list[np.ndarray]  # per node, post-order positions of children
    edge_parent: np.ndarray   # (E,)
    edge_child: np.ndarray    # (E,)
    edge_start: np.ndarray    # (n+1,)
    depth: int

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def n_edges(self) -> int:
        return len(self.edge_child)

    @property
    def n_internal(self) -> int:
        return int(np.count_nonzero(np.diff(self.edge_start)))


def flatten(tree: EncodedTree, depth_limit: int = DEFAULT_DEPTH_LIMIT,
            name: str | None = None) -> FlatTree:
    indices: list[int] = []
    children: list[np.ndarray] = []
    positions: list[int] = []
    work: list[tuple[EncodedTree, int, bool]] = [(tree, 1, False)]
    max_depth = 0
    while work:
        node, depth, expanded = work.pop()
        if not expanded:
            if depth > depth_limit:
                where = f" in {name}" if name else ""
                raise DepthLimitError(
                    f"tree depth exceeds the limit of {depth_limit} nodes{where}")
            if depth > max_depth:
                max_depth = depth
            work.append((node, depth, True))
            for child in reversed(node.children):
                work.append((child, depth + 1, False))
        else:
            k = len(node.children)
            child_pos = positions[len(positions) - k:] if k else []
            if k:
                del positions[len(positions) - k:]
            pos = len(indices)
            indices.append(node.index)
            children.append(np.asarray(child_pos, dtype=np.intp))
            positions.append(pos)
    counts = np.array([len(c) for c in children], dtype=np.intp)
    edge_start = np.zeros(len(indices) + 1, dtype=np.intp)
    np.cumsum(counts, out=edge_start[1:])
    edge_child = (np.concatenate(children) if edge_start[-1] else
                  np.empty(0, dtype=np.intp))
    edge_parent = np.repeat(np.arange(len(indices), dtype=np.intp), counts)
    return FlatTree(np.asarray(indices, dtype=np.intp), children,
                    edge_parent, edge_child, edge_start, max_depth)


@dataclass
class DropoutMasks:
    """Inverted-dropout masks: entries are 0 or 1/(1-rate)."""

    w: np.ndarray    # (n, d) applied to the embedding input
    agg: np.ndarray  # (n, hidden_dim) applied to the aggregate h~


def sample_masks(flat: FlatTree, rate: float, d: int, hidden_dim: int,
                 rng: np.random.Generator) -> DropoutMasks:
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    scale = 1.0 / (1.0 - rate)
    w = (rng.random((flat.n, d)) >= rate) * scale
    agg = (rng.random((flat.n, hidden_dim)) >= rate) * scale
    return DropoutMasks(w, agg)


@dataclass
class ForwardCache:
    X: np.ndarray    # (n, d) embedding input after masking
    HT: np.ndarray   # (n, hd) aggregate h~ after masking (zero at leaves)
    I: np.ndarray    # (n, hd) input gate
    CB: np.ndarray   # (n, hd) cell candidate c~
    O: np.ndarray    # (n, hd) output gate
    TC: np.ndarray   # (n, hd) tanh(c)
    H: np.ndarray    # (n, hd)
    C: np.ndarray    # (n, hd)
    F: np.ndarray    # (E, hd) forget gates, grouped by parent
    masks: DropoutMasks | None


def forward(flat: FlatTree, model: TreeLstmModel,
            masks: DropoutMasks | None = None) -> ForwardCache:
    n, hd = flat.n, model.hidden_dim
    X = model.embeddings.values.T[flat.indices]
    if masks is not None:
        X = X * masks.w
    gf, gi, gc, go = model.forget, model.input, model.cell, model.output
    # x-dependent gate terms for the whole tree in four matmuls
    AF = X @ gf.W.T + gf.b
    AI = X @ gi.W.T + gi.b
    AC = X @ gc.W.T + gc.b
    AO = X @ go.W.T + go.b
    UfT, UiT, UcT, UoT = gf.U.T, gi.U.T, gc.U.T, go.U.T
    I = sigmoid(AI)
    CB = np.tanh(AC)
    O = sigmoid(AO)
    C = I * CB
    HT = np.zeros((n, hd))
    F = np.empty((flat.n_edges, hd))
    edge_start = flat.edge_start
    TC = np.tanh(C)
    H = O * TC
    # leaf states above are final; internal nodes are recomputed in post-order
    for i in np.flatnonzero(np.diff(edge_start)):
        ch = flat.children[i]
        Hch = H[ch]
        s0, s1 = edge_start[i], edge_start[i + 1]
        f = sigmoid(AF[i] + Hch @ UfT)
        F[s0:s1] = f
        s = Hch.sum(axis=0)
        ht = s * masks.agg[i] if masks is not None else s
        HT[i] = ht
        i_g = sigmoid(AI[i] + ht @ UiT)
        cb = np.tanh(AC[i] + ht @ UcT)
        c = i_g * cb + (f * C[ch]).sum(axis=0)
        o = sigmoid(AO[i] + ht @ UoT)
        tc = np.tanh(c)
        I[i] = i_g
        CB[i] = cb
        O[i] = o
        C[i] = c
        TC[i] = tc
        H[i] = o * tc
    if not np.all(np.isfinite(H)):
        raise ArithmeticError("non-finite hidden state in tree forward pass")
    return ForwardCache(X, HT, I, CB, O, TC, H, C, F, masks)


def backward(flat: FlatTree, model: TreeLstmModel, cache: ForwardCache,
             dH: np.ndarray, grads: dict[str, np.ndarray]) -> None:
    """Backpropagation through structure.

    `dH` holds the loss gradient injected at each node's hidden state and is
    consumed (mutated) in reverse post-order; parameter gradients are added
    into `grads` (keys as in param_arrays).
    """
    n, hd = flat.n, model.hidden_dim
    gf, gi, gc, go = model.forget, model.input, model.cell, model.output
    edge_start = flat.edge_start
    masks = cache.masks
    dC = np.zeros((n, hd))
    dAi = np.empty((n, hd))
    dAc = np.empty((n, hd))
    dAo = np.empty((n, hd))
    dAf = np.empty((flat.n_edges, hd))
    I, CB, O, TC, C, F = cache.I, cache.CB, cache.O, cache.TC, cache.C, cache.F
    for i in range(n - 1, -1, -1):
        dh = dH[i]
        o = O[i]
        tc = TC[i]
        dc = dC[i] + dh * o * (1.0 - tc * tc)
        da_o = dh * tc * o * (1.0 - o)
        i_g = I[i]
        cb = CB[i]
        da_i = dc * cb * i_g * (1.0 - i_g)
        da_c = dc * i_g * (1.0 - cb * cb)
        dAi[i] = da_i
        dAc[i] = da_c
        dAo[i] = da_o
        s0, s1 = edge_start[i], edge_start[i + 1]
        if s1 > s0:
            ch = flat.children[i]
            f = F[s0:s1]
            da_f = (C[ch] * dc) * f * (1.0 - f)
            dAf[s0:s1] = da_f
            dC[ch] += f * dc
            dht = da_i @ gi.U + da_c @ gc.U + da_o @ go.U
            if masks is not None:
                dht *= masks.agg[i]
            dH[ch] += dht + da_f @ gf.U
    X, HT, H = cache.X, cache.HT, cache.H
    grads["input.W"] += dAi.T @ X
    grads["input.U"] += dAi.T @ HT
    grads["input.b"] += dAi.sum(axis=0)
    grads["cell.W"] += dAc.T @ X
    grads["cell.U"] += dAc.T @ HT
    grads["cell.b"] += dAc.sum(axis=0)
    grads["output.W"] += dAo.T @ X
    grads["output.U"] += dAo.T @ HT
    grads["output.b"] += dAo.sum(axis=0)
    dX = dAi @ gi.W + dAc @ gc.W + dAo @ go.W
    if flat.n_edges:
        grads["forget.W"] += dAf.T @ X[flat.edge_parent]
        grads["forget.U"] += dAf.T @ H[flat.edge_child]
        grads["forget.b"] += dAf.sum(axis=0)
        np.add.at(dX, flat.edge_parent, dAf @ gf.W)
    if masks is not None:
        dX *= masks.w
    np.add.at(grads["embeddings"].T, flat.indices, dX)


def t_lstm(node: EncodedTree, model: TreeLstmModel,
           depth_limit: int = DEFAULT_DEPTH_LIMIT) -> NodeState:
    """(h, c) at the root of `node`."""
    flat = flatten(node, depth_limit)
    cache = forward(flat, model)
    return NodeState(cache.H[-1].copy(), cache.C[-1].copy())


def forward_root(record, model: TreeLstmModel,
                 depth_limit: int = DEFAULT_DEPTH_LIMIT) -> np.ndarray:
    """Root hidden vector of one FileRecord: the file's feature vector."""
    from .corpus import encode  # local import to avoid cycle at module load

    encoded = encode(record.tree, model.vocab)
    flat = flatten(encoded, depth_limit, name=record.file_id)
    cache = forward(flat, model)
    return cache.H[-1].copy()


def model_to_document(model: TreeLstmModel, head_u: np.ndarray) -> dict:
    doc = {
        "format_version": 1,
        "d": model.d,
        "hidden_dim": model.hidden_dim,
        "vocab": list(model.vocab.tokens),
        "embeddings": model.embeddings.values.tolist(),
        "head": {"U": head_u.tolist()},
    }
    for name, gate in model.gates():
        doc[name] = {"W": gate.W.tolist(), "U": gate.U.tolist(), "b": gate.b.tolist()}
    return doc


def _array_field(doc: dict, key: str, shape: tuple[int, ...], source: str) -> np.ndarray:
    try:
        arr = np.asarray(doc[key], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentError(f"{source}: bad or missing field {key!r}") from exc
    if arr.shape != shape:
        raise DocumentError(f"{source}: field {key!r} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise DocumentError(f"{source}: field {key!r} contains non-finite entries")
    return arr


def model_from_document(doc, source: str = "model") -> tuple[TreeLstmModel, np.ndarray]:
    if not isinstance(doc, dict):
        raise DocumentError(f"{source}: document must be an object")
    if doc.get("format_version") != 1:
        raise DocumentError(f"{source}: format_version must be 1")
    tokens = doc.get("vocab")
    if (not isinstance(tokens, list) or not tokens
            or not all(isinstance(t, str) for t in tokens)):
        raise DocumentError(f"{source}: 'vocab' must be a non-empty string array")
    try:
        vocab = Vocabulary(tuple(tokens))
    except ValueError as exc:
        raise DocumentError(f"{source}: {exc}") from exc
    d, hd = doc.get("d"), doc.get("hidden_dim")
    if not isinstance(d, int) or not isinstance(hd, int) or d < 1 or hd < 1:
        raise DocumentError(f"{source}: 'd' and 'hidden_dim' must be positive integers")
    emb = EmbeddingMatrix(_array_field(doc, "embeddings", (d, len(tokens)), source))
    gates = []
    for name in GATE_NAMES:
        group = doc.get(name)
        if not isinstance(group, dict):
            raise DocumentError(f"{source}: missing gate group {name!r}")
        gates.append(GateParams(
            _array_field(group, "W", (hd, d), f"{source}.{name}"),
            _array_field(group, "U", (hd, hd), f"{source}.{name}"),
            _array_field(group, "b", (hd,), f"{source}.{name}"),
        ))
    head_group = doc.get("head")
    if not isinstance(head_group, dict):
        raise DocumentError(f"{source}: missing field 'head'")
    head_u = _array_field(head_group, "U", (len(tokens), hd), f"{source}.head")
    return TreeLstmModel(vocab, emb, *gates, hidden_dim=hd), head_u


def save_model(path, model: TreeLstmModel, head_u: np.ndarray) -> None:
    jsonio.write(path, model_to_document(model, head_u))


def load_model(path) -> tuple[TreeLstmModel, np.ndarray]:
    return model_from_document(jsonio.read(path), str(path))
