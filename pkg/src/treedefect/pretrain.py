"""Unsupervised pretraining: predict each parent's label from its children.

For every internal node t the head turns the average of the children's hidden
states, g_t = (1/|C(t)|) sum_k h_k, into a distribution over the vocabulary
via softmax(U g_t); the loss is the mean negative log probability of the true
parent label over all internal nodes. (The Tree-LSTM cell itself aggregates
children by sum; the head deliberately averages.)

Training is RMSprop over minibatches of whole trees with inverted dropout on
the embedding input and the cell aggregate, early stopping on validation
perplexity, and best-snapshot selection. All randomness flows from named
streams of the config seed ("split", "init", "batches", "dropout"), so equal
seeds and corpora give bit-identical models.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import FileRecord, Vocabulary, build_vocabulary, encode
from .errors import CorpusError
from .rng import stream
from .treelstm import (DEFAULT_DEPTH_LIMIT, DropoutMasks, FlatTree, TreeLstmModel,
                       backward, flatten, forward, init_model, param_arrays,
                       sample_masks)

HEAD_INIT_SCALE = 0.05


@dataclass
class PretrainHead:
    """Softmax weights: one row per vocabulary token, U shape (|V|, hidden)."""

    U: np.ndarray

    def __post_init__(self):
        if self.U.ndim != 2:
            raise ValueError(f"head weights must be 2-D, got shape {self.U.shape}")
        if not np.all(np.isfinite(self.U)):
            raise ValueError("head weights must be finite")


def init_head(vocab_size: int, hidden_dim: int, seed: int = 0,
              rng: np.random.Generator | None = None) -> PretrainHead:
    if rng is None:
        rng = stream(seed, "init", "head")
    return PretrainHead(rng.uniform(-HEAD_INIT_SCALE, HEAD_INIT_SCALE,
                                    size=(vocab_size, hidden_dim)))


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    rms_decay: float = 0.9
    rms_epsilon: float = 1e-6
    dropout_rate: float = 0.5
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    batch_size: int = 8
    embedding_dim: int = 32
    hidden_dim: int | None = None
    vocab_size: int = 10000
    min_count: int = 2
    depth_limit: int = DEFAULT_DEPTH_LIMIT

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 <= self.rms_decay < 1:
            raise ValueError(f"rms_decay must be in [0, 1), got {self.rms_decay}")
        if self.rms_epsilon <= 0:
            raise ValueError(f"rms_epsilon must be > 0, got {self.rms_epsilon}")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.max_epochs < 0:
            raise ValueError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if len(self.split) != 3 or any(f <= 0 for f in self.split):
            raise ValueError(f"split must be three positive fractions, got {self.split}")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {self.split}")
        self.split = tuple(float(f) for f in self.split)


@dataclass
class RmspropState:
    mean_square: dict[str, np.ndarray]

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "RmspropState":
        return cls({name: np.zeros_like(arr) for name, arr in params.items()})


def rmsprop_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                 state: RmspropState, config: TrainConfig) -> tuple[dict, RmspropState]:
    """In-place update: ms <- rho ms + (1-rho) g^2; theta <- theta - eta g/sqrt(ms+eps)."""
    rho, eta, eps = config.rms_decay, config.learning_rate, config.rms_epsilon
    for name, theta in params.items():
        g = grads[name]
        ms = state.mean_square[name]
        ms *= rho
        ms += (1.0 - rho) * g * g
        theta -= eta * g / np.sqrt(ms + eps)
    return params, state


def _softmax_rows(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    np.exp(Z, out=Z)
    Z /= Z.sum(axis=1, keepdims=True)
    return Z


def parent_distribution(children_states, head: PretrainHead) -> np.ndarray:
    """Softmax over the vocabulary of head.U times the average child h."""
    if len(children_states) == 0:
        raise ValueError("parent_distribution requires at least one child state")
    g = np.mean([s.h for s in children_states], axis=0)
    z = head.U @ g
    z = z - z.max()
    p = np.exp(z)
    p /= p.sum()
    return p


def _tree_loss(flat: FlatTree, model: TreeLstmModel, head: PretrainHead,
               masks: DropoutMasks | None, grads: dict[str, np.ndarray] | None,
               scale: float = 1.0) -> tuple[float, int]:
    """(summed NLL, internal-node count) for one tree; accumulates gradients
    scaled by `scale` into `grads` when given."""
    cache = forward(flat, model, masks)
    internal = np.flatnonzero(np.diff(flat.edge_start))
    m = len(internal)
    if m == 0:
        return 0.0, 0
    G = np.empty((m, model.hidden_dim))
    for row, i in enumerate(internal):
        G[row] = cache.H[flat.children[i]].mean(axis=0)
    targets = flat.indices[internal]
    P = _softmax_rows(G @ head.U.T)
    nll = -float(np.log(P[np.arange(m), targets]).sum())
    if grads is not None:
        dZ = P
        dZ[np.arange(m), targets] -= 1.0
        dZ *= scale
        grads["head.U"] += dZ.T @ G
        dG = dZ @ head.U
        dH = np.zeros_like(cache.H)
        for row, i in enumerate(internal):
            ch = flat.children[i]
            dH[ch] += dG[row] / len(ch)
        backward(flat, model, cache, dH, grads)
    return nll, m


def _require_trees(trees) -> None:
    if not trees:
        raise CorpusError("corpus of trees is empty")


def _flatten_all(trees, depth_limit: int) -> list[FlatTree]:
    return [t if isinstance(t, FlatTree) else flatten(t, depth_limit) for t in trees]


def corpus_loss(trees, model: TreeLstmModel, head: PretrainHead,
                masks: list[DropoutMasks] | None = None,
                depth_limit: int = DEFAULT_DEPTH_LIMIT) -> float:
    """Mean NLL of true parent labels over all internal nodes of `trees`.

    `masks` (one DropoutMasks per tree, from sample_masks) makes this the
    training-time loss; None evaluates without dropout.
    """
    _require_trees(trees)
    flats = _flatten_all(trees, depth_limit)
    total, count = 0.0, 0
    for k, flat in enumerate(flats):
        nll, m = _tree_loss(flat, model, head, masks[k] if masks else None, None)
        total += nll
        count += m
    if count == 0:
        raise CorpusError("corpus has no internal nodes; nothing to predict")
    return total / count


def loss_and_gradients(trees, model: TreeLstmModel, head: PretrainHead,
                       masks: list[DropoutMasks] | None = None,
                       depth_limit: int = DEFAULT_DEPTH_LIMIT
                       ) -> tuple[float, dict[str, np.ndarray]]:
    """Corpus loss plus exact reverse-mode gradients for every tensor
    (embeddings, four gate groups, head); dropout masks are held fixed."""
    _require_trees(trees)
    flats = _flatten_all(trees, depth_limit)
    count = sum(f.n_internal for f in flats)
    if count == 0:
        raise CorpusError("corpus has no internal nodes; nothing to predict")
    params = param_arrays(model)
    grads = {name: np.zeros_like(arr) for name, arr in params.items()}
    grads["head.U"] = np.zeros_like(head.U)
    scale = 1.0 / count
    total = 0.0
    for k, flat in enumerate(flats):
        nll, _ = _tree_loss(flat, model, head, masks[k] if masks else None,
                            grads, scale)
        total += nll
    return total / count, grads


def gradients(trees, model: TreeLstmModel, head: PretrainHead,
              masks: list[DropoutMasks] | None = None,
              depth_limit: int = DEFAULT_DEPTH_LIMIT) -> dict[str, np.ndarray]:
    return loss_and_gradients(trees, model, head, masks, depth_limit)[1]


def perplexity(model: TreeLstmModel, head: PretrainHead, trees,
               depth_limit: int = DEFAULT_DEPTH_LIMIT) -> float:
    """exp(corpus loss) with dropout disabled; |V| for a uniform predictor."""
    return float(np.exp(corpus_loss(trees, model, head, None, depth_limit)))


def split_records(records: list[FileRecord], fractions: tuple[float, float, float],
                  seed: int) -> tuple[list[FileRecord], list[FileRecord], list[FileRecord]]:
    """Seeded shuffle, then contiguous train/validation/test partitions."""
    n = len(records)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_test = n - n_train - n_val
    for name, size in (("train", n_train), ("validation", n_val), ("test", n_test)):
        if size <= 0:
            raise CorpusError(
                f"{name} partition is empty: {n} records split as {fractions}")
    perm = stream(seed, "split").permutation(n)
    shuffled = [records[i] for i in perm]
    return (shuffled[:n_train], shuffled[n_train:n_train + n_val],
            shuffled[n_train + n_val:])


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_perplexity: float
    improved: bool


@dataclass
class PretrainResult:
    model: TreeLstmModel
    head: PretrainHead
    log: list[EpochStats] = field(default_factory=list)
    best_epoch: int | None = None
    val_perplexity: float | None = None
    test_perplexity: float | None = None


def pretrain(records: list[FileRecord], config: TrainConfig | None = None,
             vocab: Vocabulary | None = None) -> PretrainResult:
    """Train the Tree-LSTM and head on `records` without defect labels.

    The corpus is shuffled and split per config.split; the vocabulary, unless
    given, is built from the training partition only (validation/test tokens
    outside it encode to the unknown). Returns the snapshot with the best
    validation perplexity and the per-epoch log.
    """
    if config is None:
        config = TrainConfig()
    if not records:
        raise CorpusError("pretraining corpus is empty")
    train_recs, val_recs, test_recs = split_records(records, config.split, config.seed)
    if vocab is None:
        vocab = build_vocabulary([r.tree for r in train_recs],
                                 config.vocab_size, config.min_count)
    model = init_model(vocab, config.embedding_dim, config.hidden_dim, config.seed)
    head = init_head(len(vocab), model.hidden_dim, config.seed)

    def flats_of(recs):
        return [flatten(encode(r.tree, vocab), config.depth_limit, name=r.file_id)
                for r in recs]

    train_flats, val_flats, test_flats = map(flats_of, (train_recs, val_recs, test_recs))
    result = PretrainResult(model, head)
    if config.max_epochs == 0:
        result.test_perplexity = perplexity(model, head, test_flats)
        return result

    params = param_arrays(model)
    params["head.U"] = head.U
    state = RmspropState.zeros_like(params)
    batch_rng = stream(config.seed, "batches")
    dropout_rng = stream(config.seed, "dropout")
    best_perp = np.inf
    best_snapshot: dict[str, np.ndarray] | None = None
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = batch_rng.permutation(len(train_flats))
        epoch_nll, epoch_nodes = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = [train_flats[i] for i in order[start:start + config.batch_size]]
            count = sum(f.n_internal for f in batch)
            if config.dropout_rate > 0:
                masks = [sample_masks(f, config.dropout_rate, model.d,
                                      model.hidden_dim, dropout_rng) for f in batch]
            else:
                masks = [None] * len(batch)
            if count == 0:
                continue
            grads = {name: np.zeros_like(arr) for name, arr in params.items()}
            scale = 1.0 / count
            for flat, mask in zip(batch, masks):
                nll, _ = _tree_loss(flat, model, head, mask, grads, scale)
                epoch_nll += nll
            epoch_nodes += count
            rmsprop_step(params, grads, state, config)
        if epoch_nodes == 0:
            raise CorpusError("training partition has no internal nodes")
        val_perp = perplexity(model, head, val_flats)
        improved = val_perp < best_perp
        if improved:
            best_perp = val_perp
            best_snapshot = {name: arr.copy() for name, arr in params.items()}
            result.best_epoch = epoch
            stale = 0
        else:
            stale += 1
        result.log.append(EpochStats(epoch, epoch_nll / epoch_nodes, val_perp, improved))
        if stale >= config.patience:
            break
    assert best_snapshot is not None
    for name, arr in params.items():
        arr[...] = best_snapshot[name]
    result.val_perplexity = best_perp
    result.test_perplexity = perplexity(model, head, test_flats)
    return result


def pretrain_with_config(records, config: TrainConfig, seed: int) -> PretrainResult:
    """pretrain under `config` with its seed replaced by `seed`."""
    return pretrain(records, replace(config, seed=seed))


def write_training_log(path, log: list[EpochStats]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_perplexity", "improved"])
        for row in log:
            writer.writerow([row.epoch, repr(row.train_loss),
                             repr(row.val_perplexity), int(row.improved)])
