"""Independent reference implementations used to check the library.

Everything here is written straight from the defining formulas, favoring
clarity over speed, and shares no code with the package: recursive node
evaluation instead of flattened arrays, explicit pair counting instead of
rank statistics, exhaustive enumeration instead of closed forms.
"""

from __future__ import annotations

import numpy as np


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def node_state(tree, model):
    """(h, c) at the root by direct recursive evaluation of the five gate
    equations (per-child forget gates, summed child hidden states)."""
    w = model.embeddings.values[:, tree.index]
    child_states = [node_state(child, model) for child in tree.children]
    h_sum = np.zeros(model.hidden_dim)
    fc_sum = np.zeros(model.hidden_dim)
    for h_k, c_k in child_states:
        f_k = sigmoid(model.forget.W @ w + model.forget.U @ h_k + model.forget.b)
        h_sum = h_sum + h_k
        fc_sum = fc_sum + f_k * c_k
    i_t = sigmoid(model.input.W @ w + model.input.U @ h_sum + model.input.b)
    c_tilde = np.tanh(model.cell.W @ w + model.cell.U @ h_sum + model.cell.b)
    c_t = i_t * c_tilde + fc_sum
    o_t = sigmoid(model.output.W @ w + model.output.U @ h_sum + model.output.b)
    return o_t * np.tanh(c_t), c_t


def sequential_lstm_chain(indices, model):
    """n-step sequential LSTM with per-step forget gates, equivalent to the
    tree recursion on a path tree whose leaf is indices[0]."""
    h = np.zeros(model.hidden_dim)
    c = np.zeros(model.hidden_dim)
    first = True
    for index in indices:
        w = model.embeddings.values[:, index]
        if first:
            h_in = np.zeros(model.hidden_dim)
            fc = np.zeros(model.hidden_dim)
            first = False
        else:
            f = sigmoid(model.forget.W @ w + model.forget.U @ h + model.forget.b)
            h_in = h
            fc = f * c
        i = sigmoid(model.input.W @ w + model.input.U @ h_in + model.input.b)
        cb = np.tanh(model.cell.W @ w + model.cell.U @ h_in + model.cell.b)
        c = i * cb + fc
        o = sigmoid(model.output.W @ w + model.output.U @ h_in + model.output.b)
        h = o * np.tanh(c)
    return h, c


def tree_nll(tree, model, head_u):
    """(summed NLL, internal count) over internal nodes: softmax(head_u @
    mean child h) must predict the parent's own index."""
    total, count = 0.0, 0
    if tree.children:
        child_h = [node_state(child, model)[0] for child in tree.children]
        g = np.mean(child_h, axis=0)
        z = head_u @ g
        z = z - z.max()
        p = np.exp(z) / np.exp(z).sum()
        total += -np.log(p[tree.index])
        count += 1
        for child in tree.children:
            t, c = tree_nll(child, model, head_u)
            total += t
            count += c
    return total, count


def corpus_loss(trees, model, head_u):
    total, count = 0.0, 0
    for tree in trees:
        t, c = tree_nll(tree, model, head_u)
        total += t
        count += c
    return total / count


def prf(predictions, labels):
    """(precision, recall, f_measure) by counting list elements one by one;
    zero denominators yield 0."""
    tp = sum(1 for p, y in zip(predictions, labels) if p == 1 and y == 1)
    fp = sum(1 for p, y in zip(predictions, labels) if p == 1 and y == 0)
    fn = sum(1 for p, y in zip(predictions, labels) if p == 0 and y == 1)
    pr = tp / (tp + fp) if tp + fp else 0.0
    re = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * pr * re / (pr + re) if pr + re else 0.0
    return pr, re, f


def auc_pairs(scores, labels):
    """AUC by enumerating every (positive, negative) pair; ties get half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    credit = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                credit += 1.0
            elif sp == sn:
                credit += 0.5
    return credit / (len(pos) * len(neg))


def best_threshold_accuracy(x, y):
    """Best single-feature threshold classifier accuracy, by enumerating all
    midpoints (both orientations)."""
    values = sorted(set(x))
    cuts = [values[0] - 1.0]
    cuts += [(a + b) / 2 for a, b in zip(values, values[1:])]
    cuts += [values[-1] + 1.0]
    best = 0.0
    n = len(y)
    for cut in cuts:
        above = sum(1 for xi, yi in zip(x, y) if (xi > cut) == (yi == 1))
        best = max(best, above / n, (n - above) / n)
    return best


def logistic_grid_loss(X, y, l2, w_range, b_range, steps):
    """Smallest L2-regularized logistic loss over a dense (w, b) grid for
    1-D inputs."""
    X = np.asarray(X, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float)
    best = np.inf
    for w in np.linspace(*w_range, steps):
        margins_base = (2 * y - 1) * (X * w)
        for b in np.linspace(*b_range, steps):
            margins = margins_base + (2 * y - 1) * b
            loss = np.logaddexp(0.0, -margins).mean() + 0.5 * l2 * w * w
            best = min(best, loss)
    return best
