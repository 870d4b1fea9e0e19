"""Sequence losses: label-smoothed NLL and CTC."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import tensor as T
from .tensor import Tensor


def label_smoothed_nll(logits: Tensor, targets, smoothing: float, pad_id: int,
                       example_weights=None) -> Tensor:
    """Mean over non-pad positions of smoothed negative log-likelihood.

    Per position: ``(1 - smoothing) * NLL(target) + smoothing * mean_v NLL(v)``.
    ``logits`` is [B, T, V] (or [T, V]); ``targets`` holds ids in [0, V) or
    ``pad_id``. ``example_weights`` optionally weights whole examples.
    """
    if not (0.0 <= smoothing < 1.0):
        raise ValueError("smoothing must lie in [0, 1)")
    targets = np.asarray(targets)
    squeeze = logits.ndim == 2
    if squeeze:
        logits = T.reshape(logits, (1,) + logits.shape)
        targets = targets[None, :]
    v = logits.shape[-1]
    pad = targets == pad_id
    bad = ~pad & ((targets < 0) | (targets >= v))
    if bad.any():
        raise ValueError(f"target id out of range at {np.argwhere(bad)[0].tolist()}")
    if pad.all():
        raise ValueError("label_smoothed_nll got only pad targets")

    lsm = T.log_softmax(logits, axis=-1)
    safe = np.where(pad, 0, targets)
    nll_tok = -T.take_along_last(lsm, safe)
    per_pos = (1.0 - smoothing) * nll_tok
    if smoothing > 0.0:
        per_pos = per_pos + smoothing * -T.tmean(lsm, axis=-1)
    mask = (~pad).astype(np.float64)
    if example_weights is not None:
        mask = mask * np.asarray(example_weights, dtype=np.float64)[:, None]
    weighted = per_pos * mask
    return T.tsum(weighted) / float(mask.sum())


class CtcResult(NamedTuple):
    loss: Tensor
    infeasible: bool


def _logaddexp3(a, b, c):
    return np.logaddexp(np.logaddexp(a, b), c)


def min_ctc_length(target) -> int:
    """Shortest frame count that admits a CTC alignment of ``target``."""
    target = list(target)
    repeats = sum(1 for i in range(1, len(target)) if target[i] == target[i - 1])
    return len(target) + repeats


def ctc_loss(log_probs: Tensor, target, blank_id: int) -> CtcResult:
    """Negative log probability of all CTC alignments of ``target``.

    ``log_probs`` is [T, V], each row the log of a normalized distribution.
    The forward-backward recursion runs over the blank-interleaved extended
    target; the node's gradient is the (negated) per-frame posterior over
    emitted symbols. When no alignment fits in T frames the loss is +inf and
    ``infeasible`` is set.
    """
    lp = log_probs.data
    t_len, v = lp.shape
    target = np.asarray(target, dtype=np.int64)
    if target.size and (target.min() < 0 or target.max() >= v):
        raise ValueError("ctc target id out of range")
    if blank_id < 0 or blank_id >= v:
        raise ValueError("blank_id out of range")
    if np.isin(blank_id, target):
        raise ValueError("ctc target must not contain the blank id")
    if t_len < min_ctc_length(target):
        return CtcResult(Tensor(np.inf), True)

    ext = np.full(2 * len(target) + 1, blank_id, dtype=np.int64)
    ext[1::2] = target
    s_len = ext.size
    # skip transition s-2 -> s allowed only into a fresh non-blank label
    skip = np.zeros(s_len, dtype=bool)
    if s_len > 2:
        skip[2:] = (ext[2:] != blank_id) & (ext[2:] != ext[:-2])

    neg = -np.inf
    alpha = np.full((t_len, s_len), neg)
    alpha[0, 0] = lp[0, ext[0]]
    if s_len > 1:
        alpha[0, 1] = lp[0, ext[1]]
    for t in range(1, t_len):
        prev = alpha[t - 1]
        s1 = np.full(s_len, neg)
        s1[1:] = prev[:-1]
        s2 = np.full(s_len, neg)
        if s_len > 2:
            s2[2:] = prev[:-2]
        s2 = np.where(skip, s2, neg)
        alpha[t] = lp[t, ext] + _logaddexp3(prev, s1, s2)

    log_z = np.logaddexp(alpha[-1, -1], alpha[-1, -2] if s_len > 1 else neg)
    if not np.isfinite(log_z):
        return CtcResult(Tensor(np.inf), False)

    beta = np.full((t_len, s_len), neg)
    beta[-1, -1] = lp[-1, ext[-1]]
    if s_len > 1:
        beta[-1, -2] = lp[-1, ext[-2]]
    skip_fwd = np.zeros(s_len, dtype=bool)
    if s_len > 2:
        skip_fwd[:-2] = skip[2:]
    for t in range(t_len - 2, -1, -1):
        nxt = beta[t + 1]
        s1 = np.full(s_len, neg)
        s1[:-1] = nxt[1:]
        s2 = np.full(s_len, neg)
        if s_len > 2:
            s2[:-2] = nxt[2:]
        s2 = np.where(skip_fwd, s2, neg)
        beta[t] = lp[t, ext] + _logaddexp3(nxt, s1, s2)

    # posterior over (t, state); alpha and beta both include the emission
    # at t, so subtract it once
    gamma = alpha + beta - lp[:, ext]
    post = np.exp(gamma - log_z)
    dlp = np.zeros_like(lp)
    cols = np.broadcast_to(ext, (t_len, s_len))
    rows = np.broadcast_to(np.arange(t_len)[:, None], (t_len, s_len))
    np.add.at(dlp, (rows.ravel(), cols.ravel()), post.ravel())

    def backward(g):
        return ((log_probs, -float(g) * dlp),)

    loss = T.custom_op(np.float64(-log_z), (log_probs,), backward)
    return CtcResult(loss, False)
