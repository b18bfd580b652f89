"""CTC loss over a per-frame posterior lattice.

The loss of a target sequence is the negative log of the summed probability
of every frame-level path that collapses to it (remove adjacent repeats,
then blanks). A log-domain forward recursion over the blank-interleaved
target computes the loss; the backward recursion yields per-frame label
occupancies and from them the exact gradient with respect to the logits.
A path-enumeration oracle cross-checks small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .alphabet import BLANK_ID

PROBABILITIES = "probabilities"
LOGITS = "logits"

NEG_INF = float("-inf")

ROW_SUM_TOL = 1e-9
ORACLE_MAX_T = 10
ORACLE_MAX_K = 6
_ORACLE_CHUNK = 1 << 20


class BlankInTarget(ValueError):
    """Raised when a target sequence contains the blank label."""


class InfeasibleAlignment(ValueError):
    """Raised when no frame-level path can produce the target."""


class OracleTooLarge(ValueError):
    """Raised when brute-force enumeration would exceed the size cap."""


@dataclass(frozen=True)
class PosteriorLattice:
    """T x K matrix of per-frame label scores; column 0 is the blank."""

    values: np.ndarray
    kind: Literal["probabilities", "logits"]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 2:
            raise ValueError(f"lattice must be 2-d, got shape {v.shape}")
        t, k = v.shape
        if t < 1 or k < 2:
            raise ValueError(f"lattice needs T >= 1 and K >= 2, got {v.shape}")
        if self.kind == PROBABILITIES:
            if np.any(v < 0) or np.any(v > 1):
                raise ValueError("probability entries must lie in [0, 1]")
            if np.max(np.abs(v.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
                raise ValueError("probability rows must sum to 1")
        elif self.kind == LOGITS:
            if not np.all(np.isfinite(v)):
                raise ValueError("logits must be finite")
        else:
            raise ValueError(f"unknown lattice kind {self.kind!r}")

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_labels(self) -> int:
        return self.values.shape[1]

    def log_probs(self) -> np.ndarray:
        """Row-normalized log-probabilities; zeros map to -inf."""
        if self.kind == LOGITS:
            return log_softmax(self.values)
        with np.errstate(divide="ignore"):
            return np.log(self.values)

    def probs(self) -> np.ndarray:
        if self.kind == PROBABILITIES:
            return self.values
        return np.exp(log_softmax(self.values))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


@dataclass(frozen=True)
class ExpandedTarget:
    """Blank-interleaved target: blanks at even positions, labels at odd."""

    labels: tuple[int, ...]
    original_length: int


def expand_target(y: Sequence[int]) -> ExpandedTarget:
    """Interleave blanks around and between the target labels (length 2L+1)."""
    y = list(y)
    if BLANK_ID in y:
        raise BlankInTarget("target sequences must not contain the blank label")
    out = [BLANK_ID]
    for label in y:
        out.append(label)
        out.append(BLANK_ID)
    return ExpandedTarget(labels=tuple(out), original_length=len(y))


def min_frames_for(y: Sequence[int]) -> int:
    """Shortest T admitting a valid path: L plus one per adjacent repeat."""
    reps = sum(1 for a, b in zip(y, y[1:]) if a == b)
    return len(y) + reps


@dataclass(frozen=True)
class CtcResult:
    log_loss: float
    grad: np.ndarray  # T x K, d(-log p)/d logit


def _skip_allowed(ext: np.ndarray) -> np.ndarray:
    """allow[s]: the s-2 -> s transition is legal (label differs, non-blank)."""
    allow = np.zeros(len(ext), dtype=bool)
    allow[2:] = (ext[2:] != BLANK_ID) & (ext[2:] != ext[:-2])
    return allow


def forward_backward(lattice: PosteriorLattice, y: Sequence[int]):
    """Log-domain alpha/beta over the expanded target.

    Returns (log_alpha, log_beta, log_total, ext) where beta excludes the
    emission at its own frame, so sum_s alpha[t, s] * beta[t, s] equals the
    total path probability at every t.
    """
    exp_target = expand_target(y)
    ext = np.asarray(exp_target.labels, dtype=np.int64)
    t_frames = lattice.num_frames
    if t_frames < min_frames_for(y):
        raise InfeasibleAlignment(
            f"target of length {len(list(y))} needs at least {min_frames_for(y)} frames, lattice has {t_frames}"
        )
    lp_full = lattice.log_probs()
    lp = lp_full[:, ext]  # T x S
    s_len = len(ext)
    allow = _skip_allowed(ext)

    log_alpha = np.full((t_frames, s_len), NEG_INF)
    log_alpha[0, 0] = lp[0, 0]
    if s_len > 1:
        log_alpha[0, 1] = lp[0, 1]
    for t in range(1, t_frames):
        prev = log_alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(allow[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        log_alpha[t] = acc + lp[t]

    tail = log_alpha[t_frames - 1, s_len - 1]
    if s_len > 1:
        tail = np.logaddexp(tail, log_alpha[t_frames - 1, s_len - 2])
    log_total = float(tail)

    log_beta = np.full((t_frames, s_len), NEG_INF)
    log_beta[t_frames - 1, s_len - 1] = 0.0
    if s_len > 1:
        log_beta[t_frames - 1, s_len - 2] = 0.0
    for t in range(t_frames - 2, -1, -1):
        nxt = log_beta[t + 1] + lp[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(allow[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        log_beta[t] = acc

    return log_alpha, log_beta, log_total, ext


def ctc_loss(lattice: PosteriorLattice, y: Sequence[int]) -> CtcResult:
    """Negative log path-sum probability and its gradient w.r.t. the logits.

    For probability-kind lattices the rows are treated as an already
    normalized softmax, so the returned gradient is still the logit-side
    one (rows sum to zero); the posterior-side gradient follows from the
    softmax chain rule.
    """
    log_alpha, log_beta, log_total, ext = forward_backward(lattice, y)
    if not np.isfinite(log_total):
        # structurally feasible but zero-probability: loss is +inf, keep it
        return CtcResult(log_loss=math.inf, grad=np.full(lattice.values.shape, np.nan))

    # each state's share of the total is <= 1; the clamp only removes
    # positive float cancellation residue under extreme logits
    occupancy = np.exp(np.minimum(log_alpha + log_beta - log_total, 0.0))  # T x S
    gamma = np.zeros(lattice.values.shape)
    for s, label in enumerate(ext):
        gamma[:, label] += occupancy[:, s]
    grad = lattice.probs() - gamma
    return CtcResult(log_loss=-log_total, grad=grad)


def ctc_brute_force(lattice: PosteriorLattice, y: Sequence[int]) -> float:
    """Log-probability by enumerating every one of the K^T frame paths.

    Keeps the paths whose collapse equals ``y`` and sums their linear-domain
    probabilities with compensated summation. Returns -inf when no path
    exists. Independent of the forward-backward recursion by construction.
    """
    t_frames, k_labels = lattice.values.shape
    if t_frames > ORACLE_MAX_T or k_labels > ORACLE_MAX_K:
        raise OracleTooLarge(
            f"enumeration capped at T <= {ORACLE_MAX_T}, K <= {ORACLE_MAX_K}; got T={t_frames}, K={k_labels}"
        )
    y = np.asarray(list(y), dtype=np.int64)
    probs = lattice.probs()
    n_paths = k_labels**t_frames
    partial_sums: list[np.ndarray] = []
    for start in range(0, n_paths, _ORACLE_CHUNK):
        idx = np.arange(start, min(start + _ORACLE_CHUNK, n_paths), dtype=np.int64)
        paths = np.empty((len(idx), t_frames), dtype=np.int64)
        rem = idx
        for t in range(t_frames - 1, -1, -1):
            paths[:, t] = rem % k_labels
            rem = rem // k_labels
        keep = np.ones(paths.shape, dtype=bool)
        keep[:, 1:] = paths[:, 1:] != paths[:, :-1]
        keep &= paths != BLANK_ID
        ok = keep.sum(axis=1) == len(y)
        pos = np.cumsum(keep, axis=1) - 1
        for j, label in enumerate(y):
            ok &= (keep & (pos == j) & (paths == label)).any(axis=1)
        if not ok.any():
            continue
        chosen = paths[ok]
        path_probs = np.ones(len(chosen))
        for t in range(t_frames):
            path_probs *= probs[t, chosen[:, t]]
        partial_sums.append(path_probs)
    if not partial_sums:
        return NEG_INF
    total = math.fsum(np.concatenate(partial_sums))
    return math.log(total) if total > 0.0 else NEG_INF


def ctc_grad_check(lattice: PosteriorLattice, y: Sequence[int], step: float = 1e-5) -> float:
    """Max relative error of the analytic gradient against central differences.

    Relative error per entry is |analytic - numeric| / max(1, |analytic|).
    """
    if lattice.kind != LOGITS:
        raise ValueError("gradient check requires a logits-kind lattice")
    analytic = ctc_loss(lattice, y).grad
    worst = 0.0
    base = lattice.values
    for t in range(lattice.num_frames):
        for k in range(lattice.num_labels):
            bumped = base.copy()
            bumped[t, k] += step
            hi = ctc_loss(PosteriorLattice(bumped, LOGITS), y).log_loss
            bumped[t, k] -= 2 * step
            lo = ctc_loss(PosteriorLattice(bumped, LOGITS), y).log_loss
            numeric = (hi - lo) / (2 * step)
            err = abs(analytic[t, k] - numeric) / max(1.0, abs(analytic[t, k]))
            worst = max(worst, err)
    return worst
