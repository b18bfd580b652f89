"""Optimization loop: Nesterov momentum, the flat-then-decay learning-rate
schedule, curriculum epochs, heldout tracking, and per-epoch checkpoints.

The velocity update evaluates the gradient at the displaced point
``theta + rho * v`` and then subtracts the refreshed velocity:

    v_n     = rho * v_{n-1} + lr * grad(theta_{n-1} + rho * v_{n-1})
    theta_n = theta_{n-1} - v_n

With ``rho = 0`` this takes exactly the plain-SGD arithmetic path.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .alphabet import (
    JointAlphabet,
    Vocabulary,
    build_charset,
    build_sar_targets,
    build_vocabulary,
    encode_words,
    save_alphabet,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import TrainConfig, config_to_items, save_config
from .ctc import InfeasibleAlignment, ctc_loss, min_frames_for
from .network import Model, ModelConfig, init_model, model_backward, model_forward, warm_start
from .pipeline import (
    ASCENDING,
    DESCENDING,
    CurriculumOrder,
    Utterance,
    compute_deltas,
    sort_and_batch,
    stack_decimate,
)
from .seeding import derive_seed


class DivergedGradient(RuntimeError):
    """Raised when a gradient stops being finite; the run aborts."""


@dataclass(frozen=True)
class LrSchedule:
    """Constant for ``flat_epochs`` epochs, then one sqrt(1/2) decay per epoch."""

    base_lr: float = 0.01
    flat_epochs: int = 10
    decay: float = math.sqrt(0.5)


def lr_at(epoch: int, sched: LrSchedule) -> float:
    """Learning rate for a 1-based epoch index.

    The decayed value is computed as 2**(-n/2), which equals decay**n but
    is exact for even n (halving every second epoch introduces no drift).
    """
    if epoch < 1:
        raise ValueError("epochs are 1-based")
    n = epoch - sched.flat_epochs
    if n <= 0:
        return sched.base_lr
    return sched.base_lr * 2.0 ** (-n / 2.0)


@dataclass
class OptimizerState:
    velocity: dict[str, np.ndarray]
    rho: float = 0.9
    base_lr: float = 0.01

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray], rho: float = 0.9, base_lr: float = 0.01):
        return cls(velocity={k: np.zeros_like(v) for k, v in params.items()}, rho=rho, base_lr=base_lr)


GradFn = Callable[[dict[str, np.ndarray]], tuple[float, dict[str, np.ndarray]]]


def nesterov_step(
    params: dict[str, np.ndarray],
    grad_fn: GradFn,
    state: OptimizerState,
    lr: float,
) -> tuple[dict[str, np.ndarray], OptimizerState, float]:
    """One momentum update, in place; returns (params, state, loss at the
    evaluation point)."""
    rho = state.rho
    if rho == 0.0:
        loss, grads = grad_fn(params)
        _check_finite(grads)
        for name in params:
            state.velocity[name] = lr * grads[name]
            params[name] -= state.velocity[name]
        return params, state, loss
    lookahead = {name: params[name] + rho * state.velocity[name] for name in params}
    loss, grads = grad_fn(lookahead)
    _check_finite(grads)
    for name in params:
        state.velocity[name] = rho * state.velocity[name] + lr * grads[name]
        params[name] -= state.velocity[name]
    return params, state, loss


def _check_finite(grads: dict[str, np.ndarray]) -> None:
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergedGradient(f"non-finite gradient in {name}")


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    """Scale all gradients down so their joint L2 norm is at most max_norm."""
    if max_norm <= 0:
        return grads
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total <= max_norm:
        return grads
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    heldout_loss: float
    seconds: float

    def deterministic_fields(self) -> tuple:
        """Everything except wall time, for replay-equivalence comparisons."""
        return (self.epoch, self.lr, self.train_loss, self.heldout_loss)


@dataclass
class TrainRun:
    config: TrainConfig
    records: list[EpochRecord] = field(default_factory=list)
    checkpoint_paths: list[str] = field(default_factory=list)

    def best_heldout_epoch(self) -> int:
        return min(self.records, key=lambda r: (r.heldout_loss, r.epoch)).epoch


def transform_features(features: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    out = features
    if cfg.deltas:
        out = compute_deltas(out)
    if cfg.stacking:
        out = stack_decimate(out)
    return out


def prepare_corpus(utts: Sequence[Utterance], cfg: TrainConfig) -> list[Utterance]:
    return [Utterance(u.id, transform_features(u.features, cfg), u.transcript) for u in utts]


@dataclass(frozen=True)
class LabelSpace:
    """The target encoder plus the alphabets behind it."""

    vocab: Vocabulary
    joint: JointAlphabet | None
    encode: Callable[[Sequence[str]], Sequence[int]]

    @property
    def size(self) -> int:
        return self.joint.size if self.joint else self.vocab.size


def build_label_space(train_utts: Sequence[Utterance], cfg: TrainConfig) -> LabelSpace:
    vocab = build_vocabulary((" ".join(u.transcript) for u in train_utts), cfg.min_count)
    if cfg.targets == "word":
        return LabelSpace(vocab=vocab, joint=None, encode=lambda words: encode_words(words, vocab))
    if cfg.targets == "sar":
        joint = JointAlphabet(vocab=vocab, charset=build_charset(cfg.charset))
        return LabelSpace(vocab=vocab, joint=joint, encode=lambda words: build_sar_targets(words, joint).labels)
    raise ValueError(f"unknown target kind {cfg.targets!r}")


def check_feasible(utts: Sequence[Utterance], encode) -> None:
    for u in utts:
        needed = min_frames_for(encode(u.transcript))
        if u.num_frames < needed:
            raise InfeasibleAlignment(f"utterance {u.id}: {u.num_frames} frames < {needed} required for its target")


def _epoch_order(cfg: TrainConfig, epoch: int) -> CurriculumOrder:
    if cfg.order == "ascending":
        return ASCENDING
    if cfg.order == "descending":
        return DESCENDING
    if cfg.order == "random":
        return CurriculumOrder("random", derive_seed(cfg.seed, epoch, 0xF00D))
    raise ValueError(f"unknown curriculum order {cfg.order!r}")


def evaluate_loss(model: Model, utts: Sequence[Utterance], encode, batch_size: int) -> float:
    """Mean per-utterance CTC loss with dropout disabled."""
    total = 0.0
    for batch in sort_and_batch(utts, ASCENDING, batch_size, encode):
        lattices, _ = model_forward(batch.features, batch.lengths, model)
        total += sum(ctc_loss(lat, tgt).log_loss for lat, tgt in zip(lattices, batch.targets))
    return total / len(utts)


def make_checkpoint(model: Model, state: OptimizerState, cfg: TrainConfig, epoch: int) -> Checkpoint:
    tensors = {f"model.{k}": np.asarray(v, dtype=np.float64) for k, v in model.params.items()}
    tensors.update({f"opt.v.{k}": np.asarray(v, dtype=np.float64) for k, v in state.velocity.items()})
    snapshot = config_to_items(cfg)
    snapshot["input_dim"] = str(model.config.input_dim)
    snapshot["output_dim"] = str(model.config.output_dim)
    return Checkpoint(tensors=tensors, config=snapshot, epoch=epoch)


def train(
    model: Model,
    train_utts: Sequence[Utterance],
    heldout_utts: Sequence[Utterance],
    cfg: TrainConfig,
    out_dir: str | Path,
    encode,
    state: OptimizerState | None = None,
    start_epoch: int = 0,
) -> TrainRun:
    """Run epochs ``start_epoch+1 .. cfg.epochs`` of the full recipe.

    Per epoch: arrange the curriculum batches, take one momentum step per
    batch on the batch-mean CTC loss, evaluate the heldout loss, write a
    checkpoint, and append one record line. Identical seeds give identical
    records apart from wall time.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "train_run.jsonl"
    if state is None:
        state = OptimizerState.zeros_like(model.params, rho=cfg.momentum, base_lr=cfg.lr)
    sched = LrSchedule(base_lr=cfg.lr, flat_epochs=cfg.flat_epochs)
    run = TrainRun(config=cfg)
    n_train = len(train_utts)
    with records_path.open("a", encoding="utf-8") as records_file:
        for epoch in range(start_epoch + 1, cfg.epochs + 1):
            started = time.perf_counter()
            lr = lr_at(epoch, sched)
            batches = sort_and_batch(train_utts, _epoch_order(cfg, epoch), cfg.batch_size, encode)
            loss_sum = 0.0
            for batch_idx, batch in enumerate(batches):
                rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, epoch, batch_idx)))

                def grad_fn(point, batch=batch, rng=rng):
                    probe = Model(model.config, point)
                    lattices, cache = model_forward(
                        batch.features, batch.lengths, probe, train_mode=True, rng=rng, want_cache=True
                    )
                    upstream, losses = [], []
                    for lat, target in zip(lattices, batch.targets):
                        result = ctc_loss(lat, target)
                        losses.append(result.log_loss)
                        upstream.append(result.grad / batch.size)
                    grads = model_backward(upstream, cache, probe)
                    if cfg.grad_clip > 0:
                        grads = clip_global_norm(grads, cfg.grad_clip)
                    return sum(losses) / batch.size, grads

                _, state, loss = nesterov_step(model.params, grad_fn, state, lr)
                loss_sum += loss * batch.size
            heldout_loss = evaluate_loss(model, heldout_utts, encode, cfg.batch_size)
            ckpt_path = out_dir / f"epoch{epoch:03d}.ckpt"
            save_checkpoint(make_checkpoint(model, state, cfg, epoch), ckpt_path)
            record = EpochRecord(
                epoch=epoch,
                lr=lr,
                train_loss=loss_sum / n_train,
                heldout_loss=heldout_loss,
                seconds=time.perf_counter() - started,
            )
            records_file.write(json.dumps(asdict(record)) + "\n")
            records_file.flush()
            run.records.append(record)
            run.checkpoint_paths.append(str(ckpt_path))
    return run


@dataclass
class TrainArtifacts:
    run: TrainRun
    model: Model
    label_space: LabelSpace


def run_training(
    cfg: TrainConfig,
    raw_train: Sequence[Utterance],
    raw_heldout: Sequence[Utterance],
    out_dir: str | Path,
    resume_from: str | Path | None = None,
) -> TrainArtifacts:
    """End-to-end orchestration: transforms, alphabets, init/warm-start/resume,
    then the epoch loop. Writes alphabets and the resolved config beside the
    checkpoints so that decoding needs only the run directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not raw_train or not raw_heldout:
        raise ValueError("both the training and heldout splits must be non-empty")
    train_utts = prepare_corpus(raw_train, cfg)
    heldout_utts = prepare_corpus(raw_heldout, cfg)
    space = build_label_space(train_utts, cfg)
    check_feasible(train_utts, space.encode)
    check_feasible(heldout_utts, space.encode)

    save_config(cfg, out_dir / "config.txt")
    save_alphabet(out_dir / "vocab.txt", space.vocab)
    if space.joint is not None:
        save_alphabet(out_dir / "chars.txt", space.joint.charset)

    model_config = ModelConfig(
        input_dim=train_utts[0].features.shape[1],
        output_dim=space.size,
        num_layers=cfg.layers,
        hidden_per_direction=cfg.hidden,
        projection_dim=cfg.projection,
        dropout_rate=cfg.dropout,
        init_scheme=cfg.init,
        grad_clip=cfg.grad_clip,
        dtype=cfg.dtype,
    )
    model = init_model(model_config, np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, 0x1417))))
    state = None
    start_epoch = 0
    if resume_from is not None:
        ckpt = load_checkpoint(resume_from)
        report = warm_start(model, ckpt.model_tensors())
        if report.skipped:
            raise ValueError(f"resume checkpoint does not match the model:\n{report}")
        velocity = ckpt.velocity_tensors()
        if velocity:
            state = OptimizerState(
                velocity={k: np.asarray(v, dtype=model.params[k].dtype) for k, v in velocity.items()},
                rho=cfg.momentum,
                base_lr=cfg.lr,
            )
        start_epoch = ckpt.epoch
    elif cfg.warm_ckpt:
        report = warm_start(model, load_checkpoint(cfg.warm_ckpt).model_tensors())
        (out_dir / "warm_start.txt").write_text(str(report) + "\n", encoding="utf-8")

    run = train(model, train_utts, heldout_utts, cfg, out_dir, space.encode, state=state, start_epoch=start_epoch)
    return TrainArtifacts(run=run, model=model, label_space=space)
