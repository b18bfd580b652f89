"""Feature transforms, curriculum batching, and the synthetic desk corpus.

The feature chain mirrors a standard acoustic front end: append first and
second order regression coefficients, stack adjacent frame pairs at half
the frame rate, then replicate a fixed per-utterance auxiliary vector onto
every frame (40 -> 120 -> 240 -> 340 with a 100-dim auxiliary input).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .alphabet import LETTERS, UNK_WORD, tokenize
from .seeding import derive_seed

DELTA_WINDOW = 2
_DELTA_NORM = 2.0 * sum(n * n for n in range(1, DELTA_WINDOW + 1))


@dataclass(frozen=True)
class Utterance:
    id: str
    features: np.ndarray  # T x F
    transcript: tuple[str, ...]

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", f)
        if f.ndim != 2 or f.shape[0] < 1:
            raise ValueError(f"{self.id}: features must be T x F with T >= 1")
        if not np.all(np.isfinite(f)):
            raise ValueError(f"{self.id}: features must be finite")

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class Batch:
    """Length-padded feature tensor plus the true-length sidecar."""

    features: np.ndarray          # B x T_max x F
    lengths: np.ndarray           # B
    targets: tuple[tuple[int, ...], ...]
    ids: tuple[str, ...]

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def max_frames(self) -> int:
        return self.features.shape[1]

    @property
    def padding_waste(self) -> float:
        return 1.0 - float(self.lengths.sum()) / (self.size * self.max_frames)


@dataclass(frozen=True)
class CurriculumOrder:
    """Deterministic presentation order: ascending/descending length or a
    seeded shuffle."""

    kind: str  # "ascending" | "descending" | "random"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("ascending", "descending", "random"):
            raise ValueError(f"unknown curriculum order {self.kind!r}")

    def arrange(self, utts: Sequence[Utterance]) -> list[Utterance]:
        by_id = sorted(utts, key=lambda u: u.id)
        if self.kind == "ascending":
            return sorted(by_id, key=lambda u: (u.num_frames, u.id))
        if self.kind == "descending":
            return sorted(by_id, key=lambda u: (-u.num_frames, u.id))
        rng = np.random.Generator(np.random.PCG64(derive_seed(self.seed, 0x0D0E)))
        return [by_id[i] for i in rng.permutation(len(by_id))]


ASCENDING = CurriculumOrder("ascending")
DESCENDING = CurriculumOrder("descending")


def random_order(seed: int) -> CurriculumOrder:
    return CurriculumOrder("random", seed)


def compute_deltas(features: np.ndarray) -> np.ndarray:
    """Append regression coefficients of first and second order.

    Window of 2 with edge replication; column order [static, delta,
    delta-delta]. A constant signal yields zero deltas, a linear ramp a
    constant delta on interior frames.
    """
    x = np.asarray(features, dtype=np.float64)
    delta = _regress(x)
    return np.hstack([x, delta, _regress(delta)])


def _regress(x: np.ndarray) -> np.ndarray:
    t = x.shape[0]
    pad = np.concatenate([x[:1]] * DELTA_WINDOW + [x] + [x[-1:]] * DELTA_WINDOW)
    acc = np.zeros_like(x)
    for n in range(1, DELTA_WINDOW + 1):
        acc += n * (pad[DELTA_WINDOW + n : DELTA_WINDOW + n + t] - pad[DELTA_WINDOW - n : DELTA_WINDOW - n + t])
    return acc / _DELTA_NORM


def stack_decimate(features: np.ndarray) -> np.ndarray:
    """Concatenate successive frame pairs, halving the frame rate.

    Odd-length inputs zero-pad the final stacked frame rather than dropping
    it, so no target can be made infeasible by the decimation.
    """
    x = np.asarray(features, dtype=np.float64)
    t, f = x.shape
    pairs = (t + 1) // 2
    if t != pairs * 2:
        x = np.vstack([x, np.zeros((1, f))])
    return x.reshape(pairs, 2 * f)


def append_aux(features: np.ndarray, aux: np.ndarray) -> np.ndarray:
    """Replicate a fixed auxiliary vector (speaker code etc.) onto each frame."""
    x = np.asarray(features, dtype=np.float64)
    aux = np.asarray(aux, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(aux)):
        raise ValueError("auxiliary vector must be finite")
    if aux.size == 0:
        return x
    return np.hstack([x, np.tile(aux, (x.shape[0], 1))])


def sort_and_batch(
    utts: Sequence[Utterance],
    order: CurriculumOrder,
    batch_size: int,
    encode: Callable[[Sequence[str]], Sequence[int]],
) -> list[Batch]:
    """Arrange utterances, group consecutive runs of ``batch_size``, and pad.

    The batch sequence preserves the curriculum order; the final batch may
    be smaller. ``encode`` maps a transcript to its target label sequence.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    arranged = order.arrange(utts)
    batches = []
    for start in range(0, len(arranged), batch_size):
        chunk = arranged[start : start + batch_size]
        lengths = np.array([u.num_frames for u in chunk], dtype=np.int64)
        t_max = int(lengths.max())
        feat_dim = chunk[0].features.shape[1]
        padded = np.zeros((len(chunk), t_max, feat_dim))
        for i, u in enumerate(chunk):
            padded[i, : u.num_frames] = u.features
        batches.append(
            Batch(
                features=padded,
                lengths=lengths,
                targets=tuple(tuple(int(l) for l in encode(u.transcript)) for u in chunk),
                ids=tuple(u.id for u in chunk),
            )
        )
    return batches


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters for the synthetic word-prototype corpus.

    Each word owns a fixed random feature segment; utterances concatenate
    the segments of a random word sequence and add i.i.d. noise. A disjoint
    pool of extra words can be mixed in at ``oov_rate`` to create
    out-of-vocabulary tokens with real spellings.
    """

    vocab_size: int = 20
    feature_dim: int = 8
    min_frames: int = 3
    max_frames: int = 8
    min_words: int = 3
    max_words: int = 8
    noise: float = 0.1
    oov_pool_size: int = 0
    oov_rate: float = 0.0
    proto_seed: int = 0


def _synth_words(spec: SynthSpec) -> list[str]:
    rng = np.random.Generator(np.random.PCG64(derive_seed(spec.proto_seed, 0x50)))
    letters = np.array(list(LETTERS.upper()))
    words: list[str] = []
    seen = {UNK_WORD}
    while len(words) < spec.vocab_size + spec.oov_pool_size:
        length = int(rng.integers(3, 7))
        word = "".join(rng.choice(letters, size=length))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def synth_vocabulary(spec: SynthSpec) -> tuple[list[str], list[str]]:
    """(main vocabulary words, out-of-vocabulary pool) for a generator spec."""
    words = _synth_words(spec)
    return words[: spec.vocab_size], words[spec.vocab_size :]


def synth_corpus(spec: SynthSpec, count: int, seed: int, id_prefix: str = "utt") -> list[Utterance]:
    """Deterministic synthetic utterances; same (spec, count, seed) -> same corpus.

    Word sequences avoid immediate repetition so every utterance admits a
    CTC alignment even after stacking+decimation.
    """
    main, pool = synth_vocabulary(spec)
    proto_rng = np.random.Generator(np.random.PCG64(derive_seed(spec.proto_seed, 0x51)))
    protos = {}
    for word in main + pool:
        frames = int(proto_rng.integers(spec.min_frames, spec.max_frames + 1))
        protos[word] = proto_rng.standard_normal((frames, spec.feature_dim))
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0x52)))
    utts = []
    for i in range(count):
        n_words = int(rng.integers(spec.min_words, spec.max_words + 1))
        words: list[str] = []
        while len(words) < n_words:
            use_pool = pool and spec.oov_rate > 0 and rng.random() < spec.oov_rate
            word = pool[rng.integers(len(pool))] if use_pool else main[rng.integers(len(main))]
            if words and word == words[-1] and len(main) + len(pool) > 1:
                continue
            words.append(word)
        feats = np.vstack([protos[w] for w in words])
        if spec.noise > 0:
            feats = feats + spec.noise * rng.standard_normal(feats.shape)
        utts.append(Utterance(id=f"{id_prefix}{i:05d}", features=feats, transcript=tuple(words)))
    return utts


def split_by_id_hash(utts: Sequence[Utterance], heldout_fraction: float) -> tuple[list[Utterance], list[Utterance]]:
    """Stable train/heldout split keyed on a hash of the utterance id."""
    train, heldout = [], []
    for u in utts:
        digest = hashlib.sha1(u.id.encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:4], "little") / 2**32
        (heldout if bucket < heldout_fraction else train).append(u)
    return train, heldout


_FEATURE_HEADER = struct.Struct("<ii")


def save_corpus(utts: Sequence[Utterance], directory: str | Path) -> None:
    """Write corpus.tsv plus one little-endian float32 feature file per utterance."""
    directory = Path(directory)
    (directory / "features").mkdir(parents=True, exist_ok=True)
    lines = []
    for u in utts:
        rel = f"features/{u.id}.bin"
        t, f = u.features.shape
        payload = _FEATURE_HEADER.pack(t, f) + u.features.astype("<f4").tobytes()
        (directory / rel).write_bytes(payload)
        lines.append(f"{u.id}\t{' '.join(u.transcript)}\t{rel}")
    (directory / "corpus.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_corpus(directory: str | Path) -> list[Utterance]:
    directory = Path(directory)
    utts = []
    for line in (directory / "corpus.tsv").read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        utt_id, transcript, rel = line.split("\t")
        raw = (directory / rel).read_bytes()
        t, f = _FEATURE_HEADER.unpack_from(raw)
        feats = np.frombuffer(raw, dtype="<f4", offset=_FEATURE_HEADER.size).reshape(t, f)
        utts.append(Utterance(id=utt_id, features=feats.astype(np.float64), transcript=tuple(tokenize(transcript))))
    return utts
