"""Self-describing binary checkpoint container.

Layout, all little-endian:

    bytes 0..7    magic ``A2WCKPT1``
    bytes 8..15   uint64 byte length of the manifest text
    manifest      UTF-8 text, one record per line:
                      epoch <n>
                      config <key>=<value>
                      tensor <name> <d0>x<d1>x... <byte offset into data>
    data          the tensors' float64 values, row-major, back to back

Tensors are written in sorted name order and the manifest keys are sorted,
so save -> load -> save reproduces the file byte for byte.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"A2WCKPT1"


@dataclass
class Checkpoint:
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    config: dict[str, str] = field(default_factory=dict)
    epoch: int = 0

    def manifest_text(self) -> str:
        lines = [f"epoch {self.epoch}"]
        for key in sorted(self.config):
            lines.append(f"config {key}={self.config[key]}")
        offset = 0
        for name in sorted(self.tensors):
            tensor = self.tensors[name]
            dims = "x".join(str(d) for d in tensor.shape) or "1"
            lines.append(f"tensor {name} {dims} {offset}")
            offset += tensor.size * 8
        return "\n".join(lines) + "\n"

    def model_tensors(self) -> dict[str, np.ndarray]:
        """Parameter tensors with the ``model.`` prefix stripped."""
        return {k.removeprefix("model."): v for k, v in self.tensors.items() if k.startswith("model.")}

    def velocity_tensors(self) -> dict[str, np.ndarray]:
        return {k.removeprefix("opt.v."): v for k, v in self.tensors.items() if k.startswith("opt.v.")}


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    """Atomic write: the file appears complete or not at all."""
    path = Path(path)
    manifest = ckpt.manifest_text().encode("utf-8")
    blob = bytearray()
    blob += MAGIC
    blob += len(manifest).to_bytes(8, "little")
    blob += manifest
    for name in sorted(ckpt.tensors):
        blob += np.ascontiguousarray(ckpt.tensors[name], dtype="<f8").tobytes()
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bytes(blob))
    os.replace(tmp, path)


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: bad magic, not a checkpoint")
    manifest_len = int.from_bytes(raw[8:16], "little")
    manifest = raw[16 : 16 + manifest_len].decode("utf-8")
    data = raw[16 + manifest_len :]
    ckpt = Checkpoint()
    for line in manifest.splitlines():
        kind, _, rest = line.partition(" ")
        if kind == "epoch":
            ckpt.epoch = int(rest)
        elif kind == "config":
            key, _, value = rest.partition("=")
            ckpt.config[key] = value
        elif kind == "tensor":
            name, dims, offset = rest.rsplit(" ", 2)
            shape = tuple(int(d) for d in dims.split("x"))
            count = int(np.prod(shape))
            start = int(offset)
            values = np.frombuffer(data, dtype="<f8", count=count, offset=start)
            if values.size != count:
                raise ValueError(f"{path}: tensor {name} data is truncated")
            ckpt.tensors[name] = values.reshape(shape).copy()
        else:
            raise ValueError(f"{path}: unknown manifest record {kind!r}")
    return ckpt
