"""Model bundle (embedding + denoiser + config) and checkpoint files.

A checkpoint is a single binary file: one JSON header line holding the
model config and an ordered tensor manifest (name, shape, dtype), followed
by the tensors' little-endian float32 payloads concatenated in manifest
order. Everything needed to generate, including the frozen context table,
rides along, so a checkpoint plus a sentence file is self-sufficient.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .denoiser import DenoiserParams, init_denoiser
from .embedding import EmbeddingParams, init_embedding
from .errors import ValidationError
from .schedules import NoiseSchedule, build_schedule

__all__ = ["Model", "init_model", "save_checkpoint", "load_checkpoint"]


@dataclass
class Model:
    config: ModelConfig
    emb: EmbeddingParams
    den: DenoiserParams

    def all_tensors(self) -> dict[str, np.ndarray]:
        out = {f"emb.{k}": v for k, v in self.emb.tensors().items()}
        out.update({f"den.{k}": v for k, v in self.den.tensors.items()})
        return out

    def trainable_tensors(self) -> dict[str, np.ndarray]:
        frozen = {f"emb.{name}" for name in EmbeddingParams.FROZEN}
        return {k: v for k, v in self.all_tensors().items() if k not in frozen}

    def schedule(self) -> NoiseSchedule:
        return build_schedule(self.config.schedule, self.config.t_max, self.config.s)

    def beta_zero(self, sched: NoiseSchedule | None = None) -> float:
        if self.config.beta_zero is not None:
            return self.config.beta_zero
        return (sched or self.schedule()).beta_zero


def init_model(config: ModelConfig, rng: np.random.Generator,
               e_bert: np.ndarray | None = None) -> Model:
    """Fresh model; pass e_bert to adopt a pretrained frozen table."""
    if config.v_idx < config.max_len:
        raise ValidationError(
            f"v_idx {config.v_idx} < max_len {config.max_len}: the index table "
            "must cover every word position a frame can hold"
        )
    if e_bert is not None:
        e_bert = np.asarray(e_bert, dtype=np.float64)
        if e_bert.shape != (config.v_bert, config.d_bert):
            raise ValidationError(
                f"frozen table shape {e_bert.shape} does not match config "
                f"({config.v_bert}, {config.d_bert})"
            )
    emb = init_embedding(
        v_idx=config.v_idx,
        max_len=config.max_len,
        d=config.dim,
        rng=rng,
        e_bert=e_bert,
        v_bert=config.v_bert,
        d_bert=config.d_bert,
    )
    den = init_denoiser(config.dim, config.n_blocks, config.n_heads, rng)
    return Model(config=config, emb=emb, den=den)


def save_checkpoint(model: Model, path) -> None:
    tensors = model.all_tensors()
    manifest = [
        {"name": name, "shape": list(arr.shape), "dtype": "<f4"}
        for name, arr in tensors.items()
    ]
    header = {"config": model.config.to_dict(), "tensors": manifest}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("ascii"))
        for arr in tensors.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path) -> Model:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
            config = ModelConfig.from_dict(header["config"])
            manifest = header["tensors"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: bad checkpoint header ({exc})") from exc
        tensors: dict[str, np.ndarray] = {}
        for entry in manifest:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            payload = fh.read(count * 4)
            if len(payload) != count * 4:
                raise ValidationError(f"{path}: truncated payload for tensor {entry['name']!r}")
            tensors[entry["name"]] = (
                np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float64)
            )
        if fh.read(1):
            raise ValidationError(f"{path}: trailing bytes after last tensor")

    def take(name):
        try:
            return tensors[name]
        except KeyError:
            raise ValidationError(f"{path}: checkpoint is missing tensor {name!r}") from None

    emb = EmbeddingParams(
        e_idx=take("emb.e_idx"),
        e_pos=take("emb.e_pos"),
        e_bert=take("emb.e_bert"),
        w_proj=take("emb.w_proj"),
        b_proj=take("emb.b_proj"),
    )
    den_tensors = {
        k[len("den."):]: v for k, v in tensors.items() if k.startswith("den.")
    }
    den = DenoiserParams(
        dim=config.dim, n_blocks=config.n_blocks, n_heads=config.n_heads,
        tensors=den_tensors,
    )
    # fail fast on a manifest that does not cover the architecture
    expected = {"time_w1", "time_b1", "time_w2", "time_b2",
                "ln_in_g", "ln_in_b", "ln_out_g", "ln_out_b"}
    for i in range(config.n_blocks):
        for leaf in ("ln1_g", "ln1_b", "wq", "bq", "wk", "bk", "wv", "bv",
                     "wo", "bo", "ln2_g", "ln2_b",
                     "ffn_w1", "ffn_b1", "ffn_w2", "ffn_b2"):
            expected.add(f"b{i}.{leaf}")
    if set(den_tensors) != expected:
        raise ValidationError(f"{path}: denoiser tensors do not match the config")
    return Model(config=config, emb=emb, den=den)
