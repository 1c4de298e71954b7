"""Binary checkpoint format with an integrity checksum.

Layout: 8-byte magic, 8-byte little-endian header length, a JSON header, then
the raw array payload. The header carries the version, a JSON skeleton of the
training state in which every tensor is replaced by a named reference, the
array manifest (dtype, shape, offset), and the payload's SHA-256. Serialized
bytes are a pure function of the state: no timestamps, sorted keys, arrays
laid out in name order.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from ..diffusion.unet import DenoiserConfig
from ..encoder.vit import EncoderConfig
from ..errors import CheckpointFormatError, CheckpointIntegrityError
from .plan import TrainPlan, plan_from_dict, plan_to_dict

MAGIC = b"IDCKPT01"
VERSION = 1


@dataclass
class TrainState:
    """Everything needed to resume or consume a run at an epoch boundary."""

    plan: TrainPlan
    epoch: int  # completed epochs
    global_step: int
    encoder_config: EncoderConfig
    denoiser_config: DenoiserConfig
    schedule_T: int
    encoder_state: dict
    denoiser_state: dict
    optimizer_state: dict | None = None


def _pack(obj, arrays: dict, prefix: str):
    """JSON-able skeleton of obj; tensors become named array references."""
    if isinstance(obj, torch.Tensor):
        arrays[prefix] = obj.detach().cpu().numpy()
        return {"__array__": prefix}
    if isinstance(obj, np.ndarray):
        arrays[prefix] = obj
        return {"__array__": prefix}
    if isinstance(obj, dict):
        if all(isinstance(k, str) for k in obj):
            return {k: _pack(v, arrays, f"{prefix}/{k}") for k, v in obj.items()}
        # optimizer state keys parameters by integer index
        return {"__kv__": [[k, _pack(v, arrays, f"{prefix}/{k}")] for k, v in obj.items()]}
    if isinstance(obj, (list, tuple)):
        return [_pack(v, arrays, f"{prefix}/{i}") for i, v in enumerate(obj)]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    raise CheckpointFormatError(f"cannot serialize {type(obj).__name__} at {prefix}")


def _unpack(skel, arrays: dict):
    if isinstance(skel, dict):
        if "__array__" in skel and len(skel) == 1:
            return torch.from_numpy(arrays[skel["__array__"]].copy())
        if "__kv__" in skel and len(skel) == 1:
            return {k: _unpack(v, arrays) for k, v in skel["__kv__"]}
        return {k: _unpack(v, arrays) for k, v in skel.items()}
    if isinstance(skel, list):
        return [_unpack(v, arrays) for v in skel]
    return skel


def save_checkpoint(path, state: TrainState) -> None:
    arrays: dict[str, np.ndarray] = {}
    skeleton = {
        "encoder_state": _pack(state.encoder_state, arrays, "enc"),
        "denoiser_state": _pack(state.denoiser_state, arrays, "den"),
        "optimizer_state": _pack(state.optimizer_state, arrays, "opt"),
    }

    manifest = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        raw = arr.tobytes()
        manifest.append({"name": name, "dtype": arr.dtype.str,
                         "shape": list(arr.shape), "offset": offset,
                         "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)

    header = {
        "version": VERSION,
        "meta": {
            "plan": plan_to_dict(state.plan),
            "epoch": state.epoch,
            "global_step": state.global_step,
            "encoder_config": asdict(state.encoder_config),
            "denoiser_config": asdict(state.denoiser_config),
            "schedule_T": state.schedule_T,
        },
        "skeleton": skeleton,
        "arrays": manifest,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(len(header_bytes).to_bytes(8, "little"))
        f.write(header_bytes)
        f.write(payload)
    os.replace(tmp, path)


def load_checkpoint(path) -> TrainState:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < len(MAGIC) + 8 or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"not a checkpoint file: {path}")
    header_len = int.from_bytes(blob[len(MAGIC): len(MAGIC) + 8], "little")
    header_end = len(MAGIC) + 8 + header_len
    if len(blob) < header_end:
        raise CheckpointIntegrityError(f"truncated checkpoint header: {path}")
    try:
        header = json.loads(blob[len(MAGIC) + 8: header_end])
    except json.JSONDecodeError as exc:
        raise CheckpointIntegrityError(f"corrupt checkpoint header: {path}") from exc
    if header.get("version") != VERSION:
        raise CheckpointFormatError(
            f"unsupported checkpoint version {header.get('version')!r}: {path}")

    payload = blob[header_end:]
    expected = sum(entry["nbytes"] for entry in header["arrays"])
    if len(payload) != expected:
        raise CheckpointIntegrityError(
            f"truncated checkpoint payload ({len(payload)} of {expected} bytes): {path}")
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise CheckpointIntegrityError(f"checkpoint checksum mismatch: {path}")

    arrays = {}
    for entry in header["arrays"]:
        start, n = entry["offset"], entry["nbytes"]
        arrays[entry["name"]] = np.frombuffer(
            payload[start: start + n], dtype=np.dtype(entry["dtype"])
        ).reshape(entry["shape"])

    meta = header["meta"]
    skel = header["skeleton"]
    den_cfg = dict(meta["denoiser_config"])
    den_cfg["channel_multipliers"] = tuple(den_cfg["channel_multipliers"])
    den_cfg["attn_resolutions"] = tuple(den_cfg["attn_resolutions"])
    return TrainState(
        plan=plan_from_dict(meta["plan"]),
        epoch=meta["epoch"],
        global_step=meta["global_step"],
        encoder_config=EncoderConfig(**meta["encoder_config"]),
        denoiser_config=DenoiserConfig(**den_cfg),
        schedule_T=meta["schedule_T"],
        encoder_state=_unpack(skel["encoder_state"], arrays),
        denoiser_state=_unpack(skel["denoiser_state"], arrays),
        optimizer_state=_unpack(skel["optimizer_state"], arrays),
    )
