# ============================================================================
# apps/training/checkpoint.py - Manifest + raw float64 payload persistence
# ============================================================================

import json
import logging
import os
from typing import Optional

import numpy as np

from apps.corpus.vocabulary import Vocabulary
from shared.errors import CheckpointError, VocabularyError
from shared.utils import atomic_write_bytes, atomic_write_text
from .model import PlanGenModel
from .schemas import ARCHITECTURE_FIELDS, TrainConfig

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
PAYLOAD_FILE = "params.bin"
VOCAB_FILE = "vocab.json"
FORMAT_VERSION = 1


def save_checkpoint(model: PlanGenModel, config: TrainConfig, path: str, epoch: Optional[int] = None,
                    validation_loss: Optional[float] = None) -> None:
    """Directory with manifest.json, params.bin (little-endian float64, manifest order) and vocab.json"""
    parameters = [{"name": name, "shape": list(array.shape)} for name, array in model.params.items()]
    manifest = {
        "format": FORMAT_VERSION,
        "parameters": parameters,
        "config": config.model_dump(),
        "epoch": epoch,
        "validation_loss": validation_loss,
        "vocab_size": len(model.vocab),
    }
    payload = b"".join(np.ascontiguousarray(array.values, dtype="<f8").tobytes()
                       for _, array in model.params.items())
    os.makedirs(path, exist_ok=True)
    atomic_write_bytes(os.path.join(path, PAYLOAD_FILE), payload)
    atomic_write_text(os.path.join(path, VOCAB_FILE), json.dumps(model.vocab.to_list(), ensure_ascii=False))
    atomic_write_text(os.path.join(path, MANIFEST_FILE), json.dumps(manifest, indent=2))
    logger.info(f"Saved checkpoint to {path} (epoch {epoch}, {model.params.num_values} values)")


def resolve_checkpoint_dir(path: str) -> str:
    """A training output directory resolves to its best snapshot"""
    if not os.path.exists(os.path.join(path, MANIFEST_FILE)):
        best = os.path.join(path, "best")
        if os.path.exists(os.path.join(best, MANIFEST_FILE)):
            return best
    return path


def load_checkpoint(path: str, expected: Optional[TrainConfig] = None) -> PlanGenModel:
    """Rebuild the model and fill every parameter, checking shapes against the manifest"""
    path = resolve_checkpoint_dir(path)
    try:
        with open(os.path.join(path, MANIFEST_FILE), "r") as f:
            manifest = json.load(f)
        with open(os.path.join(path, VOCAB_FILE), "r", encoding="utf-8") as f:
            vocab = Vocabulary(json.load(f))
        with open(os.path.join(path, PAYLOAD_FILE), "rb") as f:
            payload = f.read()
    except FileNotFoundError as e:
        raise CheckpointError(f"incomplete checkpoint at {path}: {e.filename} missing")
    except (json.JSONDecodeError, VocabularyError) as e:
        raise CheckpointError(f"unreadable checkpoint at {path}: {e}")

    if manifest.get("format") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {manifest.get('format')!r}")
    config = TrainConfig.model_validate(manifest["config"])
    if expected is not None:
        for field in ARCHITECTURE_FIELDS:
            if getattr(expected, field) != getattr(config, field):
                raise CheckpointError(f"checkpoint has {field}={getattr(config, field)}, "
                                      f"config expects {getattr(expected, field)}", parameter=field)

    model = PlanGenModel(config, vocab)
    expected_shapes = model.params.shapes()
    names = [entry["name"] for entry in manifest["parameters"]]
    if len(set(names)) != len(names):
        raise CheckpointError("manifest lists a parameter twice")
    missing = set(expected_shapes) - set(names)
    if missing:
        raise CheckpointError("parameter missing from checkpoint", parameter=sorted(missing)[0])

    values = {}
    offset = 0
    for entry in manifest["parameters"]:
        name = entry["name"]
        shape = tuple(entry["shape"])
        if name not in expected_shapes:
            raise CheckpointError("unknown parameter in manifest", parameter=name)
        if shape != expected_shapes[name]:
            raise CheckpointError(f"manifest shape {shape} does not match model shape {expected_shapes[name]}",
                                  parameter=name)
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(payload):
            raise CheckpointError("payload is truncated", parameter=name)
        values[name] = np.frombuffer(payload[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        offset = end
    if offset != len(payload):
        raise CheckpointError(f"payload has {len(payload) - offset} trailing bytes")

    model.params.load_values(values)
    logger.info(f"Loaded checkpoint {path} (epoch {manifest.get('epoch')})")
    return model
