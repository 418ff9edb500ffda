"""
Model Checkpoints
Versioned JSON records holding everything needed to rebuild a PannModel.
"""

from pathlib import Path
from typing import Any, Dict, Union
import json
import logging

import numpy as np

from src.errors import DataError
from src.network import Activation, MlpConfig, MlpParams
from src.polybasis import BasisSpec, MultiIndexSet
from .pann import PannModel


logger = logging.getLogger("model.checkpoint")

FORMAT_VERSION = 1


def model_to_record(model: PannModel) -> Dict[str, Any]:
    cfg = model.mlp_config
    record: Dict[str, Any] = {
        "format": "pann-checkpoint",
        "format_version": FORMAT_VERSION,
        "mlp_config": {
            "input_dim": cfg.input_dim,
            "hidden_widths": list(cfg.hidden_widths),
            "activation": cfg.activation.kind.value,
            "repu_power": cfg.activation.repu_power,
        },
        "mlp": {
            "weights": [W.tolist() for W in model.mlp.weights],
            "biases": [b.tolist() for b in model.mlp.biases],
            "coeffs": model.mlp.coeffs.tolist(),
            "mask": model.mlp.mask.tolist(),
        },
        "basis": None,
        "poly_coeffs": model.poly_coeffs.tolist(),
    }
    if model.basis is not None:
        spec = model.basis.spec
        record["basis"] = {
            "kind": spec.kind.value,
            "dim": spec.dim,
            "degree": spec.degree,
            "indices": model.basis.indices.tolist(),
            "active": model.basis.active.tolist(),
        }
    return record


def model_from_record(record: Dict[str, Any]) -> PannModel:
    if record.get("format") != "pann-checkpoint":
        raise DataError("Not a PANN checkpoint")
    version = record.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"Unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    try:
        c = record["mlp_config"]
        config = MlpConfig(
            input_dim=c["input_dim"],
            hidden_widths=c["hidden_widths"],
            activation=Activation(c["activation"], c["repu_power"]),
        )
        p = record["mlp"]
        fan_in = config.input_dim
        weights = []
        for W, width in zip(p["weights"], config.hidden_widths):
            weights.append(np.array(W, dtype=np.float64).reshape(fan_in, width))
            fan_in = width
        params = MlpParams(
            weights=weights,
            biases=[np.array(b, dtype=np.float64) for b in p["biases"]],
            coeffs=np.array(p["coeffs"], dtype=np.float64),
            mask=np.array(p["mask"], dtype=bool),
        )
        basis = None
        if record["basis"] is not None:
            br = record["basis"]
            basis = MultiIndexSet(
                spec=BasisSpec(br["kind"], br["dim"], br["degree"]),
                indices=np.array(br["indices"], dtype=np.int64),
                active=np.array(br["active"], dtype=bool),
            )
        return PannModel(config, params, basis, np.array(record["poly_coeffs"], dtype=np.float64))
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"Malformed checkpoint: {e}") from e


def save_checkpoint(model: PannModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(model_to_record(model), f)
    logger.info(f"Model checkpoint saved to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> PannModel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Checkpoint not found: {path}")
    with open(path, "r") as f:
        try:
            record = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"Checkpoint {path} is not valid JSON: {e}") from e
    return model_from_record(record)
