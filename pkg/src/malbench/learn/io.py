"""Model persistence: a self-describing version header plus a pickle body.

Files follow the naming convention
``{algorithm}_{n}_malware_x{ratio}_benign_{featureset}_s{seed}`` so a
model's training spec can be recovered from its filename.
"""

from __future__ import annotations

import pickle
import re

from ..errors import CorruptModel, IoFailure, VersionMismatch
from .models import ALGORITHM_TAGS, TrainedModel

_MAGIC_PREFIX = b"MALBENCH-MODEL "
_FORMAT_VERSION = 1
_HEADER = _MAGIC_PREFIX + str(_FORMAT_VERSION).encode() + b"\n"

_NAME_RE = re.compile(
    r"^(?P<algorithm>" + "|".join(ALGORITHM_TAGS) + r")"
    r"_(?P<n_malware>\d+)_malware_x(?P<benign_ratio>\d+)_benign"
    r"_(?P<feature_set>.+)_s(?P<seed>\d+)$")


def model_filename(algorithm: str, n_malware: int, benign_ratio: int,
                   feature_set: str, seed: int) -> str:
    return (f"{algorithm}_{n_malware}_malware_x{benign_ratio}_benign"
            f"_{feature_set}_s{seed}")


def parse_model_filename(name: str) -> dict:
    """Recover the training spec encoded in a model filename."""
    stem = name.rsplit("/", 1)[-1]
    if stem.endswith(".model"):
        stem = stem[: -len(".model")]
    match = _NAME_RE.match(stem)
    if match is None:
        raise ValueError(f"not a model filename: {name!r}")
    d = match.groupdict()
    return {
        "algorithm": d["algorithm"],
        "n_malware": int(d["n_malware"]),
        "benign_ratio": int(d["benign_ratio"]),
        "feature_set": d["feature_set"],
        "seed": int(d["seed"]),
    }


def save_model(model: TrainedModel, path: str) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER)
            pickle.dump(model, fh, protocol=pickle.HIGHEST_PROTOCOL)
    except OSError as exc:
        raise IoFailure(f"cannot write model: {exc}") from exc


def load_model(path: str) -> TrainedModel:
    try:
        with open(path, "rb") as fh:
            header = fh.readline()
            if not header.startswith(_MAGIC_PREFIX):
                raise CorruptModel(f"{path}: missing model header")
            version = header[len(_MAGIC_PREFIX):].strip()
            if version != str(_FORMAT_VERSION).encode():
                raise VersionMismatch(
                    f"{path}: format version {version.decode(errors='replace')}"
                    f", expected {_FORMAT_VERSION}")
            try:
                model = pickle.load(fh)
            except Exception as exc:
                raise CorruptModel(f"{path}: {exc}") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read model: {exc}") from exc
    if not isinstance(model, TrainedModel):
        raise CorruptModel(f"{path}: payload is not a model")
    return model
