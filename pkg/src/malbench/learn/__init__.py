from .io import load_model, model_filename, parse_model_filename, save_model
from .models import (
    ALGORITHM_TAGS,
    DEFAULT_HYPERPARAMS,
    DecisionTreeModel,
    GradientBoostingModel,
    LinearSvmModel,
    RandomForestModel,
    TrainedModel,
    predict,
    resolve_hyperparams,
    score,
    train,
)

__all__ = [
    "ALGORITHM_TAGS",
    "DEFAULT_HYPERPARAMS",
    "DecisionTreeModel",
    "GradientBoostingModel",
    "LinearSvmModel",
    "RandomForestModel",
    "TrainedModel",
    "load_model",
    "model_filename",
    "parse_model_filename",
    "predict",
    "resolve_hyperparams",
    "save_model",
    "score",
    "train",
]
