from .artifact import load_artifact, save_artifact
from .glm import GlmModel, fit_glm
from .mlp import (
    MlpModel,
    TrainConfig,
    adam_step,
    init_layers,
    init_mlp,
    mlp_gradients,
    mlp_loss,
    predict_layers,
    train_mlp,
)
from .persistence import (
    OFFSET_BY_DOW,
    PersistenceModel,
    persistence_offset,
    persistence_predict,
)

__all__ = [
    "GlmModel",
    "MlpModel",
    "OFFSET_BY_DOW",
    "PersistenceModel",
    "TrainConfig",
    "adam_step",
    "fit_glm",
    "init_layers",
    "init_mlp",
    "load_artifact",
    "mlp_gradients",
    "mlp_loss",
    "persistence_offset",
    "persistence_predict",
    "predict_layers",
    "save_artifact",
    "train_mlp",
]
