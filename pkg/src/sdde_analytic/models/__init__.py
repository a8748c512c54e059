"""Built-in models and loading of user model files."""

from sdde_analytic.models.registry import (
    ModelEntry,
    ModelSetup,
    get_model,
    list_models,
    load_user_model,
    pantograph_history,
    pantograph_series,
    toy_scalar_model,
)

__all__ = [
    "ModelEntry",
    "ModelSetup",
    "get_model",
    "list_models",
    "load_user_model",
    "pantograph_history",
    "pantograph_series",
    "toy_scalar_model",
]
