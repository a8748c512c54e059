from __future__ import annotations

import hashlib
import importlib.util
import logging
import sys
from pathlib import Path
from typing import Any, Iterable

from sdde_analytic.utils.errors import ConfigError

logger = logging.getLogger("sdde.models")

BUILDER_NAMES = ("build_model", "build_setup")


def iter_python_files(directory: Path) -> Iterable[Path]:
    if not directory.exists():
        return []
    files = [path for path in directory.glob("*.py") if path.is_file() and not path.name.startswith("_")]
    return sorted(files)


def load_module_from_path(path: Path) -> Any | None:
    module_key = hashlib.sha1(str(path.resolve()).encode("utf-8")).hexdigest()
    module_name = f"sdde_analytic.models.user_{module_key}"
    spec = importlib.util.spec_from_file_location(module_name, path)
    if spec is None or spec.loader is None:
        return None
    module = importlib.util.module_from_spec(spec)
    sys.modules[module_name] = module
    try:
        spec.loader.exec_module(module)
    except Exception:
        logger.warning("could not import model module %s", path, exc_info=True)
        sys.modules.pop(module_name, None)
        return None
    return module


def find_builder(module: Any, path: Path) -> Any:
    for name in BUILDER_NAMES:
        fn = getattr(module, name, None)
        if callable(fn):
            return fn
    raise ConfigError("model", f"{path} defines none of {', '.join(BUILDER_NAMES)}()")


def load_builder(path: Path) -> Any:
    if not path.exists():
        raise ConfigError("model", f"model file not found: {path}")
    module = load_module_from_path(path)
    if module is None:
        raise ConfigError("model", f"model file {path} failed to import")
    return find_builder(module, path)
