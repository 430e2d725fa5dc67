"""Access to the packaged reference documents (model, plans, device files)."""

from __future__ import annotations

import os
from importlib import resources

from .errors import SchemaError


def _read(name: str) -> str:
    return resources.files("sortpipe").joinpath("data", name).read_text()


def reference_model_text() -> str:
    return _read("student2.json")


def default_quant_plan_text() -> str:
    return _read("quant_default.json")


def reference_hw_plan_text() -> str:
    return _read("hw_reference.json")


def default_stages_text() -> str:
    return _read("stages_default.json")


def find_device_file(name_or_path: str) -> str:
    """Resolve a device argument: a path, a file in $SORTPIPE_DEVICE_DIR, or a
    packaged device name (e.g. "ku035")."""
    if os.path.isfile(name_or_path):
        with open(name_or_path) as f:
            return f.read()
    env_dir = os.environ.get("SORTPIPE_DEVICE_DIR")
    if env_dir:
        cand = os.path.join(env_dir, name_or_path)
        for p in (cand, cand + ".json"):
            if os.path.isfile(p):
                with open(p) as f:
                    return f.read()
    packaged = resources.files("sortpipe").joinpath("data", "devices", name_or_path + ".json")
    if packaged.is_file():
        return packaged.read_text()
    raise SchemaError(f"device file not found: {name_or_path}")
