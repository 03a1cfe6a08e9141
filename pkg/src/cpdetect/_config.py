import json
from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=None)
def defaults() -> dict:
    """Package defaults shipped in ``data/defaults.json``."""
    text = resources.files("cpdetect").joinpath("data/defaults.json").read_text()
    return json.loads(text)
