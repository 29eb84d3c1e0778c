"""Bundled scenario files."""

from importlib import resources
from pathlib import Path


def list_bundled() -> list[str]:
    """Names of the bundled scenarios, without the .json extension."""
    out = []
    for entry in resources.files(__name__).iterdir():
        if entry.name.endswith(".json"):
            out.append(entry.name[:-5])
    return sorted(out)


def bundled_path(name: str) -> Path:
    """Filesystem path of a bundled scenario by name ("go_to_goal", ...)."""
    candidate = resources.files(__name__) / f"{name}.json"
    if not candidate.is_file():
        raise FileNotFoundError(f"no bundled scenario named {name!r}; "
                                f"available: {', '.join(list_bundled())}")
    return Path(str(candidate))
