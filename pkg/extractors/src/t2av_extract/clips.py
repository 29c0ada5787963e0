"""Clip references and the clips.json input format.

clips.json holds a JSON list of objects with fields: id, path, start_s,
duration_s, class_tag, height, width.  Only path is required; id
defaults to the file stem, duration to 10 s.  Height and width record
source-frame provenance and are not interpreted here.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ExtractError

DEFAULT_DURATION_S = 10.0

_FIELDS = ("id", "path", "start_s", "duration_s", "class_tag", "height",
           "width")


@dataclass(frozen=True)
class ClipRef:
    path: str
    id: str = ""
    start_s: float = 0.0
    duration_s: float = DEFAULT_DURATION_S
    class_tag: str = ""
    height: int | None = None
    width: int | None = None

    def __post_init__(self):
        if not self.id:
            object.__setattr__(self, "id", Path(self.path).stem)
        if self.duration_s <= 0:
            raise ExtractError(
                f"clip {self.id}: duration_s must be > 0, got {self.duration_s}")
        if self.start_s < 0:
            raise ExtractError(
                f"clip {self.id}: start_s must be >= 0, got {self.start_s}")
        if not Path(self.path).exists():
            raise ExtractError(f"clip {self.id}: path not found: {self.path}")


def load_clips(path: str | Path) -> list[ClipRef]:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ExtractError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ExtractError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise ExtractError(f"{path} must hold a nonempty JSON list of clips")
    clips = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ExtractError(f"{path}[{i}] is not an object")
        unknown = sorted(set(entry) - set(_FIELDS))
        if unknown:
            raise ExtractError(
                f"{path}[{i}] has unknown keys: {', '.join(unknown)}")
        if "path" not in entry:
            raise ExtractError(f"{path}[{i}] is missing the path field")
        clips.append(ClipRef(**entry))
    ids = [c.id for c in clips]
    if len(set(ids)) != len(ids):
        raise ExtractError(f"{path} has duplicate clip ids")
    return clips
