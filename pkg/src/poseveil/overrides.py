"""Reviewer edits: unblur a computed box, or add a manual blur rectangle.

Overrides are stored separately from computed boxes and applied at render
time, never mutating pipeline outputs, so every edit can be audited and
undone (delete the override). Application order is list order; later
overrides win on conflict. The revision counter increases on every
mutation and survives restarts via the override file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .blur import RenderBox
from .errors import OverrideValidationError

UNBLUR = "unblur"
MANUAL_BLUR = "manual_blur"


@dataclass(frozen=True)
class Override:
    id: str
    stem: str
    start_frame: int
    end_frame: int            # inclusive
    action: str               # UNBLUR | MANUAL_BLUR
    target_box_id: Optional[str] = None   # unblur only
    x: Optional[float] = None             # manual rect, top-left
    y: Optional[float] = None
    w: Optional[float] = None
    h: Optional[float] = None
    style: Optional[str] = None           # manual only; None = run default
    note: str = ""

    def __post_init__(self):
        if self.start_frame > self.end_frame:
            raise OverrideValidationError(f"override {self.id}: start > end")
        if self.start_frame < 0:
            raise OverrideValidationError(f"override {self.id}: negative start frame")
        if self.action == UNBLUR:
            if not self.target_box_id:
                raise OverrideValidationError(f"override {self.id}: unblur needs a target box id")
        elif self.action == MANUAL_BLUR:
            if self.w is None or self.h is None or self.w <= 0 or self.h <= 0:
                raise OverrideValidationError(
                    f"override {self.id}: manual blur rectangle needs positive dimensions"
                )
            if self.x is None or self.y is None:
                raise OverrideValidationError(f"override {self.id}: manual blur needs x and y")
        else:
            raise OverrideValidationError(f"override {self.id}: unknown action '{self.action}'")

    @property
    def box_id(self) -> str:
        return f"manual:{self.id}"

    def frames(self) -> range:
        return range(self.start_frame, self.end_frame + 1)


@dataclass
class OverrideSet:
    overrides: list[Override] = field(default_factory=list)
    revision: int = 0


def apply_overrides(boxes: Iterable[RenderBox], override_set: OverrideSet) -> list[RenderBox]:
    """Effective per-frame box set after reviewer edits.

    Unblur drops the targeted box on the named frames (manual boxes added
    earlier in the list can be unblurred too); manual blur adds a
    rectangle. The result is exactly what the renderer consumes.
    """
    effective: list[RenderBox] = list(boxes)
    known_ids = {b.box_id for b in effective}
    for ov in override_set.overrides:
        if ov.action == MANUAL_BLUR:
            for f in ov.frames():
                effective.append(
                    RenderBox(
                        frame_index=f,
                        box_id=ov.box_id,
                        cx=ov.x + ov.w / 2.0,
                        cy=ov.y + ov.h / 2.0,
                        width=ov.w,
                        height=ov.h,
                        style=ov.style,
                    )
                )
            known_ids.add(ov.box_id)
        else:  # UNBLUR
            if ov.target_box_id not in known_ids:
                raise OverrideValidationError(
                    f"override {ov.id}: unknown box id '{ov.target_box_id}'"
                )
            lo, hi = ov.start_frame, ov.end_frame
            effective = [
                b
                for b in effective
                if not (b.box_id == ov.target_box_id and lo <= b.frame_index <= hi)
            ]
    return effective


def validate_override_set(
    override_set: OverrideSet, computed_box_ids: set[str]
) -> None:
    """Check id uniqueness and unblur targets without applying anything."""
    seen: set[str] = set()
    known = set(computed_box_ids)
    for ov in override_set.overrides:
        if ov.id in seen:
            raise OverrideValidationError(f"duplicate override id '{ov.id}'")
        seen.add(ov.id)
        if ov.action == MANUAL_BLUR:
            known.add(ov.box_id)
        elif ov.target_box_id not in known:
            raise OverrideValidationError(
                f"override {ov.id}: unknown box id '{ov.target_box_id}'"
            )


def override_to_dict(ov: Override) -> dict:
    d = {
        "id": ov.id,
        "stem": ov.stem,
        "start_frame": ov.start_frame,
        "end_frame": ov.end_frame,
        "action": ov.action,
        "note": ov.note,
    }
    if ov.action == UNBLUR:
        d["target_box_id"] = ov.target_box_id
    else:
        d.update({"x": ov.x, "y": ov.y, "w": ov.w, "h": ov.h})
        if ov.style is not None:
            d["style"] = ov.style
    return d


def override_from_dict(d: dict) -> Override:
    try:
        return Override(
            id=str(d["id"]),
            stem=str(d.get("stem", "")),
            start_frame=int(d["start_frame"]),
            end_frame=int(d["end_frame"]),
            action=str(d["action"]),
            target_box_id=d.get("target_box_id"),
            x=None if d.get("x") is None else float(d["x"]),
            y=None if d.get("y") is None else float(d["y"]),
            w=None if d.get("w") is None else float(d["w"]),
            h=None if d.get("h") is None else float(d["h"]),
            style=d.get("style"),
            note=str(d.get("note", "")),
        )
    except KeyError as exc:
        raise OverrideValidationError(f"override record missing field {exc}") from exc


def save_override_set(path: str | Path, override_set: OverrideSet) -> None:
    payload = {
        "revision": override_set.revision,
        "overrides": [override_to_dict(o) for o in override_set.overrides],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_override_set(path: str | Path) -> OverrideSet:
    path = Path(path)
    if not path.exists():
        return OverrideSet()
    data = json.loads(path.read_text(encoding="utf-8"))
    return OverrideSet(
        overrides=[override_from_dict(d) for d in data.get("overrides", [])],
        revision=int(data.get("revision", 0)),
    )
