"""Local HTTP service backing the quality-check review workflow.

Serves raw and rendered frames plus face-box state, accepts override
edits, and re-renders on demand. Binds to loopback only: this is a
single-reviewer local tool, not a web deployment. Every mutation is
persisted to the override file before it is acknowledged, so a restart
reproduces the exact same effective state. Rendered frames are cached
per (frame, revision); a mutation bumps the revision, so stale pixels
are never served.
"""

from __future__ import annotations

import io
import json
import threading
from collections import OrderedDict
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from PIL import Image

from . import blur
from .errors import NotReadyError, OverrideValidationError, PoseVeilError
from .overrides import (
    OverrideSet,
    apply_overrides,
    load_override_set,
    override_from_dict,
    override_to_dict,
    save_override_set,
    validate_override_set,
)
from .pose_io import FrameStore
from .project import Project

RENDER_CACHE_SIZE = 32


class ReviewState:
    """Per-project review state: overrides, revisions and a render cache."""

    def __init__(self, project: Project):
        self.project = project
        self.lock = threading.Lock()
        self.cache: OrderedDict[tuple, bytes] = OrderedDict()
        self.override_sets: dict[str, OverrideSet] = {}
        ready = [v.stem for v in project.config.videos if project.step_done(v.stem, "render")]
        if not ready:
            raise NotReadyError("no video has completed blurring; run the pipeline first")
        self.stems = ready
        for stem in ready:
            self.override_sets[stem] = load_override_set(project.overrides_path(stem))

    def frame_store(self, stem: str) -> FrameStore:
        entry = self.project.entry(stem)
        return FrameStore(directory=Path(entry.frames_dir), geometry=self.project.geometry(stem))

    def selected_boxes(self, stem: str) -> list[blur.RenderBox]:
        face_boxes = blur.load_box_sidecar(self.project.boxes_path(stem))
        return blur.select_boxes(face_boxes, self.project.blur_spec(stem))

    def effective_boxes(self, stem: str) -> list[blur.RenderBox]:
        return apply_overrides(self.selected_boxes(stem), self.override_sets[stem])

    def render_frame_png(self, stem: str, index: int, view: str) -> bytes:
        if view == "raw":
            key = (stem, index, "raw")
        else:
            spec = self.project.blur_spec(stem)
            key = (stem, index, view, self.override_sets[stem].revision,
                   spec.targets, spec.style, spec.patient_id)
        cached = self.cache.get(key)
        if cached is not None:
            self.cache.move_to_end(key)
            return cached
        store = self.frame_store(stem)
        if not 0 <= index < store.geometry.frame_count:
            raise HTTPException(status_code=404, detail=f"frame {index} out of range")
        pixels = store.load_frame(index)
        if view == "rendered":
            boxes = [b for b in self.effective_boxes(stem) if b.frame_index == index]
            pixels = blur.render_frame(pixels, boxes, self.project.blur_spec(stem).style)
        buf = io.BytesIO()
        Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
        data = buf.getvalue()
        self.cache[key] = data
        while len(self.cache) > RENDER_CACHE_SIZE:
            self.cache.popitem(last=False)
        return data

    def put_overrides(self, stem: str, payload: dict) -> int:
        """Replace the override list; persists before acknowledging."""
        with self.lock:
            current = self.override_sets[stem]
            base = payload.get("base_revision")
            if base is not None and int(base) != current.revision:
                raise HTTPException(
                    status_code=409,
                    detail=f"stale revision {base}; current is {current.revision}",
                )
            try:
                overrides = [override_from_dict(d) for d in payload.get("overrides", [])]
                computed_ids = {b.box_id for b in self.selected_boxes(stem)}
                candidate = OverrideSet(overrides=overrides, revision=current.revision + 1)
                validate_override_set(candidate, computed_ids)
            except OverrideValidationError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            save_override_set(self.project.overrides_path(stem), candidate)
            self.override_sets[stem] = candidate
            return candidate.revision


def build_app(project: Project, frontend_dir: Optional[str | Path] = None) -> FastAPI:
    state = ReviewState(project)
    app = FastAPI(title="poseveil review")
    app.state.review = state

    def _check_stem(stem: str) -> None:
        if stem not in state.stems:
            raise HTTPException(status_code=404, detail=f"unknown or unrendered video '{stem}'")

    @app.get("/videos")
    def list_videos():
        return [
            {
                "stem": stem,
                "frame_count": project.geometry(stem).frame_count,
                "quality_state": project.quality_state(stem),
                "revision": state.override_sets[stem].revision,
            }
            for stem in state.stems
        ]

    @app.get("/videos/{stem}/frames/{index}")
    def get_frame(stem: str, index: int, view: str = "rendered"):
        _check_stem(stem)
        if view not in ("raw", "rendered"):
            raise HTTPException(status_code=422, detail="view must be 'raw' or 'rendered'")
        data = state.render_frame_png(stem, index, view)
        return Response(content=data, media_type="image/png")

    @app.get("/videos/{stem}/boxes")
    def get_boxes(stem: str, frame: int):
        _check_stem(stem)
        effective_boxes = state.effective_boxes(stem)
        effective = {(b.box_id, b.frame_index) for b in effective_boxes}

        def encode(b, active):
            return {
                "box_id": b.box_id,
                "frame": b.frame_index,
                "cx": b.cx,
                "cy": b.cy,
                "width": b.width,
                "height": b.height,
                "active": active,
            }

        out = [
            encode(b, (b.box_id, b.frame_index) in effective)
            for b in state.selected_boxes(stem)
            if b.frame_index == frame
        ]
        out.extend(
            encode(b, True)
            for b in effective_boxes
            if b.frame_index == frame and b.box_id.startswith("manual:")
        )
        return out

    @app.get("/videos/{stem}/overrides")
    def get_overrides(stem: str):
        _check_stem(stem)
        oset = state.override_sets[stem]
        return {
            "revision": oset.revision,
            "overrides": [override_to_dict(o) for o in oset.overrides],
        }

    @app.put("/videos/{stem}/overrides")
    async def put_overrides(stem: str, request: Request):
        _check_stem(stem)
        payload = await request.json()
        revision = state.put_overrides(stem, payload)
        return {"revision": revision}

    @app.get("/videos/{stem}/patient")
    def get_patient(stem: str):
        _check_stem(stem)
        path = project.reports_dir(stem) / "patient.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail="patient identification has not run")
        return json.loads(path.read_text(encoding="utf-8"))

    @app.post("/videos/{stem}/patient")
    def set_patient(stem: str, payload: dict):
        """Reviewer override of the automatic patient choice."""
        _check_stem(stem)
        track_id = payload.get("track_id")
        if not isinstance(track_id, int):
            raise HTTPException(status_code=422, detail="track_id must be an integer")
        known = {b.track_id for b in blur.load_box_sidecar(project.boxes_path(stem))}
        if track_id not in known:
            raise HTTPException(status_code=422, detail=f"no track {track_id} in this video")
        with state.lock:
            path = project.reports_dir(stem) / "patient.json"
            data = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {"scores": []}
            data["patient_track_id"] = track_id
            for row in data.get("scores", []):
                row["selected"] = row.get("track_id") == track_id
            path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
            project.log(f"{stem}: reviewer set patient track to {track_id}")
        return {"stem": stem, "patient_track_id": track_id}

    @app.post("/videos/{stem}/signoff")
    def signoff(stem: str):
        _check_stem(stem)
        with state.lock:
            project.sign_off(stem)
        return {"stem": stem, "quality_state": project.quality_state(stem)}

    @app.exception_handler(PoseVeilError)
    async def poseveil_error(request: Request, exc: PoseVeilError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        frontend_dir = Path(frontend_dir)
        index = frontend_dir / "index.html"
        if index.exists():
            @app.get("/", include_in_schema=False)
            def root():
                return FileResponse(index)
        app.mount("/", StaticFiles(directory=str(frontend_dir)), name="ui")

    return app


def serve(
    project: Project,
    host: str = "127.0.0.1",
    port: int = 8765,
    frontend_dir: Optional[str | Path] = None,
) -> None:
    import uvicorn

    app = build_app(project, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
