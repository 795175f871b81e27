"""Session-oriented HTTP API for the interactive stroke-refine-remove loop.

Sessions live in memory behind an LRU cap with idle eviction. Strokes only
accumulate within a session; removal snapshots the session state so stroke
uploads stay responsive while a removal computes.
"""

from __future__ import annotations

import io
import os
import secrets
import threading
import time
from collections import OrderedDict
from pathlib import Path

from fastapi import FastAPI, Request, Response, UploadFile
from fastapi.responses import JSONResponse

from .detect import StrokeSet, detect_mask
from .errors import ConflictingStrokesError, InsufficientStrokesError, UmbraError
from .imgcore import RasterImage, encode_gray16, encode_png, load_image
from .paramlearn import DEFAULT_PARAMS, ParamVector
from .pipeline import remove_shadow

MAX_UPLOAD_BYTES = 20 * 1024 * 1024
IDLE_EVICTION_SECONDS = 30 * 60

ARTIFACT_KINDS = ("mask", "fusion", "sparse", "dense", "result", "original")


class Session:
    def __init__(self, sid: str, image: RasterImage, original_png: bytes):
        self.id = sid
        self.image = image
        self.original_png = original_png
        self.strokes = StrokeSet([])
        self.mask = None
        self.removal = None          # RemovalResult of the latest run
        self.removal_key = None      # (revision, options) the result was computed from
        self.state = "empty"
        self.revision = 0
        self.created = time.time()
        self.updated = time.time()
        self.lock = threading.Lock()

    def touch(self):
        self.updated = time.time()


class SessionStore:
    """Thread-safe LRU map of sessions."""

    def __init__(self, cap: int):
        self.cap = cap
        self._lock = threading.Lock()
        self._items: OrderedDict[str, Session] = OrderedDict()

    def add(self, session: Session):
        with self._lock:
            self._evict_idle()
            while len(self._items) >= self.cap:
                self._items.popitem(last=False)
            self._items[session.id] = session

    def get(self, sid: str):
        with self._lock:
            self._evict_idle()
            session = self._items.get(sid)
            if session is not None:
                self._items.move_to_end(sid)
            return session

    def remove(self, sid: str) -> bool:
        with self._lock:
            return self._items.pop(sid, None) is not None

    def _evict_idle(self):
        now = time.time()
        stale = [k for k, s in self._items.items() if now - s.updated > IDLE_EVICTION_SECONDS]
        for k in stale:
            self._items.pop(k, None)


def _error(status: int, code: str, message: str, **extra):
    payload = {"error": {"code": code, "message": message, **extra}}
    return JSONResponse(status_code=status, content=payload)


def _load_default_params() -> ParamVector:
    path = os.environ.get("UMBRA_PARAMS_PATH")
    if path and Path(path).is_file():
        return ParamVector.from_json(Path(path).read_text())
    return DEFAULT_PARAMS


def create_app() -> FastAPI:
    app = FastAPI(title="umbra", docs_url=None, redoc_url=None)
    cap = int(os.environ.get("UMBRA_MAX_SESSIONS", "64"))
    store = SessionStore(cap)
    app.state.store = store

    @app.exception_handler(Exception)
    async def unhandled(request: Request, exc: Exception):
        # structured errors only; stack traces never cross the wire
        return _error(500, "internal", "internal server error")

    @app.post("/sessions", status_code=201)
    async def create_session(image: UploadFile):
        raw = await image.read()
        if len(raw) > MAX_UPLOAD_BYTES:
            return _error(413, "too-large", "upload exceeds 20 MB")
        try:
            img = load_image(io.BytesIO(raw))
        except Exception:
            return _error(400, "bad-image", "upload is not a readable PNG/JPEG")
        sid = secrets.token_hex(12)
        session = Session(sid, img, encode_png(img))
        store.add(session)
        return {"id": sid, "width": img.width, "height": img.height}

    @app.get("/sessions/{sid}")
    def session_info(sid: str):
        session = store.get(sid)
        if session is None:
            return _error(404, "unknown-session", "no such session")
        return {
            "id": session.id,
            "state": session.state,
            "revision": session.revision,
            "stroke_count": len(session.strokes.strokes),
            "width": session.image.width,
            "height": session.image.height,
        }

    @app.get("/sessions/{sid}/strokes")
    def get_strokes(sid: str):
        session = store.get(sid)
        if session is None:
            return _error(404, "unknown-session", "no such session")
        return JSONResponse(content={"strokes": [
            {"label": s.label, "radius": s.radius, "points": [[float(x), float(y)] for x, y in s.points]}
            for s in session.strokes.strokes
        ]})

    @app.post("/sessions/{sid}/strokes")
    async def add_strokes(sid: str, request: Request):
        session = store.get(sid)
        if session is None:
            return _error(404, "unknown-session", "no such session")
        body = await request.body()
        try:
            delta = StrokeSet.from_json(body.decode("utf-8"))
        except UmbraError as exc:
            return _error(400, "bad-strokes", str(exc))
        if not delta.strokes:
            return _error(400, "bad-strokes", "delta contains no strokes")
        with session.lock:
            merged = session.strokes.merged_with(delta)
            labels = merged.labels_present()
            if "shadow" not in labels or "lit" not in labels:
                return _error(
                    400, "insufficient-strokes",
                    "both shadow and lit strokes are required before detection",
                )
            try:
                mask = detect_mask(session.image, merged, _load_default_params().h1)
            except ConflictingStrokesError as exc:
                return _error(409, "conflicting-strokes", str(exc), conflicts=exc.conflicts)
            except InsufficientStrokesError as exc:
                return _error(400, "insufficient-strokes", str(exc))
            except UmbraError as exc:
                return _error(422, "detection-failed", str(exc))
            session.strokes = merged
            session.mask = mask
            session.state = "detected"
            session.revision += 1
            session.touch()
            return {
                "mask_url": f"/sessions/{sid}/artifacts/mask",
                "shadow_pixel_count": mask.pixel_count(),
                "revision": session.revision,
            }

    @app.post("/sessions/{sid}/removal")
    async def run_removal(sid: str, request: Request):
        session = store.get(sid)
        if session is None:
            return _error(404, "unknown-session", "no such session")
        options = {}
        body = await request.body()
        if body:
            import json as _json

            try:
                options = _json.loads(body)
            except ValueError:
                return _error(400, "bad-options", "removal options must be JSON")
        no_cc = bool(options.get("no_color_correct", False))
        params = _load_default_params()
        if options.get("params"):
            try:
                p = options["params"]
                params = ParamVector(
                    int(p["h1"]), int(p["h2"]), float(p["h3"]),
                    float(p["h4"]), float(p["h5"]), float(p["h6"]),
                )
            except (KeyError, TypeError, ValueError, UmbraError):
                return _error(400, "bad-options", "params must supply h1..h6")

        with session.lock:
            if session.state == "empty" or session.mask is None:
                return _error(409, "not-detected", "add strokes before requesting removal")
            key = (session.revision, no_cc, params.to_json())
            if session.removal_key == key and session.removal is not None:
                return {"result_url": f"/sessions/{sid}/artifacts/result", "cached": True}
            image = session.image
            strokes = session.strokes

        # compute outside the lock so stroke uploads stay responsive
        try:
            outcome = remove_shadow(image, strokes, params=params, color_correct=not no_cc)
        except UmbraError as exc:
            return _error(422, "removal-failed", str(exc))

        with session.lock:
            session.removal = outcome
            session.removal_key = key
            session.state = "removed"
            session.touch()
        return {"result_url": f"/sessions/{sid}/artifacts/result", "cached": False}

    @app.get("/sessions/{sid}/artifacts/{kind}")
    def get_artifact(sid: str, kind: str, request: Request):
        session = store.get(sid)
        if session is None:
            return _error(404, "unknown-session", "no such session")
        if kind not in ARTIFACT_KINDS:
            return _error(404, "unknown-artifact", f"kind must be one of {ARTIFACT_KINDS}")
        with session.lock:
            data = _artifact_bytes(session, kind)
            revision = session.revision
        if data is None:
            return _error(404, "not-computed", f"artifact {kind!r} not available in state {session.state!r}")
        etag = f'"{sid}-{revision}-{kind}"'
        if request.headers.get("if-none-match") == etag:
            return Response(status_code=304)
        return Response(content=data, media_type="image/png", headers={"ETag": etag})

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str):
        if not store.remove(sid):
            return _error(404, "unknown-session", "no such session")
        return {"deleted": sid}

    _mount_ui(app)
    return app


def _mount_ui(app: FastAPI) -> None:
    """Serve the browser frontend when its build output is present."""
    ui_root = Path(__file__).resolve().parents[2] / "frontend"
    if not (ui_root / "index.html").is_file():
        return
    from fastapi.staticfiles import StaticFiles

    app.mount("/ui", StaticFiles(directory=ui_root, html=True), name="ui")


def _artifact_bytes(session: Session, kind: str):
    if kind == "original":
        return session.original_png
    if kind == "mask":
        if session.mask is None:
            return None
        return encode_png(session.mask.to_image())
    if session.removal is None:
        return None
    outcome = session.removal
    if kind == "result":
        return encode_png(outcome.result)
    if kind == "fusion":
        return encode_png(outcome.fusion.image)
    if kind == "sparse":
        return encode_gray16(outcome.sparse_scales.data.mean(axis=2))
    if kind == "dense":
        return encode_gray16(outcome.scale_field.data.mean(axis=2))
    return None


app = create_app()


def main():
    import uvicorn

    port = int(os.environ.get("UMBRA_PORT", "8765"))
    uvicorn.run(app, host="127.0.0.1", port=port)


if __name__ == "__main__":
    main()
