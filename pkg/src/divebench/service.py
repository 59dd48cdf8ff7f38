"""HTTP service for running a ranking study: assignments, responses, results.

Thin FastAPI wrapper over the pure aggregation in ``study``: every accepted
response is appended to a JSONL store, results are recomputed from the store
on demand, and media bytes are served from a configured root. Duplicate
(volunteer, item, dimension) submissions are rejected with 409 so the log
stays auditable.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse

from .study import (RankingRecord, StudyConfig, aggregate, append_store,
                    load_store, validate_record)


def default_store_path(cfg: StudyConfig, directory: str | Path = ".") -> Path:
    return Path(directory) / f"study_{cfg.study_id}.jsonl"


def create_app(cfg: StudyConfig, store_path: str | Path,
               ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="ranking study service")
    store = Path(store_path)
    lock = threading.Lock()
    media_root = Path(cfg.media_root).resolve()
    answered: set[tuple[str, str, str]] = set()
    existing, problems = load_store(store, cfg)
    if problems:
        raise ValueError(f"store {store} has malformed lines: {problems[:3]}")
    for rec in existing:
        answered.add((rec.volunteer_id, rec.item_id, rec.dimension))

    def check_study(study_id: str) -> None:
        if study_id != cfg.study_id:
            raise HTTPException(status_code=404, detail=f"unknown study {study_id!r}")

    @app.get("/api/study/{study_id}/assignment")
    def assignment(study_id: str, volunteer: str):
        check_study(study_id)
        if not volunteer:
            raise HTTPException(status_code=400, detail="volunteer id required")
        with lock:
            done_by_volunteer = {i for v, i, _ in answered if v == volunteer}
            completion = {it.item_id: len({v for v, i, _ in answered if i == it.item_id})
                          for it in cfg.items}
        candidates = [it for it in cfg.items if it.item_id not in done_by_volunteer]
        if not candidates:
            return {"done": True}
        chosen = min(candidates, key=lambda it: (completion[it.item_id], it.item_id))
        return {
            "done": False,
            "item_id": chosen.item_id,
            "dimensions": cfg.dimensions,
            "models": cfg.models,
            "media": {m: f"/media/{chosen.media[m]}" for m in cfg.models
                      if m in chosen.media},
        }

    @app.post("/api/study/{study_id}/response", status_code=201)
    async def response(study_id: str, request: Request):
        check_study(study_id)
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="body is not valid JSON")
        try:
            rec = RankingRecord.from_dict(body)
        except (KeyError, ValueError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=f"malformed record: {exc}")
        reason = validate_record(rec, cfg)
        if reason:
            raise HTTPException(status_code=400, detail=reason)
        key = (rec.volunteer_id, rec.item_id, rec.dimension)
        with lock:
            if key in answered:
                raise HTTPException(status_code=409,
                                    detail=f"duplicate response for {key}")
            append_store(store, rec)
            answered.add(key)
        return {"accepted": True}

    @app.get("/api/study/{study_id}/results")
    def results(study_id: str):
        check_study(study_id)
        with lock:
            records, problems = load_store(store, cfg)
        body = aggregate(records, cfg)
        body["store_problems"] = problems
        return body

    @app.get("/media/{path:path}")
    def media(path: str):
        target = (media_root / path).resolve()
        if media_root not in target.parents and target != media_root:
            raise HTTPException(status_code=404, detail="outside media root")
        if not target.is_file():
            raise HTTPException(status_code=404, detail=f"no media at {path!r}")
        return FileResponse(target)

    if ui_dir is not None:
        ui_root = Path(ui_dir).resolve()

        @app.get("/")
        def ui_index():
            return FileResponse(ui_root / "index.html")

        @app.get("/styles.css")
        def ui_styles():
            return FileResponse(ui_root / "styles.css")

        @app.get("/dist/{path:path}")
        def ui_dist(path: str):
            target = (ui_root / "dist" / path).resolve()
            if ui_root not in target.parents or not target.is_file():
                raise HTTPException(status_code=404, detail="no such asset")
            return FileResponse(target)

    @app.exception_handler(ValueError)
    def value_error(_, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    return app


def serve_study(cfg: StudyConfig, store_path: str | Path, port: int,
                host: str = "127.0.0.1", ui_dir: str | Path | None = None) -> None:
    import uvicorn

    app = create_app(cfg, store_path, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
