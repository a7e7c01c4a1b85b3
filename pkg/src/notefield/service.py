"""HTTP service: model listing, synchronous generation, async training jobs.

Models are content-addressed JSON files in a directory (id = prefix of the
file's SHA-256).  Sampling and reharmonization answer synchronously and are
deterministic for a fixed seed.  Training runs as a background job, one at
a time; job records live in memory and move queued -> running -> done or
failed.

Status codes: 400 malformed body, 404 unknown model or job, 422 request
inconsistent with the model (alphabets, keys, configuration), 503 job queue
full.
"""

from __future__ import annotations

import hashlib
import json
import queue
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import harmonizer, sampler, trainer
from .corpus import corpus_from_doc, split_by_mode
from .errors import NotefieldError, ParseError, ShapeError
from .model import Model, Topology, load_model, model_to_doc
from .sampler import SamplerConfig, constraints_from_doc

_MALFORMED = (ParseError, ShapeError)


def _error_json(status: int, error: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": error, "message": message})


def _domain_error(exc: NotefieldError) -> JSONResponse:
    status = 400 if isinstance(exc, _MALFORMED) else 422
    return _error_json(status, type(exc).__name__, str(exc))


class _BadRequest(Exception):
    pass


def _expect_int(body: dict, key: str, required: bool = False,
                minimum: Optional[int] = None) -> Optional[int]:
    if key not in body or body[key] is None:
        if required:
            raise _BadRequest(f"body must set {key!r}")
        return None
    value = body[key]
    if not isinstance(value, int) or isinstance(value, bool):
        raise _BadRequest(f"{key!r} must be an integer")
    if minimum is not None and value < minimum:
        raise _BadRequest(f"{key!r} must be at least {minimum}")
    return value


@dataclass
class ModelEntry:
    id: str
    path: Path
    model: Optional[Model] = None


class ModelRegistry:
    def __init__(self, model_dir: Path):
        self.model_dir = Path(model_dir)
        self._entries: dict = {}
        self._lock = threading.Lock()

    def scan(self) -> list:
        with self._lock:
            seen = {}
            for path in sorted(self.model_dir.glob("*.json")):
                digest = hashlib.sha256(path.read_bytes()).hexdigest()[:16]
                entry = self._entries.get(digest)
                if entry is None:
                    entry = ModelEntry(id=digest, path=path)
                seen[digest] = entry
            self._entries = seen
            return list(seen.values())

    def get(self, model_id: str) -> Optional[Model]:
        with self._lock:
            entry = self._entries.get(model_id)
        if entry is None:
            self.scan()
            with self._lock:
                entry = self._entries.get(model_id)
            if entry is None:
                return None
        if entry.model is None:
            entry.model = load_model(entry.path)
        return entry.model

    def loaded(self, entry: ModelEntry) -> Model:
        if entry.model is None:
            entry.model = load_model(entry.path)
        return entry.model


@dataclass
class JobRecord:
    id: str
    kind: str
    status: str = "queued"
    created: float = field(default_factory=time.time)
    finished: Optional[float] = None
    artifacts: list = field(default_factory=list)
    error: Optional[str] = None

    def to_doc(self) -> dict:
        return {"id": self.id, "kind": self.kind, "status": self.status,
                "created": self.created, "finished": self.finished,
                "artifacts": list(self.artifacts), "error": self.error}


def _grid_response(model: Model, grid: list, meta: dict, piece_id: str,
                   extra: Optional[dict] = None) -> dict:
    mode = model.metadata.get("mode")
    piece = {"id": piece_id,
             "mode": mode if mode in ("major", "minor") else "major",
             "original_key": 0, "grid": grid}
    if model.topology.rhythm is not None:
        piece["beats_per_bar"] = model.topology.rhythm
    doc = {"voices": len(grid), "pieces": [piece], "meta": meta}
    if extra:
        doc.update(extra)
    return doc


def create_app(model_dir, queue_size: int = 4, step_cap: Optional[int] = None) -> FastAPI:
    registry = ModelRegistry(Path(model_dir))
    app = FastAPI(title="notefield", docs_url=None, redoc_url=None)
    app.state.registry = registry

    jobs: dict = {}
    jobs_lock = threading.Lock()
    work_queue: "queue.Queue[JobRecord]" = queue.Queue()

    def _pending_count() -> int:
        with jobs_lock:
            return sum(1 for j in jobs.values() if j.status in ("queued", "running"))

    def _run_train_job(record: JobRecord, body: dict) -> None:
        corpus = corpus_from_doc(body["corpus"])
        config_doc = body["config"]
        config = trainer.config_from_doc(config_doc)
        mode = config_doc.get("mode")
        if mode in ("major", "minor"):
            major, minor = split_by_mode(corpus)
            corpus = major if mode == "major" else minor
        topology = Topology(n=corpus.voices, K=config_doc["K"], L=config_doc["L"],
                            alphabets=corpus.alphabets,
                            rhythm=config_doc.get("bins_per_cycle"))
        model = trainer.fit(corpus, topology, config)
        blob = json.dumps(model_to_doc(model), indent=1) + "\n"
        digest = hashlib.sha256(blob.encode()).hexdigest()[:16]
        path = registry.model_dir / f"model-{digest}.json"
        path.write_text(blob)
        record.artifacts.append(str(path))

    def _worker() -> None:
        while True:
            item = work_queue.get()
            record, body = item
            with jobs_lock:
                record.status = "running"
            try:
                _run_train_job(record, body)
            except Exception as exc:  # job errors land in the record, not the log
                with jobs_lock:
                    record.status = "failed"
                    record.error = f"{type(exc).__name__}: {exc}"
                    record.finished = time.time()
            else:
                with jobs_lock:
                    record.status = "done"
                    record.finished = time.time()

    threading.Thread(target=_worker, daemon=True, name="notefield-train").start()

    async def _read_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception as exc:
            raise _BadRequest(f"body is not valid JSON: {exc}") from exc
        if not isinstance(body, dict):
            raise _BadRequest("body must be a JSON object")
        return body

    @app.get("/models")
    def list_models():
        entries = registry.scan()
        out = []
        for entry in entries:
            try:
                model = registry.loaded(entry)
            except NotefieldError:
                continue
            topo = model.topology
            out.append({
                "id": entry.id,
                "file": entry.path.name,
                "topology": {"n": topo.n, "K": topo.K, "L": topo.L,
                             "rhythm": ({"bins_per_cycle": topo.rhythm}
                                        if topo.rhythm is not None else None)},
                "alphabets": [list(a) for a in topo.alphabets],
                "parameters": len(model.params) + len(model.position_fields or {}),
                "metadata": model.metadata,
            })
        return {"models": out}

    @app.post("/models/{model_id}/sample")
    async def sample_endpoint(model_id: str, request: Request):
        try:
            body = await _read_body(request)
            length = _expect_int(body, "length", required=True, minimum=1)
            steps = _expect_int(body, "steps", minimum=1)
            seed = _expect_int(body, "seed")
            burn_in = _expect_int(body, "burn_in", minimum=0)
            thinning = _expect_int(body, "thinning", minimum=1)
        except _BadRequest as exc:
            return _error_json(400, "malformed", str(exc))
        model = registry.get(model_id)
        if model is None:
            return _error_json(404, "unknown_model", f"no model with id {model_id!r}")
        try:
            constraints = constraints_from_doc(body.get("constraints"))
            if steps is None:
                steps = sampler.default_step_budget(model, length)
            if step_cap is not None:
                steps = min(steps, step_cap)
            config = SamplerConfig(total_steps=steps, burn_in=burn_in,
                                   thinning=thinning, seed=seed)
            result = sampler.run(model, length, constraints, config)
        except NotefieldError as exc:
            return _domain_error(exc)
        meta = {"model": model_id, **result.metadata}
        return _grid_response(model, result.grid, meta,
                              piece_id=f"generated-{result.metadata['seed']}")

    @app.post("/models/{model_id}/reharmonize")
    async def reharmonize_endpoint(model_id: str, request: Request):
        try:
            body = await _read_body(request)
            if "melody" not in body:
                raise _BadRequest("body must set 'melody'")
            seed = _expect_int(body, "seed")
            steps = _expect_int(body, "steps", minimum=1)
            voice = _expect_int(body, "voice", minimum=0) or 0
        except _BadRequest as exc:
            return _error_json(400, "malformed", str(exc))
        model = registry.get(model_id)
        if model is None:
            return _error_json(404, "unknown_model", f"no model with id {model_id!r}")
        try:
            melody = _parse_melody(body["melody"])
            track = None
            if body.get("keytrack") is not None:
                track = harmonizer.keytrack_from_doc(body["keytrack"])
            constraints = constraints_from_doc(body.get("constraints"))
            models = _mode_models(registry, model)
            if steps is not None and step_cap is not None:
                steps = min(steps, step_cap)
            config = SamplerConfig(total_steps=steps, seed=seed)
            result = harmonizer.reharmonize(melody, models, target_voice=voice,
                                            track=track, constraints=constraints,
                                            config=config)
        except NotefieldError as exc:
            return _domain_error(exc)
        meta = {"model": model_id, **result.metadata}
        return _grid_response(model, result.grid, meta,
                              piece_id=f"reharmonized-{result.metadata['seed']}",
                              extra={"keytrack": harmonizer.keytrack_to_doc(result.key_track)})

    @app.post("/jobs/train")
    async def submit_train(request: Request):
        try:
            body = await _read_body(request)
            if not isinstance(body.get("corpus"), dict):
                raise _BadRequest("body must set 'corpus' to a corpus document")
            if not isinstance(body.get("config"), dict):
                raise _BadRequest("body must set 'config' to a config object")
        except _BadRequest as exc:
            return _error_json(400, "malformed", str(exc))
        try:  # reject unusable submissions before queueing
            corpus_from_doc(body["corpus"])
            trainer.config_from_doc(body["config"])
        except NotefieldError as exc:
            return _domain_error(exc)
        if _pending_count() >= queue_size:
            return _error_json(503, "queue_full",
                               f"{queue_size} jobs already pending")
        record = JobRecord(id=uuid.uuid4().hex[:12], kind="train")
        with jobs_lock:
            jobs[record.id] = record
        work_queue.put((record, body))
        return record.to_doc()

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        with jobs_lock:
            record = jobs.get(job_id)
            if record is None:
                return _error_json(404, "unknown_job", f"no job with id {job_id!r}")
            return record.to_doc()

    return app


def _parse_melody(raw) -> list:
    from .symbols import parse_cell
    if isinstance(raw, list):
        return [parse_cell(c) for c in raw]
    if isinstance(raw, dict):
        corpus = corpus_from_doc(raw)
        if corpus.voices != 1 or len(corpus.pieces) != 1:
            raise ParseError("melody document must hold exactly one 1-voice piece")
        return corpus.pieces[0].grid[0]
    raise ParseError("melody must be a cell list or a 1-voice corpus document")


def _mode_models(registry: ModelRegistry, primary: Model) -> dict:
    """The addressed model plus same-shape models covering other modes."""
    t0 = primary.topology
    mode = primary.metadata.get("mode")
    models = {mode if mode in ("major", "minor") else "major": primary}
    for entry in registry.scan():
        try:
            model = registry.loaded(entry)
        except NotefieldError:
            continue
        other_mode = model.metadata.get("mode")
        t = model.topology
        if (other_mode in ("major", "minor") and other_mode not in models
                and (t.n, t.K, t.L, t.rhythm) == (t0.n, t0.K, t0.L, t0.rhythm)):
            models[other_mode] = model
    return models
