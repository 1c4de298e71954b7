"""HTTP composition service: submit jobs, poll status, fetch results.

One worker thread runs jobs strictly in submission order; the pending queue is
bounded and overflow is reported immediately so clients can back off. Results
depend only on the request payload, never on server history.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import io
import itertools
import queue
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .buffers import ensure_mask, load_image, load_mask, mask_support, save_image
from .data.masks import coarsen_mask
from .diffusion import DEFAULT_CFG_SCALE, DEFAULT_STEPS, SampleRequest, sample_composite
from .errors import ConfigurationError, IdcomposeError
from .seeding import derive_seed
from .training import models_from_checkpoint

DEFAULT_QUEUE_DEPTH = 4
JOB_STATUSES = ("pending", "running", "done", "failed")


class _RequestError(Exception):
    """Maps a bad compose request to a status code and the field at fault."""

    def __init__(self, status: int, field: str, message: str):
        super().__init__(message)
        self.status = status
        self.field = field
        self.message = message


def _field_response(status: int, field: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"detail": {"field": field, "error": message}})


def _image_field(body: dict, name: str, loader):
    value = body.get(name)
    if value is None:
        raise _RequestError(400, name, "field is required")
    if not isinstance(value, str):
        raise _RequestError(400, name, "expected a base64 PNG string")
    try:
        raw = base64.b64decode(value, validate=True)
    except (binascii.Error, ValueError):
        raise _RequestError(400, name, "invalid base64") from None
    try:
        return loader(io.BytesIO(raw))
    except IdcomposeError as exc:
        raise _RequestError(422, name, str(exc)) from exc
    except Exception:
        raise _RequestError(400, name, "not a decodable image") from None


def _int_field(body: dict, name: str, default):
    value = body.get(name)
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, int):
        raise _RequestError(400, name, "expected an integer")
    return value


def _number_field(body: dict, name: str, default):
    value = body.get(name)
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _RequestError(400, name, "expected a number")
    return float(value)


def parse_compose_request(body: dict) -> SampleRequest:
    """Validate a compose payload.

    Structural problems (missing fields, wrong types, undecodable data) raise
    with status 400; well-formed payloads the model cannot act on (size
    mismatch, empty mask, out-of-range values) raise with status 422.
    """
    background = _image_field(body, "background", load_image)
    object_image = _image_field(body, "object", load_image)
    mask = _image_field(body, "mask", load_mask)
    steps = _int_field(body, "steps", DEFAULT_STEPS)
    cfg_scale = _number_field(body, "cfg_scale", DEFAULT_CFG_SCALE)
    seed = _int_field(body, "seed", 0)
    mask_level = _int_field(body, "mask_level", None)
    try:
        ensure_mask(mask, like=background)  # the object may be any size
    except IdcomposeError as exc:
        raise _RequestError(422, "request", str(exc)) from exc
    if not mask_support(mask).any():
        raise _RequestError(422, "mask", "mask is empty")
    if mask_level is not None:
        try:
            mask = coarsen_mask(mask, mask_level,
                                rng_seed=derive_seed("compose-mask", seed))
        except IdcomposeError as exc:
            raise _RequestError(422, "mask_level", str(exc)) from exc
    try:
        return SampleRequest(background=background, mask=mask,
                             object_image=object_image, steps=steps,
                             cfg_scale=cfg_scale, seed=seed)
    except IdcomposeError as exc:
        raise _RequestError(422, "request", str(exc)) from exc


@dataclass
class ComposeJob:
    job_id: str
    request: SampleRequest
    status: str = "pending"
    image_png: bytes | None = None
    error: str | None = None


def create_app(checkpoint=None, *, models=None,
               queue_depth: int = DEFAULT_QUEUE_DEPTH, compose_fn=None) -> FastAPI:
    """Build the service around exactly one composition source.

    Pass a stage-2 checkpoint path, a prebuilt (encoder, denoiser) pair, or a
    compose_fn(request) -> image callable (the latter two report the
    checkpoint as "inline" in health).
    """
    if queue_depth < 1:
        raise ConfigurationError(f"queue_depth must be >= 1, got {queue_depth}")
    sources = sum(x is not None for x in (checkpoint, models, compose_fn))
    if sources != 1:
        raise ConfigurationError(
            "provide exactly one of checkpoint, models, or compose_fn")
    if checkpoint is not None:
        encoder, denoiser, _ = models_from_checkpoint(checkpoint)
        checkpoint_id = hashlib.sha256(Path(checkpoint).read_bytes()).hexdigest()
    elif models is not None:
        encoder, denoiser = models
        checkpoint_id = "inline"
    else:
        checkpoint_id = "inline"
    if compose_fn is None:
        def compose_fn(request):
            return sample_composite(request, denoiser, encoder)

    jobs: dict[str, ComposeJob] = {}
    jobs_lock = threading.Lock()
    job_ids = itertools.count(1)
    job_queue: queue.Queue = queue.Queue(maxsize=queue_depth)
    stop = threading.Event()

    def worker():
        while not stop.is_set():
            try:
                job = job_queue.get(timeout=0.05)
            except queue.Empty:
                continue
            job.status = "running"
            try:
                result = compose_fn(job.request)
                buf = io.BytesIO()
                save_image(buf, result)
                job.image_png = buf.getvalue()  # set before status so "done" implies bytes
                job.status = "done"
            except Exception as exc:
                job.error = str(exc)
                job.status = "failed"
            finally:
                job_queue.task_done()

    @asynccontextmanager
    async def lifespan(app):
        thread = threading.Thread(target=worker, name="compose-worker", daemon=True)
        thread.start()
        try:
            yield
        finally:
            stop.set()
            thread.join(timeout=10.0)

    app = FastAPI(title="idcompose", version=__version__, lifespan=lifespan)
    app.state.jobs = jobs

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "version": __version__, "checkpoint": checkpoint_id}

    @app.post("/v1/compose", status_code=202)
    async def submit(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _field_response(400, "body", "not valid JSON")
        if not isinstance(body, dict):
            return _field_response(400, "body", "expected a JSON object")
        try:
            sample = parse_compose_request(body)
        except _RequestError as exc:
            return _field_response(exc.status, exc.field, exc.message)
        with jobs_lock:
            job = ComposeJob(job_id=f"job-{next(job_ids):06d}", request=sample)
            jobs[job.job_id] = job
        try:
            job_queue.put_nowait(job)
        except queue.Full:
            with jobs_lock:
                del jobs[job.job_id]
            return JSONResponse(status_code=429,
                                content={"detail": "compose queue is full"},
                                headers={"Retry-After": "1"})
        return {"job_id": job.job_id, "status": job.status}

    @app.get("/v1/jobs/{job_id}")
    def job_status(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            return JSONResponse(status_code=404,
                                content={"detail": f"unknown job: {job_id}"})
        payload = {"job_id": job.job_id, "status": job.status}
        if job.status == "done":
            payload["image"] = base64.b64encode(job.image_png).decode("ascii")
        elif job.status == "failed":
            payload["error"] = job.error
        return payload

    return app
