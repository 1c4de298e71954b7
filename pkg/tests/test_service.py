"""HTTP service contract: async jobs, strict validation, bounded queue."""

import base64
import hashlib
import io
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from idcompose.buffers import load_image, load_mask, save_image, save_mask
from idcompose.data.manifest import DatasetSource
from idcompose.data.synthetic import SyntheticConfig, generate_synthetic_dataset
from idcompose.diffusion import (
    ConditionalUNet,
    DenoiserConfig,
    SampleRequest,
    make_schedule,
    sample_composite,
)
from idcompose.encoder import EncoderConfig, IdentityEncoder
from idcompose.errors import ConfigurationError
from idcompose.service import create_app
from idcompose.training import TrainPlan, models_from_checkpoint, run_stage1

SIZE = 16


def png_b64(array, mask=False):
    buf = io.BytesIO()
    (save_mask if mask else save_image)(buf, array)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def payload(**overrides):
    rng = np.random.default_rng(3)
    mask = np.zeros((SIZE, SIZE), dtype=np.float32)
    mask[4:12, 4:12] = 1.0
    fields = {"background": png_b64(rng.random((SIZE, SIZE, 3)).astype(np.float32)),
              "object": png_b64(rng.random((SIZE, SIZE, 3)).astype(np.float32)),
              "mask": png_b64(mask, mask=True), "steps": 4, "seed": 1}
    fields.update(overrides)
    return {k: v for k, v in fields.items() if v is not None}


def wait_for(client, job_id, deadline=30.0):
    start = time.monotonic()
    while time.monotonic() - start < deadline:
        response = client.get(f"/v1/jobs/{job_id}")
        assert response.status_code == 200
        data = response.json()
        if data["status"] in ("done", "failed"):
            return data
        time.sleep(0.02)
    raise AssertionError(f"job {job_id} did not finish")


def submit_and_wait(client, body):
    response = client.post("/v1/compose", json=body)
    assert response.status_code == 202, response.text
    return wait_for(client, response.json()["job_id"])


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    config = SyntheticConfig(num_objects=2, views_per_object=2, num_scenes=1,
                             frames_per_scene=2, image_size=SIZE, seed=7)
    generate_synthetic_dataset(config, root / "data")
    encoder = IdentityEncoder(EncoderConfig(SIZE, 8, 8, 1, 2, 1, 8))
    denoiser = ConditionalUNet(DenoiserConfig(4, (1, 2), (32,), 8))
    plan = TrainPlan(stage=1, epochs=1, batch_size=2, seed=3,
                     lr_adapter=1e-3, lr_unet=1e-3, lr_encoder=1e-3)
    return run_stage1(plan, DatasetSource.open(root / "data"), encoder,
                      denoiser, root / "run", schedule=make_schedule(50))


@pytest.fixture(scope="module")
def app(checkpoint):
    return create_app(checkpoint)


@pytest.fixture(scope="module")
def client(app):
    with TestClient(app) as client:
        yield client


class TestHealth:
    def test_reports_version_and_checkpoint_hash(self, client, checkpoint):
        data = client.get("/v1/health").json()
        assert data["status"] == "ok"
        from idcompose import __version__
        assert data["version"] == __version__
        assert data["checkpoint"] == hashlib.sha256(
            checkpoint.read_bytes()).hexdigest()

    def test_inline_models_have_no_hash(self, checkpoint):
        encoder, denoiser, _ = models_from_checkpoint(checkpoint)
        app = create_app(models=(encoder, denoiser))
        with TestClient(app) as client:
            assert client.get("/v1/health").json()["checkpoint"] == "inline"


class TestComposeFlow:
    def test_submit_then_poll_returns_the_sampled_image(self, client, checkpoint):
        body = payload()
        job = submit_and_wait(client, body)
        assert job["status"] == "done", job
        served = base64.b64decode(job["image"])

        encoder, denoiser, _ = models_from_checkpoint(checkpoint)
        decode = lambda field, loader: loader(
            io.BytesIO(base64.b64decode(body[field])))
        request = SampleRequest(background=decode("background", load_image),
                                object_image=decode("object", load_image),
                                mask=decode("mask", load_mask), steps=4, seed=1)
        buf = io.BytesIO()
        save_image(buf, sample_composite(request, denoiser, encoder))
        assert served == buf.getvalue()

    def test_identical_payloads_give_identical_bytes(self, client):
        body = payload()
        first = submit_and_wait(client, body)
        second = submit_and_wait(client, body)
        assert first["status"] == second["status"] == "done"
        assert first["image"] == second["image"]
        assert first["job_id"] != second["job_id"]

    def test_seed_changes_the_image(self, client):
        first = submit_and_wait(client, payload(seed=1))
        second = submit_and_wait(client, payload(seed=2))
        assert first["image"] != second["image"]

    def test_mask_level_is_applied_server_side(self, client):
        ragged = np.zeros((SIZE, SIZE), dtype=np.float32)
        ragged[3:8, 3:8] = 1.0
        ragged[10:13, 9:15] = 1.0
        fine = submit_and_wait(client, payload(mask=png_b64(ragged, mask=True)))
        coarse = submit_and_wait(client, payload(mask=png_b64(ragged, mask=True),
                                                 mask_level=4))
        assert fine["status"] == coarse["status"] == "done"
        assert fine["image"] != coarse["image"]

    def test_restart_serves_identical_bytes(self, checkpoint):
        body = payload()
        images = []
        for _ in range(2):
            with TestClient(create_app(checkpoint)) as client:
                images.append(submit_and_wait(client, body)["image"])
        assert images[0] == images[1]

    def test_unknown_job_is_404(self, client):
        response = client.get("/v1/jobs/job-999999")
        assert response.status_code == 404

    def test_compose_errors_surface_as_failed_jobs(self):
        def broken(request):
            raise RuntimeError("sampler exploded")

        with TestClient(create_app(compose_fn=broken)) as client:
            job = submit_and_wait(client, payload())
            assert job["status"] == "failed"
            assert "sampler exploded" in job["error"]


class TestValidation:
    def field_error(self, client, body, status, field):
        response = client.post("/v1/compose", json=body)
        assert response.status_code == status, response.text
        assert response.json()["detail"]["field"] == field
        return response

    def test_non_json_body_is_400(self, client):
        response = client.post("/v1/compose", content=b"{oops",
                               headers={"content-type": "application/json"})
        assert response.status_code == 400

    def test_non_object_body_is_400(self, client):
        response = client.post("/v1/compose", json=[1, 2])
        assert response.status_code == 400

    @pytest.mark.parametrize("missing", ["background", "object", "mask"])
    def test_missing_field_is_400(self, client, missing):
        body = payload()
        del body[missing]
        self.field_error(client, body, 400, missing)

    def test_non_string_image_is_400(self, client):
        self.field_error(client, payload(background=7), 400, "background")

    def test_invalid_base64_is_400(self, client):
        self.field_error(client, payload(object="!!not-base64!!"), 400, "object")

    def test_undecodable_image_is_400(self, client):
        blob = base64.b64encode(b"how is this a png").decode("ascii")
        self.field_error(client, payload(mask=blob), 400, "mask")

    @pytest.mark.parametrize("field,value", [
        ("steps", 2.5), ("steps", True), ("seed", "one"), ("mask_level", "big"),
        ("cfg_scale", "strong"),
    ])
    def test_wrong_scalar_type_is_400(self, client, field, value):
        self.field_error(client, payload(**{field: value}), 400, field)

    def test_empty_mask_is_422(self, client):
        empty = np.zeros((SIZE, SIZE), dtype=np.float32)
        self.field_error(client, payload(mask=png_b64(empty, mask=True)),
                         422, "mask")

    def test_size_mismatch_is_422(self, client):
        small = np.zeros((8, 8), dtype=np.float32)
        small[2:6, 2:6] = 1.0
        self.field_error(client, payload(mask=png_b64(small, mask=True)),
                         422, "request")

    def test_out_of_range_mask_level_is_422(self, client):
        self.field_error(client, payload(mask_level=9), 422, "mask_level")

    def test_zero_steps_is_422(self, client):
        self.field_error(client, payload(steps=0), 422, "request")

    def test_negative_cfg_is_422(self, client):
        self.field_error(client, payload(cfg_scale=-1.0), 422, "request")


class TestQueue:
    def test_overflow_is_429_until_the_worker_drains(self):
        release = threading.Event()

        def slow(request):
            release.wait(timeout=30)
            return request.background.copy()

        app = create_app(compose_fn=slow, queue_depth=2)
        with TestClient(app) as client:
            first = client.post("/v1/compose", json=payload())
            assert first.status_code == 202
            running_id = first.json()["job_id"]
            deadline = time.monotonic() + 10
            while client.get(f"/v1/jobs/{running_id}").json()["status"] != "running":
                assert time.monotonic() < deadline
                time.sleep(0.01)

            queued = [client.post("/v1/compose", json=payload()) for _ in range(2)]
            assert [r.status_code for r in queued] == [202, 202]
            overflow = client.post("/v1/compose", json=payload())
            assert overflow.status_code == 429
            assert overflow.headers["retry-after"] == "1"

            release.set()
            for response in [first] + queued:
                job = wait_for(client, response.json()["job_id"])
                assert job["status"] == "done"
            assert client.get(
                f"/v1/jobs/{overflow.json().get('job_id', 'none')}"
            ).status_code == 404

    def test_rejected_jobs_are_not_registered(self):
        release = threading.Event()
        app = create_app(compose_fn=lambda r: (release.wait(30), r.background)[1],
                         queue_depth=1)
        with TestClient(app) as client:
            accepted = []
            rejected = 0
            for _ in range(6):
                response = client.post("/v1/compose", json=payload())
                if response.status_code == 202:
                    accepted.append(response.json()["job_id"])
                else:
                    assert response.status_code == 429
                    rejected += 1
            assert rejected >= 1
            release.set()
            for job_id in accepted:
                assert wait_for(client, job_id)["status"] == "done"


class TestConstruction:
    def test_exactly_one_source_is_required(self, checkpoint):
        with pytest.raises(ConfigurationError):
            create_app()
        encoder, denoiser, _ = models_from_checkpoint(checkpoint)
        with pytest.raises(ConfigurationError):
            create_app(checkpoint, models=(encoder, denoiser))

    def test_queue_depth_must_be_positive(self, checkpoint):
        with pytest.raises(ConfigurationError):
            create_app(checkpoint, queue_depth=0)
