"""HTTP inference service: serves trained checkpoints to the triage UI.

Checkpoints load once at startup and are shared read-only across requests;
uploads are processed entirely in memory and never written to disk. The only
mutable cross-request state is the optional append-only audit log, which
records request metadata and no pixels.
"""
from __future__ import annotations

import json
import os
import secrets
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI, File, HTTPException, Query, UploadFile
from fastapi.middleware.cors import CORSMiddleware

from .augment import AugmentationPolicy, decode_image, presize
from .errors import CheckpointCorrupt, EmptyImage, PortUnavailable
from .evaluate import (
    DEFAULT_TTA_N,
    malignant_probability,
    predict,
    predict_tta,
    sweep_from_json,
)
from .labels import BENIGN, LABEL_ORDER, MALIGNANT
from .models import load_checkpoint, sweep_path

PORT_ENV = "DERMOSCAN_PORT"
CHECKPOINT_DIR_ENV = "DERMOSCAN_CHECKPOINT_DIR"
DISCLAIMER = "Research prototype for decision support; not a medical diagnosis."


@dataclass
class ServiceConfig:
    checkpoint_paths: tuple[Path, ...] = ()
    default_model: str = ""
    default_threshold: float = 0.06
    port: int = 8000
    max_upload_bytes: int = 10 * 2**20
    tta_default: int = DEFAULT_TTA_N
    audit_log: Path | None = None

    def validate(self) -> "ServiceConfig":
        if not self.checkpoint_paths:
            raise ValueError("at least one checkpoint is required")
        if not 0.0 <= self.default_threshold <= 1.0:
            raise ValueError("default_threshold must lie in [0, 1]")
        if self.max_upload_bytes < 1 or self.port < 1:
            raise ValueError("port and max_upload_bytes must be positive")
        return self


def config_from_env(config_file: str | Path | None = None, **overrides) -> ServiceConfig:
    """Env first, then JSON config file, then explicit keyword overrides."""
    raw: dict = {}
    ckpt_dir = os.environ.get(CHECKPOINT_DIR_ENV)
    if ckpt_dir:
        raw["checkpoint_paths"] = sorted(Path(ckpt_dir).glob("*.pt"))
    if os.environ.get(PORT_ENV):
        raw["port"] = int(os.environ[PORT_ENV])
    if config_file is not None:
        raw.update(json.loads(Path(config_file).read_text()))
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if "checkpoint_dir" in raw:
        raw["checkpoint_paths"] = sorted(Path(raw.pop("checkpoint_dir")).glob("*.pt"))
    raw["checkpoint_paths"] = tuple(Path(p) for p in raw.get("checkpoint_paths", ()))
    if raw.get("audit_log"):
        raw["audit_log"] = Path(raw["audit_log"])
    config = ServiceConfig(**raw)
    if not config.default_model and config.checkpoint_paths:
        config.default_model = config.checkpoint_paths[0].stem
    return config.validate()


@dataclass
class _LoadedModel:
    model_id: str
    arch: str
    network: torch.nn.Module
    policy: AugmentationPolicy
    sweep: dict | None = None


def _validate_sweep_monotone(raw: dict, origin: Path) -> None:
    points = raw.get("points", [])
    for a, b in zip(points, points[1:]):
        if b["t"] < a["t"] - 1e-12:
            raise CheckpointCorrupt(f"{origin}: sweep thresholds not ascending")
        if b["sensitivity"] > a["sensitivity"] + 1e-9 or b["specificity"] < a["specificity"] - 1e-9:
            raise CheckpointCorrupt(f"{origin}: sweep violates monotonicity at t={b['t']}")


def _load_models(config: ServiceConfig) -> dict[str, _LoadedModel]:
    loaded: dict[str, _LoadedModel] = {}
    for path in config.checkpoint_paths:
        network, meta = load_checkpoint(path)
        policy = AugmentationPolicy(
            normalize_mean=tuple(meta["normalize_mean"]),
            normalize_std=tuple(meta["normalize_std"]),
        )
        sweep = None
        sp = sweep_path(path)
        if sp.exists():
            sweep = json.loads(sp.read_text())
            sweep_from_json(sp.read_text())  # shape check
            _validate_sweep_monotone(sweep, sp)
        loaded[path.stem] = _LoadedModel(path.stem, meta["arch"], network, policy, sweep)
    return loaded


class _AuditLog:
    def __init__(self, path: Path | None):
        self._path = path
        self._lock = threading.Lock()
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)

    def record(self, **fields) -> None:
        if self._path is None:
            return
        line = json.dumps({"time": time.time(), **fields})
        with self._lock:
            with self._path.open("a") as f:
                f.write(line + "\n")


def create_app(config: ServiceConfig) -> FastAPI:
    config.validate()
    models = _load_models(config)
    if config.default_model not in models:
        raise CheckpointCorrupt(f"default model {config.default_model!r} not among loaded checkpoints")
    audit = _AuditLog(config.audit_log)
    app = FastAPI(title="dermoscan")
    # The browser triage console may be served from any static host, so the
    # API answers cross-origin requests. Nothing here is credentialed.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET", "POST"], allow_headers=["*"]
    )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/models")
    def list_models():
        return [
            {
                "model_id": m.model_id,
                "arch": m.arch,
                "tta_default": config.tta_default,
                "default_threshold": config.default_threshold,
            }
            for m in models.values()
        ]

    @app.post("/predict")
    async def handle_predict(
        image: UploadFile = File(...),
        model: str | None = Query(default=None),
        tta: int = Query(default=1, ge=1),
        threshold: float | None = Query(default=None, ge=0.0, le=1.0),
        seed: int | None = Query(default=None),
    ):
        model_id = model or config.default_model
        if model_id not in models:
            raise HTTPException(404, f"unknown model {model_id!r}")
        entry = models[model_id]
        payload = await image.read()
        if len(payload) > config.max_upload_bytes:
            raise HTTPException(413, f"upload exceeds {config.max_upload_bytes} bytes")
        try:
            decoded = decode_image(payload)
        except EmptyImage as exc:
            raise HTTPException(400, str(exc)) from exc
        staged = presize(decoded, entry.policy.presize_to)
        if seed is None:
            seed = secrets.randbelow(2**31)
        if tta <= 1:
            vec = np.asarray(predict(entry.network, {"upload": staged}, entry.policy).entries["upload"])
        else:
            vec = predict_tta(entry.network, staged, entry.policy, n=tta, seed=seed)
        score = malignant_probability(vec)
        t = config.default_threshold if threshold is None else threshold
        decision = MALIGNANT if score >= t else BENIGN
        audit.record(
            model_id=model_id, tta_n=tta, threshold=t, seed=seed, decision=decision, size_bytes=len(payload)
        )
        return {
            "model_id": model_id,
            "probabilities": {label: float(v) for label, v in zip(LABEL_ORDER, vec)},
            "malignant_probability": float(score),
            "threshold": float(t),
            "decision": decision,
            "tta_n": tta,
            "seed": seed,
            "disclaimer": DISCLAIMER,
        }

    @app.get("/operating-curve")
    def handle_operating_curve(model: str | None = Query(default=None)):
        model_id = model or config.default_model
        if model_id not in models:
            raise HTTPException(404, f"unknown model {model_id!r}")
        sweep = models[model_id].sweep
        if sweep is None:
            raise HTTPException(404, f"no operating curve bundled for {model_id!r}")
        return sweep

    return app


def serve(config: ServiceConfig) -> None:
    """Blocking entry point: build the app and run it until interrupted."""
    import uvicorn

    app = create_app(config)
    try:
        uvicorn.run(app, host="0.0.0.0", port=config.port, log_level="info")
    except OSError as exc:
        raise PortUnavailable(f"cannot bind port {config.port}: {exc}") from exc
