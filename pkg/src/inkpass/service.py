"""JSON authentication service over the enrolment store.

Endpoints mirror the two-stage flow: clients enrol digit drawings one at a
time, request a password (server-issued for OTP, validated for PIN), then
submit labeled drawings for verification.  Configuration comes from an INI
file with BTP_-prefixed environment overrides.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from typing import Mapping

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .auth import (
    PasswordPolicy,
    TemplateStore,
    add_enrolment,
    calibrate_threshold,
    count_candidates,
    dtw_backend,
    blstm_backend,
    generate_password,
    otp_best7_policy,
    validate_password,
    verify,
)
from .capture import sample_from_capture
from .errors import (
    BadLength,
    EmptyCandidateSet,
    InkpassError,
    LabelMismatch,
    LengthMismatch,
    MissingData,
    NotEnrolled,
    StorageFailure,
    TooManySamples,
    UnreachableTarget,
)
from .evaluation import EvalReport, load_report
from .features import FunctionSubset
from .rnn import load_checkpoint

ENV_PREFIX = "BTP_"

_STATUS: tuple[tuple[type, int], ...] = (
    (NotEnrolled, 404),
    (TooManySamples, 409),
    (StorageFailure, 500),
    (UnreachableTarget, 409),
    (MissingData, 409),
    (LabelMismatch, 422),
    (LengthMismatch, 422),
    (BadLength, 422),
    (EmptyCandidateSet, 422),
)


# --- configuration ---------------------------------------------------------

@dataclass
class ServiceConfig:
    data_dir: str = "inkpass-data"
    scorer: str = "dtw-adapted"
    threshold: float | None = None  # None: calibrate from the report, else 0.5
    report_path: str | None = None
    checkpoint_path: str | None = None
    pin: PasswordPolicy = field(default_factory=PasswordPolicy)
    otp: PasswordPolicy = field(default_factory=otp_best7_policy)

    def __post_init__(self):
        if self.scorer not in ("dtw-baseline", "dtw-adapted", "blstm"):
            raise ValueError(f"unknown scorer {self.scorer!r}")


def _policy_from_section(kind: str, section: Mapping[str, str]) -> PasswordPolicy:
    band = None
    if "band_low" in section or "band_high" in section:
        band = (float(section["band_low"]), float(section["band_high"]))
    default = otp_best7_policy() if kind == "otp" else PasswordPolicy()
    if "digits" in section:
        allowed = frozenset(int(c) for c in section["digits"] if c.isdigit())
    else:
        allowed = default.allowed_digits
    return PasswordPolicy(
        kind=kind,
        length=int(section.get("length", 0)),
        allowed_digits=allowed,
        allow_repetition=section.get(
            "allow_repetition", "true" if kind == "pin" else "false",
        ).lower() in ("1", "true", "yes"),
        eer_band=band,
    )


def load_config(path: str | None = None,
                env: Mapping[str, str] | None = None) -> ServiceConfig:
    """INI file plus environment overrides (BTP_DATA_DIR and friends)."""
    parser = configparser.ConfigParser()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    env = os.environ if env is None else env
    service = dict(parser["service"]) if parser.has_section("service") else {}
    for key in ("data_dir", "scorer", "threshold", "report", "checkpoint"):
        override = env.get(ENV_PREFIX + key.upper())
        if override is not None:
            service[key] = override
    return ServiceConfig(
        data_dir=service.get("data_dir", "inkpass-data"),
        scorer=service.get("scorer", "dtw-adapted"),
        threshold=(float(service["threshold"])
                   if "threshold" in service else None),
        report_path=service.get("report"),
        checkpoint_path=service.get("checkpoint"),
        pin=_policy_from_section(
            "pin", dict(parser["pin"]) if parser.has_section("pin") else {}),
        otp=_policy_from_section(
            "otp", dict(parser["otp"]) if parser.has_section("otp") else {}),
    )


def _build_backend(config: ServiceConfig, report: EvalReport | None):
    if config.scorer == "blstm":
        if config.checkpoint_path is None:
            raise ValueError("blstm scorer needs a checkpoint path")
        return blstm_backend(load_checkpoint(config.checkpoint_path))
    subsets = None
    if config.scorer == "dtw-adapted" and report is not None and report.subsets:
        subsets = {
            d: FunctionSubset.from_iterable(v) for d, v in report.subsets.items()
        }
    return dtw_backend(subsets)


def _resolve_threshold(config: ServiceConfig, report: EvalReport | None) -> float:
    if config.threshold is not None:
        return config.threshold
    if report is not None:
        return calibrate_threshold(report, "eer")
    return 0.5


# --- request bodies --------------------------------------------------------

class PointIn(BaseModel):
    x: float
    y: float
    t: float


class EnrollIn(BaseModel):
    user: str
    digit: int = Field(ge=0, le=9)
    points: list[PointIn]
    replace: bool = False


class DrawingIn(BaseModel):
    digit: int = Field(ge=0, le=9)
    points: list[PointIn]


class PasswordIn(BaseModel):
    user: str | None = None
    kind: str = "pin"
    digits: list[int] | None = None  # user-chosen PIN; rejected for OTP
    seed: int | None = None


class VerifyIn(BaseModel):
    user: str
    expected: list[int]
    attempts: list[list[DrawingIn]]


# --- application -----------------------------------------------------------

def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    report = (load_report(config.report_path)
              if config.report_path is not None else None)
    store = TemplateStore(config.data_dir)
    backend = _build_backend(config, report)
    threshold = _resolve_threshold(config, report)
    eer_map = (
        {c.multiset: c.eer for c in report.password_results}
        if report is not None else None
    )

    app = FastAPI(title="inkpass", version="1.0")
    app.state.config = config
    app.state.threshold = threshold

    @app.exception_handler(InkpassError)
    async def _domain_error(request: Request, exc: InkpassError):
        for kind, status in _STATUS:
            if isinstance(exc, kind):
                return JSONResponse(
                    status_code=status, content={"detail": str(exc)})
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    def _sample(user: str, digit: int, points: list[PointIn]):
        return sample_from_capture({
            "user": user,
            "digit": digit,
            "points": [{"x": p.x, "y": p.y, "t": p.t} for p in points],
        })

    @app.get("/health")
    async def health():
        return {"status": "ok", "scorer": config.scorer, "threshold": threshold}

    @app.post("/enroll")
    async def enroll_endpoint(body: EnrollIn):
        sample = _sample(body.user, body.digit, body.points)
        record = add_enrolment(
            store, body.user, body.digit, sample, replace_existing=body.replace)
        return {
            "user": body.user,
            "digit": body.digit,
            "count": len(record.templates[body.digit].enrolment),
        }

    @app.post("/password")
    async def password_endpoint(body: PasswordIn):
        if body.kind not in ("pin", "otp"):
            return JSONResponse(
                status_code=422, content={"detail": f"unknown kind {body.kind!r}"})
        policy = config.pin if body.kind == "pin" else config.otp
        if body.digits is not None:
            if body.kind == "otp":
                return JSONResponse(
                    status_code=422,
                    content={"detail": "one-time passwords are server-issued"})
            validate_password(policy, body.digits, eer_map)
            digits = list(body.digits)
        else:
            digits = generate_password(policy, seed=body.seed, eer_map=eer_map)
        return {
            "kind": body.kind,
            "digits": digits,
            "candidates": count_candidates(policy, eer_map),
        }

    @app.post("/verify")
    async def verify_endpoint(body: VerifyIn):
        record = store.load(body.user)
        decisions = []
        for attempt in body.attempts:
            samples = [
                _sample(body.user, d.digit, d.points) for d in attempt
            ]
            decision = verify(record, body.expected, samples, backend, threshold)
            decisions.append({
                "stage1_ok": decision.stage1_ok,
                "stage2_score": decision.stage2_score,
                "accepted": decision.accepted,
                "threshold_used": decision.threshold_used,
            })
        return {"user": body.user, "decisions": decisions}

    @app.get("/users/{user_id}")
    async def user_endpoint(user_id: str):
        record = store.load(user_id)
        return {
            "user": record.user_id,
            "created_at": record.created_at,
            "threshold_override": record.threshold_override,
            "digits": sorted(record.templates),
            "enrolment_counts": {
                str(d): len(t.enrolment)
                for d, t in sorted(record.templates.items())
            },
        }

    return app
