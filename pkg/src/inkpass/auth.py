"""Enrolment storage, password policies, and two-stage verification.

Stage 1 checks the digit labels of an attempt against the expected password;
stage 2 fuses per-digit biometric scores against the stored templates.  The
store keeps one JSON document per user and replaces it atomically, so readers
never observe a half-written record.
"""

from __future__ import annotations

import json
import math
import os
import re
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import combinations, combinations_with_replacement
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .capture import DigitSample, preprocess
from .dtw import Template, score_against_template
from .errors import (
    BadLength,
    EmptyCandidateSet,
    LabelMismatch,
    LengthMismatch,
    MissingData,
    NotEnrolled,
    StorageFailure,
    TooManySamples,
    UnreachableTarget,
)
from .evaluation import EvalReport, permutation_count
from .features import FunctionMatrix, FunctionSubset, extract_normalized
from .rnn import NetworkParams, forward_pair

RECORD_VERSION = 1
_USER_ID = re.compile(r"[A-Za-z0-9_-]{1,64}")


# --- records ---------------------------------------------------------------

@dataclass
class UserRecord:
    user_id: str
    templates: dict[int, Template] = field(default_factory=dict)
    created_at: str = ""
    threshold_override: float | None = None

    def __post_init__(self):
        if not self.created_at:
            self.created_at = datetime.now(timezone.utc).isoformat()
        for digit, t in self.templates.items():
            if t.digit != digit:
                raise LabelMismatch(
                    f"template for digit {t.digit} stored under key {digit}")


def record_to_dict(r: UserRecord) -> dict:
    return {
        "format_version": RECORD_VERSION,
        "user_id": r.user_id,
        "created_at": r.created_at,
        "threshold_override": r.threshold_override,
        "templates": {
            str(d): [m.values.tolist() for m in t.enrolment]
            for d, t in sorted(r.templates.items())
        },
    }


def record_from_dict(blob: Mapping) -> UserRecord:
    version = blob.get("format_version")
    if version != RECORD_VERSION:
        raise StorageFailure(f"unsupported record version {version!r}")
    templates = {}
    for key, matrices in blob["templates"].items():
        digit = int(key)
        enrolment = tuple(
            FunctionMatrix(values=np.array(vals, dtype=float), normalized=True)
            for vals in matrices
        )
        templates[digit] = Template(
            user_id=blob["user_id"], digit=digit, enrolment=enrolment)
    return UserRecord(
        user_id=blob["user_id"],
        templates=templates,
        created_at=blob["created_at"],
        threshold_override=blob["threshold_override"],
    )


class TemplateStore:
    """One JSON document per user under a single directory."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, user_id: str) -> Path:
        if not _USER_ID.fullmatch(user_id):
            raise ValueError(f"invalid user id {user_id!r}")
        return self.root / f"{user_id}.json"

    def exists(self, user_id: str) -> bool:
        return self._path(user_id).is_file()

    def load(self, user_id: str) -> UserRecord:
        path = self._path(user_id)
        if not path.is_file():
            raise NotEnrolled(f"no record for user {user_id!r}")
        try:
            with open(path, encoding="utf-8") as fh:
                return record_from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise StorageFailure(f"cannot read record for {user_id!r}: {exc}")

    def save(self, record: UserRecord) -> None:
        path = self._path(record.user_id)
        try:
            fd, tmp = tempfile.mkstemp(
                prefix=f".{record.user_id}.", suffix=".json", dir=self.root)
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(record_to_dict(record), fh)
            os.replace(tmp, path)  # readers see old or new, never a torn file
        except OSError as exc:
            raise StorageFailure(f"cannot persist record for {record.user_id!r}: {exc}")

    def list_users(self) -> tuple[str, ...]:
        return tuple(sorted(p.stem for p in self.root.glob("*.json")))


# --- enrolment -------------------------------------------------------------

def enrolment_template(user_id: str, digit: int,
                       samples: Sequence[DigitSample]) -> Template:
    if not samples:
        raise ValueError("enrolment needs at least one sample")
    if len(samples) > 4:
        raise TooManySamples(f"at most 4 enrolment samples, got {len(samples)}")
    for s in samples:
        if s.digit != digit:
            raise LabelMismatch(
                f"sample labeled {s.digit} cannot enrol digit {digit}")
    matrices = tuple(extract_normalized(preprocess(s)) for s in samples)
    return Template(user_id=user_id, digit=digit, enrolment=matrices)


def enroll(store: TemplateStore, user_id: str, digit: int,
           samples: Sequence[DigitSample]) -> UserRecord:
    """Replace one digit's template and persist; other digits keep theirs."""
    template = enrolment_template(user_id, digit, samples)
    record = store.load(user_id) if store.exists(user_id) else UserRecord(user_id)
    record.templates[digit] = template
    store.save(record)
    return record


def add_enrolment(store: TemplateStore, user_id: str, digit: int,
                  sample: DigitSample, replace_existing: bool = False) -> UserRecord:
    """Grow one digit's template by a single drawing (the service flow).

    The first call creates the template; later calls append up to the cap of
    4 unless ``replace_existing`` restarts it.
    """
    if sample.digit != digit:
        raise LabelMismatch(
            f"sample labeled {sample.digit} cannot enrol digit {digit}")
    record = store.load(user_id) if store.exists(user_id) else UserRecord(user_id)
    current = record.templates.get(digit)
    matrix = extract_normalized(preprocess(sample))
    if current is None or replace_existing:
        enrolment = (matrix,)
    else:
        if len(current.enrolment) >= 4:
            raise TooManySamples(
                f"digit {digit} already holds 4 enrolment samples")
        enrolment = current.enrolment + (matrix,)
    record.templates[digit] = Template(
        user_id=user_id, digit=digit, enrolment=enrolment)
    store.save(record)
    return record


# --- verification ----------------------------------------------------------

@dataclass(frozen=True)
class VerifyDecision:
    stage1_ok: bool
    stage2_score: float
    accepted: bool
    threshold_used: float

    def __post_init__(self):
        if self.accepted and not (
            self.stage1_ok and self.stage2_score >= self.threshold_used
        ):
            raise ValueError("accepted decision violates the two-stage rule")


def dtw_backend(subsets: Mapping[int, FunctionSubset] | None = None):
    """Template scorer using elastic matching; per-digit channel subsets."""
    def score(template: Template, probe: FunctionMatrix) -> float:
        subset = (subsets or {}).get(template.digit) or FunctionSubset.baseline()
        return score_against_template(template, probe, subset)
    return score


def blstm_backend(params: NetworkParams):
    """Template scorer using the trained pair network."""
    def score(template: Template, probe: FunctionMatrix) -> float:
        vals = [forward_pair(params, e, probe) for e in template.enrolment]
        return math.fsum(vals) / len(vals)
    return score


def verify(
    record: UserRecord,
    expected: Sequence[int],
    attempt: Sequence[DigitSample],
    backend,
    threshold: float,
) -> VerifyDecision:
    """Two-stage decision for one authentication attempt.

    The k-th drawing is scored against the template of the k-th expected
    digit even when its label is wrong, so a failed stage 1 still reports
    how close the biometrics were.
    """
    if not expected:
        raise BadLength("expected password must not be empty")
    if len(attempt) != len(expected):
        raise LengthMismatch(
            f"attempt has {len(attempt)} drawings for a "
            f"{len(expected)}-digit password")
    for digit in expected:
        if digit not in record.templates:
            raise NotEnrolled(
                f"user {record.user_id!r} has no template for digit {digit}")
    stage1_ok = all(s.digit == d for s, d in zip(attempt, expected))
    scores = [
        backend(record.templates[d], extract_normalized(preprocess(s)))
        for s, d in zip(attempt, expected)
    ]
    stage2 = math.fsum(scores) / len(scores)
    used = (record.threshold_override
            if record.threshold_override is not None else threshold)
    return VerifyDecision(
        stage1_ok=stage1_ok,
        stage2_score=stage2,
        accepted=bool(stage1_ok and stage2 >= used),
        threshold_used=used,
    )


# --- threshold calibration -------------------------------------------------

_FAR_TARGET = re.compile(r"far<=\s*([0-9.eE+-]+)")


def calibrate_threshold(report: EvalReport, target: str = "eer") -> float:
    """Operating point from a report's pooled detection-tradeoff curve."""
    det = report.det
    if not det:
        raise ValueError("report carries no detection points")
    if target == "eer":
        separated = [p for p in det if p.far == 0.0 and p.frr == 0.0]
        if separated:
            below = [p.threshold for p in det if p.far > 0.0]
            at = [p.threshold for p in det if p.frr == 0.0]
            return (max(below) + max(at)) / 2.0
        gaps = [abs(p.far - p.frr) for p in det]
        return det[int(np.argmin(gaps))].threshold
    m = _FAR_TARGET.fullmatch(target)
    if m is None:
        raise ValueError(f"unknown calibration target {target!r}")
    limit = float(m.group(1))
    feasible = [p.threshold for p in det if p.far <= limit]
    if not feasible:
        raise UnreachableTarget(f"no threshold reaches FAR <= {limit}")
    return min(feasible)


# --- password policies -----------------------------------------------------

ALL_DIGITS = frozenset(range(10))


@dataclass(frozen=True)
class PasswordPolicy:
    kind: str = "pin"
    length: int = 0  # 0 means the kind's default (PIN 4, OTP 7)
    allowed_digits: frozenset[int] = ALL_DIGITS
    allow_repetition: bool = True
    eer_band: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("pin", "otp"):
            raise ValueError(f"kind must be 'pin' or 'otp', got {self.kind!r}")
        if self.length == 0:
            object.__setattr__(self, "length", 4 if self.kind == "pin" else 7)
        if self.length < 1:
            raise BadLength(f"password length must be >= 1, got {self.length}")
        digits = frozenset(self.allowed_digits)
        if not digits or not digits <= ALL_DIGITS:
            raise ValueError(f"allowed digits must be a non-empty subset of 0..9")
        object.__setattr__(self, "allowed_digits", digits)
        if self.eer_band is not None:
            lo, hi = self.eer_band
            if not 0.0 <= lo <= hi:
                raise ValueError(f"bad EER band {self.eer_band}")


def otp_best7_policy() -> PasswordPolicy:
    """Server-issued one-time passwords over the strongest seven digits."""
    return PasswordPolicy(
        kind="otp", allowed_digits=frozenset({1, 2, 3, 4, 5, 8, 9}),
        allow_repetition=False)


def _band_multisets(policy: PasswordPolicy, eer_map: Mapping[tuple, float]):
    lo, hi = policy.eer_band
    digits = sorted(policy.allowed_digits)
    combos = (combinations_with_replacement(digits, policy.length)
              if policy.allow_repetition
              else combinations(digits, policy.length))
    out = []
    for multiset in combos:
        eer = eer_map.get(tuple(multiset))
        if eer is not None and lo <= eer <= hi:
            out.append((multiset, permutation_count(multiset)))
    return out


def count_candidates(policy: PasswordPolicy,
                     eer_map: Mapping[tuple, float] | None = None) -> int:
    """Size of the ordered password space the policy admits."""
    n, length = len(policy.allowed_digits), policy.length
    if policy.eer_band is not None:
        if eer_map is None:
            raise MissingData("an EER band needs a loaded evaluation report")
        return sum(w for _, w in _band_multisets(policy, eer_map))
    if policy.allow_repetition:
        return n ** length
    if length > n:
        return 0
    return math.perm(n, length)


def generate_password(
    policy: PasswordPolicy,
    seed: int | None = None,
    eer_map: Mapping[tuple, float] | None = None,
) -> list[int]:
    """Uniform draw from the policy's candidate set; seeded if requested."""
    if count_candidates(policy, eer_map) == 0:
        raise EmptyCandidateSet("policy admits no passwords")
    rng = np.random.default_rng(seed)
    digits = sorted(policy.allowed_digits)
    if policy.eer_band is not None:
        pool = _band_multisets(policy, eer_map)
        weights = np.array([w for _, w in pool], dtype=float)
        multiset = list(pool[rng.choice(len(pool), p=weights / weights.sum())][0])
        rng.shuffle(multiset)  # uniform over distinct orderings
        return [int(d) for d in multiset]
    if policy.allow_repetition:
        return [int(d) for d in rng.choice(digits, size=policy.length)]
    picked = rng.permutation(len(digits))[: policy.length]
    return [digits[i] for i in picked]


def validate_password(policy: PasswordPolicy, digits: Sequence[int],
                      eer_map: Mapping[tuple, float] | None = None) -> None:
    """Check a user-chosen password against the policy; raises on violation."""
    if len(digits) != policy.length:
        raise BadLength(
            f"policy wants {policy.length} digits, got {len(digits)}")
    bad = set(digits) - policy.allowed_digits
    if bad:
        raise ValueError(f"digits {sorted(bad)} are not allowed by the policy")
    if not policy.allow_repetition and len(set(digits)) != len(digits):
        raise ValueError("policy forbids repeated digits")
    if policy.eer_band is not None:
        if eer_map is None:
            raise MissingData("an EER band needs a loaded evaluation report")
        lo, hi = policy.eer_band
        eer = eer_map.get(tuple(sorted(digits)))
        if eer is None or not lo <= eer <= hi:
            raise ValueError("password is outside the allowed EER band")
