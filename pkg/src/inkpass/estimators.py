"""Estimator-style wrappers over the functional core.

Thin adapters following the fit/transform/predict convention: enrolment is
``fit``, feature extraction is ``transform``, verification is ``predict``.
They validate inputs and delegate; all behavior lives in the core modules.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .capture import DigitSample, preprocess
from .dtw import Template, score_against_template
from .errors import LabelMismatch, TooManySamples
from .features import FunctionMatrix, FunctionSubset, extract, extract_normalized
from .rnn import NetworkParams, forward_pair


def _as_samples(x: Iterable) -> list[DigitSample]:
    out = list(x)
    if not out:
        raise ValueError("need at least one sample")
    for s in out:
        if not isinstance(s, DigitSample):
            raise TypeError(f"expected DigitSample, got {type(s).__name__}")
    return out


def _enrolment_digit(samples: Sequence[DigitSample]) -> int:
    digits = {s.digit for s in samples}
    if len(digits) != 1:
        raise LabelMismatch(f"enrolment mixes digits {sorted(digits)}")
    return digits.pop()


class TimeFunctionExtractor(TransformerMixin, BaseEstimator):
    """Samples in, per-sample time-function matrices out.

    ``subset`` keeps only those 1-based channel ids; ``normalize`` applies
    per-channel z-normalization (what the scorers expect).
    """

    def __init__(self, subset=None, normalize=True):
        self.subset = subset
        self.normalize = normalize

    def fit(self, X, y=None):
        _as_samples(X)
        return self

    def transform(self, X):
        samples = _as_samples(X)
        fn = extract_normalized if self.normalize else extract
        matrices = [fn(preprocess(s)) for s in samples]
        if self.subset is None:
            return matrices
        chosen = FunctionSubset.from_iterable(self.subset)
        return [m.select(chosen) for m in matrices]


class _VerifierBase(BaseEstimator):
    def _check_fitted(self):
        if not hasattr(self, "digit_"):
            raise NotFittedError(
                f"{type(self).__name__} needs fit() with enrolment samples first")

    def _enrol_matrices(self, X) -> list[FunctionMatrix]:
        samples = _as_samples(X)
        if len(samples) > 4:
            raise TooManySamples(f"at most 4 enrolment samples, got {len(samples)}")
        self.digit_ = _enrolment_digit(samples)
        return [extract_normalized(preprocess(s)) for s in samples]

    def _probe_matrices(self, X) -> list[FunctionMatrix]:
        self._check_fitted()
        return [extract_normalized(preprocess(s)) for s in _as_samples(X)]

    def predict(self, X):
        return self.decision_function(X) >= self.threshold


class DtwVerifier(_VerifierBase):
    """Elastic-matching verifier; one estimator guards one digit."""

    def __init__(self, subset=None, threshold=0.5):
        self.subset = subset
        self.threshold = threshold

    def fit(self, X, y=None):
        matrices = self._enrol_matrices(X)
        self.template_ = Template(
            user_id="estimator", digit=self.digit_, enrolment=tuple(matrices))
        return self

    def decision_function(self, X):
        self._check_fitted()
        chosen = (FunctionSubset.baseline() if self.subset is None
                  else FunctionSubset.from_iterable(self.subset))
        return np.array([
            score_against_template(self.template_, m, chosen)
            for m in self._probe_matrices(X)
        ])


class SiameseVerifier(_VerifierBase):
    """Learned pair scorer against stored enrolment matrices."""

    def __init__(self, network: NetworkParams = None, threshold=0.5):
        self.network = network
        self.threshold = threshold

    def fit(self, X, y=None):
        if self.network is None:
            raise ValueError("network parameters are required before fitting")
        self.matrices_ = tuple(self._enrol_matrices(X))
        return self

    def decision_function(self, X):
        self._check_fitted()
        probes = self._probe_matrices(X)
        return np.array([
            float(np.mean([forward_pair(self.network, e, m) for e in self.matrices_]))
            for m in probes
        ])
