"""Scikit-learn style front end so the decoder composes with the ecosystem.

KeywordSpotter is a stateless transformer/detector over posterior
bundles: ``transform`` maps bundles to fused confidence streams,
``decision_function`` to per-utterance peak scores, and ``predict`` to
0/1 detections at the configured threshold. All decode knobs are plain
constructor parameters, so ``get_params`` / ``set_params`` / ``clone``
and grid searches over decoding hyperparameters work as usual. ``fit``
only validates parameters; there is nothing to learn.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .bundle import PosteriorBundle
from .detection import extract_events
from .joint import decode_joint
from .types import CDC_LAST, FSD, RNNT, DecodeConfig, KeywordSpec


def _check_bundles(X) -> list:
    bundles = list(X)
    for b in bundles:
        if not isinstance(b, PosteriorBundle):
            raise TypeError(
                f"KeywordSpotter consumes PosteriorBundle inputs, got {type(b).__name__}"
            )
    return bundles


class KeywordSpotter(BaseEstimator, TransformerMixin):
    """Detect one keyword in batches of posterior bundles.

    Parameters mirror DecodeConfig, plus the keyword itself and the
    event-extraction settings.
    """

    def __init__(
        self,
        keyword: KeywordSpec | None = None,
        bonus: float = 1.0,
        timeout: int = 200,
        psd_threshold: float = 0.9993,
        tdt_max_duration: int = 4,
        transducer_mode: str = RNNT,
        ctc_mode: str = FSD,
        fusion: str = CDC_LAST,
        cdc_window: int = 20,
        detect_threshold: float = 0.5,
        refractory: int = 60,
    ):
        self.keyword = keyword
        self.bonus = bonus
        self.timeout = timeout
        self.psd_threshold = psd_threshold
        self.tdt_max_duration = tdt_max_duration
        self.transducer_mode = transducer_mode
        self.ctc_mode = ctc_mode
        self.fusion = fusion
        self.cdc_window = cdc_window
        self.detect_threshold = detect_threshold
        self.refractory = refractory

    def _config(self) -> DecodeConfig:
        cfg = DecodeConfig(
            bonus=self.bonus,
            timeout=self.timeout,
            psd_threshold=self.psd_threshold,
            tdt_max_duration=self.tdt_max_duration,
            transducer_mode=self.transducer_mode,
            ctc_mode=self.ctc_mode,
            fusion=self.fusion,
            cdc_window=self.cdc_window,
        )
        cfg.validate()
        return cfg

    def fit(self, X=None, y=None):
        """Validate parameters; the decoder has nothing to learn."""
        if self.keyword is None:
            raise ValueError("KeywordSpotter needs a keyword before use")
        self._config()
        return self

    def transform(self, X) -> list:
        """Fused, placeholder-free confidence streams, one per bundle."""
        self.fit()
        cfg = self._config()
        return [decode_joint(b, self.keyword, cfg) for b in _check_bundles(X)]

    def decision_function(self, X) -> np.ndarray:
        """Per-utterance peak confidence of the fused stream."""
        return np.array([s.peak() for s in self.transform(X)])

    def predict(self, X) -> np.ndarray:
        """1 where the keyword fires at ``detect_threshold``, else 0."""
        peaks = self.decision_function(X)
        return (peaks >= self.detect_threshold).astype(int)

    def detect_events(self, X) -> list:
        """Full detection events per bundle (trigger frame, time, peak)."""
        self.fit()
        cfg = self._config()
        out = []
        for bundle in _check_bundles(X):
            stream = decode_joint(bundle, self.keyword, cfg)
            out.append(extract_events(
                stream,
                threshold=self.detect_threshold,
                refractory=self.refractory,
                keyword_id=self.keyword.keyword_id,
                frame_hop=bundle.frame_hop_seconds,
            ))
        return out
