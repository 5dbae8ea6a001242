"""Shared builders for small hand-constructed decode problems."""

import numpy as np
import pytest

from streamkws import KeywordSpec, PosteriorBundle


@pytest.fixture
def single_token_keyword():
    return KeywordSpec("one", (1,), ctc_blank_id=0, transducer_blank_id=0)


@pytest.fixture
def hand_bundle(single_token_keyword):
    """T=1, U=1, V=2 with p(y1)=0.9 on row 0 and p(blank)=0.8 on row 1."""
    trans = np.array([[[0.1, 0.9], [0.8, 0.2]]])
    return PosteriorBundle(
        utterance_id="hand",
        transducer_tensor=trans,
        ctc_matrix=np.array([[0.1, 0.9]]),
    )


def uniform_bundle(num_frames, keyword_rows, vocab, utterance_id="uni", **kwargs):
    """Every distribution uniform; handy for shape-level tests."""
    row = np.full(vocab, 1.0 / vocab)
    return PosteriorBundle(
        utterance_id=utterance_id,
        transducer_tensor=np.tile(row, (num_frames, keyword_rows, 1)),
        ctc_matrix=np.tile(row, (num_frames, 1)),
        **kwargs,
    )
