from __future__ import annotations

import pytest

from helpers import CorpusBundle, make_coupled_spec


@pytest.fixture(scope="session")
def small_bundle() -> CorpusBundle:
    """120-utterance coupled corpus shared across test modules."""
    return CorpusBundle(make_coupled_spec(utterances=120, seed=11))
