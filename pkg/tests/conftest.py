from __future__ import annotations

import pytest

from bamkit import synthdata


@pytest.fixture(scope="session")
def small_bundle():
    return synthdata.generate("small", 7)


@pytest.fixture(scope="session")
def full_bundle():
    return synthdata.generate("full", 7)


@pytest.fixture(scope="session")
def small_pairs(small_bundle):
    return [(e, u) for u in small_bundle.train_utterances for e in u.expressions]


@pytest.fixture(scope="session")
def full_pairs(full_bundle):
    return [(e, u) for u in full_bundle.train_utterances for e in u.expressions]


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """Small-profile corpus files on disk, written once per session."""
    out = tmp_path_factory.mktemp("corpus")
    synthdata.write_corpus(out, "small", 7)
    return out
