import pytest

from sentiment_service.backends import ModelRegistry


@pytest.fixture
def lexicon_registry():
    """Deterministic offline registry; tests never hit the network."""
    return ModelRegistry(env={"SENTIMENT_SERVICE_BACKEND": "lexicon"})
