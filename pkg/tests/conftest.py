from __future__ import annotations

import pytest

from guard.gateway import InferenceGateway
from guard.taxonomy import TaxonomyRegistry, load_default_taxonomy

from helpers import (
    ScriptedBackend,
    ScriptedSearchClient,
    build_fixture_profile,
    record_fixture_run,
)


@pytest.fixture(scope="session")
def registry() -> TaxonomyRegistry:
    return load_default_taxonomy()


@pytest.fixture
def scripted_backend() -> ScriptedBackend:
    return ScriptedBackend()


@pytest.fixture
def scripted_gateway(scripted_backend) -> InferenceGateway:
    return InferenceGateway(scripted_backend)


@pytest.fixture
def search_client() -> ScriptedSearchClient:
    return ScriptedSearchClient()


@pytest.fixture(scope="session")
def fixture_profile():
    return build_fixture_profile()


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """Recorded transcripts + profile for fully offline replay runs."""
    return record_fixture_run(tmp_path_factory.mktemp("fixture"))
