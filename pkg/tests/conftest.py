import json
from pathlib import Path

import pytest

from tepdec import DegreeDistribution

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def dd36() -> DegreeDistribution:
    return DegreeDistribution.regular(3, 6)


@pytest.fixture(scope="session")
def acceptance_config() -> dict:
    with open(REPO_ROOT / "config" / "acceptance.json") as f:
        return json.load(f)
