from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def toy_flows_path() -> Path:
    return DATA_DIR / "toy_flows.csv"


@pytest.fixture
def toy_codes_path() -> Path:
    return DATA_DIR / "toy_codes.csv"
