from pathlib import Path

import pytest

from memaccel.config import load_cost_table, load_hardware, load_model

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def llama():
    return load_model(CONFIGS / "llama2_7b.yaml")


@pytest.fixture(scope="session")
def qwen():
    return load_model(CONFIGS / "qwen3_8b.yaml")


@pytest.fixture(scope="session")
def hw():
    return load_hardware(CONFIGS / "hw_default.yaml")


@pytest.fixture(scope="session")
def table():
    return load_cost_table(CONFIGS / "cost_default.yaml")


@pytest.fixture(scope="session")
def configs_dir():
    return CONFIGS
