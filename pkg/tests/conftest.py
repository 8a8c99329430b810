#tests/conftest.py

import os

os.environ.setdefault("CHUNKSTACK_THREADS", "1")

import logging
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to Python path
project_root = str(Path(__file__).parent.parent)
if project_root not in sys.path:
    sys.path.append(project_root)

from chunkstack.data.corpus import Record
from chunkstack.text.tokenizer import RESERVED, Vocabulary

logger = logging.getLogger(__name__)
handler = logging.StreamHandler(sys.stdout)
handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s', '%Y-%m-%d %H:%M:%S'))
logger.addHandler(handler)
logger.setLevel(logging.INFO)

TOY_WORDS = ("alpha", "beta", "gamma", "delta", "un", "##able", "##s", "read", "x", "##y", "z")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def toy_vocab() -> Vocabulary:
    """Reserved tokens plus a handful of words and continuation pieces (14 entries)"""
    return Vocabulary(RESERVED + TOY_WORDS)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def toy_records():
    """Keyword task: 'alpha' marks class 1"""
    texts = [
        ("alpha beta gamma", 1),
        ("beta gamma delta", 0),
        ("gamma alpha delta beta", 1),
        ("delta delta beta", 0),
        ("read alpha z", 1),
        ("read z beta", 0),
        ("gamma gamma alpha", 1),
        ("z delta read", 0),
    ]
    return [Record(id=f"toy-{i}", text=t, label=y) for i, (t, y) in enumerate(texts)]
