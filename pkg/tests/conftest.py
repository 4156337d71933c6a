from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import pytest

from failscope.assets import controller_path
from failscope.robosim.mission import Mission
from failscope.vm.assembly import load_program, parse_program

from .constants import COUNTDOWN_SOURCE, SEED, SHORT_MISSION
from .utils import GOLDEN_DIR, GoldenFiles, synthetic_corpus

if TYPE_CHECKING:
    from failscope.corpus.store import Corpus
    from failscope.vm.isa import Program


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--update-golden", action="store_true", help="rewrite the golden files under tests/golden")


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def controller() -> "Program":
    return load_program(controller_path())


@pytest.fixture()
def countdown() -> "Program":
    return parse_program(COUNTDOWN_SOURCE)


@pytest.fixture()
def short_mission() -> Mission:
    return Mission.from_points([(0.0, 0.0), (2.0, 0.0)], mission_id="short")


@pytest.fixture()
def short_mission_file(tmp_path: Path) -> Path:
    path = tmp_path / "short.txt"
    path.write_text(SHORT_MISSION, encoding="utf-8")
    return path


@pytest.fixture()
def corpus() -> "Corpus":
    return synthetic_corpus(runs=60, seed=SEED)


@pytest.fixture()
def corpus_dir(tmp_path: Path, corpus: "Corpus") -> Path:
    return corpus.write(tmp_path / "corpus")


@pytest.fixture()
def golden(request: pytest.FixtureRequest) -> GoldenFiles:
    return GoldenFiles(GOLDEN_DIR, bool(request.config.getoption("--update-golden")))
