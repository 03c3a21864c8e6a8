import json
import pathlib

import pytest

from promptbot.model import Dialogue, load_dialogues
from promptbot.prompts import default_templates

TESTS_DIR = pathlib.Path(__file__).resolve().parent
GOLDEN_DIR = TESTS_DIR / "golden"
DATA_DIR = TESTS_DIR / "data"
FIXTURE_DIR = TESTS_DIR.parent / "src" / "promptbot" / "fixtures"

# Generation-point turn index used when the golden contexts were transcribed.
GOLDEN_UPTO = {
    "dd": 3, "ed": 3, "persona": 3, "wow": 3, "wit": 3, "ic": 2, "smd": 3,
    "msc": 3, "cg_ic": 2, "dialkg": 3,
    "wow_parse": 2, "wit_parse": 2, "msc_parse": 2, "dialkg_parse": 2, "mwoz_dst": 2,
}


@pytest.fixture(scope="session")
def templates():
    return default_templates()


@pytest.fixture(scope="session")
def golden_generations():
    return json.loads((GOLDEN_DIR / "generations.json").read_text(encoding="utf-8"))


def fixture_dialogue(task: str) -> Dialogue:
    return load_dialogues(str(FIXTURE_DIR / "dialogues" / f"{task}.jsonl"))[0]


def golden_text(name: str) -> str:
    return (GOLDEN_DIR / f"{name}.txt").read_text(encoding="utf-8")
