import json
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(records, name="tweets.jsonl"):
        path = tmp_path / name
        lines = [r if isinstance(r, str) else json.dumps(r) for r in records]
        path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        return path

    return _write


def tweet_record(i, **kw):
    rec = {
        "id": f"t{i}",
        "created_at": "2022-02-28T01:02:03Z",
        "user_id": f"u{i}",
        "text": f"flood water rising {i}",
    }
    rec.update(kw)
    return rec


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
