import sys
from pathlib import Path

import pytest


@pytest.fixture
def write(tmp_path):
    """Write a text file under tmp_path and return its path."""

    def _write(name: str, text: str) -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


@pytest.fixture
def tiny_files(write):
    """Three users, two pages, three posts with two-topic mixtures."""
    inter = write(
        "interactions.csv",
        "user_id,post_id,timestamp\n"
        "u1,p1,0\n"
        "u1,p2,43200\n"
        "u1,p3,8640000\n"
        "u2,p1,100\n"
        "u3,p3,5\n"
        "u3,p2,5\n",
    )
    posts = write("posts.csv", "post_id,page_id\np1,A\np2,A\np3,B\n")
    topics = write(
        "topics.csv",
        "post_id,t0,t1\np1,0.7,0.3\np2,0.2,0.8\np3,0.5,0.5\n",
    )
    return inter, posts, topics


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
