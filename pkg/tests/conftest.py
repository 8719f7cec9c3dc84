import numpy as np
import pytest

from transrec.dataset import InteractionLog, build_sequences, split_leave_one_out

_CRITERIA: list[str] = []


@pytest.fixture
def record_criterion():
    """Log one PASS/FAIL/SKIP line per acceptance criterion and return the verdict."""

    def record(number, name, passed, detail=""):
        verdict = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"criterion {number} [{name}]: {verdict} {detail}".rstrip()
        print(line)
        _CRITERIA.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


def random_split_dataset(rng, n_users, n_items, min_len=3, max_len=8):
    """Random sequences (repeats allowed) with a leave-one-out split, every item present."""
    triples = []
    for u in range(n_users):
        for step in range(int(rng.integers(min_len, max_len + 1))):
            triples.append((f"u{u}", f"i{int(rng.integers(n_items))}", step))
    # three filler users make every item appear without any user seeing all of them
    for k in range(n_items):
        triples.append((f"pad{k % 3}", f"i{k}", k))
    ds = split_leave_one_out(build_sequences(InteractionLog.from_triples(triples)))
    return ds


@pytest.fixture
def small_ds():
    return random_split_dataset(np.random.default_rng(7), 12, 30)


@pytest.fixture
def write_log(tmp_path):
    def write(rows, name="log.tsv", delimiter="\t"):
        path = tmp_path / name
        path.write_text("".join(delimiter.join(str(x) for x in r) + "\n" for r in rows), encoding="utf-8")
        return path

    return write
