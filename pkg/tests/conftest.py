import os

import numpy as np
import pytest

from lightcake.dataset import build_dataset
from lightcake.model import EmbeddingTables
from lightcake.synthetic import typed_graph_triples, write_splits

# Directory holding the published benchmark splits, one sub-directory per
# dataset (FB15K-237, WN18RR, NELL995, DDB14), each with train/valid/test.txt.
DATA_ROOT = os.environ.get("LIGHTCAKE_DATA", os.path.join(os.path.dirname(__file__), os.pardir, "data"))

DATASET_DIRS = {
    "FB15K-237": ("FB15K-237", "FB15k-237", "fb15k-237", "FB15K237"),
    "WN18RR": ("WN18RR", "wn18rr"),
    "NELL995": ("NELL995", "nell995", "NELL-995"),
    "DDB14": ("DDB14", "ddb14"),
}


def benchmark_dir(name):
    """Path of a published benchmark, or ``None`` when it is not on disk."""
    for candidate in DATASET_DIRS[name]:
        path = os.path.join(DATA_ROOT, candidate)
        if all(os.path.isfile(os.path.join(path, f"{s}.txt")) for s in ("train", "valid", "test")):
            return path
    return None


def require_benchmark(name):
    path = benchmark_dir(name)
    if path is None:
        pytest.fail(f"benchmark {name} not found under {os.path.abspath(DATA_ROOT)} "
                    f"(set LIGHTCAKE_DATA to the directory holding the published splits)",
                    pytrace=False)
    return path


TOY_TRIPLES = [
    ("a", "likes", "b"),
    ("b", "likes", "c"),
    ("a", "knows", "c"),
]


@pytest.fixture
def toy():
    return build_dataset(TOY_TRIPLES, [("c", "knows", "a")], [("b", "knows", "a")])


def random_tables(ds, dim, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    return EmbeddingTables(rng.normal(0.0, scale, (ds.num_entities, dim)),
                           rng.normal(0.0, scale, (ds.num_relations_augmented, dim)))


@pytest.fixture
def small_graph():
    raw = typed_graph_triples(num_entities=40, num_types=3, num_relations=4, num_triples=200, seed=3)
    return build_dataset(raw[40:], raw[:20], raw[20:40])


@pytest.fixture
def dataset_dir(tmp_path):
    raw = typed_graph_triples(num_entities=60, num_types=3, num_relations=5, num_triples=400, seed=11)
    splits = (raw[80:], raw[:40], raw[40:80])
    write_splits(tmp_path / "kg", splits)
    return tmp_path / "kg"


# acceptance report: one PASS/FAIL line per criterion at the end of the run
_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion covered by this test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    name = _CRITERIA.get(report.nodeid.split("::")[-1].split("[")[0])
    if name is not None:
        prev = _ACCEPTANCE.get(name, "PASS")
        _ACCEPTANCE[name] = "PASS" if (report.passed and prev == "PASS") else "FAIL"


_CRITERIA = {}


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            _CRITERIA[item.name.split("[")[0]] = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _ACCEPTANCE.items():
        terminalreporter.write_line(f"{status}  {name}")
