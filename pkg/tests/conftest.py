import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from congestsp.graph import GraphSpec, WeightedGraph, generate

settings.register_profile("repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def make(text: str, weights: str = "unit", seed: int = 0) -> WeightedGraph:
    return generate(GraphSpec.parse(text, weights=weights, seed=seed))


def random_connected(rng: np.random.Generator, n: int, extra: float = 0.1, wmax: int = 20) -> WeightedGraph:
    """Random spanning tree plus a sprinkle of extra edges, integer lengths in [1, wmax]."""
    pairs = set()
    order = rng.permutation(n)
    for i in range(1, n):
        u, v = int(order[i]), int(order[rng.integers(0, i)])
        pairs.add((min(u, v), max(u, v)))
    for _ in range(int(extra * n * n / 2)):
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        if u != v:
            pairs.add((min(u, v), max(u, v)))
    hi = min(wmax, n**3)
    return WeightedGraph.from_lengths(n, [(u, v, int(rng.integers(1, hi + 1))) for u, v in sorted(pairs)])


@st.composite
def connected_graphs(draw, min_n=1, max_n=24, wmax=20):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**31))
    extra = draw(st.sampled_from([0.0, 0.05, 0.2]))
    return random_connected(np.random.default_rng(seed), n, extra, wmax)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _oracle_cache(tmp_path_factory, monkeypatch):
    monkeypatch.setenv("CONGESTSP_CACHE_DIR", str(tmp_path_factory.getbasetemp() / "oracle-cache"))



# acceptance criteria report: one line per criterion in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
