from __future__ import annotations

import os
import random

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from superhighway.graph import CrossDomainSystem, Domain, DomainGraph

settings.register_profile(
    "default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def toy_rows(rng: random.Random, n_users: int, items: list[str], p: float):
    rows = []
    for u in range(n_users):
        for i in items:
            if rng.random() < p:
                rows.append((f"u{u}", i, 1.0))
    return rows


def random_toy_system(seed: int, max_users: int = 30, max_items: int = 40):
    """Random two-domain system with at least one shared item and one edge per domain."""
    rng = random.Random(seed)
    n_items = rng.randint(4, max_items)
    n_shared = rng.randint(1, max(1, n_items // 3))
    rest = n_items - n_shared
    n_src_only = rng.randint(0, rest)
    shared = [f"x{k}" for k in range(n_shared)]
    src_items = shared + [f"s{k}" for k in range(n_src_only)]
    tgt_items = shared + [f"t{k}" for k in range(rest - n_src_only)]
    n_src = rng.randint(1, max(1, max_users // 2))
    n_tgt = rng.randint(1, max(1, max_users - n_src))
    p = rng.uniform(0.1, 0.6)
    src = toy_rows(rng, n_src, src_items, p) or [("u0", shared[0], 1.0)]
    tgt = toy_rows(rng, n_tgt, tgt_items, p) or [("u0", shared[0], 1.0)]
    # make sure a shared item is used on both sides
    src.append(("u0", shared[0], 1.0))
    tgt.append(("u0", shared[0], 1.0))
    src, tgt = sorted(set(src)), sorted(set(tgt))
    sys = CrossDomainSystem(
        DomainGraph.from_interactions(Domain.SOURCE, src),
        DomainGraph.from_interactions(Domain.TARGET, tgt),
    )
    return sys, src, tgt


@st.composite
def toy_systems(draw, max_users: int = 30, max_items: int = 40):
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    return random_toy_system(seed, max_users, max_items)


@pytest.fixture
def tiny_system():
    """Source: u1-{a,b,s1}, u2-{a}; target: v1-{a,b,t1}, v2-{t1,t2}."""
    src = [("u1", "a", 1.0), ("u1", "b", 1.0), ("u1", "s1", 1.0), ("u2", "a", 1.0)]
    tgt = [("v1", "a", 1.0), ("v1", "b", 1.0), ("v1", "t1", 1.0), ("v2", "t1", 1.0), ("v2", "t2", 1.0)]
    return CrossDomainSystem(
        DomainGraph.from_interactions(Domain.SOURCE, src),
        DomainGraph.from_interactions(Domain.TARGET, tgt),
    )


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
