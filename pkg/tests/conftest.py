from __future__ import annotations

import random

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from choreo import fixture, parse_cp, parse_global, parse_ld, parse_sca

from oracles import random_global

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

# acceptance lines collected by test_acceptance and printed at the end of the run
ACCEPTANCE: list[str] = []


def formulas(budget: int = 6, comm: bool = True) -> st.SearchStrategy:
    return st.randoms(use_true_random=False).map(lambda rng: random_global(rng, budget, comm))


@pytest.fixture
def load():
    def _load(name: str):
        text = fixture(name)
        match name.rsplit(".", 1)[-1]:
            case "pltl":
                return parse_global(text)
            case "ld":
                return parse_ld(text)
            case "sca":
                return parse_sca(text)
            case "cp":
                return parse_cp(text)
        raise ValueError(name)

    return _load


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240601)
