import json
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")
GOLDEN_CASES = sorted(f[:-4] for f in os.listdir(GOLDEN) if f[:2].isdigit() and f.endswith(".csv"))


def golden_case(name):
    from possession_ratings.events import parse_events, parse_rosters
    with open(os.path.join(GOLDEN, name + ".csv"), "rb") as f:
        events = parse_events(f.read())
    with open(os.path.join(GOLDEN, "roster.csv"), "rb") as f:
        roster = parse_rosters(f.read())[0]
    with open(os.path.join(GOLDEN, "expected.json")) as f:
        expected = json.load(f)[name]
    return events["G"], roster, expected


def possession_design(rng, k, n, inv_rate=0.3, base=-1.0, scale=0.4):
    """Dense 0/1 involvement block plus -1/0/+1 on-field block, and a response."""
    inv = (rng.random((n, k)) < inv_rate).astype(float)
    of = rng.choice([-1.0, 0.0, 1.0], size=(n, k))
    X = np.hstack([inv, of])
    beta = rng.normal(0, scale, 2 * k)
    y = (rng.random(n) < 1 / (1 + np.exp(-(X @ beta + base)))).astype(float)
    return X, y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
