"""
Pytest configuration and fixtures for the level_flood test suite.
"""

import math
from collections.abc import Iterator

import pytest
import structlog
from level_flood.domain.topology import Topology
from level_flood.infrastructure.engine import Simulator, TimingConfig

RADIUS = 110.0


@pytest.fixture(autouse=True)
def _reset_structlog() -> Iterator[None]:
    """Drop logging configuration that points at a per-test capture stream."""
    yield
    structlog.reset_defaults()


@pytest.fixture
def chain() -> Topology:
    """Sink 0 then nodes 1, 2, 3 in a line, 100 m apart; levels 0..3."""
    return Topology.from_positions(
        [(0.0, 0.0), (100.0, 0.0), (200.0, 0.0), (300.0, 0.0)], RADIUS
    )


@pytest.fixture
def triangle() -> Topology:
    """Three mutually adjacent nodes; both sensors sit at level 1."""
    return Topology.from_positions(
        [(0.0, 0.0), (100.0, 0.0), (50.0, 50.0 * math.sqrt(3))], RADIUS
    )


@pytest.fixture
def star() -> Topology:
    """Sink at the center, five leaves 100 m out and out of each other's range."""
    leaves = [
        (100.0 * math.cos(2 * math.pi * k / 5), 100.0 * math.sin(2 * math.pi * k / 5))
        for k in range(5)
    ]
    return Topology.from_positions([(0.0, 0.0), *leaves], RADIUS)


@pytest.fixture
def two_components() -> Topology:
    """Sink and one neighbor, plus node 2 far away and unreachable."""
    return Topology.from_positions([(0.0, 0.0), (100.0, 0.0), (500.0, 500.0)], RADIUS)


@pytest.fixture
def no_jitter() -> TimingConfig:
    """Exact one-second hops; RAD draws still come from seed 1."""
    return TimingConfig(hop_delay=1.0, jitter_max=0.0, rad_t_max=0.5, protocol_seed=1)


@pytest.fixture
def chain_sim(chain: Topology, no_jitter: TimingConfig) -> Simulator:
    return Simulator(chain, no_jitter)
