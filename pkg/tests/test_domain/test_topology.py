"""Tests for scenario configs, topology generation and the BFS oracle."""

import math

import networkx as nx
import pytest
from level_flood.domain.topology import (
    DEFAULT_THRESHOLDS,
    PRESETS,
    ScenarioConfig,
    Topology,
    average_degree,
    expected_degree,
    generate_topology,
    hop_distance_oracle,
    preset,
)
from pydantic import ValidationError


class TestScenarioConfig:
    def test_preset_shapes(self) -> None:
        cfg = preset("s2", topology_seed=4)
        assert (cfg.node_count, cfg.side_length) == (125, 500.0)
        assert cfg.comm_radius == 110.0
        assert cfg.topology_seed == 4

    def test_every_preset_has_a_threshold(self) -> None:
        assert set(DEFAULT_THRESHOLDS) == set(PRESETS)

    def test_unknown_preset(self) -> None:
        with pytest.raises(KeyError):
            preset("s9")

    @pytest.mark.parametrize("count", [0, 0x10000])
    def test_node_count_bounds(self, count: int) -> None:
        with pytest.raises(ValidationError):
            ScenarioConfig(node_count=count, side_length=100.0)

    def test_center_sink(self) -> None:
        cfg = ScenarioConfig(node_count=5, side_length=300.0)
        assert cfg.sink_position == (150.0, 150.0)

    def test_explicit_sink(self) -> None:
        cfg = ScenarioConfig(node_count=5, side_length=300.0, sink_placement=(0, 10))
        assert cfg.sink_position == (0, 10)

    def test_sink_outside_square_rejected(self) -> None:
        with pytest.raises(ValidationError, match="outside"):
            ScenarioConfig(node_count=5, side_length=300.0, sink_placement=(301, 0))

    def test_frozen(self) -> None:
        cfg = preset("s1")
        with pytest.raises(ValidationError):
            cfg.node_count = 3  # type: ignore[misc]


class TestTopology:
    def test_chain_adjacency(self, chain: Topology) -> None:
        assert chain.adjacency == (
            frozenset({1}),
            frozenset({0, 2}),
            frozenset({1, 3}),
            frozenset({2}),
        )
        assert chain.edges() == [(0, 1), (1, 2), (2, 3)]
        assert [chain.degree(n) for n in range(4)] == [1, 2, 2, 1]

    def test_radius_is_inclusive(self) -> None:
        topo = Topology.from_positions([(0.0, 0.0), (110.0, 0.0)], 110.0)
        assert topo.adjacency[0] == frozenset({1})

    def test_star_leaves_do_not_hear_each_other(self, star: Topology) -> None:
        assert star.degree(0) == 5
        assert all(star.adjacency[leaf] == frozenset({0}) for leaf in range(1, 6))

    def test_errors(self) -> None:
        with pytest.raises(ValueError, match="at least one"):
            Topology.from_positions([], 110.0)
        with pytest.raises(ValueError, match="positive"):
            Topology.from_positions([(0.0, 0.0)], 0.0)
        with pytest.raises(ValueError, match="sink_id"):
            Topology.from_positions([(0.0, 0.0)], 110.0, sink_id=1)

    def test_connectivity(self, chain: Topology, two_components: Topology) -> None:
        assert chain.is_connected()
        assert not two_components.is_connected()

    def test_graph_carries_positions(self, triangle: Topology) -> None:
        graph = triangle.to_graph()
        assert graph.number_of_edges() == 3
        assert graph.nodes[1]["pos"] == (100.0, 0.0)

    def test_repr(self, chain: Topology) -> None:
        assert repr(chain) == "Topology(nodes=4, edges=3, comm_radius=110.0)"


class TestGenerateTopology:
    def test_same_config_same_topology(self) -> None:
        cfg = preset("s1", topology_seed=11)
        assert generate_topology(cfg) == generate_topology(cfg)

    def test_seeds_differ(self) -> None:
        first = generate_topology(preset("s1", topology_seed=1))
        second = generate_topology(preset("s1", topology_seed=2))
        assert first.positions != second.positions

    def test_sink_first_and_points_inside(self) -> None:
        cfg = preset("s2", topology_seed=3)
        topo = generate_topology(cfg)
        assert topo.node_count == 125
        assert topo.positions[0] == (250.0, 250.0)
        assert all(0 <= x <= 500 and 0 <= y <= 500 for x, y in topo.positions)

    def test_adjacency_symmetric_and_irreflexive(self) -> None:
        topo = generate_topology(preset("s1", topology_seed=5))
        for node, nbrs in enumerate(topo.adjacency):
            assert node not in nbrs
            assert all(node in topo.adjacency[other] for other in nbrs)

    def test_adjacency_matches_distances(self) -> None:
        topo = generate_topology(preset("s1", topology_seed=9))
        for i, (xi, yi) in enumerate(topo.positions):
            for j, (xj, yj) in enumerate(topo.positions):
                if i != j:
                    close = math.hypot(xi - xj, yi - yj) <= topo.comm_radius
                    assert (j in topo.adjacency[i]) == close

    def test_lone_sink(self) -> None:
        topo = generate_topology(ScenarioConfig(node_count=1, side_length=10.0))
        assert topo.node_count == 1
        assert hop_distance_oracle(topo) == {0: 0}


class TestOracle:
    def test_chain(self, chain: Topology) -> None:
        assert hop_distance_oracle(chain) == {0: 0, 1: 1, 2: 2, 3: 3}

    def test_unreachable_is_none(self, two_components: Topology) -> None:
        assert hop_distance_oracle(two_components) == {0: 0, 1: 1, 2: None}

    def test_matches_networkx_bfs(self) -> None:
        topo = generate_topology(preset("s3", topology_seed=2))
        oracle = hop_distance_oracle(topo)
        for level, nodes in enumerate(nx.bfs_layers(topo.to_graph(), [0])):
            assert all(oracle[node] == level for node in nodes)


class TestDegree:
    def test_average_degree(self, chain: Topology) -> None:
        assert average_degree(chain) == 1.5

    def test_expected_degree_closed_form(self) -> None:
        cfg = ScenarioConfig(node_count=11, side_length=100.0, comm_radius=50.0)
        t = 0.5
        area = math.pi * t**2 - 8 * t**3 / 3 + t**4 / 2
        assert expected_degree(cfg) == pytest.approx(10 * area)

    def test_expected_degree_needs_radius_within_side(self) -> None:
        with pytest.raises(ValueError):
            expected_degree(ScenarioConfig(node_count=3, side_length=100.0))

    @pytest.mark.slow
    @pytest.mark.parametrize("name", ["s1", "s2", "s3"])
    def test_mean_degree_near_expected(self, name: str) -> None:
        degrees = [
            average_degree(generate_topology(preset(name, topology_seed=seed)))
            for seed in range(1, 21)
        ]
        expected = expected_degree(preset(name))
        assert sum(degrees) / len(degrees) == pytest.approx(expected, rel=0.10)
