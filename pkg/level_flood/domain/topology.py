"""Seeded sensor deployments over the Boolean disk model.

Domain objects describing where nodes sit and who can hear whom. No
simulation or protocol imports.

Notes
-----
Node 0 is always the sink. It is placed explicitly (the square's center by
default) rather than drawn, and the remaining ``node_count - 1`` sensors are
drawn i.i.d. uniform over the square from a numpy ``PCG64`` generator seeded
only by ``topology_seed``. Two nodes are adjacent iff their Euclidean distance
is at most the communication radius. Connectivity is not guaranteed.

Examples
--------
>>> topo = generate_topology(preset("s1", topology_seed=7))
>>> topo.node_count
50
>>> hop_distance_oracle(topo)[topo.sink_id]
0
"""

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Final, Literal, Self

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

__all__ = [
    "DEFAULT_COMM_RADIUS",
    "DEFAULT_THRESHOLDS",
    "LARGE_PRESETS",
    "PRESETS",
    "SINK_ID",
    "ScenarioConfig",
    "Topology",
    "average_degree",
    "expected_degree",
    "generate_topology",
    "hop_distance_oracle",
    "preset",
]

SINK_ID: Final = 0
DEFAULT_COMM_RADIUS: Final = 110.0

#: Scenario presets as (node_count, side_length in meters).
PRESETS: Final[Mapping[str, tuple[int, float]]] = {
    "s1": (50, 250.0),
    "s2": (125, 500.0),
    "s3": (250, 1000.0),
    "s4": (1000, 2000.0),
    "s5": (4000, 4000.0),
}

#: Presets that need an explicit opt-in from the experiment driver.
LARGE_PRESETS: Final = frozenset({"s4", "s5"})

#: Rebroadcast threshold P used for each preset unless overridden.
DEFAULT_THRESHOLDS: Final[Mapping[str, float]] = {
    "s1": 0.4,
    "s2": 0.4,
    "s3": 0.5,
    "s4": 0.8,
    "s5": 0.8,
}


class ScenarioConfig(BaseModel):
    """One deployment: how many nodes, how big a square, how far a radio reaches.

    Attributes
    ----------
    node_count : int
        Total number of nodes including the sink. Node ids must fit in 16 bits
        with ``0xFFFF`` reserved, so at most 65535 nodes.
    side_length : float
        Side of the square deployment area in meters.
    comm_radius : float
        Boolean disk communication radius in meters. Default: 110.
    sink_placement : "center" or (x, y)
        Where the sink sits. Explicit coordinates must lie inside the square.
    topology_seed : int
        Seed of the PCG64 generator that draws sensor positions.
    """

    model_config = ConfigDict(frozen=True)

    node_count: int = Field(ge=1, le=0xFFFF)
    side_length: float = Field(gt=0)
    comm_radius: float = Field(default=DEFAULT_COMM_RADIUS, gt=0)
    sink_placement: Literal["center"] | tuple[float, float] = "center"
    topology_seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_sink_inside(self) -> Self:
        """Verify an explicit sink position lies within the deployment square.

        Returns
        -------
        Self
            The validated ScenarioConfig instance.

        Raises
        ------
        ValueError
            If either sink coordinate is outside ``[0, side_length]``.
        """
        if self.sink_placement == "center":
            return self
        x, y = self.sink_placement
        if not (0 <= x <= self.side_length and 0 <= y <= self.side_length):
            raise ValueError(  # noqa: TRY003
                f"sink_placement {self.sink_placement} lies outside the"
                f" {self.side_length} m square"
            )
        return self

    @property
    def sink_position(self) -> tuple[float, float]:
        """Coordinates of the sink in meters."""
        if self.sink_placement == "center":
            half = self.side_length / 2
            return (half, half)
        return self.sink_placement


def preset(name: str, topology_seed: int = 0) -> ScenarioConfig:
    """Return the built-in scenario called ``name`` ("s1" .. "s5").

    Parameters
    ----------
    name : str
        Preset name.
    topology_seed : int, optional
        Seed for sensor placement. Default: 0.

    Returns
    -------
    ScenarioConfig
        The preset with a centered sink and a 110 m radius.

    Raises
    ------
    KeyError
        If ``name`` is not a known preset.
    """
    node_count, side_length = PRESETS[name]
    return ScenarioConfig(
        node_count=node_count,
        side_length=side_length,
        topology_seed=topology_seed,
    )


@dataclass(frozen=True, slots=True)
class Topology:
    """Immutable node positions and the disk-graph adjacency derived from them.

    Attributes
    ----------
    positions : tuple[tuple[float, float], ...]
        ``positions[i]`` is node i's (x, y) in meters.
    adjacency : tuple[frozenset[int], ...]
        ``adjacency[i]`` holds every node within ``comm_radius`` of node i,
        excluding i itself.
    comm_radius : float
        The radius the adjacency was computed with.
    sink_id : int
        Id of the sink node.
    """

    positions: tuple[tuple[float, float], ...]
    adjacency: tuple[frozenset[int], ...]
    comm_radius: float
    sink_id: int = SINK_ID

    @classmethod
    def from_positions(
        cls,
        positions: Sequence[Sequence[float]] | np.ndarray,
        comm_radius: float,
        sink_id: int = SINK_ID,
    ) -> "Topology":
        """Build a topology by applying the disk rule to explicit coordinates.

        Parameters
        ----------
        positions : sequence of (x, y)
            Node coordinates; index is the node id.
        comm_radius : float
            Communication radius in meters. Must be positive.
        sink_id : int, optional
            Which node is the sink. Default: 0.

        Returns
        -------
        Topology
            Topology with symmetric, irreflexive adjacency.

        Raises
        ------
        ValueError
            If there are no positions, the radius is not positive, or the sink
            id is out of range.
        """
        coords = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
        if len(coords) == 0:
            raise ValueError("a topology needs at least one node")  # noqa: TRY003
        if comm_radius <= 0:
            raise ValueError("comm_radius must be positive")  # noqa: TRY003
        if not 0 <= sink_id < len(coords):
            raise ValueError(f"sink_id {sink_id} out of range")  # noqa: TRY003

        radius_sq = comm_radius * comm_radius
        adjacency = []
        for i, origin in enumerate(coords):
            dist_sq = np.sum((coords - origin) ** 2, axis=1)
            close = np.flatnonzero(dist_sq <= radius_sq)
            adjacency.append(frozenset(int(j) for j in close if j != i))

        return cls(
            positions=tuple((float(x), float(y)) for x, y in coords),
            adjacency=tuple(adjacency),
            comm_radius=float(comm_radius),
            sink_id=sink_id,
        )

    @property
    def node_count(self) -> int:
        """Number of nodes including the sink."""
        return len(self.positions)

    def degree(self, node: int) -> int:
        """Number of neighbors of ``node``."""
        return len(self.adjacency[node])

    def edges(self) -> list[tuple[int, int]]:
        """Every undirected edge once, as sorted (low, high) pairs."""
        return sorted(
            (i, j) for i, nbrs in enumerate(self.adjacency) for j in nbrs if i < j
        )

    def to_graph(self) -> nx.Graph:
        """Return the adjacency as a networkx graph with ``pos`` node attributes."""
        graph = nx.Graph()
        for node, pos in enumerate(self.positions):
            graph.add_node(node, pos=pos)
        graph.add_edges_from(self.edges())
        return graph

    def is_connected(self) -> bool:
        """True when every node can reach the sink."""
        return nx.is_connected(self.to_graph())

    def __repr__(self) -> str:
        """Return string representation of the Topology instance.

        Returns
        -------
        str
            Node count, edge count and radius.
        """
        return (
            f"Topology(nodes={self.node_count}, edges={len(self.edges())},"
            f" comm_radius={self.comm_radius})"
        )


def generate_topology(cfg: ScenarioConfig) -> Topology:
    """Draw one deployment for ``cfg``.

    The result is a pure function of ``cfg``: the same config always yields the
    same positions and adjacency.

    Parameters
    ----------
    cfg : ScenarioConfig
        Scenario to deploy.

    Returns
    -------
    Topology
        Sink at index 0, sensors at 1..node_count-1.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.topology_seed))
    sensors = rng.uniform(0.0, cfg.side_length, size=(cfg.node_count - 1, 2))
    positions = np.vstack([np.asarray(cfg.sink_position, dtype=np.float64), sensors])
    return Topology.from_positions(positions, cfg.comm_radius, sink_id=SINK_ID)


def hop_distance_oracle(topo: Topology) -> dict[int, int | None]:
    """Breadth-first hop count from the sink to every node.

    Independent of the protocol code; used to check level building.

    Parameters
    ----------
    topo : Topology
        Topology to measure.

    Returns
    -------
    dict[int, int | None]
        Hop count per node id, ``None`` for nodes off the sink's component.
    """
    lengths = nx.single_source_shortest_path_length(topo.to_graph(), topo.sink_id)
    return {node: lengths.get(node) for node in range(topo.node_count)}


def average_degree(topo: Topology) -> float:
    """Mean number of neighbors over all nodes, sink included."""
    return sum(len(nbrs) for nbrs in topo.adjacency) / topo.node_count


def expected_degree(cfg: ScenarioConfig) -> float:
    """Boundary-corrected expected degree of a uniformly placed node.

    Uses the closed form for the probability that two uniform points in a
    square of side s lie within r of each other (valid for r <= s):
    ``pi r^2 / s^2 - 8 r^3 / (3 s^3) + r^4 / (2 s^4)``.

    Parameters
    ----------
    cfg : ScenarioConfig
        Scenario to evaluate.

    Returns
    -------
    float
        ``(node_count - 1)`` times the pair probability.

    Raises
    ------
    ValueError
        If the radius exceeds the side length.
    """
    ratio = cfg.comm_radius / cfg.side_length
    if ratio > 1:
        raise ValueError(  # noqa: TRY003
            "expected_degree needs comm_radius <= side_length,"
            f" got {cfg.comm_radius} > {cfg.side_length}"
        )
    pair_probability = math.pi * ratio**2 - 8 * ratio**3 / 3 + ratio**4 / 2
    return (cfg.node_count - 1) * pair_probability
