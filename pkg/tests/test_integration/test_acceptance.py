"""End-to-end checks of protocol behavior over the preset scenarios."""

import statistics
from itertools import pairwise

import pytest
from level_flood.application.baseline import FloodProtocol
from level_flood.application.services import (
    CellResult,
    ExperimentSpec,
    processed_fractions,
    run_experiment,
    run_survey,
)
from level_flood.domain.metrics import processed_fraction_by_level
from level_flood.domain.topology import (
    DEFAULT_THRESHOLDS,
    expected_degree,
    generate_topology,
    hop_distance_oracle,
    preset,
)
from level_flood.infrastructure.engine import Simulator, TimingConfig

TWENTY_SEEDS = tuple((s, s) for s in range(1, 21))
SWEEP = (0.2, 0.4, 0.5, 0.8, 1.0)

Paired = tuple[list[CellResult], list[CellResult]]


def _spec(scenario: str, protocol: str = "lbf", **changes: object) -> ExperimentSpec:
    fields: dict[str, object] = {
        "scenario": scenario,
        "protocol": protocol,
        "thresholds": (None,) if protocol == "flood" else (1.0,),
        "seeds": ((1, 1),),
        "broadcast_requests": 3,
    }
    fields.update(changes)
    return ExperimentSpec(**fields)  # type: ignore[arg-type]


def _connected(result: CellResult) -> bool:
    return all(level is not None for level in result.oracle_levels)


@pytest.fixture(scope="module", params=["s2", "s3"])
def paired(request: pytest.FixtureRequest) -> Paired:
    """LBF at the preset threshold and flooding on the same 20 seed pairs."""
    scenario: str = request.param
    common: dict[str, object] = {
        "seeds": TWENTY_SEEDS,
        "broadcast_requests": 0,
        "workers": 4,
    }
    lbf = run_experiment(
        _spec(scenario, thresholds=(DEFAULT_THRESHOLDS[scenario],), **common)
    )
    flood = run_experiment(_spec(scenario, "flood", **common))
    return lbf, flood


def test_lbf_beats_flooding_on_one_seed() -> None:
    (lbf,) = run_experiment(_spec("s2", thresholds=(0.4,)))
    (flood,) = run_experiment(_spec("s2", "flood"))
    assert lbf.report.average_cost is not None
    assert flood.report.average_cost is not None
    assert lbf.report.average_cost < flood.report.average_cost
    assert lbf.max_level == flood.max_level


def test_broadcast_dissemination_quality() -> None:
    (lbf,) = run_experiment(_spec("s1", targets=(1,)))
    (flood,) = run_experiment(_spec("s1", "flood", targets=(1,)))
    assert lbf.report.re is not None
    assert flood.report.re is not None
    # with P = 1 every reachable node gets the broadcast, as with flooding
    assert lbf.report.re == flood.report.re
    assert lbf.report.sr is not None
    assert flood.report.sr is not None
    assert lbf.report.sr > flood.report.sr


@pytest.mark.slow
class TestLevelBuilding:
    @pytest.mark.parametrize("scenario", ["s1", "s2", "s3"])
    def test_levels_equal_bfs_hops(self, scenario: str) -> None:
        spec = _spec(scenario, seeds=tuple((s, s + 100) for s in range(1, 101)))
        rows = run_survey(spec)
        assert len(rows) == 100
        assert all(row.levels_match_oracle for row in rows)

    @pytest.mark.parametrize(
        ("scenario", "low", "high"), [("s1", 2.0, 4.0), ("s2", 4.0, 6.0)]
    )
    def test_max_level_range(self, scenario: str, low: float, high: float) -> None:
        rows = run_survey(_spec(scenario, seeds=TWENTY_SEEDS))
        depth = statistics.mean(row.max_level or 0 for row in rows)
        assert low <= depth <= high

    def test_depth_grows_with_area(self) -> None:
        seeds = tuple((s, s) for s in range(1, 11))
        depth = {
            scenario: statistics.mean(
                row.max_level or 0 for row in run_survey(_spec(scenario, seeds=seeds))
            )
            for scenario in ("s1", "s2", "s3")
        }
        assert depth["s1"] < depth["s2"] < depth["s3"]

    @pytest.mark.parametrize("scenario", ["s1", "s2", "s3"])
    def test_degree_near_geometric_expectation(self, scenario: str) -> None:
        observed = statistics.mean(
            row.avg_degree for row in run_survey(_spec(scenario, seeds=TWENTY_SEEDS))
        )
        assert observed == pytest.approx(expected_degree(preset(scenario)), rel=0.1)


@pytest.mark.slow
class TestAgainstFlooding:
    def test_cost_and_energy_ratios(self, paired: Paired) -> None:
        costs, energies = [], []
        for lbf, flood in zip(*paired, strict=True):
            assert lbf.report.average_cost is not None
            assert flood.report.average_cost
            assert lbf.report.average_energy_cost is not None
            assert flood.report.average_energy_cost
            costs.append(lbf.report.average_cost / flood.report.average_cost)
            energies.append(
                lbf.report.average_energy_cost / flood.report.average_energy_cost
            )
        assert max(costs) < 1.0
        assert statistics.mean(costs) <= 0.65
        assert statistics.mean(energies) <= 0.65

    def test_success_on_connected_seeds(self, paired: Paired) -> None:
        connected = [
            (lbf, flood) for lbf, flood in zip(*paired, strict=True) if _connected(lbf)
        ]
        assert connected
        for lbf, flood in connected:
            assert lbf.report.suc_ratio is not None
            assert flood.report.suc_ratio is not None
            assert lbf.report.suc_ratio >= 99.0
            assert flood.report.suc_ratio >= 99.0

    def test_latency_tight_and_never_above_flooding(self, paired: Paired) -> None:
        for lbf, flood in zip(*paired, strict=True):
            flood_hops = {q.target: q.hops for q in flood.run.queries if q.success}
            for query in lbf.run.queries:
                if not query.success:
                    continue
                assert query.hops == query.target_level
                other = flood_hops.get(query.target)
                if other is not None:
                    assert query.target_level is not None
                    assert other >= query.target_level
            lbf_hit = {q.target for q in lbf.run.queries if q.success}
            if lbf_hit == set(flood_hops):
                assert lbf.report.average_latency is not None
                assert flood.report.average_latency is not None
                assert flood.report.average_latency >= lbf.report.average_latency

    @pytest.mark.parametrize("scenario", ["s1", "s2"])
    def test_full_threshold_success(self, scenario: str) -> None:
        spec = _spec(scenario, seeds=tuple((s, s) for s in range(1, 6)))
        for result in run_experiment(spec):
            for query in result.run.queries:
                assert query.success == (query.target_level is not None)
                if query.success:
                    assert query.hops == query.target_level

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_flood_copies_equal_degree(self, seed: int) -> None:
        topo = generate_topology(preset("s2", topology_seed=seed))
        oracle = hop_distance_oracle(topo)
        sim = Simulator(topo, TimingConfig(protocol_seed=seed))
        protocol = FloodProtocol(topo, sim)
        protocol.flood_broadcast(max(v for v in oracle.values() if v is not None))
        heard = sim.run_to_quiescence().received_of("query")
        for node, level in oracle.items():
            if level is not None:
                assert heard[node] == topo.degree(node)


@pytest.mark.slow
class TestThresholdSweep:
    def test_trends_over_threshold(self) -> None:
        spec = _spec(
            "s3",
            thresholds=SWEEP,
            seeds=TWENTY_SEEDS,
            targets=(1,),
            broadcast_requests=5,
        )
        by_p: dict[float, list[tuple[float, float, float]]] = {p: [] for p in SWEEP}
        for result in run_experiment(spec):
            report = result.report
            assert result.cell.threshold is not None
            assert report.sr is not None
            assert report.ec is not None
            assert report.re is not None
            by_p[result.cell.threshold].append((report.sr, report.ec, report.re))

        sr, ec, re = (
            [statistics.mean(row[i] for row in by_p[p]) for p in SWEEP]
            for i in range(3)
        )
        assert all(a >= b for a, b in pairwise(sr))
        assert all(a <= b for a, b in pairwise(ec))
        assert all(a <= b for a, b in pairwise(re))
        assert sr[0] >= 0.3


@pytest.mark.slow
class TestProcessedFraction:
    def test_shallow_targets_touch_few_nodes(self) -> None:
        seeds = tuple((s, s) for s in range(1, 4))
        lbf = processed_fractions(run_experiment(_spec("s3", seeds=seeds)))
        flood = processed_fractions(
            run_experiment(_spec("s3", "flood", seeds=seeds, broadcast_requests=0))
        )
        assert lbf[1] == pytest.approx(2 / 250)
        assert lbf[1] < flood[1]

    def test_nondecreasing_in_target_level_per_seed(self) -> None:
        spec = _spec("s3", seeds=TWENTY_SEEDS, broadcast_requests=0)
        for result in run_experiment(spec):
            fractions = processed_fraction_by_level(
                result.run.queries, result.run.node_count
            )
            values = [fractions[level] for level in sorted(fractions)]
            assert all(a <= b for a, b in pairwise(values))

    def test_large_network_shape(self) -> None:
        spec = _spec(
            "s4",
            thresholds=(DEFAULT_THRESHOLDS["s4"],),
            targets=tuple(range(1, 1000, 3)),
            broadcast_requests=0,
            allow_large_scenarios=True,
        )
        fractions = processed_fractions(run_experiment(spec))
        shallow = [share for level, share in fractions.items() if level <= 3]
        assert shallow
        assert max(shallow) < 0.10
        assert fractions[max(fractions)] > 0.85
