"""Tests for the discrete-event simulator."""

import pytest
from level_flood.application.exceptions import (
    ContractViolationError,
    EventBudgetExceededError,
)
from level_flood.domain.packets import (
    LevelBuildingPacket,
    QueryKey,
    QueryPacket,
    SimPacket,
)
from level_flood.domain.topology import Topology
from level_flood.infrastructure.engine import Simulator, TimingConfig
from pydantic import ValidationError

PING = LevelBuildingPacket(level=0, source_id=0, seq_num=0)


class Recorder:
    """Handler that logs every callback with the clock it fired at."""

    def __init__(self, simulator: Simulator) -> None:
        self.simulator = simulator
        self.deliveries: list[tuple[float, int, int]] = []
        self.expiries: list[tuple[float, int, QueryKey]] = []
        simulator.attach(self)

    def on_packet(self, node: int, sender: int, packet: SimPacket) -> None:
        self.deliveries.append((self.simulator.now, node, sender))

    def on_rad_expiry(self, node: int, key: QueryKey) -> None:
        self.expiries.append((self.simulator.now, node, key))


class Marker(Recorder):
    """Marks the clock on every expiry; the latest mark wins."""

    def on_rad_expiry(self, node: int, key: QueryKey) -> None:
        self.simulator.mark("seen")


class Echo(Recorder):
    """Every receiver broadcasts again; never quiesces."""

    def on_packet(self, node: int, sender: int, packet: SimPacket) -> None:
        self.simulator.broadcast(node, packet)


class TestTimingConfig:
    def test_defaults(self) -> None:
        timing = TimingConfig()
        assert (timing.hop_delay, timing.jitter_max, timing.rad_t_max) == (
            1.0,
            0.1,
            0.5,
        )

    def test_rad_window_inside_hop(self) -> None:
        with pytest.raises(ValidationError, match="rad_t_max"):
            TimingConfig(hop_delay=0.5, rad_t_max=0.5)


class TestDelivery:
    def test_broadcast_reaches_neighbors_in_id_order(
        self, star: Topology, no_jitter: TimingConfig
    ) -> None:
        sim = Simulator(star, no_jitter)
        recorder = Recorder(sim)
        sim.broadcast(0, PING)
        record = sim.run_to_quiescence()

        assert recorder.deliveries == [(1.0, leaf, 0) for leaf in range(1, 6)]
        assert record.sent == [1, 0, 0, 0, 0, 0]
        assert record.received == [0, 1, 1, 1, 1, 1]
        assert record.broadcasts_of("level_building")[0] == 1
        assert record.deliveries_scheduled == 5
        assert record.event_count == 5

    def test_broadcast_subset(self, chain_sim: Simulator) -> None:
        recorder = Recorder(chain_sim)
        chain_sim.broadcast(1, PING, recipients={2})
        chain_sim.run_to_quiescence()
        assert [node for _, node, _ in recorder.deliveries] == [2]

    def test_broadcast_to_stranger_rejected(self, chain_sim: Simulator) -> None:
        with pytest.raises(ContractViolationError, match="non-neighbors"):
            chain_sim.broadcast(1, PING, recipients={3})

    def test_unicast_counts_one_send(self, chain_sim: Simulator) -> None:
        Recorder(chain_sim)
        chain_sim.unicast(1, 2, PING)
        record = chain_sim.run_to_quiescence()
        assert record.total_sent == 1
        assert record.total_received == 1
        assert record.broadcasts_of("level_building") == [0, 0, 0, 0]
        assert record.sent_of("level_building") == [0, 1, 0, 0]

    @pytest.mark.parametrize("receiver", [1, 3])
    def test_unicast_outside_range_rejected(
        self, chain_sim: Simulator, receiver: int
    ) -> None:
        with pytest.raises(ContractViolationError):
            chain_sim.unicast(1, receiver, PING)

    def test_jitter_stays_within_window(self, star: Topology) -> None:
        sim = Simulator(star, TimingConfig(jitter_max=0.1, protocol_seed=3))
        recorder = Recorder(sim)
        sim.broadcast(0, PING)
        sim.run_to_quiescence()
        times = [t for t, _, _ in recorder.deliveries]
        assert all(1.0 <= t < 1.1 for t in times)
        assert times == sorted(times)

    def test_same_seed_same_schedule(self, star: Topology) -> None:
        def schedule() -> list[tuple[float, int, int]]:
            sim = Simulator(star, TimingConfig(protocol_seed=8))
            recorder = Recorder(sim)
            sim.broadcast(0, PING)
            sim.run_to_quiescence()
            return recorder.deliveries

        assert schedule() == schedule()


class TestPhases:
    def test_records_reset_between_runs(self, chain_sim: Simulator) -> None:
        Recorder(chain_sim)
        chain_sim.broadcast(0, PING)
        first = chain_sim.run_to_quiescence()
        chain_sim.broadcast(1, PING)
        second = chain_sim.run_to_quiescence()

        assert first.total_sent == 1
        assert second.total_sent == 1
        assert second.t_start == 1.0
        assert second.t_end == 2.0
        assert chain_sim.record.t_start == 2.0

    def test_timers_fire_in_order(self, chain_sim: Simulator) -> None:
        recorder = Recorder(chain_sim)
        early, late = QueryKey(0, 4), QueryKey(0, 5)
        chain_sim.schedule_rad_expiry(1, 0.5, late)
        chain_sim.schedule_rad_expiry(2, 0.25, early)
        chain_sim.run_to_quiescence()
        assert recorder.expiries == [(0.25, 2, early), (0.5, 1, late)]

    def test_marks_and_first_arrival(self, chain_sim: Simulator) -> None:
        Marker(chain_sim)
        key = QueryKey(0, 1)
        chain_sim.schedule_rad_expiry(1, 0.25, key)
        chain_sim.schedule_rad_expiry(2, 0.75, key)
        chain_sim.record_arrival(key, 3)
        chain_sim.record_arrival(key, 5)
        record = chain_sim.run_to_quiescence()
        assert record.marks == {"seen": 0.75}
        assert record.first_arrival_hops == {key: 3}

    def test_pending_without_handler(self, chain_sim: Simulator) -> None:
        chain_sim.broadcast(0, PING)
        assert chain_sim.pending == 1
        with pytest.raises(RuntimeError, match="handler"):
            chain_sim.run_to_quiescence()

    def test_budget_abort(self, triangle: Topology, no_jitter: TimingConfig) -> None:
        sim = Simulator(triangle, no_jitter, event_budget=50)
        Echo(sim)
        sim.broadcast(0, PING)
        with pytest.raises(EventBudgetExceededError) as excinfo:
            sim.run_to_quiescence()
        assert excinfo.value.budget == 50
        assert excinfo.value.clock > 0


class TestTrace:
    def test_trace_lines_capped(self, star: Topology, no_jitter: TimingConfig) -> None:
        sim = Simulator(star, no_jitter, trace_limit=3)
        Recorder(sim)
        sim.broadcast(0, PING)
        record = sim.run_to_quiescence()
        assert len(record.events) == 3
        assert record.events[0].startswith("1.000000 deliver 0->1 LEVEL_BUILDING [")

    def test_trace_off_by_default(self, chain_sim: Simulator) -> None:
        Recorder(chain_sim)
        chain_sim.broadcast(0, QueryPacket(0, 1, 0, 1, 0))
        assert chain_sim.run_to_quiescence().events == []
