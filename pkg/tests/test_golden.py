"""Reference outputs kept under `tests/golden/`. Refresh them with `pytest --update-golden` after intended changes."""
from pathlib import Path

import numpy as np

from failscope.cli import main
from failscope.config import InstrumentationMode, SimulationConfig
from failscope.robosim import Mission, MissionWorld, load_mission, run_mission
from failscope.vm import Program, ScriptedPorts, Status, run

from .constants import COUNTDOWN_INSTRUCTIONS
from .utils import GoldenFiles, state_json


def test_countdown_final_state(countdown: Program, golden: GoldenFiles) -> None:
    ports = ScriptedPorts()
    state, status = run(countdown, ports)
    assert status is Status.HALTED
    assert state.instructions_executed == COUNTDOWN_INSTRUCTIONS
    assert ports.writes == [(8, 2), (8, 1), (8, 0)]
    golden.check("countdown_state.json", state_json(state))


def test_controller_final_state_on_m1(controller: Program, golden: GoldenFiles) -> None:
    world = MissionWorld(controller, load_mission("m1"), seed=0, mode=InstrumentationMode.NONE)
    trajectory, stream, status = world.run()
    assert status is Status.HALTED
    assert stream is None
    assert trajectory.reached_all
    golden.check("controller_m1_state.json", state_json(world.machine.state))


def test_noise_free_trajectory(controller: Program, golden: GoldenFiles) -> None:
    mission = Mission.from_points([(0.0, 0.0), (5.0, 0.0)], mission_id="line")
    sim_config = SimulationConfig(noise_sigma=0.0)
    trajectory, _, status = run_mission(controller, mission, mode=InstrumentationMode.NONE, sim_config=sim_config)
    assert status is Status.HALTED
    assert trajectory.reached == [True, True, True]
    _, x, y = trajectory.samples[-1]
    assert np.hypot(x, y) <= mission.tolerance
    # odometry noise is the only seeded input
    other_seed, _, _ = run_mission(controller, mission, seed=9, mode=InstrumentationMode.NONE, sim_config=sim_config)
    assert other_seed == trajectory
    golden.check("line_trajectory.csv", trajectory.frame().to_csv(index=False))


def test_trace_summary_on_m1(tmp_path: Path, golden: GoldenFiles) -> None:
    for out in ("first", "second"):
        assert main(["trace", "--mission", "m1", "--out", str(tmp_path / out)]) == 0
    summary = (tmp_path / "first" / "summary.csv").read_bytes()
    assert summary == (tmp_path / "second" / "summary.csv").read_bytes()
    assert (tmp_path / "first" / "trajectory.csv").read_bytes() == (tmp_path / "second" / "trajectory.csv").read_bytes()
    golden.check("trace_m1_summary.csv", summary.decode("utf-8"))
