import logging
from typing import TYPE_CHECKING, Any, Dict, Generator, List, Optional, Tuple

import simpy

from failscope.config import ExecutionLimits, InstrumentationMode, SimulationConfig
from failscope.instrument.collector import SignalCollector
from failscope.robosim.bridge import ControllerBridge
from failscope.robosim.bus import MessageBus, intercept_topic
from failscope.robosim.delays import DelayConfig, DelayMechanism, insert_sleeps
from failscope.robosim.mission import Trajectory
from failscope.robosim.world import MissionManager, OdometryPublisher, Unicycle
from failscope.vm.machine import Machine, ScriptedPorts, Status

if TYPE_CHECKING:
    from failscope.instrument.signals import SummaryStream
    from failscope.robosim.mission import Mission
    from failscope.vm.isa import Program
    from failscope.vm.machine import PortHandler

logger = logging.getLogger(__name__)

MissionOutcome = Tuple[Trajectory, Optional["SummaryStream"], Status]


class MissionWorld:
    """One controller program flying one mission on a fresh discrete-event clock.

    The world is fully wired on construction, so `bus.topology()` can be inspected before `run` is called.
    """

    def __init__(
        self,
        program: "Program",
        mission: "Mission",
        seed: int = 0,
        mode: InstrumentationMode = InstrumentationMode.OPTIMIZED,
        delay: Optional[DelayConfig] = None,
        sim_config: Optional[SimulationConfig] = None,
        interval_size: int = 10_000,
        max_instructions: Optional[int] = None,
    ) -> None:
        """World constructor.

        Args:
            program: The controller program.
            mission: The mission to fly.
            seed: Seed of the odometry noise.
            mode: Instrumentation of the controller; `NONE` collects no summary stream.
            delay: Optional timing perturbation.
            sim_config: World calibration, defaults to `SimulationConfig()`.
            interval_size: Retired instructions between interval summaries.
            max_instructions: Instruction budget of the controller, defaults to `ExecutionLimits().max_instructions`.

        Raises:
            ConfigurationException: If the delay intercepts a topic the world does not have.
            ProgramValidationException: If the (possibly perturbed) program fails validation.
        """
        self.config = sim_config or SimulationConfig()
        self.mission = mission
        if delay is not None and delay.mechanism is DelayMechanism.SLEEP_INSERTION:
            program = insert_sleeps(program, delay.weight, delay.delay_s, delay.rng_seed)  # type: ignore[arg-type]
        self.program = program

        self.env = simpy.Environment()
        self.bus = MessageBus(self.env)
        self.robot = Unicycle(self.env, self.bus, self.config.physics_dt)
        self.odometry = OdometryPublisher(
            self.env, self.bus, self.robot, self.config.odom_rate_hz, self.config.noise_sigma, seed
        )
        self.manager = MissionManager(self.env, self.bus, mission)
        self.bridge = ControllerBridge(self.bus)
        if delay is not None and delay.mechanism is DelayMechanism.TOPIC_INTERCEPT:
            intercept_topic(self.bus, delay.topic, delay.delay_s)  # type: ignore[arg-type]

        limits = ExecutionLimits(
            max_instructions=max_instructions or ExecutionLimits().max_instructions,
            max_sim_seconds=self.config.mission_time_limit,
        )
        self.collector = (
            None if mode is InstrumentationMode.NONE else SignalCollector(program, mode, interval_size)
        )
        self.machine = Machine(program, self.bridge, limits, self.collector)

    def run(self) -> MissionOutcome:
        """Advance the clock until the controller stops or the mission time limit expires.

        Returns:
            The recorded trajectory, the controller's summary stream (absent without instrumentation) and its exit
            kind. A controller still running at the time limit is timed out.
        """
        env = self.env
        env.process(self.robot.run())
        env.process(self.odometry.run())
        env.process(self.manager.run())
        controller = env.process(self._control())
        env.run(until=env.any_of([controller, env.timeout(self.config.mission_time_limit)]))
        if self.machine.running:
            self.machine.terminate()
        status = self.machine.state.status

        completion_time = None
        if status is Status.HALTED and self.manager.complete:
            completion_time = float(env.now)
        trajectory = Trajectory.record(
            self.robot.samples, self.mission, completion_time=completion_time, end_time=float(env.now)
        )
        stream = None if self.collector is None else self.collector.stream()
        logger.debug(
            "mission %s ended %s at t=%.2f after %d instructions",
            self.mission.mission_id,
            status.value,
            env.now,
            self.machine.state.instructions_executed,
        )
        return trajectory, stream, status

    def _control(self) -> Generator[simpy.Event, Any, None]:
        while True:
            duration = self.machine.advance()
            if duration is None:
                return
            yield self.env.timeout(duration)


class RecordingPorts:
    """Port handler wrapper logging every value read, per port, in read order."""

    def __init__(self, inner: "PortHandler") -> None:
        self.inner = inner
        self.reads: Dict[int, List[int]] = {}

    def read(self, port: int) -> int:
        value = self.inner.read(port)
        self.reads.setdefault(port, []).append(value)
        return value

    def write(self, port: int, value: int) -> None:
        self.inner.write(port, value)


def record_port_script(
    program: "Program", mission: "Mission", seed: int = 0, sim_config: Optional[SimulationConfig] = None
) -> Tuple[ScriptedPorts, Status]:
    """Fly a mission uninstrumented and capture the controller's inputs as a replayable script.

    Replaying the script outside the world reproduces the controller's execution exactly, which makes it suitable
    for timing the controller alone.

    Returns:
        The script and the exit kind of the recorded run.
    """
    world = MissionWorld(program, mission, seed, InstrumentationMode.NONE, sim_config=sim_config)
    recorder = RecordingPorts(world.bridge)
    world.machine.io = recorder
    _, _, status = world.run()
    return ScriptedPorts(recorder.reads), status


def run_mission(
    program: "Program",
    mission: "Mission",
    seed: int = 0,
    mode: InstrumentationMode = InstrumentationMode.OPTIMIZED,
    delay: Optional[DelayConfig] = None,
    sim_config: Optional[SimulationConfig] = None,
    interval_size: int = 10_000,
    max_instructions: Optional[int] = None,
) -> MissionOutcome:
    """Fly a mission with a controller program in a fresh simulated world.

    Args:
        program: The controller program.
        mission: The mission to fly.
        seed: Seed of the odometry noise; equal seeds give identical runs.
        mode: Instrumentation of the controller.
        delay: Optional topic interception or sleep insertion.
        sim_config: World calibration.
        interval_size: Retired instructions between interval summaries.
        max_instructions: Instruction budget of the controller.

    Returns:
        The trajectory, the summary stream (`None` when `mode` is `NONE`) and the controller's exit kind. Crashed and
        timed out runs keep the trajectory up to the failure.

    Examples:
        ```python
        from failscope.assets import controller_path
        from failscope.robosim import Mission, run_mission
        from failscope.vm import load_program

        program = load_program(controller_path())
        trajectory, stream, status = run_mission(program, Mission.from_points([(0, 0), (5, 0)]), seed=1)
        ```
    """
    world = MissionWorld(program, mission, seed, mode, delay, sim_config, interval_size, max_instructions)
    return world.run()
