from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Generator, List, Tuple

import numpy as np
import simpy

from failscope.robosim.bus import BusMessage, MessageBus

if TYPE_CHECKING:
    from failscope.robosim.mission import Mission

GOAL = "/goal"
ODOM = "/odom"
CMD_VEL = "/cmd_vel"
REACHED = "/reached"
TOPICS = (GOAL, ODOM, CMD_VEL, REACHED)


@dataclass(frozen=True)
class Goal:
    x_mm: int
    y_mm: int
    seq: int
    done: bool = False


@dataclass(frozen=True)
class Odometry:
    x_mm: int
    y_mm: int
    cos_milli: int
    sin_milli: int


@dataclass(frozen=True)
class Twist:
    v_mm_s: int
    w_mrad_s: int


@dataclass(frozen=True)
class WaypointReached:
    seq: int


class Unicycle:
    """Planar unicycle integrating the latest `/cmd_vel` command at a fixed step."""

    name = "base"

    def __init__(self, env: simpy.Environment, bus: MessageBus, dt: float) -> None:
        self.env = env
        self.dt = dt
        self.pose = np.zeros(3)
        """x (m), y (m), heading (rad)."""
        self.command = (0.0, 0.0)
        self.samples: List[Tuple[float, float, float]] = [(0.0, 0.0, 0.0)]
        bus.subscribe(self.name, CMD_VEL, "Twist", self._on_cmd_vel)

    def _on_cmd_vel(self, message: BusMessage) -> None:
        twist: Twist = message.payload
        self.command = (twist.v_mm_s / 1000.0, twist.w_mrad_s / 1000.0)

    def run(self) -> Generator[simpy.Event, Any, None]:
        while True:
            yield self.env.timeout(self.dt)
            v, w = self.command
            heading = self.pose[2]
            self.pose += self.dt * np.array([v * np.cos(heading), v * np.sin(heading), w])
            self.samples.append((float(self.env.now), float(self.pose[0]), float(self.pose[1])))


class OdometryPublisher:
    """Publishes the robot pose with seeded Gaussian position noise, as fixed-point millimeters."""

    name = "odometry"

    def __init__(
        self, env: simpy.Environment, bus: MessageBus, robot: Unicycle, rate_hz: float, sigma: float, seed: int
    ) -> None:
        self.env = env
        self.robot = robot
        self.period = 1.0 / rate_hz
        self.sigma = sigma
        self.rng = np.random.default_rng(seed)
        self.publisher = bus.advertise(self.name, ODOM, "Odometry")

    def run(self) -> Generator[simpy.Event, Any, None]:
        while True:
            x, y, heading = self.robot.pose
            noise_x, noise_y = self.rng.normal(0.0, self.sigma, size=2)
            self.publisher.publish(
                Odometry(
                    x_mm=int(round((x + noise_x) * 1000)),
                    y_mm=int(round((y + noise_y) * 1000)),
                    cos_milli=int(round(np.cos(heading) * 1000)),
                    sin_milli=int(round(np.sin(heading) * 1000)),
                )
            )
            yield self.env.timeout(self.period)


class MissionManager:
    """Hands out waypoints one at a time, advancing whenever the current one is reported reached."""

    name = "mission"

    def __init__(self, env: simpy.Environment, bus: MessageBus, mission: "Mission") -> None:
        self.env = env
        self.mission = mission
        self.current = 0
        """Index of the waypoint being handed out; equal to the waypoint count once the mission is complete."""
        self.publisher = bus.advertise(self.name, GOAL, "Goal")
        bus.subscribe(self.name, REACHED, "WaypointReached", self._on_reached)

    @property
    def complete(self) -> bool:
        return self.current >= len(self.mission.waypoints)

    def run(self) -> Generator[simpy.Event, Any, None]:
        self._publish()
        yield self.env.timeout(0)

    def _publish(self) -> None:
        index = min(self.current, len(self.mission.waypoints) - 1)
        x, y = self.mission.waypoints[index]
        self.publisher.publish(
            Goal(x_mm=int(round(x * 1000)), y_mm=int(round(y * 1000)), seq=self.current, done=self.complete)
        )

    def _on_reached(self, message: BusMessage) -> None:
        reached: WaypointReached = message.payload
        if reached.seq == self.current and not self.complete:
            self.current += 1
            self._publish()
