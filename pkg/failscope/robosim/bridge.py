from typing import Dict, Optional

from failscope.robosim.bus import BusMessage, MessageBus
from failscope.robosim.world import CMD_VEL, GOAL, ODOM, REACHED, Goal, Odometry, Twist, WaypointReached

PORT_GOAL_X = 0
PORT_GOAL_Y = 1
PORT_GOAL_SEQ = 2
PORT_DONE = 3
PORT_ODOM_X = 4
PORT_ODOM_Y = 5
PORT_COS = 6
PORT_SIN = 7
PORT_LINEAR = 8
PORT_ANGULAR = 9
PORT_REACHED = 10


class ControllerBridge:
    """Port handler connecting a controller program to the message bus.

    Inputs always reflect the latest message received on `/goal` and `/odom`; a port with no message yet reads 0,
    so a controller never blocks on missing or stale data. Writing the angular velocity publishes `/cmd_vel` with the
    most recently written linear velocity, and writing a sequence number to the reached port publishes `/reached`.
    """

    name = "controller"

    def __init__(self, bus: MessageBus) -> None:
        """Bridge constructor.

        Args:
            bus: The bus to subscribe and advertise on.
        """
        self.inputs: Dict[int, int] = {}
        self.linear = 0
        self.last_command: Optional[Twist] = None
        bus.subscribe(self.name, GOAL, "Goal", self._on_goal)
        bus.subscribe(self.name, ODOM, "Odometry", self._on_odom)
        self._cmd_vel = bus.advertise(self.name, CMD_VEL, "Twist")
        self._reached = bus.advertise(self.name, REACHED, "WaypointReached")

    def read(self, port: int) -> int:
        return self.inputs.get(port, 0)

    def write(self, port: int, value: int) -> None:
        if port == PORT_LINEAR:
            self.linear = value
        elif port == PORT_ANGULAR:
            self.last_command = Twist(v_mm_s=self.linear, w_mrad_s=value)
            self._cmd_vel.publish(self.last_command)
        elif port == PORT_REACHED:
            self._reached.publish(WaypointReached(seq=value))

    def _on_goal(self, message: BusMessage) -> None:
        goal: Goal = message.payload
        self.inputs[PORT_GOAL_X] = goal.x_mm
        self.inputs[PORT_GOAL_Y] = goal.y_mm
        self.inputs[PORT_GOAL_SEQ] = goal.seq
        self.inputs[PORT_DONE] = int(goal.done)

    def _on_odom(self, message: BusMessage) -> None:
        odom: Odometry = message.payload
        self.inputs[PORT_ODOM_X] = odom.x_mm
        self.inputs[PORT_ODOM_Y] = odom.y_mm
        self.inputs[PORT_COS] = odom.cos_milli
        self.inputs[PORT_SIN] = odom.sin_milli
