from enum import IntEnum
from typing import TYPE_CHECKING

import numpy as np

from failscope.robosim.mission import reached_in_order
from failscope.vm.machine import Status

if TYPE_CHECKING:
    from failscope.robosim.mission import Mission, Trajectory


class Label(IntEnum):
    PASS = 0
    FAIL = 1


def label(trajectory: "Trajectory", mission: "Mission", exit_kind: Status) -> Label:
    """Physical-location oracle.

    A run passes only if the controller halted, the path reached every waypoint in mission order, and the robot ended
    within tolerance of home.

    Args:
        trajectory: The recorded path.
        mission: The mission the path was recorded on; its tolerance decides what counts as reached.
        exit_kind: How the controller's execution ended.
    """
    if exit_kind is not Status.HALTED or not trajectory.samples:
        return Label.FAIL
    if not all(reached_in_order(trajectory.samples, mission.waypoints, mission.tolerance)):
        return Label.FAIL
    _, x, y = trajectory.samples[-1]
    home_x, home_y = mission.waypoints[-1]
    return Label.PASS if np.hypot(x - home_x, y - home_y) <= mission.tolerance else Label.FAIL
