from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from failscope.robosim.mission import min_distances, reached_in_order
from failscope.vm.machine import Status

if TYPE_CHECKING:
    from failscope.robosim.mission import Mission, Trajectory


class TrajectoryMetrics(BaseModel):
    min_dist: List[float]
    """Closest approach to each waypoint, in meters."""
    sum: float
    mean: float
    final_dist: float
    """Distance from the last sample to the final waypoint."""
    reached_all: bool
    completion_time: Optional[float] = None


def trajectory_metrics(trajectory: "Trajectory", mission: "Mission") -> TrajectoryMetrics:
    """Summarize how closely a run followed its mission.

    Args:
        trajectory: A non-empty trajectory.
        mission: The mission the trajectory was recorded on.

    Returns:
        Per-waypoint closest distances with their sum and mean, the final distance to home, whether every waypoint
        was reached within tolerance in order, and the completion time when it was.
    """
    if not trajectory.samples:
        raise ValueError("trajectory has no samples")
    distances = min_distances(trajectory.samples, mission.waypoints)
    _, x, y = trajectory.samples[-1]
    final_x, final_y = mission.waypoints[-1]
    reached_all = all(reached_in_order(trajectory.samples, mission.waypoints, mission.tolerance))
    return TrajectoryMetrics(
        min_dist=[float(distance) for distance in distances],
        sum=float(distances.sum()),
        mean=float(distances.mean()),
        final_dist=float(np.hypot(x - final_x, y - final_y)),
        reached_all=reached_all,
        completion_time=trajectory.completion_time if reached_all else None,
    )


def is_crash(trajectory: "Trajectory", exit_kind: Status, mission: "Mission") -> bool:
    """Crash proxy: the run crashed, timed out, or ended outside tolerance of the final waypoint."""
    if exit_kind in (Status.CRASHED, Status.TIMED_OUT):
        return True
    return not trajectory_metrics(trajectory, mission).final_dist <= mission.tolerance


def crash_rate(runs: Sequence[Tuple["Trajectory", Status]], mission: "Mission") -> float:
    """Fraction of runs counted as crashes by `is_crash`."""
    if not runs:
        raise ValueError("crash rate needs at least one run")
    return sum(is_crash(trajectory, exit_kind, mission) for trajectory, exit_kind in runs) / len(runs)
