from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, root_validator, validator

from failscope.assets import mission_path

Point = Tuple[float, float]
Sample = Tuple[float, float, float]


class Mission(BaseModel):
    """An ordered waypoint plan whose final waypoint returns to the first."""

    class Config:
        frozen = True

    mission_id: str = "mission"
    waypoints: Tuple[Point, ...]
    """Waypoints in meters, including the final return to the first."""
    tolerance: float = 1.0
    """Distance in meters within which a waypoint counts as reached."""

    @validator("waypoints")
    def validate_waypoints(cls, value: Tuple[Point, ...]) -> Tuple[Point, ...]:  # pylint: disable=E0213
        if len(value) < 2:
            raise ValueError("a mission needs at least 2 waypoints")
        return value

    @validator("tolerance")
    def validate_tolerance(cls, value: float) -> float:  # pylint: disable=E0213
        if value <= 0:
            raise ValueError("tolerance must be positive")
        return value

    @classmethod
    def from_points(cls, points: Sequence[Point], mission_id: str = "mission", tolerance: float = 1.0) -> "Mission":
        """Build a mission visiting `points` in order and then returning to the first."""
        waypoints = [(float(x), float(y)) for x, y in points]
        if waypoints:
            waypoints.append(waypoints[0])
        return cls(mission_id=mission_id, waypoints=tuple(waypoints), tolerance=tolerance)


def parse_mission(text: str, mission_id: str = "mission", tolerance: float = 1.0) -> Mission:
    """Parse `x y` lines (meters). Blank lines and `#` comments are ignored."""
    points = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ValueError(f"line {line_number}: expected 'x y', got {raw!r}")
        points.append((float(fields[0]), float(fields[1])))
    return Mission.from_points(points, mission_id=mission_id, tolerance=tolerance)


def load_mission(source: Union[str, Path], tolerance: float = 1.0) -> Mission:
    """Load a mission file, or a bundled mission by id (`m1`, `m2`, `m3`)."""
    path = Path(source)
    if not path.exists() and path.suffix == "":
        path = mission_path(str(source))
    return parse_mission(path.read_text(encoding="utf-8"), mission_id=path.stem, tolerance=tolerance)


def min_distances(samples: Sequence[Sample], waypoints: Sequence[Point]) -> np.ndarray:
    """Closest approach of the sampled path to each waypoint."""
    positions = np.asarray(samples, dtype=float)[:, 1:3]
    targets = np.asarray(waypoints, dtype=float)
    distances = np.linalg.norm(positions[:, None, :] - targets[None, :, :], axis=2)
    return distances.min(axis=0)


def reached_in_order(samples: Sequence[Sample], waypoints: Sequence[Point], tolerance: float) -> List[bool]:
    """Per waypoint, whether the path reached it after every earlier waypoint, at most one waypoint per sample."""
    reached = [False] * len(waypoints)
    current = 0
    for _, x, y in samples:
        if current == len(waypoints):
            break
        target_x, target_y = waypoints[current]
        if np.hypot(x - target_x, y - target_y) <= tolerance:
            reached[current] = True
            current += 1
    return reached


class Trajectory(BaseModel):
    """The robot's sampled path during one mission run."""

    samples: List[Sample]
    """`(sim_time, x, y)` in seconds and meters."""
    reached: List[bool]
    """Per waypoint, whether the path came within the mission tolerance of it in mission order."""
    completion_time: Optional[float] = None
    """Simulated time at which the controller halted with the mission complete."""
    end_time: float = 0.0
    """Simulated time at which the run ended, successfully or not."""

    @root_validator(skip_on_failure=True)
    def validate_samples(cls, values: Dict[str, Any]) -> Dict[str, Any]:  # pylint: disable=E0213
        times = [sample[0] for sample in values["samples"]]
        if any(later <= earlier for earlier, later in zip(times, times[1:])):
            raise ValueError("sample times must be strictly increasing")
        return values

    @classmethod
    def record(
        cls,
        samples: Sequence[Sample],
        mission: Mission,
        completion_time: Optional[float] = None,
        end_time: Optional[float] = None,
    ) -> "Trajectory":
        """Build a trajectory, deciding which waypoints were reached from the samples."""
        reached = reached_in_order(samples, mission.waypoints, mission.tolerance)
        return cls(
            samples=list(samples),
            reached=reached,
            completion_time=completion_time,
            end_time=samples[-1][0] if end_time is None else end_time,
        )

    @property
    def reached_all(self) -> bool:
        return all(self.reached)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.samples, columns=["t", "x", "y"])

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.frame().to_csv(path, index=False)
        return path
