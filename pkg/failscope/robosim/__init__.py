from .bridge import ControllerBridge
from .bus import BusMessage, DelayNode, MessageBus, Publisher, Topic, intercept_topic
from .delays import DelayConfig, DelayMechanism, insert_sleeps
from .lab import (
    LabRun,
    LabTask,
    condition_name,
    crash_table,
    distance_table,
    execute_lab_run,
    lab_tasks,
    run_lab,
    runs_frame,
    time_table,
)
from .metrics import TrajectoryMetrics, crash_rate, is_crash, trajectory_metrics
from .mission import Mission, Trajectory, load_mission, parse_mission
from .runner import MissionWorld, RecordingPorts, record_port_script, run_mission
from .world import TOPICS, Goal, MissionManager, Odometry, OdometryPublisher, Twist, Unicycle, WaypointReached

__all__ = [
    "BusMessage",
    "ControllerBridge",
    "DelayConfig",
    "DelayMechanism",
    "DelayNode",
    "Goal",
    "LabRun",
    "LabTask",
    "MessageBus",
    "Mission",
    "MissionManager",
    "MissionWorld",
    "Odometry",
    "OdometryPublisher",
    "Publisher",
    "RecordingPorts",
    "TOPICS",
    "Topic",
    "Trajectory",
    "TrajectoryMetrics",
    "Twist",
    "Unicycle",
    "WaypointReached",
    "condition_name",
    "crash_rate",
    "crash_table",
    "distance_table",
    "execute_lab_run",
    "insert_sleeps",
    "intercept_topic",
    "is_crash",
    "lab_tasks",
    "load_mission",
    "parse_mission",
    "record_port_script",
    "run_lab",
    "run_mission",
    "runs_frame",
    "time_table",
    "trajectory_metrics",
]
