import logging
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel

from failscope.config import InstrumentationMode, SimulationConfig
from failscope.robosim.delays import DelayConfig
from failscope.robosim.metrics import is_crash, trajectory_metrics
from failscope.robosim.mission import Mission
from failscope.robosim.runner import run_mission
from failscope.vm.isa import Program
from failscope.vm.machine import Status

logger = logging.getLogger(__name__)

NOMINAL = "nominal"


class LabTask(BaseModel):
    program: Program
    mission: Mission
    seed: int
    delay: Optional[DelayConfig] = None
    sim_config: SimulationConfig


class LabRun(BaseModel):
    """Outcome of one nominal or delayed mission run."""

    mission_id: str
    condition: str
    """`nominal`, `<topic>` for interception or `sleep p=<weight>` for sleep insertion."""
    delay_s: float = 0.0
    seed: int
    exit_kind: Status
    min_dist: List[float]
    final_dist: float
    reached_final: bool
    crashed: bool
    """Crash proxy: crashed, timed out or ended outside tolerance of the final waypoint."""
    end_time: float


def condition_name(delay: Optional[DelayConfig]) -> str:
    if delay is None:
        return NOMINAL
    if delay.topic is not None:
        return delay.topic
    return f"sleep p={delay.weight:g}"


def execute_lab_run(task: LabTask) -> LabRun:
    trajectory, _, status = run_mission(
        task.program,
        task.mission,
        seed=task.seed,
        mode=InstrumentationMode.NONE,
        delay=task.delay,
        sim_config=task.sim_config,
    )
    metrics = trajectory_metrics(trajectory, task.mission)
    return LabRun(
        mission_id=task.mission.mission_id,
        condition=condition_name(task.delay),
        delay_s=0.0 if task.delay is None else task.delay.delay_s,
        seed=task.seed,
        exit_kind=status,
        min_dist=metrics.min_dist,
        final_dist=metrics.final_dist,
        reached_final=metrics.final_dist <= task.mission.tolerance,
        crashed=is_crash(trajectory, status, task.mission),
        end_time=trajectory.end_time,
    )


def lab_tasks(
    program: Program,
    missions: Sequence[Mission],
    seeds: Sequence[int],
    topics: Sequence[str] = (),
    delays: Sequence[float] = (),
    sleep_weights: Sequence[float] = (),
    sleep_delays: Sequence[float] = (),
    sim_config: Optional[SimulationConfig] = None,
) -> List[LabTask]:
    """Nominal runs plus every interception and sleep insertion configuration, each over all seeds.

    Sleep insertion flips its coins with the run's seed.

    Raises:
        pydantic.ValidationError: If a grid value is not an allowed delay or weight.
    """
    sim_config = sim_config or SimulationConfig()
    delay_grid: List[Optional[DelayConfig]] = [None]
    delay_grid += [DelayConfig.intercept(topic, delay_s) for topic in topics for delay_s in delays]
    tasks = []
    for mission in missions:
        for seed in seeds:
            sleeps: List[Optional[DelayConfig]] = [
                DelayConfig.sleeps(weight, delay_s, seed) for weight in sleep_weights for delay_s in sleep_delays
            ]
            for delay in delay_grid + sleeps:
                tasks.append(LabTask(program=program, mission=mission, seed=seed, delay=delay, sim_config=sim_config))
    return tasks


def run_lab(tasks: Sequence[LabTask], workers: int = 1) -> List[LabRun]:
    logger.info("running %d delay lab missions", len(tasks))
    if workers == 1:
        return [execute_lab_run(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(execute_lab_run, tasks, chunksize=max(1, len(tasks) // (workers * 4))))


def runs_frame(runs: Sequence[LabRun]) -> pd.DataFrame:
    """One row per run and waypoint."""
    rows = []
    for run in runs:
        base = run.dict(exclude={"min_dist"})
        base["exit_kind"] = run.exit_kind.value
        rows.extend({**base, "waypoint": index, "min_dist": value} for index, value in enumerate(run.min_dist))
    return pd.DataFrame(rows)


def distance_table(runs: Sequence[LabRun], statistic: str = "mean") -> pd.DataFrame:
    """Per mission and condition, `statistic` (`mean` or `std`) of each waypoint's closest distance over seeds.

    The `total` and `average` columns apply the statistic to each run's sum and mean of closest distances.
    """
    frame = runs_frame(runs)
    keys = ["mission_id", "condition", "delay_s"]
    table = frame.pivot_table(index=keys, columns="waypoint", values="min_dist", aggfunc=statistic)
    table.columns = [f"wp{column}" for column in table.columns]
    per_run = frame.groupby(keys + ["seed"])["min_dist"].agg(["sum", "mean"])
    totals = per_run.groupby(level=keys).agg(statistic)
    table["total"] = totals["sum"]
    table["average"] = totals["mean"]
    return table.reset_index()


def crash_table(runs: Sequence[LabRun]) -> pd.DataFrame:
    """Crash rate per mission, condition and delay."""
    frame = pd.DataFrame([run.dict(include={"mission_id", "condition", "delay_s", "crashed"}) for run in runs])
    table = frame.groupby(["mission_id", "condition", "delay_s"])["crashed"].agg(["mean", "count"])
    return table.rename(columns={"mean": "crash_rate", "count": "runs"}).reset_index()


def time_table(runs: Sequence[LabRun]) -> pd.DataFrame:
    """Mean time taken per mission and condition, split by whether the final waypoint was reached."""
    frame = pd.DataFrame(
        [run.dict(include={"mission_id", "condition", "delay_s", "reached_final", "end_time"}) for run in runs]
    )
    keys = ["mission_id", "condition", "delay_s"]
    reached = frame[frame["reached_final"]].groupby(keys)["end_time"].agg(["mean", "count"])
    missed = frame[~frame["reached_final"]].groupby(keys)["end_time"].agg(["mean", "count"])
    table = reached.join(missed, how="outer", lsuffix="_reached", rsuffix="_missed")
    table = table.rename(
        columns={
            "mean_reached": "time_reached",
            "count_reached": "runs_reached",
            "mean_missed": "time_missed",
            "count_missed": "runs_missed",
        }
    )
    table[["runs_reached", "runs_missed"]] = table[["runs_reached", "runs_missed"]].fillna(0).astype(int)
    return table.reset_index()
