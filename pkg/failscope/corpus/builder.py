import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from failscope.config import CorpusConfig, InstrumentationMode, SimulationConfig
from failscope.corpus.dataset import LabeledDataset, LabeledExample, Provenance
from failscope.corpus.labeling import Label, label
from failscope.corpus.mutation import Mutant, enumerate_mutants
from failscope.corpus.store import SUMMARY_DIR, Corpus, CorpusInfo, ManifestRecord
from failscope.exceptions import ConfigurationException, EmptyCorpusException
from failscope.instrument.signals import SummaryStream
from failscope.robosim.mission import Mission
from failscope.robosim.runner import MissionWorld
from failscope.vm.isa import Program
from failscope.vm.machine import Status

logger = logging.getLogger(__name__)

ORIGINAL_ID = "base"


class RunTask(BaseModel):
    """Everything a worker needs to execute one mutant on one mission."""

    run_id: str
    mutant: Mutant
    mission: Mission
    seed: int
    discard_window: int
    interval_size: int
    sim_config: SimulationConfig


class RunResult(BaseModel):
    record: ManifestRecord
    stream: Optional[SummaryStream] = None
    wall_seconds: float = 0.0


def mission_seed(seed: int, mission_index: int) -> int:
    """Odometry noise seed of the `mission_index`-th mission of a build seeded with `seed`."""
    return int(np.random.SeedSequence([seed, mission_index]).generate_state(1)[0])


def execute_run(task: RunTask) -> RunResult:
    """Fly one mutant on one mission under optimized instrumentation and label the outcome.

    A run that crashes within the discard window is recorded but not retained. A run that cannot be simulated at all
    is recorded with its error and labeled as failing.
    """
    operator = task.mutant.operator
    fields = dict(
        run_id=task.run_id,
        mutant_id=task.mutant.mutant_id,
        operator=None if operator is None else operator.kind.value,
        variant=None if operator is None else operator.variant,
        site=None if operator is None else operator.site,
        mission_id=task.mission.mission_id,
        seed=task.seed,
    )
    started = time.perf_counter()
    try:
        world = MissionWorld(
            task.mutant.program,
            task.mission,
            seed=task.seed,
            mode=InstrumentationMode.OPTIMIZED,
            sim_config=task.sim_config,
            interval_size=task.interval_size,
        )
        trajectory, stream, status = world.run()
    except Exception as e:  # pylint: disable=W0703
        logger.warning("run %s failed: %s", task.run_id, e)
        return RunResult(record=ManifestRecord(**fields, exit_kind=Status.CRASHED, label=Label.FAIL, error=str(e)))
    elapsed = time.perf_counter() - started

    instructions = stream.final.InsCount  # type: ignore[union-attr]
    retained = not (status is Status.CRASHED and instructions < task.discard_window)
    record = ManifestRecord(
        **fields,
        exit_kind=status,
        crash_reason=world.machine.state.crash_reason,
        label=label(trajectory, task.mission, status),
        instructions=instructions,
        retained=retained,
        summary_file=f"{SUMMARY_DIR}/{task.run_id}.csv" if retained else None,
    )
    logger.debug("run %s: %s after %d instructions, %s", task.run_id, status.value, instructions, record.label.name)
    return RunResult(record=record, stream=stream if retained else None, wall_seconds=elapsed)


def _select_mutants(program: Program, config: CorpusConfig) -> List[Mutant]:
    mutants = enumerate_mutants(program)
    if config.max_mutants is not None and len(mutants) > config.max_mutants:
        rng = np.random.default_rng(config.seed)
        keep = sorted(int(index) for index in rng.choice(len(mutants), size=config.max_mutants, replace=False))
        mutants = [mutants[index] for index in keep]
        logger.info("sampled %d mutants", len(mutants))
    return mutants


def build_corpus(
    program: Program,
    missions: Sequence[Mission],
    config: Optional[CorpusConfig] = None,
    sim_config: Optional[SimulationConfig] = None,
) -> Corpus:
    """Run every valid mutant on every mission and label the executions.

    Runs use optimized instrumentation. Executions crashing within `config.discard_window` instructions are discarded
    as immediate crashes; every other execution contributes its final summary to the dataset and keeps its summary
    stream. Failed runs never abort the build, they show up in the manifest.

    Args:
        program: The valid program to mutate.
        missions: Missions with distinct ids.
        config: Build configuration.
        sim_config: World calibration.

    Returns:
        The corpus, with runs ordered by run id.

    Raises:
        ConfigurationException: If no missions are given or mission ids repeat.
        EmptyCorpusException: If no mutant execution is retained; the unmutated program alone is no corpus.
    """
    config = config or CorpusConfig()
    sim_config = sim_config or SimulationConfig()
    mission_ids = [mission.mission_id for mission in missions]
    if not missions:
        raise ConfigurationException("a corpus needs at least one mission")
    if len(set(mission_ids)) != len(mission_ids):
        raise ConfigurationException(f"mission ids must be distinct, got {', '.join(mission_ids)}")

    mutants = _select_mutants(program, config)
    candidates = list(mutants)
    if config.include_original:
        candidates.insert(0, Mutant(mutant_id=ORIGINAL_ID, program=program))
    seeds = {mission.mission_id: mission_seed(config.seed, index) for index, mission in enumerate(missions)}
    tasks = [
        RunTask(
            run_id=f"{mutant.mutant_id}-{mission.mission_id}",
            mutant=mutant,
            mission=mission,
            seed=seeds[mission.mission_id],
            discard_window=config.discard_window,
            interval_size=config.interval_size,
            sim_config=sim_config,
        )
        for mutant in candidates
        for mission in missions
    ]
    logger.info("running %d executions (%d programs x %d missions)", len(tasks), len(candidates), len(missions))

    results = _run_all(tasks, config.workers)
    results.sort(key=lambda result: result.record.run_id)
    records = [result.record for result in results]
    streams = {result.record.run_id: result.stream for result in results if result.record.retained and result.stream}
    timings = {result.record.run_id: result.wall_seconds for result in results if result.wall_seconds > 0}
    examples = [
        LabeledExample(
            features=streams[record.run_id].final,
            label=record.label,
            provenance=Provenance(mutant_id=record.mutant_id, mission_id=record.mission_id),
        )
        for record in records
        if record.run_id in streams
    ]
    discarded = len(records) - len(examples)
    logger.info("retained %d executions, discarded %d", len(examples), discarded)
    if not any(example.provenance.mutant_id != ORIGINAL_ID for example in examples):
        raise EmptyCorpusException("empty corpus: no mutant execution was retained")

    dataset = LabeledDataset(examples=examples, version_tag=program.metadata.version)
    passing, failing = dataset.class_counts()
    logger.info("corpus has %d passing and %d failing executions", passing, failing)
    info = CorpusInfo(
        version_tag=program.metadata.version,
        program_name=program.metadata.name,
        mission_ids=mission_ids,
        seeds=seeds,
        config=config,
        mutants=len(mutants),
    )
    return Corpus(info=info, dataset=dataset, records=records, streams=streams, timings=timings)


def _run_all(tasks: List[RunTask], workers: int) -> List[RunResult]:
    if workers == 1:
        return [execute_run(task) for task in tasks]
    chunksize = max(1, len(tasks) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(execute_run, tasks, chunksize=chunksize))


def corpus_summary(corpus: Corpus) -> List[Tuple[str, int]]:
    """Counts of runs by exit kind and of retained runs by label, for reporting."""
    rows = [(f"exit:{kind.value}", sum(r.exit_kind is kind for r in corpus.records)) for kind in Status]
    passing, failing = corpus.dataset.class_counts()
    rows.extend([("retained", len(corpus.dataset)), ("pass", passing), ("fail", failing)])
    return rows
