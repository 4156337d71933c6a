import argparse
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Type, TypeVar

from pydantic import ValidationError

from failscope.assets import controller_path
from failscope.config import (
    CorpusBuildConfig,
    CorpusExperimentConfig,
    CrossVersionConfig,
    CurveConfig,
    DelayLabConfig,
    EvalConfig,
    ExecutionLimits,
    ExperimentConfig,
    FeaturesConfig,
    InstrumentationMode,
    OverheadConfig,
    Settings,
    SimulationConfig,
    TraceConfig,
)
from failscope.corpus.builder import build_corpus
from failscope.corpus.dataset import balance
from failscope.corpus.store import load_corpus
from failscope.exceptions import ConfigurationException, FailscopeException, exit_code_for
from failscope.instrument.collector import measure_overhead
from failscope.instrument.io import write_stream_csv
from failscope.learn.experiments import cross_version_eval, early_detection_sweep, learning_curve, reduced_feature_eval
from failscope.learn.metrics import Metrics
from failscope.learn.tree import DecisionTree, fit
from failscope.learn.validation import kfold
from failscope.reports import (
    Report,
    corpus_frame,
    counts_frame,
    curve_frame,
    cv_frame,
    early_frame,
    importance_frame,
    metrics_frame,
    overhead_frame,
    ratio_frame,
    reduced_frame,
)
from failscope.robosim.lab import crash_table, distance_table, lab_tasks, run_lab, runs_frame, time_table
from failscope.robosim.mission import Mission, load_mission
from failscope.robosim.runner import MissionWorld, record_port_script
from failscope.vm.assembly import load_program
from failscope.vm.isa import Program
from failscope.vm.machine import Status

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
MODEL_FILE = "model.json"
ConfigT = TypeVar("ConfigT", bound=ExperimentConfig)


class _Parser(argparse.ArgumentParser):
    """Argument parser reporting usage errors as exceptions instead of exiting."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigurationException(f"{self.prog}: {message}")


def _load_program(path: Optional[Path]) -> Program:
    return load_program(path if path is not None else controller_path())


def _load_missions(sources: Sequence[str]) -> List[Mission]:
    missions = [load_mission(source) for source in sources]
    ids = [mission.mission_id for mission in missions]
    if len(set(ids)) != len(ids):
        raise ConfigurationException(f"mission ids must be distinct, got {', '.join(ids)}")
    return missions


def _build_config(config_cls: Type[ConfigT], args: argparse.Namespace, **extra: Any) -> ConfigT:
    """Validate the subcommand's flags into its configuration; flags left unset fall back to the model defaults."""
    values: Dict[str, Any] = {
        name: getattr(args, name) for name in config_cls.__fields__ if getattr(args, name, None) is not None
    }
    values.update(extra)
    if values.get("out") is None:
        values["out"] = Settings().output_root / args.command
    return config_cls(**values)


def _workers(args: argparse.Namespace) -> int:
    return args.workers if args.workers is not None else Settings().workers


def cmd_trace(args: argparse.Namespace) -> int:
    """Fly one mission under instrumentation and write its summary stream, trajectory and bus topology."""
    config = _build_config(TraceConfig, args)
    program = _load_program(config.program)
    mission = load_mission(config.mission)
    world = MissionWorld(program, mission, seed=config.seed, mode=config.mode, interval_size=config.interval)
    topology = world.bus.topology()
    trajectory, stream, status = world.run()

    run_id = f"{program.metadata.name}-{mission.mission_id}"
    write_stream_csv(stream, config.out / "summary.csv", run_id)  # type: ignore[arg-type]
    trajectory.to_csv(config.out / "trajectory.csv")
    (config.out / "topology.txt").write_text("\n".join(topology) + "\n", encoding="utf-8")

    final = stream.final  # type: ignore[union-attr]
    report = Report("trace", config)
    report.add(
        "run",
        counts_frame(
            [
                ("instructions", final.InsCount),
                ("intervals", len(stream.entries)),  # type: ignore[union-attr]
                ("waypoints_reached", sum(trajectory.reached)),
                ("waypoints", len(trajectory.reached)),
            ]
        ),
    )
    report.note(f"exit: {status.value}")
    report.write(config.out)
    if status is Status.CRASHED and config.strict:
        logger.error("traced run crashed: %s", world.machine.state.crash_reason)
        return 2
    return 0


def cmd_corpus(args: argparse.Namespace) -> int:
    """Mutate the program, fly every mutant on every mission and write the labeled corpus."""
    corpus_values = {
        "discard_window": args.discard_window,
        "interval_size": args.interval,
        "max_mutants": args.max_mutants,
        "include_original": not args.no_original,
        "seed": args.seed,
        "workers": _workers(args),
    }
    corpus = {name: value for name, value in corpus_values.items() if value is not None}
    config = _build_config(CorpusBuildConfig, args, corpus=corpus)
    program = _load_program(config.program)
    built = build_corpus(program, _load_missions(config.missions), config.corpus, SimulationConfig())
    built.write(config.out)
    Report("corpus", config).add("summary", corpus_frame(built)).write(config.out)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    """Cross-validate on a corpus, then fit and save a model on the whole balanced corpus."""
    config = _build_config(CorpusExperimentConfig, args)
    corpus = load_corpus(config.corpus_dir)
    cv = kfold(corpus.dataset, config.seed)
    fit(balance(corpus.dataset, config.seed)).save(config.out / MODEL_FILE)
    report = Report("train", config).add("folds", cv_frame(cv)).add("importance", importance_frame(cv))
    report.note(f"k={cv.k} n={cv.n} version={corpus.info.version_tag}")
    report.write(config.out)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    """Cross-validate on a corpus and optionally score a saved model on all of it."""
    config = _build_config(EvalConfig, args)
    corpus = load_corpus(config.corpus_dir)
    cv = kfold(corpus.dataset, config.seed)
    report = Report("eval", config).add("folds", cv_frame(cv)).add("importance", importance_frame(cv))
    if config.model is not None:
        tree = DecisionTree.load(config.model)
        dataset = corpus.dataset
        scored = Metrics.from_predictions(dataset.labels(), tree.predict_batch(dataset.features()))
        report.add("model", metrics_frame({config.model.name: scored}))
    report.write(config.out)
    return 0


def cmd_curve(args: argparse.Namespace) -> int:
    """Cross-validate on stratified subsamples of increasing size."""
    config = _build_config(CurveConfig, args)
    corpus = load_corpus(config.corpus_dir)
    if config.sizes[-1] > len(corpus.dataset):
        raise ConfigurationException(f"size {config.sizes[-1]} exceeds the corpus of {len(corpus.dataset)}")
    rows = learning_curve(corpus.dataset, config.sizes, config.seed, corpus.mean_wall_seconds)
    report = Report("curve", config).add("curve", curve_frame(rows))
    if corpus.mean_wall_seconds is not None:
        estimates = ", ".join(f"n={row.n}: {row.generation_minutes:.1f}" for row in rows)
        report.note(f"estimated generation minutes: {estimates}")
    report.write(config.out)
    return 0


def cmd_early(args: argparse.Namespace) -> int:
    """Cross-validate on the summaries taken at each interval boundary."""
    config = _build_config(CorpusExperimentConfig, args)
    rows = early_detection_sweep(load_corpus(config.corpus_dir), config.seed)
    Report("early", config).add("early", early_frame(rows)).write(config.out)
    return 0


def cmd_features(args: argparse.Namespace) -> int:
    """Compare cross validation on all signals against the most important ones only."""
    config = _build_config(FeaturesConfig, args)
    result = reduced_feature_eval(load_corpus(config.corpus_dir).dataset, config.top_k, config.seed)
    report = Report("features", config)
    report.add("comparison", reduced_frame(result))
    report.add("importance", importance_frame(result.full))
    report.add("full_folds", cv_frame(result.full))
    report.add("reduced_folds", cv_frame(result.reduced))
    report.write(config.out)
    return 0


def cmd_xversion(args: argparse.Namespace) -> int:
    """Train on one program version's corpus and score on another's, next to same-version cross validation."""
    config = _build_config(CrossVersionConfig, args)
    train = load_corpus(config.train_dir)
    test = load_corpus(config.test_dir)
    cross = cross_version_eval(train.dataset, test.dataset, config.seed)
    same = kfold(test.dataset, config.seed)
    report = Report("xversion", config)
    report.add(
        "comparison",
        ratio_frame(
            {
                f"{train.info.version_tag} -> {test.info.version_tag}": cross,
                f"{test.info.version_tag} k-fold mean": same.mean,
            }
        ),
    )
    report.add("cross_version", metrics_frame({"cross_version": cross}))
    report.add("same_version_folds", cv_frame(same))
    report.write(config.out)
    return 0


def cmd_overhead(args: argparse.Namespace) -> int:
    """Time the controller without instrumentation and under both modes, replaying one recorded mission."""
    config = _build_config(OverheadConfig, args)
    program = _load_program(config.program)
    sim_config = SimulationConfig()
    script, status = record_port_script(program, load_mission(config.mission), config.seed, sim_config)
    limits = ExecutionLimits(max_sim_seconds=sim_config.mission_time_limit)
    result = measure_overhead(program, script, limits, config.repeats)
    report = Report("overhead", config).add("overhead", overhead_frame(result))
    report.note(f"recorded run exit: {status.value}")
    report.write(config.out)
    return 0


def cmd_delaylab(args: argparse.Namespace) -> int:
    """Fly missions nominally and under topic interception and sleep insertion, and compare trajectories."""
    extra: Dict[str, Any] = {"sleep_weights": []} if args.no_sleeps else {}
    config = _build_config(DelayLabConfig, args, workers=_workers(args), **extra)
    tasks = lab_tasks(
        _load_program(config.program),
        _load_missions(config.missions),
        seeds=[config.seed + offset for offset in range(config.seeds)],
        topics=config.topics,
        delays=config.delays,
        sleep_weights=config.sleep_weights,
        sleep_delays=config.sleep_delays,
    )
    runs = run_lab(tasks, config.workers)
    report = Report("delaylab", config)
    report.add("mean_distance", distance_table(runs, "mean"))
    report.add("std_distance", distance_table(runs, "std"))
    report.add("crash_rate", crash_table(runs))
    report.add("time_taken", time_table(runs))
    report.add("runs", runs_frame(runs))
    report.write(config.out)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="seed for shuffling, balancing and sampling (default 0)")
    parser.add_argument("--out", type=Path, help="output directory (default $FAILSCOPE_OUTPUT_ROOT/<command>)")


def _add_corpus_dir(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", dest="corpus_dir", type=Path, required=True, help="corpus directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="failscope", description="Execution summaries and failure detection for robot controllers")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at debug level")
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    def command(name: str, handler: Callable[[argparse.Namespace], int], text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=text, description=text)
        sub.set_defaults(handler=handler)
        _add_common(sub)
        return sub

    trace = command("trace", cmd_trace, "instrument one mission run")
    trace.add_argument("--program", type=Path, help="assembly file (default: bundled controller)")
    trace.add_argument("--mission", help="bundled mission id or mission file (default m1)")
    trace.add_argument("--mode", choices=[InstrumentationMode.NAIVE.value, InstrumentationMode.OPTIMIZED.value])
    trace.add_argument("--interval", type=int, help="instructions between interval summaries (default 10000)")
    trace.add_argument("--strict", action="store_true", default=None, help="exit with 2 when the run crashes")

    corpus = command("corpus", cmd_corpus, "build a labeled mutation corpus")
    corpus.add_argument("--program", type=Path, help="assembly file (default: bundled controller)")
    corpus.add_argument("--missions", nargs="+", help="bundled mission ids or mission files (default m1 m2 m3)")
    corpus.add_argument("--discard-window", type=int, help="instructions under which crashes are discarded")
    corpus.add_argument("--interval", type=int, help="instructions between interval summaries (default 10000)")
    corpus.add_argument("--max-mutants", type=int, help="seeded sample size of mutants")
    corpus.add_argument("--no-original", action="store_true", help="do not run the unmutated program")
    corpus.add_argument("--workers", type=int, help="worker processes (default $FAILSCOPE_WORKERS or 1)")

    train = command("train", cmd_train, "cross-validate and fit a model on a corpus")
    _add_corpus_dir(train)

    evaluate = command("eval", cmd_eval, "cross-validate on a corpus, optionally scoring a saved model")
    _add_corpus_dir(evaluate)
    evaluate.add_argument("--model", type=Path, help=f"{MODEL_FILE} written by train")

    curve = command("curve", cmd_curve, "learning curve over sample sizes")
    _add_corpus_dir(curve)
    curve.add_argument("--sizes", type=int, nargs="+", help="strictly increasing sample sizes, each at least 20")

    early = command("early", cmd_early, "cross-validate on summaries taken before the end of execution")
    _add_corpus_dir(early)

    features = command("features", cmd_features, "compare all signals against the most important ones")
    _add_corpus_dir(features)
    features.add_argument("--top-k", type=int, help="number of signals kept (default 5)")

    xversion = command("xversion", cmd_xversion, "train on one program version, test on another")
    xversion.add_argument("--train-corpus", dest="train_dir", type=Path, required=True)
    xversion.add_argument("--test-corpus", dest="test_dir", type=Path, required=True)

    overhead = command("overhead", cmd_overhead, "measure instrumentation overhead")
    overhead.add_argument("--program", type=Path, help="assembly file (default: bundled controller)")
    overhead.add_argument("--mission", help="bundled mission id or mission file (default m1)")
    overhead.add_argument("--repeats", type=int, help="odd number of timed runs per mode (default 11)")

    delaylab = command("delaylab", cmd_delaylab, "compare nominal and delayed mission runs")
    delaylab.add_argument("--program", type=Path, help="assembly file (default: bundled controller)")
    delaylab.add_argument("--missions", nargs="+", help="bundled mission ids or mission files (default m1 m2 m3)")
    delaylab.add_argument("--topics", nargs="+", help="topics to intercept (default /cmd_vel /odom /goal)")
    delaylab.add_argument("--delays", type=float, nargs="+", help="interception delays in seconds")
    delaylab.add_argument("--sleep-weights", type=float, nargs="+", help="coin weights (default 0.1 0.5 1)")
    delaylab.add_argument("--sleep-delays", type=float, nargs="+", help="inserted sleep durations in seconds")
    delaylab.add_argument("--no-sleeps", action="store_true", help="skip the sleep insertion sweep")
    delaylab.add_argument("--seeds", type=int, help="runs per configuration (default 30)")
    delaylab.add_argument("--workers", type=int, help="worker processes (default $FAILSCOPE_WORKERS or 1)")
    return parser


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger("failscope").setLevel(level)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run a subcommand.

    Returns:
        `0` on success, `1` for usage and configuration errors, `2` for any other failure. Failures detected in the
        controller under test are reported data and never change the exit status, except `trace --strict`.
    """
    try:
        args = build_parser().parse_args(argv)
        _configure_logging(args.verbose)
        return int(args.handler(args))
    except (FailscopeException, ValidationError, FileNotFoundError) as e:
        logger.error("%s", e)
        return exit_code_for(e)
    except Exception as e:  # pylint: disable=broad-except
        logger.exception("internal failure")
        return exit_code_for(e)
