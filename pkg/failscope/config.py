from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, BaseSettings, root_validator, validator

INTERCEPT_DELAYS = tuple(2.0**k for k in range(-8, 1))
"""Topic interception delays, 2^-8 s through 1 s."""
SLEEP_DELAYS = tuple(2.0**k for k in range(-9, 4))
"""Sleep insertion delays, 2^-9 s through 8 s."""


class InstrumentationMode(str, Enum):
    """Granularity at which an execution is observed."""

    NONE = "none"
    NAIVE = "naive"
    OPTIMIZED = "optimized"


def is_intercept_delay(delay_s: float) -> bool:
    """Return True if `delay_s` is zero or a power of two between 2^-8 and 1 second."""
    return delay_s == 0 or delay_s in INTERCEPT_DELAYS


def is_sleep_delay(delay_s: float) -> bool:
    """Return True if `delay_s` is a power of two between 2^-9 and 8 seconds."""
    return delay_s in SLEEP_DELAYS


class ExecutionLimits(BaseModel):
    """Bounds applied to every virtual machine run."""

    class Config:
        frozen = True

    max_instructions: int = 500_000
    """Retired instruction count at which a still-running execution is timed out."""
    max_sim_seconds: float = 120.0
    """Simulated clock value beyond which a still-running execution is timed out."""

    @validator("max_instructions")
    def validate_max_instructions(cls, value: int) -> int:  # pylint: disable=E0213
        if value < 1:
            raise ValueError("max_instructions must be at least 1")
        return value

    @validator("max_sim_seconds")
    def validate_max_sim_seconds(cls, value: float) -> float:  # pylint: disable=E0213
        if value <= 0:
            raise ValueError("max_sim_seconds must be positive")
        return value


class SimulationConfig(BaseModel):
    """Calibration constants of the robot world."""

    class Config:
        frozen = True

    odom_rate_hz: float = 10.0
    """Rate at which noisy odometry is published, in simulated hertz."""
    physics_dt: float = 0.02
    """Integration step of the unicycle kinematics, in simulated seconds."""
    noise_sigma: float = 0.05
    """Standard deviation of the Gaussian odometry position noise, in meters."""
    mission_time_limit: float = 120.0
    """Simulated seconds after which a mission is cut off and timed out."""

    @root_validator
    def validate_config(cls, values: Dict[str, Any]) -> Dict[str, Any]:  # pylint: disable=E0213
        """Validate the configuration.

        - Rates, steps and limits must be positive.
        - The physics step must not be coarser than the odometry period.
        """
        for name in ("odom_rate_hz", "physics_dt", "mission_time_limit"):
            if values.get(name) is not None and values[name] <= 0:
                raise ValueError(f"{name} must be positive")
        if values.get("noise_sigma") is not None and values["noise_sigma"] < 0:
            raise ValueError("noise_sigma must not be negative")
        if values.get("odom_rate_hz") and values.get("physics_dt"):
            if values["physics_dt"] > 1.0 / values["odom_rate_hz"]:
                raise ValueError("physics_dt must not exceed the odometry period")
        return values


class CorpusConfig(BaseModel):
    """Configuration of a corpus build."""

    discard_window: int = 1_000
    """Executions crashing within this many instructions are discarded as immediate crashes."""
    interval_size: int = 10_000
    """Instruction interval at which summaries are emitted into each execution's stream."""
    seed: int = 0
    """Base seed; mission `i` runs with odometry noise seeded from `(seed, i)`."""
    include_original: bool = True
    """Also run the unmutated program on every mission."""
    max_mutants: Optional[int] = None
    """If set, keep a seeded sample of at most this many valid mutants."""
    workers: int = 1
    """Size of the process pool the runs are fanned out to. `1` runs everything in-process."""

    @root_validator
    def validate_config(cls, values: Dict[str, Any]) -> Dict[str, Any]:  # pylint: disable=E0213
        if values.get("discard_window") is not None and values["discard_window"] < 0:
            raise ValueError("discard_window must not be negative")
        if values.get("interval_size") is not None and values["interval_size"] < 1:
            raise ValueError("interval_size must be at least 1")
        if values.get("max_mutants") is not None and values["max_mutants"] < 1:
            raise ValueError("max_mutants must be at least 1 when set")
        if values.get("workers") is not None and values["workers"] < 1:
            raise ValueError("workers must be at least 1")
        return values


class Settings(BaseSettings):
    """Environment overrides, read from `FAILSCOPE_*` variables."""

    workers: int = 1
    """Worker pool size for experiment fan-out (`FAILSCOPE_WORKERS`)."""
    output_root: Path = Path("failscope-out")
    """Directory reports and corpora are written under by default (`FAILSCOPE_OUTPUT_ROOT`)."""

    class Config:
        env_prefix = "FAILSCOPE_"


class ExperimentConfig(BaseModel):
    """Parameters shared by every command-line experiment.

    Subclasses add the fields of one subcommand. Instances are embedded verbatim in report headers so that a run can
    be replayed.
    """

    class Config:
        extra = "forbid"

    seed: int = 0
    """Seed for shuffling, balancing and sampling."""
    out: Path
    """Output directory for reports."""


class TraceConfig(ExperimentConfig):
    program: Optional[Path] = None
    """Assembly file; the bundled controller when omitted."""
    mission: str = "m1"
    """Bundled mission id or path to a mission file."""
    mode: InstrumentationMode = InstrumentationMode.OPTIMIZED
    interval: int = 10_000
    strict: bool = False
    """Exit non-zero when the traced run crashes."""

    @validator("mode")
    def validate_mode(cls, value: InstrumentationMode) -> InstrumentationMode:  # pylint: disable=E0213
        if value is InstrumentationMode.NONE:
            raise ValueError("mode none collects no summaries; use naive or optimized")
        return value

    @validator("interval")
    def validate_interval(cls, value: int) -> int:  # pylint: disable=E0213
        if value < 1:
            raise ValueError("interval must be at least 1")
        return value


class CorpusBuildConfig(ExperimentConfig):
    program: Optional[Path] = None
    """Assembly file; the bundled controller when omitted."""
    missions: List[str] = ["m1", "m2", "m3"]
    """Bundled mission ids or paths to mission files."""
    corpus: CorpusConfig = CorpusConfig()

    @validator("missions")
    def validate_missions(cls, value: List[str]) -> List[str]:  # pylint: disable=E0213
        if not value:
            raise ValueError("at least one mission is required")
        return value


class CorpusExperimentConfig(ExperimentConfig):
    corpus_dir: Path
    """Directory written by the `corpus` subcommand."""


class EvalConfig(CorpusExperimentConfig):
    model: Optional[Path] = None
    """A model written by `train`; scored against the whole corpus in addition to K-fold."""


class CurveConfig(CorpusExperimentConfig):
    sizes: List[int] = [20, 50, 100, 200, 400]

    @validator("sizes")
    def validate_sizes(cls, value: List[int]) -> List[int]:  # pylint: disable=E0213
        if not value:
            raise ValueError("at least one size is required")
        if any(size < 20 for size in value):
            raise ValueError("sizes must be at least 20 so that K-fold has two folds of ten")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("sizes must be strictly increasing")
        return value


class FeaturesConfig(CorpusExperimentConfig):
    top_k: int = 5

    @validator("top_k")
    def validate_top_k(cls, value: int) -> int:  # pylint: disable=E0213
        if not 1 <= value <= 26:
            raise ValueError("top_k must be between 1 and 26")
        return value


class CrossVersionConfig(ExperimentConfig):
    train_dir: Path
    """Corpus of the earlier program version."""
    test_dir: Path
    """Corpus of the later program version."""


class OverheadConfig(ExperimentConfig):
    program: Optional[Path] = None
    mission: str = "m1"
    repeats: int = 11

    @validator("repeats")
    def validate_repeats(cls, value: int) -> int:  # pylint: disable=E0213
        if value < 3 or value % 2 == 0:
            raise ValueError("repeats must be an odd number of at least 3")
        return value


class DelayLabConfig(ExperimentConfig):
    program: Optional[Path] = None
    missions: List[str] = ["m1", "m2", "m3"]
    topics: List[str] = ["/cmd_vel", "/odom", "/goal"]
    delays: List[float] = [0.0, *INTERCEPT_DELAYS]
    """Topic interception delays in seconds."""
    sleep_weights: List[float] = [0.1, 0.5, 1.0]
    """Coin weights for sleep insertion. Empty skips the sleep insertion sweep."""
    sleep_delays: List[float] = [2.0**-9, 2.0**-3, 1.0, 8.0]
    seeds: int = 30
    """Number of seeds per configuration, `0 .. seeds-1` offset by `seed`."""
    workers: int = 1

    @root_validator
    def validate_config(cls, values: Dict[str, Any]) -> Dict[str, Any]:  # pylint: disable=E0213
        """Validate the grids.

        - Interception delays must be zero or powers of two from 2^-8 to 1 second.
        - Sleep delays must be powers of two from 2^-9 to 8 seconds and weights must lie in [0.1, 1.0].
        """
        if not values.get("missions"):
            raise ValueError("at least one mission is required")
        for delay_s in values.get("delays") or []:
            if not is_intercept_delay(delay_s):
                raise ValueError(f"interception delay {delay_s} is not 0 or a power of two in [2^-8, 1]")
        for delay_s in values.get("sleep_delays") or []:
            if not is_sleep_delay(delay_s):
                raise ValueError(f"sleep delay {delay_s} is not a power of two in [2^-9, 8]")
        for weight in values.get("sleep_weights") or []:
            if not 0.1 <= weight <= 1.0:
                raise ValueError(f"sleep weight {weight} is outside [0.1, 1.0]")
        if values.get("seeds") is not None and values["seeds"] < 1:
            raise ValueError("seeds must be at least 1")
        if values.get("workers") is not None and values["workers"] < 1:
            raise ValueError("workers must be at least 1")
        return values
