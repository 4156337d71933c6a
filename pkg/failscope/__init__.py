from .config import CorpusConfig, ExecutionLimits, InstrumentationMode, Settings, SimulationConfig
from .exceptions import FailscopeException

__all__ = [
    "CorpusConfig",
    "ExecutionLimits",
    "FailscopeException",
    "InstrumentationMode",
    "Settings",
    "SimulationConfig",
]
