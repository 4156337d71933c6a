from failscope.config import InstrumentationMode

from .collector import OverheadMeter, OverheadReport, SignalCollector, collect, measure_overhead
from .io import STREAM_COLUMNS, read_stream_csv, stream_frame, write_stream_csv
from .signals import NUM_SIGNALS, SIGNAL_NAMES, SignalSummary, StreamEntry, SummaryStream
from .trace import TraceEvent, TraceRecorder

__all__ = [
    "InstrumentationMode",
    "NUM_SIGNALS",
    "OverheadMeter",
    "OverheadReport",
    "SIGNAL_NAMES",
    "STREAM_COLUMNS",
    "SignalCollector",
    "SignalSummary",
    "StreamEntry",
    "SummaryStream",
    "TraceEvent",
    "TraceRecorder",
    "collect",
    "measure_overhead",
    "read_stream_csv",
    "stream_frame",
    "write_stream_csv",
]
