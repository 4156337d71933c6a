from pathlib import Path
from typing import List, Optional, Tuple, Union

import pandas as pd

from failscope.instrument.signals import SIGNAL_NAMES, SignalSummary, StreamEntry, SummaryStream

LEADING_COLUMNS = ("run_id", "instructions_executed", "label_placeholder")
STREAM_COLUMNS = (*LEADING_COLUMNS, *SIGNAL_NAMES, "final")
"""Column order of a summary CSV file. Part of the dataset contract."""
NO_LABEL = -1


def stream_frame(stream: SummaryStream, run_id: str, label: Optional[int] = None) -> pd.DataFrame:
    """Tabulate a summary stream: one row per interval entry, then the final summary flagged with `final=1`.

    Args:
        stream: The stream to tabulate.
        run_id: Identifier written to every row.
        label: If given, appended as a trailing `label` column.
    """
    rows = [
        (run_id, entry.instructions_executed, NO_LABEL, *entry.summary.as_vector(), 0) for entry in stream.entries
    ]
    rows.append((run_id, stream.final.InsCount, NO_LABEL, *stream.final.as_vector(), 1))
    frame = pd.DataFrame(rows, columns=list(STREAM_COLUMNS))
    if label is not None:
        frame["label"] = label
    return frame


def write_stream_csv(
    stream: SummaryStream, path: Union[str, Path], run_id: str, label: Optional[int] = None
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stream_frame(stream, run_id, label).to_csv(path, index=False)
    return path


def read_stream_csv(path: Union[str, Path], interval_size: int) -> Tuple[str, SummaryStream]:
    """Load a summary CSV written by `write_stream_csv`.

    Args:
        path: CSV file.
        interval_size: Interval the stream was recorded with; it is not stored in the file.

    Returns:
        The run id and the reconstructed stream.
    """
    frame = pd.read_csv(path)
    missing = [column for column in STREAM_COLUMNS if column not in frame.columns]
    if missing:
        raise ValueError(f"{path} is not a summary file, missing columns: {', '.join(missing)}")
    entries: List[StreamEntry] = []
    final = SignalSummary()
    for row in frame.itertuples(index=False):
        record = row._asdict()
        summary = SignalSummary.from_vector([record[name] for name in SIGNAL_NAMES])
        if record["final"]:
            final = summary
        else:
            entries.append(StreamEntry(instructions_executed=int(record["instructions_executed"]), summary=summary))
    run_id = str(frame["run_id"].iloc[0]) if len(frame) else Path(path).stem
    return run_id, SummaryStream(interval_size=interval_size, entries=entries, final=final)
