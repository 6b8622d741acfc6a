"""
Mol2Trans Table I/O
pandas conventions shared by every TSV and CSV the toolkit reads or writes
"""

import csv
import logging
from typing import IO, List, Optional, Sequence, Union

import pandas as pd

from mmp_errors import FormatError

logger = logging.getLogger(__name__)

PathOrBuffer = Union[str, IO[str]]


def read_tsv(source: PathOrBuffer, columns: Sequence[str], header: bool = True,
             allow_empty: Sequence[str] = ()) -> pd.DataFrame:
    """Read a tab-separated table of strings, validating its columns.

    Every field is kept as text; empty or missing fields are a FormatError
    naming the 1-based file line.
    """
    try:
        frame = pd.read_csv(
            source,
            sep='\t',
            dtype=str,
            header=0 if header else None,
            names=None if header else list(columns),
            index_col=False,
            keep_default_na=False,
            na_values=[],
            quoting=csv.QUOTE_NONE,
            skip_blank_lines=True,
        )
    except pd.errors.EmptyDataError:
        if header:
            raise FormatError("file is empty; expected a header line", 1)
        return pd.DataFrame(columns=list(columns), dtype=str)
    except pd.errors.ParserError as e:
        raise FormatError(f"malformed table: {e}")

    if header and list(frame.columns) != list(columns):
        raise FormatError(f"expected header {'|'.join(columns)}, found {'|'.join(map(str, frame.columns))}", 1)

    first_line = 2 if header else 1
    missing = frame.isna()
    required = [c for c in frame.columns if c not in allow_empty]
    missing[required] = missing[required] | (frame[required] == '')
    if missing.to_numpy().any():
        row = int(missing.any(axis=1).to_numpy().nonzero()[0][0])
        raise FormatError("missing field", row + first_line)
    return frame


def write_tsv(frame: pd.DataFrame, target: PathOrBuffer, header: bool = True) -> None:
    frame.to_csv(
        target,
        sep='\t',
        index=False,
        header=header,
        quoting=csv.QUOTE_NONE,
        lineterminator='\n',
    )


def write_csv_report(frame: pd.DataFrame, target: PathOrBuffer,
                     comment_lines: Optional[List[str]] = None) -> None:
    """CSV with `#` provenance lines above the header and 6-decimal floats"""
    if isinstance(target, str):
        with open(target, 'w', encoding='utf-8', newline='') as f:
            write_csv_report(frame, f, comment_lines)
        return
    for line in comment_lines or []:
        target.write(line if line.startswith('#') else f"# {line}")
        target.write('\n')
    frame.to_csv(target, index=False, float_format='%.6f', lineterminator='\n')
