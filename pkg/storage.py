"""
File input and output for the lab: tabulated symbols, basis transforms,
block groupings and result CSVs
"""
import io
import os
import sys
from typing import List, Optional

import numpy as np
import pandas as pd

from config import Config
from models import BasisModel, Grouping, InputFormatError, RunConfig, ScanResult, Symbol, SymbolKind
from spectra_lab import make_grouping, validate_grouping


class LabStorage:
    """Reads experiment inputs and writes experiment outputs"""

    FLOAT_FORMAT = "%.16e"

    def __init__(self, data_dir: Optional[str] = None):
        self.data_dir = data_dir or Config.DATA_DIR

    def resolve(self, path: str) -> str:
        """Relative paths that do not exist are looked up under the data directory"""
        if os.path.isabs(path) or os.path.exists(path):
            return path
        return os.path.join(self.data_dir, path)

    @staticmethod
    def _read_lines(path: str) -> List[str]:
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as e:
            raise InputFormatError(path, 0, f"cannot read file: {e}") from e
        while lines and not lines[-1].strip():
            lines.pop()
        if not lines:
            raise InputFormatError(path, 1, "file is empty")
        return lines

    def load_symbol_table(self, path: str) -> Symbol:
        """One real value per line: f(1), f(2), ..."""
        path = self.resolve(path)
        raw = pd.Series(self._read_lines(path), dtype=str).str.strip()
        values = pd.to_numeric(raw, errors="coerce")
        bad = values.isna() | ~np.isfinite(values.fillna(0.0))
        if bad.any():
            line = int(np.flatnonzero(bad.to_numpy())[0])
            raise InputFormatError(path, line + 1, f"expected one finite real number, got {raw.iloc[line]!r}")
        return Symbol(kind=SymbolKind.TABULATED, values=values.to_numpy(dtype=float))

    def load_transform(self, path: str) -> BasisModel:
        """Square matrix, one comma-separated row per line (complex entries like 1+2j allowed)"""
        path = self.resolve(path)
        try:
            matrix = np.loadtxt(path, dtype=complex, delimiter=",", ndmin=2)
        except (OSError, ValueError) as e:
            raise InputFormatError(path, 0, f"cannot parse transform: {e}") from e
        if matrix.shape[0] != matrix.shape[1]:
            raise InputFormatError(path, 0, f"transform must be square, got {matrix.shape[0]}x{matrix.shape[1]}")
        if np.all(matrix.imag == 0):
            matrix = matrix.real
        try:
            return BasisModel.from_transform(matrix)
        except ValueError as e:
            raise InputFormatError(path, 0, str(e)) from e

    def load_grouping(self, spec: str, N: int, seed: Optional[int] = None) -> Grouping:
        """``uniform:K``, ``random:K`` (lengths 1..K) or ``file:PATH`` (one comma-separated block of 1-based indices per line)"""
        kind, _, arg = spec.partition(":")
        if kind in ("uniform", "random"):
            try:
                size = int(arg)
            except ValueError as e:
                raise InputFormatError(spec, 0, f"block size must be an integer, got {arg!r}") from e
            return make_grouping(N, kind, size=size, seed=seed)
        if kind == "file":
            path = self.resolve(arg)
            blocks = []
            for number, line in enumerate(self._read_lines(path), start=1):
                try:
                    blocks.append([int(tok) for tok in line.split(",") if tok.strip()])
                except ValueError as e:
                    raise InputFormatError(path, number, f"block indices must be integers: {line!r}") from e
            return validate_grouping(blocks, N)
        raise InputFormatError(spec, 0, "grouping must be 'uniform:K', 'random:K' or 'file:PATH'")

    @staticmethod
    def scan_frame(result: ScanResult, value_name: str) -> pd.DataFrame:
        """Grid, values and every extra column of a scan, in that order"""
        data = {result.grid_label: result.grid, value_name: result.values}
        data.update(result.columns)
        return pd.DataFrame(data)

    def write_frame(self, frame: pd.DataFrame, run: RunConfig, out: Optional[str] = None) -> str:
        """Provenance comment line followed by the CSV body; returns the text written"""
        buffer = io.StringIO()
        buffer.write(run.provenance() + "\n")
        frame.to_csv(buffer, index=False, float_format=self.FLOAT_FORMAT, lineterminator="\n")
        text = buffer.getvalue()
        if out is None:
            sys.stdout.write(text)
        else:
            directory = os.path.dirname(out)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text
