"""JSON ingestion of reductive algebras.

Schema: ``dim_m``, ``dim_k``, ``metric_m`` (row-major nested list) and
``brackets``, a list of ``{kind, i, j, k, value}`` records with 0-based
indices. ``kind`` is one of mm_m, mm_k, km, kk; zero entries may be omitted
and antisymmetric counterparts are filled in automatically.
"""
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from errors import ValidationError
from reductive_core import ReductiveAlgebra

logger = logging.getLogger(__name__)

# which dimension each index of a record runs over
KIND_AXES = {
    "mm_m": ("m", "m", "m"),
    "mm_k": ("m", "m", "k"),
    "km": ("k", "m", "m"),
    "kk": ("k", "k", "k"),
}
ANTISYMMETRIC_KINDS = ("mm_m", "mm_k", "kk")
CONFLICT_TOL = 1e-12


class AlgebraLoader:
    def __init__(self, check_jacobi=True):
        self.check_jacobi = check_jacobi

    def load_json(self, file_path) -> ReductiveAlgebra:
        """Read and validate an algebra file"""
        return self.from_dict(self._read(file_path))

    def load_document(self, file_path):
        """Algebra plus the optional ``directions`` list, normalised to unit length"""
        data = self._read(file_path)
        algebra = self.from_dict(data)
        return algebra, self.directions_from_dict(data, algebra)

    @staticmethod
    def _read(file_path):
        path = Path(file_path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
        logger.info("loading algebra from %s", path)
        return data

    def directions_from_dict(self, data, algebra: ReductiveAlgebra):
        directions = []
        for entry in data.get("directions", []) if isinstance(data, dict) else []:
            vector = np.array(entry, dtype=float)
            if vector.shape != (algebra.dim_m,) or not np.all(np.isfinite(vector)):
                raise ValidationError(f"direction {entry!r} must be a finite vector of length {algebra.dim_m}")
            length = algebra.norm(vector)
            if length == 0:
                raise ValidationError("directions must be nonzero")
            directions.append(vector / length)
        return directions

    def from_dict(self, data) -> ReductiveAlgebra:
        if not isinstance(data, dict):
            raise ValidationError("algebra document must be a JSON object")
        missing = [key for key in ("dim_m", "dim_k", "metric_m", "brackets") if key not in data]
        if missing:
            raise ValidationError(f"missing keys: {', '.join(missing)}")
        dim_m, dim_k = self._dimension(data, "dim_m", 1), self._dimension(data, "dim_k", 0)
        metric = np.array(data["metric_m"], dtype=float)
        if metric.shape != (dim_m, dim_m):
            raise ValidationError(f"metric_m must be {dim_m}x{dim_m}, got shape {metric.shape}")

        records = self.clean_records(data["brackets"])
        self.validate_records(records, dim_m, dim_k)
        tables = self.fill_tables(records, dim_m, dim_k)
        logger.debug("algebra with dim_m=%d dim_k=%d and %d bracket records", dim_m, dim_k, len(records))
        return ReductiveAlgebra(dim_m, dim_k, tables["mm_m"], tables["mm_k"], tables["km"],
                                tables["kk"], metric, check_jacobi=self.check_jacobi)

    @staticmethod
    def _dimension(data, key, minimum):
        value = data[key]
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            raise ValidationError(f"{key} must be an integer >= {minimum}")
        return value

    def clean_records(self, records) -> pd.DataFrame:
        """Normalise bracket records into a typed table"""
        if not isinstance(records, list):
            raise ValidationError("brackets must be a list of records")
        frame = pd.DataFrame(records, columns=["kind", "i", "j", "k", "value"])
        if frame.empty:
            return frame
        if frame.isna().any().any():
            raise ValidationError("every bracket record needs kind, i, j, k and value")
        frame["kind"] = frame["kind"].astype(str).str.strip().str.lower()
        for column in ("i", "j", "k"):
            numeric = pd.to_numeric(frame[column], errors="coerce")
            if numeric.isna().any() or (numeric != numeric.round()).any():
                raise ValidationError(f"bracket index '{column}' must be an integer")
            frame[column] = numeric.astype(int)
        frame["value"] = pd.to_numeric(frame["value"], errors="coerce")
        if not np.all(np.isfinite(frame["value"].to_numpy(dtype=float))):
            raise ValidationError("bracket values must be finite numbers")
        return frame

    def validate_records(self, frame: pd.DataFrame, dim_m, dim_k):
        if frame.empty:
            return
        unknown = sorted(set(frame["kind"]) - set(KIND_AXES))
        if unknown:
            raise ValidationError(f"unknown bracket kind(s): {', '.join(unknown)}")
        sizes = {"m": dim_m, "k": dim_k}
        for row in frame.itertuples(index=False):
            for column, axis in zip(("i", "j", "k"), KIND_AXES[row.kind]):
                index = getattr(row, column)
                if not 0 <= index < sizes[axis]:
                    raise ValidationError(f"{row.kind} record index {column}={index} out of range for {axis}")
        duplicated = frame.duplicated(subset=["kind", "i", "j", "k"], keep=False)
        if duplicated.any():
            clashes = frame[duplicated].groupby(["kind", "i", "j", "k"])["value"].nunique()
            if (clashes > 1).any():
                raise ValidationError("the same bracket entry is given twice with different values")

    def fill_tables(self, frame: pd.DataFrame, dim_m, dim_k):
        sizes = {"m": dim_m, "k": dim_k}
        tables = {kind: np.zeros(tuple(sizes[a] for a in axes)) for kind, axes in KIND_AXES.items()}
        given = {kind: np.zeros(tables[kind].shape, dtype=bool) for kind in KIND_AXES}
        for row in frame.itertuples(index=False):
            tables[row.kind][row.i, row.j, row.k] = row.value
            given[row.kind][row.i, row.j, row.k] = True

        for kind in ANTISYMMETRIC_KINDS:
            table, mask = tables[kind], given[kind]
            swapped, swapped_mask = np.swapaxes(table, 0, 1), np.swapaxes(mask, 0, 1)
            both = mask & swapped_mask
            scale = max(1.0, float(np.max(np.abs(table))) if table.size else 1.0)
            if np.any(np.abs(table + swapped)[both] > CONFLICT_TOL * scale):
                raise ValidationError(f"conflicting antisymmetric entries in {kind}")
            tables[kind] = np.where(mask, table, -swapped)
        return tables


def algebra_to_dict(algebra: ReductiveAlgebra, directions=None):
    """Inverse of ``AlgebraLoader.from_dict``, listing each nonzero entry once"""
    tables = {"mm_m": algebra.bracket_mm_m, "mm_k": algebra.bracket_mm_k,
              "km": algebra.bracket_km, "kk": algebra.bracket_kk}
    brackets = []
    for kind, table in tables.items():
        for i, j, k in zip(*np.nonzero(table)):
            if kind in ANTISYMMETRIC_KINDS and i > j:
                continue
            brackets.append({"kind": kind, "i": int(i), "j": int(j), "k": int(k), "value": float(table[i, j, k])})
    document = {"dim_m": algebra.dim_m, "dim_k": algebra.dim_k,
                "metric_m": algebra.metric_m.tolist(), "brackets": brackets}
    if directions is not None:
        document["directions"] = [[float(v) for v in d] for d in directions]
    return document
