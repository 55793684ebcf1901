"""Shared data model: views, responses, group structures and hit matrices.

The variable-level model behind everything here is

    y_i = x_i^G gamma_G + x_i^M gamma_M + x_i^G Delta x_i^M^T + eps_i

with the interaction matrix ``Delta`` of shape ``(D_G, D_M)``.  Grouping the
columns of each view and summarising each group by one supervariable gives
the compact model

    y_i = xt_i^G beta_G + xt_i^M beta_M + sum_{g,m} (xt_i^g xt_i^m) theta_gm + eps_i

which is what the rest of the package estimates.  The joint fit of the
compact model with three penalties is not solved; each view is selected by
its own weighted Lasso and interactions are then tested pairwise.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, DimensionMismatch


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """One view: ``N`` samples by ``D`` variables, with variable names."""

    values: np.ndarray
    variable_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"expected a 2-D matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("matrix contains NaN or infinite entries")
        names = tuple(self.variable_names) or tuple(f"V{j + 1}" for j in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise DimensionMismatch("variable_names")
        if len(set(names)) != len(names):
            raise DataError("variable names are not distinct")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "variable_names", names)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_variables(self) -> int:
        return self.values.shape[1]

    def with_values(self, values) -> "Dataset":
        return Dataset(values, self.variable_names)

    def subset(self, columns: Sequence[int]) -> "Dataset":
        columns = list(columns)
        return Dataset(self.values[:, columns], [self.variable_names[j] for j in columns])


@dataclass(frozen=True)
class Response:
    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=float).ravel()
        if not np.all(np.isfinite(y)):
            raise DataError("response contains NaN or infinite entries")
        object.__setattr__(self, "y", _frozen(y))

    def __len__(self):
        return self.y.shape[0]


@dataclass(frozen=True)
class GroupStructure:
    """Groups of column indices over ``n_variables`` columns.

    Groups may overlap; a partition is the overlap-free special case.
    """

    groups: tuple[tuple[int, ...], ...]
    n_variables: int

    def __post_init__(self):
        groups = tuple(tuple(int(j) for j in g) for g in self.groups)
        covered = set()
        for k, g in enumerate(groups):
            if not g:
                raise DataError(f"group {k} is empty")
            if min(g) < 0 or max(g) >= self.n_variables:
                raise DataError(f"group {k} has indices outside 0..{self.n_variables - 1}")
            covered.update(g)
        if len(covered) != self.n_variables:
            raise DataError("some variables belong to no group")
        object.__setattr__(self, "groups", groups)

    @property
    def group_count(self) -> int:
        return len(self.groups)

    @classmethod
    def from_labels(cls, labels) -> "GroupStructure":
        labels = np.asarray(labels)
        uniq = sorted(set(labels.tolist()), key=lambda v: int(np.flatnonzero(labels == v)[0]))
        return cls(tuple(tuple(np.flatnonzero(labels == u).tolist()) for u in uniq), labels.size)

    def membership(self) -> np.ndarray:
        """Boolean ``(group_count, n_variables)`` indicator matrix."""
        out = np.zeros((self.group_count, self.n_variables), dtype=bool)
        for k, g in enumerate(self.groups):
            out[k, list(g)] = True
        return out


@dataclass(frozen=True)
class CompactModel:
    beta_G: np.ndarray
    beta_M: np.ndarray
    theta: np.ndarray
    intercept: float = 0.0

    def __post_init__(self):
        bg = np.asarray(self.beta_G, dtype=float).ravel()
        bm = np.asarray(self.beta_M, dtype=float).ravel()
        th = np.asarray(self.theta, dtype=float)
        if th.shape != (bg.size, bm.size):
            raise DimensionMismatch("theta")
        for name, a in (("beta_G", bg), ("beta_M", bm), ("theta", th)):
            object.__setattr__(self, name, _frozen(a))

    def check_against(self, gs_G: GroupStructure, gs_M: GroupStructure):
        if self.beta_G.size != gs_G.group_count:
            raise DimensionMismatch("beta_G")
        if self.beta_M.size != gs_M.group_count:
            raise DimensionMismatch("beta_M")

    def predict(self, xt_G: np.ndarray, xt_M: np.ndarray) -> np.ndarray:
        inter = np.einsum("ig,gm,im->i", xt_G, self.theta, xt_M)
        return self.intercept + xt_G @ self.beta_G + xt_M @ self.beta_M + inter


@dataclass(frozen=True)
class VariableInteractionMatrix:
    """``(D_G, D_M)`` matrix on the original variables (values or hits)."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries)
        if e.ndim != 2:
            raise DataError("interaction matrix must be 2-D")
        object.__setattr__(self, "entries", _frozen(e))

    @property
    def shape(self):
        return self.entries.shape

    def hits(self) -> np.ndarray:
        return self.entries != 0


def validate_pairing(g: Dataset, m: Dataset, y: Response) -> None:
    """Check that both views and the response describe the same samples."""
    n = len(y)
    if g.n_samples == 0 or m.n_samples == 0 or n == 0:
        raise DimensionMismatch("empty sample")
    if g.n_samples != n:
        raise DimensionMismatch("view G")
    if m.n_samples != n:
        raise DimensionMismatch("view M")


def expand_to_variables(hit, gs_G: GroupStructure, gs_M: GroupStructure) -> VariableInteractionMatrix:
    """Spread a compact ``(N_G, N_M)`` hit matrix onto the original variables.

    Entry ``(j, j')`` is set when some selected pair ``(g, m)`` has ``j`` in
    group ``g`` and ``j'`` in group ``m``.
    """
    hit = np.asarray(hit, dtype=bool)
    if hit.shape != (gs_G.group_count, gs_M.group_count):
        raise DimensionMismatch("hit matrix")
    a = gs_G.membership().astype(np.int64)
    b = gs_M.membership().astype(np.int64)
    return VariableInteractionMatrix((a.T @ hit.astype(np.int64) @ b) > 0)


def _sniff_delimiter(path) -> str:
    return "\t" if os.fspath(path).endswith((".tsv", ".tab", ".txt")) else ","


def load_dataset(path, delimiter: str | None = None) -> Dataset:
    """Read a view: header row of variable names, then one sample per row."""
    delimiter = delimiter or _sniff_delimiter(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    try:
        values = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if values.size == 0:
        values = values.reshape(0, len(header))
    if values.shape[1] != len(header):
        raise DimensionMismatch(f"{path}: header")
    return Dataset(values, header)


def load_response(path, delimiter: str | None = None) -> Response:
    delimiter = delimiter or _sniff_delimiter(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r]
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    try:
        return Response([float(r[0]) for r in rows])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_dataset(path, ds: Dataset, delimiter: str = "\t", fmt: str = "%.17g") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(ds.variable_names)
        for row in ds.values:
            w.writerow([fmt % v for v in row])


def write_response(path, y: Response, name: str = "y", fmt: str = "%.17g") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(name + "\n")
        for v in y.y:
            fh.write(fmt % v + "\n")
