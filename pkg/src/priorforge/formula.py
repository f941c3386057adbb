"""Minimal Wilkinson-style formula parsing and design-matrix assembly.

The grammar is deliberately small: ``response ~ [0 +] term (+ term)*`` with
optional random terms ``(1|group)`` or ``(x|group)``. No interactions, no
transformations, no nested grouping. Categorical fixed effects use
reference-cell coding (first level in sorted order dropped) unless the model
is a cell-means model, in which case one indicator per level is emitted.

Rows containing a missing value in any used column are dropped (listwise);
the count of dropped rows is reported on the resulting `DesignData`.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import DesignError, FormulaError

FAMILIES = ("gaussian", "binomial", "poisson")
INTERCEPT_NAME = "Intercept"

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_MISSING_TOKENS = frozenset({"", "NA", "NaN", "nan"})


class RandomTerm(NamedTuple):
    expr: str  # "1" for a random intercept, else a numeric column name
    group: str


@dataclass(frozen=True)
class ModelSpec:
    """Parsed model formula: response, fixed terms, random terms, family."""

    response: str
    fixed_terms: tuple[str, ...]
    has_intercept: bool
    random_terms: tuple[RandomTerm, ...] = ()
    family: str = "gaussian"

    def is_cell_means_candidate(self) -> bool:
        # Finalized by build_design, which knows whether the term is categorical.
        return not self.has_intercept and len(self.fixed_terms) == 1


def _token_at(text: str, pos: int) -> tuple[str, int, int]:
    """Next token starting at or after pos: returns (token, start, end)."""
    while pos < len(text) and text[pos].isspace():
        pos += 1
    if pos >= len(text):
        return "", pos, pos
    ch = text[pos]
    if ch in "~+-()|":
        return ch, pos, pos + 1
    m = _IDENT_RE.match(text, pos)
    if m:
        return m.group(0), pos, m.end()
    m = re.match(r"[0-9]+", text[pos:])
    if m:
        return m.group(0), pos, pos + m.end()
    return ch, pos, pos + 1


def _tokenize(text: str) -> list[tuple[str, int]]:
    out = []
    pos = 0
    while True:
        tok, start, end = _token_at(text, pos)
        if tok == "":
            break
        out.append((tok, start))
        pos = end
    return out


def parse_formula(text: str, family: str = "gaussian") -> ModelSpec:
    """Parse ``response ~ [0 +] term (+ term)* (+ (rexpr|group))*``.

    Whitespace-insensitive and deterministic. ``0 +`` as the first right-hand
    element, or a trailing ``- 1``, removes the intercept; a bare ``1`` names
    it explicitly. Raises `FormulaError` with a byte offset on syntax errors,
    duplicate terms, or a response reused as a predictor.
    """
    if family not in FAMILIES:
        raise FormulaError(f"unknown family {family!r}")
    toks = _tokenize(text)
    i = 0

    def peek():
        return toks[i] if i < len(toks) else ("", len(text))

    tok, off = peek()
    if not _IDENT_RE.fullmatch(tok):
        raise FormulaError(f"expected response name, found {tok!r}", off)
    response = tok
    i += 1
    tok, off = peek()
    if tok != "~":
        raise FormulaError(f"expected '~' after response, found {tok!r}", off)
    i += 1

    has_intercept = True
    fixed: list[str] = []
    random: list[RandomTerm] = []
    first = True
    while i < len(toks):
        tok, off = peek()
        if not first:
            if tok == "+":
                i += 1
            elif tok == "-":
                i += 1
                tok, off = peek()
                if tok != "1":
                    raise FormulaError("only '- 1' is supported after '-'", off)
                has_intercept = False
                i += 1
                continue
            else:
                raise FormulaError(f"expected '+' between terms, found {tok!r}", off)
            tok, off = peek()
        if tok == "0":
            if not first:
                raise FormulaError("'0' may only appear first on the right-hand side", off)
            has_intercept = False
            i += 1
        elif tok == "1":
            i += 1  # explicit intercept; the default already includes it
        elif tok == "(":
            i += 1
            tok, off = peek()
            if tok != "1" and not _IDENT_RE.fullmatch(tok):
                raise FormulaError(f"expected '1' or a column name in random term, found {tok!r}", off)
            expr = tok
            i += 1
            tok, off = peek()
            if tok != "|":
                raise FormulaError(f"expected '|' in random term, found {tok!r}", off)
            i += 1
            tok, off = peek()
            if not _IDENT_RE.fullmatch(tok):
                raise FormulaError(f"expected grouping column after '|', found {tok!r}", off)
            group = tok
            i += 1
            tok, off = peek()
            if tok != ")":
                raise FormulaError(f"expected ')' closing random term, found {tok!r}", off)
            i += 1
            rt = RandomTerm(expr, group)
            if rt in random:
                raise FormulaError(f"duplicate random term ({expr}|{group})", off)
            random.append(rt)
        elif _IDENT_RE.fullmatch(tok):
            if tok == response:
                raise FormulaError(f"response {tok!r} reused as predictor", off)
            if tok in fixed:
                raise FormulaError(f"duplicate term {tok!r}", off)
            fixed.append(tok)
            i += 1
        else:
            raise FormulaError(f"unexpected token {tok!r}", off)
        first = False

    for expr, group in random:
        if expr == response or group == response:
            raise FormulaError(f"response {response!r} reused in random term")
    return ModelSpec(response, tuple(fixed), has_intercept, tuple(random), family)


def format_formula(spec: ModelSpec) -> str:
    """Canonical printer; ``parse_formula(format_formula(s), s.family) == s``."""
    parts = list(spec.fixed_terms)
    if not spec.has_intercept:
        parts = ["0"] + parts
    parts += [f"({e}|{g})" for e, g in spec.random_terms]
    if not parts:
        parts = ["1"]
    return f"{spec.response} ~ " + " + ".join(parts)


def read_csv_columns(path_or_text: str, *, is_text: bool = False) -> dict[str, list[str]]:
    """Read an RFC 4180 CSV with a header row into string columns.

    Typing (numeric vs categorical) happens later, in `build_design`.
    """
    if is_text:
        fh = io.StringIO(path_or_text)
    else:
        fh = open(path_or_text, newline="", encoding="utf-8")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DesignError("empty CSV: no header row") from None
        cols: dict[str, list[str]] = {name: [] for name in header}
        if len(cols) != len(header):
            raise DesignError("duplicate column names in CSV header")
        for row in reader:
            if len(row) != len(header):
                raise DesignError(
                    f"CSV row {reader.line_num} has {len(row)} fields, expected {len(header)}"
                )
            for name, v in zip(header, row):
                cols[name].append(v)
    return cols


@dataclass(frozen=True)
class DesignData:
    """Response vector, fixed-effect design matrix, and column metadata."""

    y: np.ndarray
    X: np.ndarray
    term_columns: dict[str, tuple[int, ...]]
    group_indices: dict[str, np.ndarray]
    n: int
    means_x: np.ndarray
    var_y: float
    column_names: tuple[str, ...]
    rows_dropped: int
    cell_means: bool
    has_intercept: bool
    spec: ModelSpec
    # typed per-column values after row dropping, kept so augmented designs
    # can be rebuilt (categorical recoding changes when an intercept is added)
    raw_columns: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def slope_columns(self) -> tuple[int, ...]:
        """Design columns that receive slope priors (everything except the
        intercept column and cell-means indicator columns)."""
        if self.cell_means:
            return ()
        skip = set(self.term_columns.get(INTERCEPT_NAME, ()))
        return tuple(j for j in range(self.X.shape[1]) if j not in skip)


def _parse_column(values: Sequence) -> tuple[str, np.ndarray]:
    """Classify a column as numeric or categorical.

    Returns ("numeric", float array with NaN for missing) or
    ("categorical", object array with None for missing).
    """
    parsed = np.empty(len(values), dtype=object)
    numeric = True
    for i, v in enumerate(values):
        if v is None or (isinstance(v, str) and v.strip() in _MISSING_TOKENS):
            parsed[i] = None
            continue
        if isinstance(v, (int, float, np.integer, np.floating)):
            f = float(v)
            parsed[i] = None if np.isnan(f) else f
            continue
        try:
            parsed[i] = float(str(v).strip())
        except ValueError:
            numeric = False
            parsed[i] = str(v)
    if numeric:
        out = np.array([np.nan if p is None else p for p in parsed], dtype=float)
        return "numeric", out
    out = np.array([None if p is None else str(v) for p, v in zip(parsed, values)], dtype=object)
    return "categorical", out


def build_design(spec: ModelSpec, table: Mapping[str, Sequence]) -> DesignData:
    """Assemble `DesignData` from a columnar dataset.

    Strings become categoricals, numerals become numerics; rows with missing
    values in any used column are dropped and counted. The response must be
    numeric, 0/1 for binomial, nonnegative integer for poisson.
    """
    used: list[str] = [spec.response] + list(spec.fixed_terms)
    for expr, group in spec.random_terms:
        if expr != "1" and expr not in used:
            used.append(expr)
        if group not in used:
            used.append(group)
    for name in used:
        if name not in table:
            raise DesignError(f"unknown column {name!r}")

    kinds: dict[str, str] = {}
    cols: dict[str, np.ndarray] = {}
    n_raw = None
    for name in used:
        kind, col = _parse_column(table[name])
        if n_raw is None:
            n_raw = len(col)
        elif len(col) != n_raw:
            raise DesignError(f"column {name!r} has length {len(col)}, expected {n_raw}")
        kinds[name], cols[name] = kind, col

    keep = np.ones(n_raw, dtype=bool)
    for name in used:
        col = cols[name]
        if kinds[name] == "numeric":
            keep &= ~np.isnan(col)
        else:
            keep &= np.array([v is not None for v in col])
    rows_dropped = int(n_raw - keep.sum())
    if keep.sum() == 0:
        raise DesignError("all rows dropped (missing values in every row)")
    for name in used:
        cols[name] = cols[name][keep]
    n = int(keep.sum())

    if kinds[spec.response] != "categorical":
        y = cols[spec.response].astype(float)
    else:
        raise DesignError(f"non-numeric value in numeric column {spec.response!r} (response)")
    if spec.family == "binomial":
        if not np.all((y == 0.0) | (y == 1.0)):
            raise DesignError("binomial response must be coded 0/1")
    elif spec.family == "poisson":
        if np.any(y < 0) or not np.all(y == np.floor(y)):
            raise DesignError("poisson response must be a nonnegative integer")

    cell_means = (
        spec.is_cell_means_candidate()
        and kinds[spec.fixed_terms[0]] == "categorical"
    )

    columns: list[np.ndarray] = []
    names: list[str] = []
    term_columns: dict[str, tuple[int, ...]] = {}
    if spec.has_intercept:
        columns.append(np.ones(n))
        names.append(INTERCEPT_NAME)
        term_columns[INTERCEPT_NAME] = (0,)
    for term in spec.fixed_terms:
        start = len(columns)
        if kinds[term] == "numeric":
            columns.append(cols[term].astype(float))
            names.append(term)
        else:
            levels = sorted(set(cols[term]))
            emit = levels if cell_means else levels[1:]
            for lev in emit:
                columns.append((cols[term] == lev).astype(float))
                names.append(f"{term}[{lev}]")
        term_columns[term] = tuple(range(start, len(columns)))

    X = np.column_stack(columns) if columns else np.empty((n, 0))
    if n <= X.shape[1]:
        raise DesignError(f"n = {n} rows but {X.shape[1]} design columns; need n > columns")

    group_indices: dict[str, np.ndarray] = {}
    for expr, group in spec.random_terms:
        if group not in group_indices:
            g = cols[group]
            levels = sorted(set(g.tolist()))
            lookup = {lev: i for i, lev in enumerate(levels)}
            group_indices[group] = np.array([lookup[v] for v in g.tolist()], dtype=np.int64)
        if expr != "1" and kinds[expr] != "numeric":
            raise DesignError(f"random-slope column {expr!r} must be numeric")

    raw = {name: cols[name] for name in used}

    return DesignData(
        y=y,
        X=X,
        term_columns=term_columns,
        group_indices=group_indices,
        n=n,
        means_x=X.mean(axis=0) if X.shape[1] else np.empty(0),
        var_y=float(np.mean((y - y.mean()) ** 2)),
        column_names=tuple(names),
        rows_dropped=rows_dropped,
        cell_means=cell_means,
        has_intercept=spec.has_intercept,
        spec=spec,
        raw_columns=raw,
    )
