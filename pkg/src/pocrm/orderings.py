"""Dose grids, simple toxicity orderings, and the always-less/always-more-toxic sets.

A combination trial lays its doses out on a grid (drug A levels as rows, drug B
levels as columns) and indexes them 1..K row-major, so d_1 pairs the lowest
level of both drugs and d_K the highest.  Toxicity is only partially known up
front: within a row or a column it increases, but across rows/columns it need
not.  A "simple ordering" is one total order compatible with those within-drug
constraints, and designs here work with a small set of them carrying prior
weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "DoseGrid",
    "SimpleOrdering",
    "OrderingSet",
    "ToxicitySets",
    "OrderingViolation",
    "OrderingValidation",
    "standard_orderings",
    "validate_orderings",
    "toxicity_sets",
    "load_orderings_file",
    "dump_orderings_file",
]

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class DoseGrid:
    """Grid of drug-combination doses, drug A levels as rows and drug B as columns."""

    rows: int
    cols: int

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one level of each drug")

    @property
    def n_doses(self) -> int:
        return self.rows * self.cols

    def index(self, row: int, col: int) -> int:
        """1-based row-major dose index of (row, col); both arguments 1-based."""
        if not (1 <= row <= self.rows and 1 <= col <= self.cols):
            raise ValueError(f"({row}, {col}) outside a {self.rows}x{self.cols} grid")
        return (row - 1) * self.cols + col

    def coords(self, dose: int) -> tuple[int, int]:
        """(row, col) of a 1-based dose index."""
        if not (1 <= dose <= self.n_doses):
            raise ValueError(f"dose {dose} outside 1..{self.n_doses}")
        r, c = divmod(dose - 1, self.cols)
        return r + 1, c + 1


@dataclass(frozen=True)
class SimpleOrdering:
    """One total order of all doses, least to most toxic.

    ``sequence`` holds 1-based dose indices; ``position(d)`` is the 1-based rank
    of dose d (1 = least toxic).
    """

    sequence: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sequence", tuple(int(d) for d in self.sequence))
        k = len(self.sequence)
        if sorted(self.sequence) != list(range(1, k + 1)):
            raise ValueError(f"sequence must be a permutation of 1..{k}: {self.sequence}")

    @cached_property
    def positions(self) -> tuple[int, ...]:
        """positions[d-1] is the rank of dose d."""
        pos = [0] * len(self.sequence)
        for rank, dose in enumerate(self.sequence, start=1):
            pos[dose - 1] = rank
        return tuple(pos)

    def position(self, dose: int) -> int:
        return self.positions[dose - 1]


@dataclass(frozen=True)
class OrderingSet:
    """Candidate simple orderings with prior weights (nonnegative, summing to one).

    Duplicate sequences are allowed and keep their own weights; ``deduplicated``
    merges copies by summing weights, which changes how much mass any single
    sequence can attract, so it is opt-in.
    """

    orderings: tuple[SimpleOrdering, ...]
    prior_weights: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "orderings", tuple(self.orderings))
        object.__setattr__(self, "prior_weights", tuple(float(w) for w in self.prior_weights))
        if not self.orderings:
            raise ValueError("need at least one ordering")
        if len(self.prior_weights) != len(self.orderings):
            raise ValueError("one prior weight per ordering required")
        k = len(self.orderings[0].sequence)
        if any(len(o.sequence) != k for o in self.orderings):
            raise ValueError("orderings cover different numbers of doses")
        if any(w < 0 for w in self.prior_weights):
            raise ValueError("prior weights must be nonnegative")
        total = sum(self.prior_weights)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"prior weights sum to {total!r}, not 1")

    @classmethod
    def uniform(cls, sequences: Iterable["SimpleOrdering | Sequence[int]"]) -> "OrderingSet":
        orderings = tuple(
            s if isinstance(s, SimpleOrdering) else SimpleOrdering(tuple(s)) for s in sequences
        )
        m = len(orderings)
        return cls(orderings, tuple(1.0 / m for _ in range(m)))

    @property
    def m(self) -> int:
        return len(self.orderings)

    @property
    def n_doses(self) -> int:
        return len(self.orderings[0].sequence)

    @property
    def sequences(self) -> tuple[tuple[int, ...], ...]:
        return tuple(o.sequence for o in self.orderings)

    def deduplicated(self) -> "OrderingSet":
        """Merge duplicate sequences, summing their prior weights (first-seen order)."""
        merged: dict[tuple[int, ...], float] = {}
        for o, w in zip(self.orderings, self.prior_weights):
            merged[o.sequence] = merged.get(o.sequence, 0.0) + w
        return OrderingSet(
            tuple(SimpleOrdering(s) for s in merged),
            tuple(merged.values()),
        )


@dataclass(frozen=True)
class ToxicitySets:
    """For each dose, the doses known less toxic (nu) / more toxic (xi) under every ordering."""

    nu: tuple[frozenset[int], ...]
    xi: tuple[frozenset[int], ...]

    def less_toxic(self, dose: int) -> frozenset[int]:
        return self.nu[dose - 1]

    def more_toxic(self, dose: int) -> frozenset[int]:
        return self.xi[dose - 1]


@dataclass(frozen=True)
class OrderingViolation:
    ordering_index: int  # 1-based position within the set
    kind: str  # "out-of-range" | "duplicate" | "monotonicity"
    detail: str
    doses: tuple[int, ...] = ()


@dataclass(frozen=True)
class OrderingValidation:
    ok: bool
    violations: tuple[OrderingViolation, ...] = ()


# ----------------------------------------------------------------------------
# Standard six ordering schemes
# ----------------------------------------------------------------------------

def _by_rows(grid: DoseGrid) -> list[int]:
    return [grid.index(r, c) for r in range(1, grid.rows + 1) for c in range(1, grid.cols + 1)]


def _by_cols(grid: DoseGrid) -> list[int]:
    return [grid.index(r, c) for c in range(1, grid.cols + 1) for r in range(1, grid.rows + 1)]


def _diagonal_cells(grid: DoseGrid, s: int) -> list[tuple[int, int]]:
    # Cells on the anti-diagonal row+col == s, listed with the row ascending.
    lo = max(1, s - grid.cols)
    hi = min(grid.rows, s - 1)
    return [(r, s - r) for r in range(lo, hi + 1)]


def _diagonal(grid: DoseGrid, direction_for) -> list[int]:
    out: list[int] = []
    for s in range(2, grid.rows + grid.cols + 1):
        cells = _diagonal_cells(grid, s)
        if direction_for(s) == "up":
            cells = cells[::-1]
        out.extend(grid.index(r, c) for r, c in cells)
    return out


def standard_orderings(grid: DoseGrid, dedupe: bool = False) -> OrderingSet:
    """The six standard simple orderings of a grid, uniformly weighted.

    Schemes, in order: by rows; by columns; up-down diagonal; down-up diagonal;
    alternating starting with rows; alternating starting with columns.  On
    degenerate grids several schemes coincide; duplicates are kept (each with
    weight 1/6) unless ``dedupe`` is set.
    """
    seqs = [
        _by_rows(grid),
        _by_cols(grid),
        _diagonal(grid, lambda s: "up"),
        _diagonal(grid, lambda s: "down"),
        _diagonal(grid, lambda s: "down" if s % 2 else "up"),
        _diagonal(grid, lambda s: "up" if s % 2 else "down"),
    ]
    out = OrderingSet.uniform(seqs)
    return out.deduplicated() if dedupe else out


# ----------------------------------------------------------------------------
# Validation and the nu/xi sets
# ----------------------------------------------------------------------------

def _raw_sequences(orderings: "OrderingSet | Iterable[Sequence[int]]") -> list[list[int]]:
    if isinstance(orderings, OrderingSet):
        return [list(o.sequence) for o in orderings.orderings]
    return [list(s) for s in orderings]


def validate_orderings(grid: DoseGrid, orderings) -> OrderingValidation:
    """Check candidate sequences against the grid's within-drug monotonicity.

    Accepts an :class:`OrderingSet` or raw sequences (so malformed input can be
    reported rather than raised).  Violation kinds: "out-of-range" (index not in
    1..K), "duplicate" (repeated index / wrong length), "monotonicity" (a dose
    placed before another that shares its row or column at a lower level).
    """
    k = grid.n_doses
    violations: list[OrderingViolation] = []
    for idx, seq in enumerate(_raw_sequences(orderings), start=1):
        bad_indices = False
        seen: set[int] = set()
        for d in seq:
            if not isinstance(d, int) or isinstance(d, bool) or not (1 <= d <= k):
                violations.append(OrderingViolation(idx, "out-of-range", f"index {d} outside 1..{k}", (d,) if isinstance(d, int) else ()))
                bad_indices = True
            elif d in seen:
                violations.append(OrderingViolation(idx, "duplicate", f"index {d} repeated", (d,)))
                bad_indices = True
            else:
                seen.add(d)
        if len(seq) != k and not bad_indices:
            violations.append(OrderingViolation(idx, "duplicate", f"expected {k} entries, got {len(seq)}"))
            bad_indices = True
        if bad_indices:
            continue
        rank = {d: r for r, d in enumerate(seq)}
        for lo in range(1, k + 1):
            r1, c1 = grid.coords(lo)
            for hi in range(lo + 1, k + 1):
                r2, c2 = grid.coords(hi)
                same_row, same_col = r1 == r2, c1 == c2
                if not (same_row or same_col):
                    continue
                if rank[lo] > rank[hi]:
                    axis = "row" if same_row else "column"
                    violations.append(
                        OrderingViolation(
                            idx,
                            "monotonicity",
                            f"d_{lo} must precede d_{hi} (same {axis})",
                            (lo, hi),
                        )
                    )
    return OrderingValidation(ok=not violations, violations=tuple(violations))


def toxicity_sets(orderings: OrderingSet, n_doses: int | None = None) -> ToxicitySets:
    """nu_i = doses before d_i under every ordering; xi_i = doses after under every ordering."""
    k = orderings.n_doses
    if n_doses is not None and n_doses != k:
        raise ValueError(f"orderings cover {k} doses, expected {n_doses}")
    positions = [o.positions for o in orderings.orderings]
    nu = []
    xi = []
    for i in range(1, k + 1):
        nu.append(frozenset(
            j for j in range(1, k + 1)
            if j != i and all(p[j - 1] < p[i - 1] for p in positions)
        ))
        xi.append(frozenset(
            j for j in range(1, k + 1)
            if j != i and all(p[j - 1] > p[i - 1] for p in positions)
        ))
    return ToxicitySets(tuple(nu), tuple(xi))


# ----------------------------------------------------------------------------
# File format
# ----------------------------------------------------------------------------

def load_orderings_file(path: str | Path) -> tuple[DoseGrid, OrderingSet]:
    """Read an orderings JSON document: {rows, cols, orderings, prior_weights?}.

    Sequences use 1-based dose indices; omitted prior_weights mean uniform.
    The document is validated against the grid before anything is built.
    """
    doc = json.loads(Path(path).read_text())
    try:
        grid = DoseGrid(int(doc["rows"]), int(doc["cols"]))
        raw = doc["orderings"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed orderings file {path}: {exc}") from exc
    result = validate_orderings(grid, raw)
    if not result.ok:
        first = result.violations[0]
        raise ValueError(f"invalid ordering {first.ordering_index} in {path}: {first.detail}")
    weights = doc.get("prior_weights")
    if weights is None:
        oset = OrderingSet.uniform(raw)
    else:
        oset = OrderingSet(tuple(SimpleOrdering(tuple(s)) for s in raw), tuple(weights))
    return grid, oset


def dump_orderings_file(path: str | Path, grid: DoseGrid, orderings: OrderingSet) -> None:
    doc = {
        "rows": grid.rows,
        "cols": grid.cols,
        "orderings": [list(s) for s in orderings.sequences],
        "prior_weights": list(orderings.prior_weights),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
