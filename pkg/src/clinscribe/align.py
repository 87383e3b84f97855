"""Word-level sequence alignment.

Two algorithms live here: minimum-edit-distance global alignment under unit
costs (the basis of every word error rate), and Smith-Waterman local
alignment, used both to match terms between transcripts and to detect
runaway repetition at the tail of generated text.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Hashable, Sequence

import numpy as np


class EditOpKind(Enum):
    MATCH = "match"
    SUBSTITUTE = "substitute"
    DELETE = "delete"
    INSERT = "insert"


@dataclass(frozen=True)
class EditOp:
    """One alignment step.

    Match and Substitute carry both indices, Delete only the reference
    index, Insert only the hypothesis index.
    """

    kind: EditOpKind
    hyp_index: int | None = None
    ref_index: int | None = None

    def __post_init__(self):
        if self.kind in (EditOpKind.MATCH, EditOpKind.SUBSTITUTE):
            ok = self.hyp_index is not None and self.ref_index is not None
        elif self.kind is EditOpKind.DELETE:
            ok = self.hyp_index is None and self.ref_index is not None
        else:
            ok = self.hyp_index is not None and self.ref_index is None
        if not ok:
            raise ValueError(f"indices inconsistent with {self.kind}: {self}")


@dataclass(frozen=True)
class EditAlignment:
    ops: tuple[EditOp, ...]
    substitutions: int
    deletions: int
    insertions: int
    matches: int
    ref_length: int

    @property
    def hyp_length(self) -> int:
        return self.matches + self.substitutions + self.insertions

    @property
    def distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    def __post_init__(self):
        if self.matches + self.substitutions + self.deletions != self.ref_length:
            raise ValueError("op counts do not cover the reference")


# above this cell count, all-string inputs take the vectorized row builder
_VECTOR_THRESHOLD = 20_000


def _cost_rows(hyp: Sequence[Hashable], ref: Sequence[Hashable]):
    """The (m+1) x (n+1) unit-cost distance table; values are unique, so
    the construction strategy cannot affect the backtrace."""
    m, n = len(hyp), len(ref)
    if (
        m * n >= _VECTOR_THRESHOLD
        and all(isinstance(t, str) for t in hyp)
        and all(isinstance(t, str) for t in ref)
    ):
        ref_arr = np.empty(n, dtype=object)
        ref_arr[:] = list(ref)
        idx = np.arange(n + 1, dtype=np.int64)
        table = np.empty((m + 1, n + 1), dtype=np.int64)
        table[0] = idx
        prev = table[0]
        candidate = np.empty(n + 1, dtype=np.int64)
        for i in range(1, m + 1):
            cost = (ref_arr != hyp[i - 1]).astype(np.int64)
            candidate[0] = i
            np.minimum(prev[:-1] + cost, prev[1:] + 1, out=candidate[1:])
            # the in-row dependency d[j] = min(c[j], d[j-1] + 1) unrolls to
            # a running minimum of c[k] - k shifted back by +j
            table[i] = np.minimum.accumulate(candidate - idx) + idx
            prev = table[i]
        return table

    rows: list[list[int]] = [list(range(n + 1))]
    prev_row = rows[0]
    for i in range(1, m + 1):
        cur = [i] + [0] * n
        hyp_tok = hyp[i - 1]
        for j in range(1, n + 1):
            cost = 0 if hyp_tok == ref[j - 1] else 1
            best = prev_row[j - 1] + cost
            left = cur[j - 1] + 1
            if left < best:
                best = left
            up = prev_row[j] + 1
            if up < best:
                best = up
            cur[j] = best
        rows.append(cur)
        prev_row = cur
    return rows


def global_align(
    hyp: Sequence[Hashable], ref: Sequence[Hashable]
) -> EditAlignment:
    """Minimum-edit-distance alignment with unit costs.

    Either sequence may be empty. When several moves tie, the backtrace
    prefers match/substitute over delete over insert, which makes the op
    sequence (not just the counts) deterministic.
    """
    m, n = len(hyp), len(ref)
    rows = _cost_rows(hyp, ref)

    ops: list[EditOp] = []
    matches = subs = dels = ins = 0
    i, j = m, n
    while i > 0 or j > 0:
        here = rows[i][j]
        if i > 0 and j > 0:
            cost = 0 if hyp[i - 1] == ref[j - 1] else 1
            if rows[i - 1][j - 1] + cost == here:
                if cost == 0:
                    ops.append(EditOp(EditOpKind.MATCH, i - 1, j - 1))
                    matches += 1
                else:
                    ops.append(EditOp(EditOpKind.SUBSTITUTE, i - 1, j - 1))
                    subs += 1
                i -= 1
                j -= 1
                continue
        if j > 0 and rows[i][j - 1] + 1 == here:
            ops.append(EditOp(EditOpKind.DELETE, ref_index=j - 1))
            dels += 1
            j -= 1
            continue
        ops.append(EditOp(EditOpKind.INSERT, hyp_index=i - 1))
        ins += 1
        i -= 1
    ops.reverse()
    return EditAlignment(tuple(ops), subs, dels, ins, matches, n)


@dataclass(frozen=True)
class LocalAlignment:
    """Best-scoring local alignment; spans are half-open index ranges."""

    hyp_span: tuple[int, int]
    ref_span: tuple[int, int]
    score: int
    pairs: tuple[tuple[int, int], ...]

    @property
    def is_empty(self) -> bool:
        return self.score == 0 and self.hyp_span[0] == self.hyp_span[1]


EMPTY_LOCAL_ALIGNMENT = LocalAlignment((0, 0), (0, 0), 0, ())


def smith_waterman(
    hyp: Sequence[Hashable],
    ref: Sequence[Hashable],
    match: int = 2,
    mismatch: int = -1,
    gap: int = -1,
) -> LocalAlignment:
    """Standard Smith-Waterman at word granularity.

    On score ties the alignment ending at the smallest (hyp_end, ref_end)
    pair wins. ``pairs`` lists the (hyp_index, ref_index) positions where
    tokens actually matched.
    """
    if match <= 0:
        raise ValueError("match score must be positive")
    if mismatch > 0 or gap > 0:
        raise ValueError("mismatch and gap scores must be non-positive")

    m, n = len(hyp), len(ref)
    if m == 0 or n == 0:
        return EMPTY_LOCAL_ALIGNMENT

    scores = [[0] * (n + 1) for _ in range(m + 1)]
    best = 0
    best_cell = (0, 0)
    for i in range(1, m + 1):
        row = scores[i]
        above = scores[i - 1]
        hyp_tok = hyp[i - 1]
        for j in range(1, n + 1):
            diag = above[j - 1] + (match if hyp_tok == ref[j - 1] else mismatch)
            up = above[j] + gap
            left = row[j - 1] + gap
            cell = diag
            if up > cell:
                cell = up
            if left > cell:
                cell = left
            if cell < 0:
                cell = 0
            row[j] = cell
            if cell > best:
                best = cell
                best_cell = (i, j)

    if best == 0:
        return EMPTY_LOCAL_ALIGNMENT

    pairs: list[tuple[int, int]] = []
    i, j = best_cell
    while scores[i][j] > 0:
        here = scores[i][j]
        if i > 0 and j > 0:
            step = match if hyp[i - 1] == ref[j - 1] else mismatch
            if scores[i - 1][j - 1] + step == here:
                if step == match:
                    pairs.append((i - 1, j - 1))
                i -= 1
                j -= 1
                continue
        if i > 0 and scores[i - 1][j] + gap == here:
            i -= 1
            continue
        j -= 1
    pairs.reverse()
    return LocalAlignment(
        hyp_span=(i, best_cell[0]),
        ref_span=(j, best_cell[1]),
        score=best,
        pairs=tuple(pairs),
    )


def truncate_degeneration(
    llm_output: str, stage_input: str, threshold: int = 20
) -> tuple[str, bool]:
    """Chop runaway tails off generated text.

    Both texts are whitespace-tokenized (this runs before any metric
    normalization), the output is locally aligned against the input, and
    the words strictly after the aligned span are counted. A tail longer
    than ``threshold`` words is cut at the span end; shorter tails pass
    through untouched. Applying the cut twice equals applying it once.
    """
    if threshold < 1:
        raise ValueError("threshold must be at least 1")
    out_words = llm_output.split()
    in_words = stage_input.split()
    alignment = smith_waterman(out_words, in_words)
    tail = len(out_words) - alignment.hyp_span[1]
    if tail > threshold:
        return " ".join(out_words[: alignment.hyp_span[1]]), True
    return llm_output, False
