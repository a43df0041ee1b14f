"""Shifted-Hamming pre-alignment filter for edit distances up to e.

2e+1 Hamming masks compare the read against the reference segment shifted by
-e..+e positions; out-of-range positions count as matches. The masks are
AND'd and the surviving ones are counted with saturation at threshold+1; a
count at or below the accept threshold passes the pair on to full alignment.

Without amendment the filter never rejects a pair whose true edit distance is
at most e: an optimal alignment tiles the read with exact segments at shifts
within [-e, e], each zeroing its mask over the segment, so only edited read
positions can survive the AND. Amendment (rewriting short zero runs that are
flanked by ones, per mask) sharpens the count toward the true distance but
surrenders that guarantee, which is why it is configurable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .sequence import PackedSequence, pack_bases

SequenceLike = Union[PackedSequence, str, bytes]


def _as_codes(x: SequenceLike) -> np.ndarray:
    if isinstance(x, PackedSequence):
        return x.codes()
    if isinstance(x, bytes):
        x = x.decode("ascii")
    if isinstance(x, str):
        return pack_bases(x).codes()
    raise TypeError(f"expected a sequence, str, or bytes, got {type(x).__name__}")


@dataclass(frozen=True)
class ShdConfig:
    e: int = 5
    amend_run: int = 2  # zero runs up to this length are rewritten; 0 disables
    accept_threshold: int | None = None  # defaults to e

    def __post_init__(self):
        if self.e < 0:
            raise ValueError("e must be non-negative")
        if self.amend_run < 0:
            raise ValueError("amend_run must be non-negative")
        if self.accept_threshold is not None and self.accept_threshold < 0:
            raise ValueError("accept_threshold must be non-negative")

    @property
    def threshold(self) -> int:
        return self.e if self.accept_threshold is None else self.accept_threshold

    @property
    def n_masks(self) -> int:
        return 2 * self.e + 1


@dataclass(frozen=True)
class ShdVerdict:
    ones_count: int  # saturated at threshold + 1
    accepted: bool


def _amend_row(mask: np.ndarray, run: int) -> None:
    """Set zero runs of length <= run to ones when flanked by ones on both
    sides. Runs touching either mask edge are left alone."""
    ones = np.flatnonzero(mask)
    if ones.size < 2:
        return
    gaps = np.diff(ones)
    for idx in np.flatnonzero((gaps > 1) & (gaps <= run + 1)):
        mask[ones[idx] + 1 : ones[idx + 1]] = True


def shd(read: SequenceLike, refseg: SequenceLike, config: ShdConfig | None = None) -> ShdVerdict:
    """Filter verdict for an equal-length (read, reference segment) pair."""
    if config is None:
        config = ShdConfig()
    r = _as_codes(read)
    f = _as_codes(refseg)
    n = r.size
    if f.size != n:
        raise ValueError(
            f"length mismatch: read {n} vs reference segment {f.size} "
            "(caller pads or clips)"
        )
    threshold = config.threshold
    if n == 0:
        return ShdVerdict(0, True)

    e = config.e
    agg = np.ones(n, dtype=bool)
    for d in range(-e, e + 1):
        mask = np.zeros(n, dtype=bool)
        if d >= 0:
            if n - d > 0:
                mask[: n - d] = r[: n - d] != f[d:]
        elif n + d > 0:
            mask[-d:] = r[-d:] != f[: n + d]
        if config.amend_run:
            _amend_row(mask, config.amend_run)
        agg &= mask
    ones = int(agg.sum())
    saturated = min(ones, threshold + 1)
    return ShdVerdict(saturated, ones <= threshold)


@dataclass
class FilterSummary:
    pairs: int
    accepted: int
    total_bases: int
    seconds: float

    @property
    def accept_rate(self) -> float:
        return self.accepted / self.pairs if self.pairs else 0.0

    @property
    def bases_per_second(self) -> float:
        return self.total_bases / self.seconds if self.seconds > 0 else 0.0


def filter_stream(
    reads: Iterable[SequenceLike],
    refsegs: Iterable[SequenceLike],
    config: ShdConfig | None = None,
) -> tuple[list[ShdVerdict], FilterSummary]:
    """Run shd over paired streams; order of verdicts follows the input."""
    reads = list(reads)
    refsegs = list(refsegs)
    if len(reads) != len(refsegs):
        raise ValueError(
            f"stream length mismatch: {len(reads)} reads vs {len(refsegs)} segments"
        )
    start = time.perf_counter()
    verdicts = []
    total_bases = 0
    for r, f in zip(reads, refsegs):
        verdicts.append(shd(r, f, config))
        total_bases += r.length if isinstance(r, PackedSequence) else len(r)
    elapsed = time.perf_counter() - start
    summary = FilterSummary(
        pairs=len(reads),
        accepted=sum(v.accepted for v in verdicts),
        total_bases=total_bases,
        seconds=elapsed,
    )
    return verdicts, summary


def edit_distance(a: SequenceLike, b: SequenceLike) -> int:
    """Levenshtein distance by dynamic programming (unit costs)."""
    sa = a.to_ascii() if isinstance(a, PackedSequence) else (
        a.decode("ascii") if isinstance(a, bytes) else a
    )
    sb = b.to_ascii() if isinstance(b, PackedSequence) else (
        b.decode("ascii") if isinstance(b, bytes) else b
    )
    n, m = len(sa), len(sb)
    if n == 0 or m == 0:
        return n or m
    if n < 32 and m < 32:
        prev = list(range(m + 1))
        for i, ca in enumerate(sa, start=1):
            cur = [i] + [0] * m
            for j, cb in enumerate(sb, start=1):
                cur[j] = min(
                    prev[j] + 1,
                    cur[j - 1] + 1,
                    prev[j - 1] + (ca != cb),
                )
            prev = cur
        return prev[m]
    # Row-vectorized form of the same recurrence. The horizontal dependency
    #   row[j] = min(cand[j], row[j-1] + 1)
    # unrolls to row[j] = j + min over l <= j of (cand[l] - l), with the row
    # border contributing the constant i, so one prefix-minimum scan per row
    # replaces the inner loop.
    av = np.frombuffer(sa.encode(), dtype=np.uint8)
    bv = np.frombuffer(sb.encode(), dtype=np.uint8)
    jarr = np.arange(1, m + 1, dtype=np.int64)
    prev_row = np.arange(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        cand = np.minimum(prev_row[:-1] + (bv != av[i - 1]), prev_row[1:] + 1)
        runmin = np.minimum.accumulate(cand - jarr)
        new_row = np.empty(m + 1, dtype=np.int64)
        new_row[0] = i
        new_row[1:] = jarr + np.minimum(runmin, i)
        prev_row = new_row
    return int(prev_row[m])
