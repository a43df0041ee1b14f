"""Fixed-k, fixed-stride matching compressor and grouped token encoding.

The target is scanned left to right. At each position the k-mer is looked up
in the reference index (both orientations); a verified match advances by k
bases and emits a match or continuation token, otherwise S bases are emitted
verbatim and the scan advances by S. Sixteen tokens share one 32-bit header
holding a 2-bit kind code per token:

    00 verbatim      payload: S bases packed 2-bit (one u32 word when S=16)
    01 forward match payload: u32 reference offset
    10 reverse match payload: u32 reference offset (forward-oriented k-mer)
    11 continuation  no payload; offset implied by the previous match

Headers and payload words are little-endian u32. A partial final group is
padded with verbatim tokens encoding base 'A'; the footer base count makes
the padding unambiguous. Verbatim widths other than S=16 round the payload
up to whole words and exist only for benchmarking; they are not accepted by
the container format.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from .errors import ChecksumMismatch
from .index import (
    Orientation,
    QueryStats,
    ReferenceIndex,
    _pack_rows,
    window_probe_tables,
)
from .sequence import PackedSequence, sequence_checksum

GROUP_SLOTS = 16
WORD_BYTES = 4


class TokenKind(IntEnum):
    VERBATIM = 0
    FORWARD_MATCH = 1
    REVERSE_MATCH = 2
    CONTINUATION = 3


class Token(NamedTuple):
    kind: TokenKind
    payload: int | None = None


@dataclass(frozen=True)
class CompressParams:
    """k-mer width and verbatim stride. S must divide K."""

    k: int = 64
    s: int = 16

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("s must be positive")
        if self.k < self.s:
            raise ValueError("k must be at least s")
        if self.k % self.s:
            raise ValueError("s must divide k")

    @property
    def words_per_verbatim(self) -> int:
        return (2 * self.s + 31) // 32

    @property
    def container_compatible(self) -> bool:
        return self.s == 16


@dataclass
class MatchState:
    """Continuation tracking across tokens; persists across verbatim runs."""

    orientation: Orientation | None = None
    expected_next_offset: int | None = None

    def clear(self) -> None:
        self.orientation = None
        self.expected_next_offset = None


@dataclass
class CompressResult:
    tokens: list[Token]
    n_bases: int
    boundary_bases: list[int] = field(default_factory=list)

    def kind_counts(self) -> Counter:
        return Counter(t.kind for t in self.tokens)


def token_base_length(token: Token, params: CompressParams) -> int:
    return params.s if token.kind == TokenKind.VERBATIM else params.k


def compress(
    target: PackedSequence,
    index: ReferenceIndex,
    reference: PackedSequence,
    params: CompressParams | None = None,
    *,
    use_prefilter: bool = True,
    break_every_groups: int | None = None,
    stats: QueryStats | None = None,
) -> CompressResult:
    """Tokenize ``target`` against ``reference`` via ``index``.

    ``break_every_groups`` = G suppresses continuation chains across every
    G-group boundary so a chunk index can later enter the stream there with
    fresh decoder state.
    """
    if params is None:
        params = CompressParams(k=index.k)
    if params.k != index.k:
        raise ValueError(f"params.k={params.k} does not match index k={index.k}")
    if sequence_checksum(reference) != index.ref_checksum:
        raise ChecksumMismatch("index was built for a different reference")
    if break_every_groups is not None and break_every_groups < 1:
        raise ValueError("break_every_groups must be positive")

    k, s = params.k, params.s
    n = target.length
    tcodes = target.codes()
    tcb = target.codes_bytes()
    ref_cb = reference.codes_bytes()

    if n >= k:
        positions = np.arange(0, n - k + 1, s, dtype=np.int64)
        h1f, h2f, _l4f, h1r, h2r, _l4r = window_probe_tables(
            tcodes, k, positions, index.seeds, include_rc=True
        )
    else:
        h1f = h2f = h1r = h2r = np.empty(0, dtype=np.uint64)

    # Verbatim payload words for every stride-aligned window, precomputed.
    n_windows = (n + s - 1) // s
    padded = np.zeros(n_windows * s, dtype=np.uint8)
    padded[:n] = tcodes
    vb_rows = _pack_rows(padded.reshape(n_windows, s)) if n_windows else None

    comp = bytes.maketrans(bytes([0, 1, 2, 3]), bytes([3, 2, 1, 0]))

    tokens: list[Token] = []
    boundary_bases: list[int] = []
    state = MatchState()
    break_tokens = GROUP_SLOTS * break_every_groups if break_every_groups else 0
    max_probe = n - k

    p = 0
    while p < n:
        if break_tokens and len(tokens) % break_tokens == 0:
            state.clear()
            boundary_bases.append(p)
        cand = None
        if p <= max_probe:
            i = p // s
            fwd = tcb[p : p + k]
            rc = fwd.translate(comp)[::-1]
            cand = index.probe(
                ref_cb,
                fwd,
                rc,
                (int(h1f[i]), int(h2f[i]), int(h1r[i]), int(h2r[i])),
                use_prefilter=use_prefilter,
                stats=stats,
            )
        if cand is not None:
            o = cand.offset
            if (
                state.orientation == cand.orientation
                and state.expected_next_offset == o
            ):
                tokens.append(Token(TokenKind.CONTINUATION))
            elif cand.orientation == Orientation.FORWARD:
                tokens.append(Token(TokenKind.FORWARD_MATCH, o))
            else:
                tokens.append(Token(TokenKind.REVERSE_MATCH, o))
            if cand.orientation == Orientation.FORWARD:
                state.orientation = Orientation.FORWARD
                state.expected_next_offset = o + k
            elif o >= k:
                state.orientation = Orientation.REVERSE
                state.expected_next_offset = o - k
            else:
                # A reverse chain cannot run past offset 0; start fresh next time.
                state.clear()
            p += k
        else:
            payload = int.from_bytes(vb_rows[p // s].tobytes(), "little")
            tokens.append(Token(TokenKind.VERBATIM, payload))
            p += s

    return CompressResult(tokens=tokens, n_bases=n, boundary_bases=boundary_bases)


def encode_groups(tokens: list[Token], params: CompressParams) -> bytes:
    """Serialize tokens into 16-slot groups of header + payload words."""
    wv = params.words_per_verbatim
    vb_bytes = WORD_BYTES * wv
    out = bytearray()
    pad = (-len(tokens)) % GROUP_SLOTS
    padded = tokens if not pad else tokens + [Token(TokenKind.VERBATIM, 0)] * pad
    for g in range(0, len(padded), GROUP_SLOTS):
        group = padded[g : g + GROUP_SLOTS]
        header = 0
        payload = bytearray()
        for i, tok in enumerate(group):
            header |= int(tok.kind) << (2 * i)
            if tok.kind == TokenKind.VERBATIM:
                payload += int(tok.payload).to_bytes(vb_bytes, "little")
            elif tok.kind in (TokenKind.FORWARD_MATCH, TokenKind.REVERSE_MATCH):
                if not 0 <= tok.payload < 1 << 32:
                    raise ValueError(f"match offset {tok.payload} does not fit in u32")
                payload += int(tok.payload).to_bytes(WORD_BYTES, "little")
        out += header.to_bytes(WORD_BYTES, "little")
        out += payload
    return bytes(out)


def group_count(n_tokens: int) -> int:
    return (n_tokens + GROUP_SLOTS - 1) // GROUP_SLOTS


@dataclass(frozen=True)
class CompressedStream:
    """Encoded groups plus the footer metadata needed to decode them."""

    data: bytes
    n_groups: int
    n_bases: int
    k: int
    s: int
    ref_checksum: bytes

    @property
    def params(self) -> CompressParams:
        return CompressParams(k=self.k, s=self.s)


def make_stream(
    result: CompressResult, params: CompressParams, ref_checksum: bytes
) -> CompressedStream:
    return CompressedStream(
        data=encode_groups(result.tokens, params),
        n_groups=group_count(len(result.tokens)),
        n_bases=result.n_bases,
        k=params.k,
        s=params.s,
        ref_checksum=ref_checksum,
    )


def compression_ratio(original_bases: int, compressed_bytes: int) -> float:
    """Bases per compressed byte, against the 1-byte-per-base text baseline."""
    if original_bases < 0:
        raise ValueError("original_bases must be non-negative")
    if compressed_bytes <= 0:
        raise ValueError("compressed size must be positive to form a ratio")
    return original_bases / compressed_bytes
