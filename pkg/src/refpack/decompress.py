"""Streaming decoder for grouped token streams.

Slots are decoded in index order 0..15. Verbatim slots unpack their payload
words; match slots copy (or reverse-complement) k reference bases and update
the decode state; continuation slots advance the previous offset by +k
(forward) or -k (reverse) with no payload. Structural violations raise
CorruptStream carrying the group ordinal and slot index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .compress import (
    GROUP_SLOTS,
    WORD_BYTES,
    CompressParams,
    CompressedStream,
    TokenKind,
)
from .errors import ChecksumMismatch, CorruptStream
from .index import Orientation
from .sequence import PackedSequence, sequence_checksum

_SLOT_SHIFTS = np.arange(0, 2 * GROUP_SLOTS, 2, dtype=np.uint32)
_PAIR_SHIFTS = np.arange(0, 32, 2, dtype=np.uint32)


@dataclass
class DecodeState:
    last_orientation: Orientation | None = None
    last_offset: int | None = None
    bases_emitted: int = 0


def split_header(header: int) -> np.ndarray:
    """The sixteen 2-bit kind codes of a group header, slot 0 first."""
    return ((np.uint32(header) >> _SLOT_SHIFTS) & 3).astype(np.uint8)


def _unpack_words(words: np.ndarray) -> np.ndarray:
    """(n,) u32 words -> (n, 16) 2-bit codes, low bits first."""
    return ((words[:, None] >> _PAIR_SHIFTS) & 3).astype(np.uint8)


def iter_group_frames(
    data: bytes,
    n_groups: int,
    params: CompressParams,
    *,
    exact: bool = True,
    first_group: int = 0,
) -> Iterator[tuple[int, int, np.ndarray]]:
    """Yield (group_ordinal, header, payload_words) frames from raw bytes.

    With ``exact`` the byte stream must end precisely at the last group.
    """
    wv = params.words_per_verbatim
    pos = 0
    size = len(data)
    for g in range(first_group, first_group + n_groups):
        if pos + WORD_BYTES > size:
            raise CorruptStream("truncated stream: missing group header", group=g)
        header = int.from_bytes(data[pos : pos + WORD_BYTES], "little")
        pos += WORD_BYTES
        kinds = split_header(header)
        n_words = int(
            ((kinds == TokenKind.VERBATIM) * wv).sum()
            + ((kinds == TokenKind.FORWARD_MATCH) | (kinds == TokenKind.REVERSE_MATCH)).sum()
        )
        end = pos + n_words * WORD_BYTES
        if end > size:
            raise CorruptStream("truncated stream: payload exhausted", group=g)
        words = np.frombuffer(data, dtype="<u4", count=n_words, offset=pos)
        pos = end
        yield g, header, words
    if exact and pos != size:
        raise CorruptStream(
            f"{size - pos} trailing bytes after final group", group=first_group + n_groups
        )


def decode_group(
    header: int,
    payload: np.ndarray,
    reference: PackedSequence,
    state: DecodeState,
    params: CompressParams,
    *,
    group_index: int = 0,
) -> tuple[np.ndarray, DecodeState]:
    """Decode one group; returns the emitted base codes and the updated state."""
    k, s = params.k, params.s
    wv = params.words_per_verbatim
    kinds = split_header(header)
    ref_codes = reference.codes()
    ref_len = reference.length

    is_verbatim = kinds == TokenKind.VERBATIM
    is_match = (kinds == TokenKind.FORWARD_MATCH) | (kinds == TokenKind.REVERSE_MATCH)
    expected_words = int(is_verbatim.sum()) * wv + int(is_match.sum())
    if payload.size != expected_words:
        raise CorruptStream(
            f"payload holds {payload.size} words, header requires {expected_words}",
            group=group_index,
        )

    # All verbatim codes of the group in one shot; sliced per slot below.
    verbatim_codes = _unpack_words(payload) if wv else None

    chunks: list[np.ndarray] = []
    wi = 0
    for slot in range(GROUP_SLOTS):
        kind = int(kinds[slot])
        if kind == TokenKind.VERBATIM:
            rows = verbatim_codes[wi : wi + wv].reshape(-1)[:s]
            wi += wv
            chunks.append(rows)
            continue
        if kind == TokenKind.CONTINUATION:
            if state.last_orientation is None:
                raise CorruptStream(
                    "continuation with no preceding match",
                    group=group_index,
                    slot=slot,
                )
            if state.last_orientation == Orientation.FORWARD:
                offset = state.last_offset + k
            else:
                offset = state.last_offset - k
            orientation = state.last_orientation
        else:
            offset = int(payload[wi])
            wi += 1
            orientation = (
                Orientation.FORWARD
                if kind == TokenKind.FORWARD_MATCH
                else Orientation.REVERSE
            )
        if offset < 0 or offset + k > ref_len:
            raise CorruptStream(
                f"reference offset {offset} out of range for k={k}, "
                f"reference length {ref_len}",
                group=group_index,
                slot=slot,
            )
        window = ref_codes[offset : offset + k]
        if orientation == Orientation.REVERSE:
            window = (window[::-1]) ^ 3
        chunks.append(window)
        state.last_orientation = orientation
        state.last_offset = offset

    out = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.uint8)
    return out.astype(np.uint8, copy=False), state


def decompress(stream: CompressedStream, reference: PackedSequence) -> PackedSequence:
    """Decode a full stream and truncate padding to the footer base count."""
    if stream.ref_checksum != sequence_checksum(reference):
        raise ChecksumMismatch("stream was compressed against a different reference")
    params = stream.params
    state = DecodeState()
    parts: list[np.ndarray] = []
    raw = 0
    for g, header, words in iter_group_frames(stream.data, stream.n_groups, params):
        codes, state = decode_group(
            header, words, reference, state, params, group_index=g
        )
        raw += codes.size
        state.bases_emitted = min(raw, stream.n_bases)
        parts.append(codes)
    if raw < stream.n_bases:
        raise CorruptStream(
            f"stream yields {raw} bases but footer declares {stream.n_bases}"
        )
    if raw - stream.n_bases >= GROUP_SLOTS * params.s:
        raise CorruptStream(
            f"stream yields {raw} bases, more than padding allows for "
            f"footer count {stream.n_bases}"
        )
    if not parts:
        return PackedSequence(b"", 0)
    codes = np.concatenate(parts)[: stream.n_bases]
    return PackedSequence.from_codes(codes)
