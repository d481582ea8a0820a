"""Canonical, versioned stream files.

Line 1 is a JSON header with lexicographically sorted keys; every following
line is one batch, ``t|node:task,node:task,...``. The header records a
64-bit FNV-1a digest over the body bytes, so corruption is detectable
without cryptographic dependencies and two machines generating the same
stream produce byte-identical files (the body is integer-only; reals appear
only in the header as shortest round-trip decimals).
"""

from __future__ import annotations

import json
from pathlib import Path

from .sampler import FORMAT_VERSION, Stream, StreamBatch, StreamProvenance

DIGEST_ALGO = "fnv1a64"
KNOWN_VERSIONS = (1,)


class StreamFileError(Exception):
    """Base class for stream-file problems."""


class StreamVersionError(StreamFileError):
    """Unknown format version."""


class StreamDigestError(StreamFileError):
    """Body bytes do not match the recorded digest."""


class StreamTruncationError(StreamFileError):
    """File ends before the declared batch count."""


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def _batch_line(batch: StreamBatch) -> str:
    return f"{batch.index}|" + ",".join(f"{node}:{task}" for node, task in batch.items)


def _body_lines(stream: Stream) -> list[str]:
    return [_batch_line(b) for b in stream.batches]


def _body_digest(lines: list[str]) -> str:
    body = "".join(line + "\n" for line in lines)
    return f"{fnv1a64(body.encode('utf-8')):016x}"


def _header(stream: Stream, digest: str) -> dict:
    p = stream.provenance
    head = {
        "format_version": p.format_version,
        "dataset": p.dataset,
        "mode": p.mode,
        "batch_size": p.batch_size,
        "sampling": p.sampling,
        "seed": p.seed,
        "task_count": p.task_count,
        "stream_length": stream.length,
        "digest": digest,
        "digest_algo": DIGEST_ALGO,
    }
    if p.sigma is not None:
        head["sigma"] = p.sigma
    if p.mix_fraction is not None:
        head["mix_fraction"] = p.mix_fraction
    if p.window_batches is not None:
        head["window_batches"] = p.window_batches
    return head


def write_stream(stream: Stream, path: str | Path) -> None:
    """Serialize to the canonical line format (idempotent bytes)."""
    if stream.provenance.format_version not in KNOWN_VERSIONS:
        raise StreamVersionError(
            f"cannot write format_version {stream.provenance.format_version}")
    lines = _body_lines(stream)
    header = json.dumps(_header(stream, _body_digest(lines)), sort_keys=True,
                        separators=(",", ":"))
    Path(path).write_text(header + "\n" + "".join(line + "\n" for line in lines),
                          encoding="utf-8")


def read_stream(path: str | Path) -> Stream:
    """Parse and fully validate a stream file (version, digest, counts, ranges)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise StreamFileError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise StreamFileError(f"{path}: bad header: {exc}") from None
    if not isinstance(header, dict):
        raise StreamFileError(f"{path}: header must be an object")

    version = header.get("format_version")
    if version not in KNOWN_VERSIONS:
        raise StreamVersionError(f"{path}: unknown format_version {version!r}")
    for key in ("dataset", "mode", "batch_size", "sampling", "seed", "task_count",
                "stream_length", "digest", "digest_algo"):
        if key not in header:
            raise StreamFileError(f"{path}: header missing {key!r}")
    if header["digest_algo"] != DIGEST_ALGO:
        raise StreamFileError(f"{path}: unknown digest_algo {header['digest_algo']!r}")

    body = lines[1:]
    declared = int(header["stream_length"])
    if len(body) < declared:
        raise StreamTruncationError(
            f"{path}: header declares {declared} batches, found {len(body)}")
    if len(body) > declared:
        raise StreamFileError(
            f"{path}: header declares {declared} batches, found {len(body)}")
    if _body_digest(body) != header["digest"]:
        raise StreamDigestError(f"{path}: body digest mismatch")

    task_count = int(header["task_count"])
    batches = []
    for i, line in enumerate(body):
        head, sep, rest = line.partition("|")
        if not sep:
            raise StreamFileError(f"{path}: batch line {i} lacks '|'")
        try:
            t = int(head)
            items = tuple(
                (int(n), int(k))
                for n, k in (pair.split(":") for pair in rest.split(",") if pair)
            )
        except ValueError:
            raise StreamFileError(f"{path}: malformed batch line {i}") from None
        if t != i:
            raise StreamFileError(f"{path}: batch index {t} out of order at line {i}")
        if not items:
            raise StreamFileError(f"{path}: batch {i} is empty")
        for node, task in items:
            if node < 0 or not 0 <= task < task_count:
                raise StreamFileError(f"{path}: batch {i} item ({node},{task}) out of range")
        batches.append(StreamBatch(index=t, items=items))

    return Stream(
        batches=tuple(batches),
        provenance=StreamProvenance(
            dataset=header["dataset"],
            mode=header["mode"],
            batch_size=int(header["batch_size"]),
            sampling=header["sampling"],
            seed=int(header["seed"]),
            task_count=task_count,
            sigma=header.get("sigma"),
            mix_fraction=header.get("mix_fraction"),
            window_batches=header.get("window_batches"),
            format_version=int(version),
        ),
    )
