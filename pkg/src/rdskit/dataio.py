"""JSONL record schema, validation, sidecar embeddings, and the embedding cache.

Input schema (one JSON object per line, field names exact):

    {"v": 1, "id": str, "prompt": str,
     "greedy":  {"text": str, "token_logprobs": [num]?, "embedding": [num]?},
     "samples": [{...same...}, ...],
     "references": [str], "dataset_tag": str,
     "correctness_mode": "exact_match" | "rouge_gate"}

Embeddings can live inline as number arrays or in a sidecar binary file
(``<records>.embs``): header magic ``RDSB`` + uint32 dim + uint32 count,
then count*dim little-endian float32 values row-major, one row per
generation in file order (greedy first, then samples, per record line).
Inline wins when both are present.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import DuplicateId, InvalidVector, SchemaError, SchemaVersionError

SCHEMA_VERSION = 1
SIDECAR_MAGIC = b"RDSB"
SIDECAR_SUFFIX = ".embs"
CORRECTNESS_MODES = ("exact_match", "rouge_gate")
CACHE_DIR_ENV = "RDSKIT_CACHE_DIR"


@dataclass
class GenerationSample:
    """One sampled completion: text, optional token log-probs, optional embedding."""

    text: str
    token_logprobs: list[float] | None = None
    embedding: list[float] | None = None

    def to_json_obj(self) -> dict:
        obj: dict = {"text": self.text}
        if self.token_logprobs is not None:
            obj["token_logprobs"] = self.token_logprobs
        if self.embedding is not None:
            obj["embedding"] = self.embedding
        return obj


@dataclass
class PromptRecord:
    """One prompt with its greedy output, N sampled outputs, and references."""

    id: str
    prompt: str
    greedy: GenerationSample
    samples: list[GenerationSample]
    references: list[str] = field(default_factory=list)
    dataset_tag: str = ""
    correctness_mode: str = "exact_match"

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    def to_json_obj(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "id": self.id,
            "prompt": self.prompt,
            "greedy": self.greedy.to_json_obj(),
            "samples": [s.to_json_obj() for s in self.samples],
            "references": self.references,
            "dataset_tag": self.dataset_tag,
            "correctness_mode": self.correctness_mode,
        }


@dataclass(frozen=True)
class Diagnostic:
    """A per-line problem report from lenient parsing."""

    line: int
    record_id: str | None
    message: str

    def __str__(self) -> str:
        tag = f" id={self.record_id}" if self.record_id else ""
        return f"line {self.line}{tag}: {self.message}"


def _parse_sample(obj, where: str) -> GenerationSample:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where} must be an object")
    text = obj.get("text")
    if not isinstance(text, str):
        raise SchemaError(f"{where}.text must be a string")
    lps = obj.get("token_logprobs")
    if lps is not None:
        if not isinstance(lps, list) or not all(isinstance(x, (int, float)) for x in lps):
            raise SchemaError(f"{where}.token_logprobs must be an array of numbers")
        lps = [float(x) for x in lps]
    emb = obj.get("embedding")
    if emb is not None:
        if not isinstance(emb, list) or not all(isinstance(x, (int, float)) for x in emb):
            raise SchemaError(f"{where}.embedding must be an array of numbers")
        emb = [float(x) for x in emb]
        if not all(np.isfinite(emb)):
            raise SchemaError(f"{where}.embedding has non-finite components")
    return GenerationSample(text=text, token_logprobs=lps, embedding=emb)


def record_from_json_obj(obj: dict) -> PromptRecord:
    """Validate one parsed JSONL object into a PromptRecord."""
    if not isinstance(obj, dict):
        raise SchemaError("record must be a JSON object")
    version = obj.get("v")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"unsupported schema version {version!r}, expected {SCHEMA_VERSION}")
    rec_id = obj.get("id")
    if not isinstance(rec_id, str) or not rec_id:
        raise SchemaError("id must be a non-empty string")
    prompt = obj.get("prompt")
    if not isinstance(prompt, str):
        raise SchemaError("prompt must be a string")
    if "greedy" not in obj:
        raise SchemaError("missing greedy generation")
    greedy = _parse_sample(obj["greedy"], "greedy")
    samples_obj = obj.get("samples")
    if not isinstance(samples_obj, list):
        raise SchemaError("samples must be an array")
    samples = [_parse_sample(s, f"samples[{i}]") for i, s in enumerate(samples_obj)]
    if len(samples) < 2:
        raise SchemaError(f"record has {len(samples)} samples; dispersion scoring needs >= 2")
    references = obj.get("references", [])
    if not isinstance(references, list) or not all(isinstance(r, str) for r in references):
        raise SchemaError("references must be an array of strings")
    dataset_tag = obj.get("dataset_tag", "")
    if not isinstance(dataset_tag, str):
        raise SchemaError("dataset_tag must be a string")
    mode = obj.get("correctness_mode", "exact_match")
    if mode not in CORRECTNESS_MODES:
        raise SchemaError(f"correctness_mode must be one of {CORRECTNESS_MODES}")
    dims = {len(g.embedding) for g in [greedy, *samples] if g.embedding is not None}
    if len(dims) > 1:
        raise SchemaError(f"embeddings within one record disagree in dimension: {sorted(dims)}")
    return PromptRecord(
        id=rec_id,
        prompt=prompt,
        greedy=greedy,
        samples=samples,
        references=references,
        dataset_tag=dataset_tag,
        correctness_mode=mode,
    )


def read_records(
    path: str | Path,
    *,
    strict: bool = False,
    diagnostics: list[Diagnostic] | None = None,
    sidecar: str | Path | None = None,
) -> Iterator[PromptRecord]:
    """Stream validated PromptRecords from a JSONL file.

    Malformed lines produce a Diagnostic (appended to `diagnostics` if given)
    and are skipped in lenient mode; in strict mode the first problem raises.
    A schema-version mismatch always raises: silently skipping every line of
    a future-version file would hide the real problem.

    When a sidecar embedding file exists (``<path>.embs`` or an explicit
    `sidecar`), generations without inline embeddings take their vector from
    the sidecar in file order; inline embeddings win but still consume their
    row.
    """
    path = Path(path)
    side = _open_sidecar(path, sidecar)
    side_row = 0
    seen_ids: set[str] = set()

    def report(line_no: int, rec_id: str | None, message: str, exc_type=SchemaError):
        if strict:
            raise exc_type(f"line {line_no}: {message}")
        if diagnostics is not None:
            diagnostics.append(Diagnostic(line_no, rec_id, message))

    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                if side is not None:
                    raise SchemaError(
                        f"line {line_no}: invalid JSON breaks sidecar row alignment: {e}"
                    )
                report(line_no, None, f"invalid JSON: {e}")
                continue
            rec_id = obj.get("id") if isinstance(obj, dict) else None
            try:
                rec = record_from_json_obj(obj)
            except SchemaVersionError:
                raise
            except SchemaError as e:
                # structurally parseable lines still consume sidecar rows
                if side is not None:
                    side_row += _row_count(obj)
                report(line_no, rec_id, str(e))
                continue
            if rec.id in seen_ids:
                if side is not None:
                    side_row += 1 + rec.n_samples
                report(line_no, rec.id, f"duplicate id {rec.id!r}", DuplicateId)
                continue
            seen_ids.add(rec.id)
            if side is not None:
                side_row = _fill_from_sidecar(rec, side, side_row, line_no)
            yield rec


def _row_count(obj) -> int:
    if not isinstance(obj, dict):
        return 0
    samples = obj.get("samples")
    n = len(samples) if isinstance(samples, list) else 0
    return 1 + n


def _fill_from_sidecar(rec: PromptRecord, side: np.ndarray, row: int, line_no: int) -> int:
    gens = [rec.greedy, *rec.samples]
    if row + len(gens) > side.shape[0]:
        raise SchemaError(
            f"line {line_no}: sidecar exhausted (needs rows up to {row + len(gens)}, "
            f"has {side.shape[0]})"
        )
    for g in gens:
        if g.embedding is None:
            g.embedding = [float(x) for x in side[row]]
        row += 1
    return row


def write_records(path: str | Path, records: list[PromptRecord]) -> None:
    """Write records as JSONL (one compact object per line)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_obj(), ensure_ascii=False) + "\n")


def read_score_rows(path: str | Path) -> list[dict]:
    """Read a score JSONL file produced by the scoring pipeline."""
    rows = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise SchemaError(f"score file line {line_no}: invalid JSON: {e}")
    return rows


def write_sidecar(path: str | Path, vectors: np.ndarray) -> None:
    """Write embeddings as the binary sidecar format (f32 LE row-major)."""
    arr = np.ascontiguousarray(np.asarray(vectors, dtype="<f4"))
    if arr.ndim != 2:
        raise ValueError("sidecar vectors must be 2-D")
    with Path(path).open("wb") as fh:
        fh.write(SIDECAR_MAGIC)
        fh.write(struct.pack("<II", arr.shape[1], arr.shape[0]))
        fh.write(arr.tobytes(order="C"))


def read_sidecar(path: str | Path) -> np.ndarray:
    """Read a sidecar file; returns a (count, dim) float64 array."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != SIDECAR_MAGIC:
        raise SchemaError(f"{path}: not a sidecar embedding file")
    dim, count = struct.unpack("<II", raw[4:12])
    expected = 12 + 4 * dim * count
    if len(raw) != expected:
        raise SchemaError(f"{path}: sidecar payload is {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=12).reshape(count, dim)
    return data.astype(np.float64)


def _open_sidecar(path: Path, sidecar: str | Path | None) -> np.ndarray | None:
    if sidecar is not None:
        return read_sidecar(sidecar)
    default = path.with_name(path.name + SIDECAR_SUFFIX)
    if default.exists():
        return read_sidecar(default)
    return None


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_DIR_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "rdskit"


class EmbeddingCache:
    """Content-addressed on-disk embedding cache.

    Keys are SHA-256 over (encoder_id, 0x00, utf-8 text bytes); entries live
    two directory levels deep by hash prefix, one JSON file per entry, so
    lookups never scan and concurrent readers need no locking. Writes go to a
    temp file followed by an atomic rename, so concurrent writers of the same
    key are idempotent.
    """

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else default_cache_dir()

    @staticmethod
    def key(encoder_id: str, text: str) -> str:
        h = hashlib.sha256()
        h.update(encoder_id.encode("utf-8"))
        h.update(b"\x00")
        h.update(text.encode("utf-8"))
        return h.hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / (key[2:] + ".json")

    def lookup(self, encoder_id: str, text: str) -> np.ndarray | None:
        """Stored vector for (encoder, text), or None. Corrupt entries count as absent."""
        path = self._path(self.key(encoder_id, text))
        if not path.exists():
            return None
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
            vec = np.asarray(obj["vector"], dtype=np.float64)
            if vec.ndim != 1 or vec.size != int(obj["dim"]) or not np.all(np.isfinite(vec)):
                raise ValueError("inconsistent entry")
        except (ValueError, KeyError, TypeError, json.JSONDecodeError) as e:
            warnings.warn(f"corrupt cache entry {path}: {e}", RuntimeWarning, stacklevel=2)
            return None
        return vec

    def store(self, encoder_id: str, text: str, vector) -> None:
        """Durably store a vector; idempotent for identical payloads.

        A pre-existing entry with a different vector is kept (first write
        wins) with a warning: refreshing silently would break byte-for-byte
        reproducibility of downstream runs. Disk errors propagate, since the
        cache is load-bearing for reproducibility.
        """
        vec = np.asarray(vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise InvalidVector("cache vectors must be non-empty and 1-D")
        if not np.all(np.isfinite(vec)):
            raise InvalidVector("cache vectors must be finite")
        key = self.key(encoder_id, text)
        path = self._path(key)
        existing = self.lookup(encoder_id, text)
        if existing is not None:
            if existing.shape == vec.shape and np.array_equal(existing, vec):
                return
            warnings.warn(
                f"cache entry {key[:12]}... already holds a different vector; keeping it",
                RuntimeWarning,
                stacklevel=2,
            )
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "key": key,
            "encoder_id": encoder_id,
            "dim": int(vec.size),
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "vector": vec.tolist(),
        }
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(json.dumps(payload))
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
