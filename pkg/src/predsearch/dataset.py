"""Training dataset assembly: solve instances, binarize solution pools,
and persist (instance, labels) pairs.

Label files are packed bitsets: a small binary header carrying the label
width, the pool cap, the row count, and a hash of the instance's canonical
serialization, then one bit row per pool solution and the matching
objectives. Everything is deterministic given the solver seeds, so a
collection run reproduces byte-identical files.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, PredsearchError, ValidationError
from .instance import MipInstance, binarize_solution, instance_to_json
from .solver import SolveStatus, SolverConfig, collect_solution_pool

_MAGIC = b"PSLB"
_VERSION = 1


@dataclass(frozen=True)
class TrainingSample:
    """Deduplicated binarized pool labels for one instance, ascending objective."""

    instance_ref: str
    labels: np.ndarray      # (k, |I|) uint8
    objectives: np.ndarray  # (k,)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.uint8)
        objectives = np.asarray(self.objectives, dtype=float)
        if labels.ndim != 2 or labels.shape[0] != objectives.shape[0]:
            raise ValidationError("labels and objectives disagree in length")
        if np.any(np.diff(objectives) < 0):
            raise ValidationError("sample objectives must be ascending")
        labels.flags.writeable = False
        objectives.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "objectives", objectives)

    @property
    def num_labels(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class DatasetManifest:
    family: str
    split: str
    sample_refs: tuple[str, ...]
    u_p: int
    node_budget: int | None
    rng_seed: int
    skipped: tuple[str, ...] = ()

    def to_json(self) -> str:
        return json.dumps(
            {
                "family": self.family,
                "split": self.split,
                "sample_refs": list(self.sample_refs),
                "u_p": self.u_p,
                "node_budget": self.node_budget,
                "rng_seed": self.rng_seed,
                "skipped": list(self.skipped),
            },
            indent=1,
        ) + "\n"

    @staticmethod
    def from_json(text: str) -> "DatasetManifest":
        d = json.loads(text)
        return DatasetManifest(
            family=d["family"],
            split=d["split"],
            sample_refs=tuple(d["sample_refs"]),
            u_p=int(d["u_p"]),
            node_budget=d["node_budget"],
            rng_seed=int(d["rng_seed"]),
            skipped=tuple(d.get("skipped", ())),
        )


def instance_hash(inst: MipInstance) -> bytes:
    return hashlib.sha256(instance_to_json(inst).encode("utf-8")).digest()


def make_training_sample(inst: MipInstance, solutions, *, ref: str, tol: float = 1e-6) -> TrainingSample:
    """Binarize a solution pool and deduplicate identical label vectors,
    keeping the best objective per distinct vector."""
    rows, objs, seen = [], [], set()
    ordered = sorted(solutions, key=lambda s: s.objective)
    for sol in ordered:
        bits = binarize_solution(inst, sol.values, tol)
        key = bits.tobytes()
        if key in seen:
            continue
        seen.add(key)
        rows.append(bits)
        objs.append(sol.objective)
    return TrainingSample(
        instance_ref=ref,
        labels=np.array(rows, dtype=np.uint8).reshape(len(rows), -1),
        objectives=np.array(objs),
    )


def collect_dataset(
    entries: list[tuple[str, MipInstance]],
    u_p: int,
    cfg: SolverConfig,
    *,
    split: str = "train",
    restarts: int = 4,
) -> tuple[DatasetManifest, list[TrainingSample]]:
    """Solve every instance for a pool of up to u_p solutions and binarize.

    Instances yielding no feasible solution are recorded in the manifest's
    skipped list (with a warning) and excluded from the samples.
    """
    if not entries:
        raise ValidationError("collect_dataset needs at least one instance")
    samples, skipped = [], []
    family = entries[0][1].family
    for ref, inst in entries:
        pool = collect_solution_pool(inst, u_p, cfg, restarts=restarts)
        if not pool.solutions:
            warnings.warn(f"{ref}: no feasible solution within budget; excluded from dataset", stacklevel=2)
            skipped.append(ref)
            continue
        samples.append(make_training_sample(inst, pool.solutions, ref=ref, tol=cfg.feas_tol))
    manifest = DatasetManifest(
        family=family,
        split=split,
        sample_refs=tuple(s.instance_ref for s in samples),
        u_p=u_p,
        node_budget=cfg.node_limit,
        rng_seed=cfg.rng_seed,
        skipped=tuple(skipped),
    )
    return manifest, samples


@dataclass(frozen=True)
class LabelStatistics:
    zero_frequency: np.ndarray  # per integer variable, across all pool rows
    overall_zero_fraction: float
    rows: int


def label_statistics(samples: list[TrainingSample]) -> LabelStatistics:
    if not samples:
        raise ValidationError("label_statistics needs at least one sample")
    stacked = np.vstack([s.labels for s in samples])
    zero = 1.0 - stacked.astype(float)
    return LabelStatistics(
        zero_frequency=zero.mean(axis=0),
        overall_zero_fraction=float(zero.mean()),
        rows=int(stacked.shape[0]),
    )


# --------------------------------------------------------------------------
# label file format


def save_sample(sample: TrainingSample, inst: MipInstance, u_p: int, path) -> None:
    k, width = sample.labels.shape
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<4i", _VERSION, width, u_p, k))
    buf.write(instance_hash(inst))
    for row in sample.labels:
        buf.write(np.packbits(row).tobytes())
    buf.write(np.ascontiguousarray(sample.objectives, dtype="<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_sample(path, *, expected_instance: MipInstance | None = None) -> TrainingSample:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ParseError(f"{path}: not a label file (bad magic)")
    version, width, u_p, k = struct.unpack_from("<4i", raw, 4)
    if version != _VERSION:
        raise ParseError(f"{path}: unsupported label file version {version}")
    off = 4 + struct.calcsize("<4i")
    digest = raw[off : off + 32]
    off += 32
    if expected_instance is not None and digest != instance_hash(expected_instance):
        raise PredsearchError(f"{path}: label file does not match the instance (hash mismatch)")
    row_bytes = (width + 7) // 8
    rows = []
    for _ in range(k):
        chunk = np.frombuffer(raw, dtype=np.uint8, count=row_bytes, offset=off)
        rows.append(np.unpackbits(chunk)[:width])
        off += row_bytes
    objectives = np.frombuffer(raw, dtype="<f8", count=k, offset=off).copy()
    off += 8 * k
    if off != len(raw):
        raise ParseError(f"{path}: {len(raw) - off} trailing bytes")
    labels = np.array(rows, dtype=np.uint8).reshape(k, width)
    return TrainingSample(instance_ref=str(path), labels=labels, objectives=objectives)
