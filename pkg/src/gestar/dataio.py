"""Dataset persistence: JSON manifest plus length-prefixed binary records.

``manifest.json`` carries the generation spec, participant profiles, split
membership, client partitions, and a digest of the record file.
``samples.bin`` holds one record per sample: label, participant id, then
each modality array length-prefixed (uint8 ndim, uint32 dims, float64
little-endian payload). Writing the same dataset twice produces identical
bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .synthdata import (
    ClientPartition,
    Dataset,
    DatasetSpec,
    GestureSample,
    ParticipantProfile,
    Split,
)

DATA_MAGIC = b"GESTDAT1"
DATA_VERSION = 1
MANIFEST_NAME = "manifest.json"
RECORDS_NAME = "samples.bin"


def _write_array(fh, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    fh.write(struct.pack("<B", arr.ndim))
    for dim in arr.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(arr.astype("<f8").tobytes())


def _read_array(fh) -> np.ndarray:
    (ndim,) = struct.unpack("<B", fh.read(1))
    shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(fh.read(count * 8), dtype="<f8").astype(np.float64)
    return data.reshape(shape)


def write_records(samples: list[GestureSample], path: Path) -> str:
    """Write the binary record file; returns its sha256 hex digest."""
    with open(path, "wb") as fh:
        fh.write(DATA_MAGIC)
        fh.write(struct.pack("<I", DATA_VERSION))
        fh.write(struct.pack("<Q", len(samples)))
        for s in samples:
            fh.write(struct.pack("<II", s.label, s.participant_id))
            for arr in (s.frame, s.accel, s.emg, s.context):
                _write_array(fh, arr)
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_records(path: Path) -> list[GestureSample]:
    samples = []
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != DATA_MAGIC:
            raise ValidationError(f"{path}: bad record magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != DATA_VERSION:
            raise ValidationError(f"{path}: unsupported record version {version}")
        (count,) = struct.unpack("<Q", fh.read(8))
        for _ in range(count):
            label, pid = struct.unpack("<II", fh.read(8))
            frame = _read_array(fh)
            accel = _read_array(fh)
            emg = _read_array(fh)
            context = _read_array(fh)
            samples.append(
                GestureSample(
                    label=int(label), frame=frame, accel=accel, emg=emg,
                    context=context, participant_id=int(pid),
                )
            )
    return samples


def save_dataset(dataset: Dataset, out_dir: Path | str) -> dict:
    """Write manifest + records; returns the manifest dict."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = write_records(dataset.samples, out_dir / RECORDS_NAME)
    manifest = {
        "format_version": DATA_VERSION,
        "spec": dataset.spec.to_dict(),
        "n_records": len(dataset.samples),
        "profiles": [asdict(p) for p in dataset.profiles],
        "splits": dataset.split.to_dict(),
        "partitions": [
            {
                "client_id": p.client_id,
                "participants": p.participant_ids,
                "samples": p.sample_indices,
            }
            for p in dataset.partitions
        ],
        "digests": {RECORDS_NAME: digest},
    }
    with open(out_dir / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_dataset(data_dir: Path | str) -> Dataset:
    data_dir = Path(data_dir)
    manifest_path = data_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"no dataset manifest at {manifest_path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    spec = DatasetSpec.from_dict(manifest["spec"])
    profiles = [ParticipantProfile(**p) for p in manifest["profiles"]]
    samples = read_records(data_dir / RECORDS_NAME)
    if len(samples) != manifest["n_records"]:
        raise ValidationError(
            f"{data_dir}: manifest lists {manifest['n_records']} records, file has {len(samples)}"
        )
    split = Split.from_dict(manifest["splits"])
    partitions = [
        ClientPartition(
            client_id=p["client_id"],
            sample_indices=list(p["samples"]),
            participant_ids=list(p["participants"]),
        )
        for p in manifest["partitions"]
    ]
    return Dataset(spec=spec, profiles=profiles, samples=samples, split=split, partitions=partitions)


def dump_csv(dataset: Dataset, out_dir: Path | str) -> None:
    """Inspection dump: accel and EMG series as flat CSV tables."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "accel.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "label", "participant", "t", "ax_g", "ay_g", "az_g"])
        for i, s in enumerate(dataset.samples):
            for t in range(s.accel.shape[0]):
                writer.writerow(
                    [i, s.label, s.participant_id, t] + [f"{v:.6g}" for v in s.accel[t]]
                )
    n_el = dataset.spec.n_electrodes
    with open(out_dir / "emg.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample", "label", "participant", "t"] + [f"e{e}" for e in range(n_el)]
        )
        for i, s in enumerate(dataset.samples):
            for t in range(s.emg.shape[0]):
                writer.writerow([i, s.label, s.participant_id, t] + [f"{v:.6g}" for v in s.emg[t]])
