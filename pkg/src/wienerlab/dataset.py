"""Synthetic dataset generation: patches, a split PSF pool, and manifests.

A manifest is one JSON record per line describing a ground-truth/degraded
pair: id, split, psf spec, noise kind and level, seed, and file paths.
Given the same sources, protocol, and seed the output is bit-identical;
each pair owns a PRNG stream derived from (seed, pair index) so parallel
and serial generation agree.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import formats
from .degrade import (
    GAUSSIAN_STD_SET,
    POISSON_PEAK_SET,
    PRNG_ID,
    DegradeConfig,
    PsfSpec,
    degrade,
    make_rng,
)
from .errors import InvalidInputError

#: PSF pool layout mirroring the 25/5/5 train/val/test split.
PSF_POOL_SIZES = {"train": 25, "val": 5, "test": 5}
PATCH_DISCARD_FACTOR = 0.5


def psf_pool(seed: int, sizes=(5, 7, 9, 11, 13)) -> dict[str, list[PsfSpec]]:
    """35 random parametric PSF specs split into disjoint train/val/test sets."""
    rng = make_rng(seed, stream=1)
    specs = []
    total = sum(PSF_POOL_SIZES.values())
    families = ("gaussian", "airy-like", "box")
    for _ in range(total):
        family = families[int(rng.random() * len(families))]
        size = sizes[int(rng.random() * len(sizes))]
        if family == "gaussian":
            param = 0.5 + 2.0 * rng.random()
        elif family == "airy-like":
            param = 1.0 + 0.4 * size * rng.random()
        else:
            param = 0.0
        specs.append(PsfSpec(family, size, param))
    pool = {}
    start = 0
    for split, count in PSF_POOL_SIZES.items():
        pool[split] = specs[start : start + count]
        start += count
    return pool


def extract_patches(image: np.ndarray, patch: int, stride: int | None = None):
    """Non-overlapping (or strided) patches, discarding near-empty ones."""
    if patch < 32:
        raise InvalidInputError("patch size must be >= 32")
    stride = stride or patch
    h, w = image.shape
    threshold = PATCH_DISCARD_FACTOR * image.mean()
    out = []
    for i in range(0, h - patch + 1, stride):
        for j in range(0, w - patch + 1, stride):
            tile = image[i : i + patch, j : j + patch]
            if tile.mean() >= threshold:
                out.append(tile.copy())
    return out


@dataclass
class PairRecord:
    pair_id: int
    split: str
    psf: PsfSpec
    noise: str
    std: float | None
    peak: float | None
    seed: int
    truth_path: str
    degraded_path: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.pair_id,
                "split": self.split,
                "psf": {"family": self.psf.family, "size": self.psf.size, "param": self.psf.param},
                "noise": self.noise,
                "std": self.std,
                "peak": self.peak,
                "seed": self.seed,
                "truth": self.truth_path,
                "degraded": self.degraded_path,
                "prng": PRNG_ID,
            }
        )

    @staticmethod
    def from_json(line: str) -> "PairRecord":
        rec = json.loads(line)
        return PairRecord(
            pair_id=rec["id"],
            split=rec["split"],
            psf=PsfSpec(rec["psf"]["family"], rec["psf"]["size"], rec["psf"]["param"]),
            noise=rec["noise"],
            std=rec["std"],
            peak=rec["peak"],
            seed=rec["seed"],
            truth_path=rec["truth"],
            degraded_path=rec["degraded"],
        )


def make_dataset(
    source_paths,
    out_dir,
    protocol: str = "gaussian",
    seed: int = 0,
    patch: int = 64,
    val_fraction: float = 0.15,
    test_fraction: float = 0.15,
) -> list[PairRecord]:
    """Crop, split, degrade, and write pairs plus a manifest.jsonl.

    The PSF pool is split 25/5/5 so validation and test pairs use blur
    kernels never seen in training.
    """
    if protocol not in ("gaussian", "poisson"):
        raise InvalidInputError(f"protocol must be gaussian|poisson, got {protocol!r}")
    source_paths = list(source_paths)
    if not source_paths:
        raise InvalidInputError("make_dataset: no source images")
    os.makedirs(out_dir, exist_ok=True)

    patches = []
    for path in sorted(source_paths):
        patches.extend(extract_patches(formats.load_any(path), patch))
    if not patches:
        raise InvalidInputError("make_dataset: every patch was discarded")

    pool = psf_pool(seed)
    rng = make_rng(seed, stream=2)
    records = []
    n = len(patches)
    n_val = int(round(val_fraction * n))
    n_test = int(round(test_fraction * n))
    order = rng.permutation(n)
    split_of = {}
    for rank, idx in enumerate(order):
        split_of[int(idx)] = "test" if rank < n_test else "val" if rank < n_test + n_val else "train"

    for pair_id, truth in enumerate(patches):
        split = split_of[pair_id]
        specs = pool[split]
        spec = specs[int(rng.random() * len(specs))]
        if protocol == "gaussian":
            std = GAUSSIAN_STD_SET[int(rng.random() * len(GAUSSIAN_STD_SET))]
            cfg = DegradeConfig(psf_spec=spec, noise="gaussian", std=std, seed=seed)
            peak = None
        else:
            peak = float(POISSON_PEAK_SET[int(rng.random() * len(POISSON_PEAK_SET))])
            cfg = DegradeConfig(psf_spec=spec, noise="poisson", peak=peak, seed=seed)
            std = None
        degraded = degrade(truth, cfg, stream=16 + pair_id)
        truth_path = os.path.join(out_dir, f"pair{pair_id:05d}_truth.wkimg")
        degraded_path = os.path.join(out_dir, f"pair{pair_id:05d}_degraded.wkimg")
        formats.write_image(truth_path, truth)
        formats.write_image(degraded_path, degraded)
        records.append(
            PairRecord(
                pair_id=pair_id,
                split=split,
                psf=spec,
                noise=protocol,
                std=std,
                peak=peak,
                seed=seed,
                truth_path=truth_path,
                degraded_path=degraded_path,
            )
        )

    manifest = "\n".join(r.to_json() for r in records) + "\n"
    formats.atomic_write(os.path.join(out_dir, "manifest.jsonl"), manifest.encode())
    return records


def read_manifest(path) -> list[PairRecord]:
    with open(path) as f:
        return [PairRecord.from_json(line) for line in f if line.strip()]


def pairs_from_records(records):
    """Load manifest records into in-memory training pairs."""
    from .degrade import synthesize_psf  # noqa: PLC0415
    from .training import TrainPair  # noqa: PLC0415

    return [
        TrainPair(
            truth=formats.load_any(r.truth_path),
            degraded=formats.load_any(r.degraded_path),
            psf=synthesize_psf(r.psf),
            peak=r.peak,
        )
        for r in records
    ]
