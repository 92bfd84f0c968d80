"""Dataset construction: pair ingest, edge-consistency filtering, strength
group rendering, offline weight-map caching, and the JSON manifest.

A dataset directory is self-contained: group images as 8-bit PNG, weight
maps as 16-bit PNG, and a canonical manifest.json whose bytes are a pure
function of inputs and parameters (rebuilds are byte-identical).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .imgcore import ImageBuffer, read_png, write_png
from .retinex import InterpolationMethod, StrengthGroup, build_group
from .spatial import BilateralParams
from .weights import (
    EDGE_FLOOR,
    MaskParams,
    WeightMap,
    binarize_edges,
    edge_response,
    load_weight_map,
    save_weight_map,
    soft_weight,
    unreliable_mask,
    weight_map_filename,
)

import numpy as np

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1

# Acceptance threshold for edge-consistency scores, in edge-response units.
# Chosen so a 6 px shifted-square pair is rejected while its unshifted twin
# is accepted; overridable from the CLI.
DEFAULT_TAU = 0.02

DEFAULT_STRENGTHS = (0.2, 0.4, 0.6, 0.8)


class DataError(ValueError):
    """Dataset-level failure (no pairs, broken manifest, unknown ids)."""


@dataclass(frozen=True)
class PairRecord:
    pair_id: str
    path_low: str
    path_normal: str
    width: int
    height: int
    consistency_score: float
    accepted: bool
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "path_low": self.path_low,
            "path_normal": self.path_normal,
            "width": self.width,
            "height": self.height,
            "consistency_score": self.consistency_score,
            "accepted": self.accepted,
            "reason": self.reason,
        }

    @staticmethod
    def from_dict(d: dict) -> "PairRecord":
        return PairRecord(
            pair_id=d["pair_id"],
            path_low=d["path_low"],
            path_normal=d["path_normal"],
            width=d["width"],
            height=d["height"],
            consistency_score=d["consistency_score"],
            accepted=d["accepted"],
            reason=d.get("reason", ""),
        )


@dataclass(frozen=True)
class GroupEntry:
    strength: float
    image: str  # filename relative to the dataset directory
    weight_map: str | None  # None for s=0 (no supervision target there)


@dataclass(frozen=True)
class DatasetManifest:
    version: int
    bilateral: BilateralParams
    mask: MaskParams
    tau: float
    strengths: tuple[float, ...]
    method: InterpolationMethod
    records: tuple[PairRecord, ...]
    entries: dict[str, tuple[GroupEntry, ...]] = field(default_factory=dict)

    def record(self, pair_id: str) -> PairRecord:
        for rec in self.records:
            if rec.pair_id == pair_id:
                return rec
        raise DataError(f"unknown pair id: {pair_id}")

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "parameters": {
                "bilateral": {
                    "sigma_spatial": self.bilateral.sigma_spatial,
                    "sigma_range": self.bilateral.sigma_range,
                },
                "mask": {
                    "d": self.mask.d,
                    "alpha": self.mask.alpha,
                    "w_min": self.mask.w_min,
                    "dilate_radius": self.mask.dilate_radius,
                },
                "tau": self.tau,
                "strengths": list(self.strengths),
                "method": self.method.value,
            },
            "records": [
                {
                    **rec.to_dict(),
                    "entries": [
                        {
                            "strength": e.strength,
                            "image": e.image,
                            "weight_map": e.weight_map,
                        }
                        for e in self.entries.get(rec.pair_id, ())
                    ],
                }
                for rec in self.records
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "DatasetManifest":
        params = d["parameters"]
        records = []
        entries = {}
        for rd in d["records"]:
            records.append(PairRecord.from_dict(rd))
            entries[rd["pair_id"]] = tuple(
                GroupEntry(e["strength"], e["image"], e["weight_map"])
                for e in rd.get("entries", [])
            )
        return DatasetManifest(
            version=d["version"],
            bilateral=BilateralParams(
                params["bilateral"]["sigma_spatial"], params["bilateral"]["sigma_range"]
            ),
            mask=MaskParams(
                params["mask"]["d"],
                params["mask"]["alpha"],
                params["mask"]["w_min"],
                params["mask"]["dilate_radius"],
            ),
            tau=params["tau"],
            strengths=tuple(params["strengths"]),
            method=InterpolationMethod(params["method"]),
            records=tuple(records),
            entries=entries,
        )


def manifest_to_bytes(manifest: DatasetManifest) -> bytes:
    return (json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n").encode()


def write_manifest(manifest: DatasetManifest, directory: str | Path) -> Path:
    path = Path(directory) / MANIFEST_NAME
    path.write_bytes(manifest_to_bytes(manifest))
    return path


def read_manifest(directory: str | Path) -> DatasetManifest:
    path = Path(directory) / MANIFEST_NAME
    if not path.is_file():
        raise DataError(f"no {MANIFEST_NAME} in {directory}")
    return DatasetManifest.from_dict(json.loads(path.read_text()))


def edge_consistency_score(
    i0: ImageBuffer, i1: ImageBuffer, bilateral: BilateralParams | None = None
) -> float:
    """Mean absolute edge-response difference over the union edge support.

    Support = pixels where either image's edge response exceeds the
    binarization floor; an empty support scores 0.
    """
    if i0.data.shape[:2] != i1.data.shape[:2]:
        raise ValueError("images must share dimensions")
    e0 = edge_response(i0, bilateral).data.astype(np.float64)
    e1 = edge_response(i1, bilateral).data.astype(np.float64)
    support = (e0 > EDGE_FLOOR) | (e1 > EDGE_FLOOR)
    if not support.any():
        return 0.0
    return float(np.abs(e0 - e1)[support].mean())


def ingest(
    directory: str | Path,
    tau: float = DEFAULT_TAU,
    bilateral: BilateralParams | None = None,
) -> list[PairRecord]:
    """Discover `<id>_low.png` / `<id>_normal.png` pairs, score each, and
    flag acceptance against tau.  Incomplete pairs are skipped with a
    warning; unreadable or mismatched pairs become rejected records."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"not a directory: {directory}")
    lows = {p.name[: -len("_low.png")]: p for p in sorted(directory.glob("*_low.png"))}
    normals = {
        p.name[: -len("_normal.png")]: p for p in sorted(directory.glob("*_normal.png"))
    }
    for pair_id in sorted(set(lows) ^ set(normals)):
        side = "_normal" if pair_id in lows else "_low"
        log.warning("pair %s is missing its %s image; skipped", pair_id, side)

    records = []
    for pair_id in sorted(set(lows) & set(normals)):
        path_low, path_normal = lows[pair_id], normals[pair_id]
        try:
            low = read_png(path_low)
            normal = read_png(path_normal)
        except (IOError, ValueError) as exc:
            records.append(
                PairRecord(pair_id, str(path_low), str(path_normal), 0, 0,
                           float("inf"), False, f"unreadable: {exc}")
            )
            continue
        if low.data.shape != normal.data.shape:
            records.append(
                PairRecord(pair_id, str(path_low), str(path_normal),
                           low.width, low.height, float("inf"), False,
                           "dimension mismatch within pair")
            )
            continue
        score = edge_consistency_score(low, normal, bilateral)
        records.append(
            PairRecord(pair_id, str(path_low), str(path_normal),
                       low.width, low.height, score, score <= tau,
                       "" if score <= tau else "edge-consistency score above tau")
        )
    return records


def weight_maps_for_group(
    i0: ImageBuffer,
    group: StrengthGroup,
    params: MaskParams | None = None,
    bilateral: BilateralParams | None = None,
) -> dict[float, WeightMap]:
    """One weight map per supervision target (every entry except s=0),
    reusing the input's binarized edges across strengths."""
    params = params or MaskParams()
    b0 = binarize_edges(i0, bilateral)
    maps = {}
    for s, image in group.entries:
        if s == 0.0:
            continue
        bs = binarize_edges(image, bilateral)
        mask = unreliable_mask(b0, bs, params.d, params.dilate_radius)
        maps[s] = WeightMap(soft_weight(mask, params.alpha, params.w_min).data, params)
    return maps


def _image_filename(pair_id: str, s: float) -> str:
    return f"{pair_id}_s{round(s * 100):03d}.png"


def build_dataset(
    records: list[PairRecord],
    strengths: tuple[float, ...],
    method: InterpolationMethod,
    out_dir: str | Path,
    bilateral: BilateralParams | None = None,
    mask_params: MaskParams | None = None,
    tau: float = DEFAULT_TAU,
) -> DatasetManifest:
    """Render every accepted pair's strength group to PNG, cache weight maps
    for each supervision target, and write the manifest.

    I/O failures abort and remove any partially written outputs.
    """
    bilateral = bilateral or BilateralParams()
    mask_params = mask_params or MaskParams()
    accepted = [r for r in records if r.accepted]
    if not accepted:
        raise DataError("no accepted pairs to build from")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []
    entries: dict[str, tuple[GroupEntry, ...]] = {}
    try:
        for rec in sorted(accepted, key=lambda r: r.pair_id):
            i0 = read_png(rec.path_low)
            i1 = read_png(rec.path_normal)
            group = build_group(i0, i1, strengths, method, bilateral, rec.pair_id)
            maps = weight_maps_for_group(i0, group, mask_params, bilateral)
            group_entries = []
            for s, image in group.entries:
                image_name = _image_filename(rec.pair_id, s)
                write_png(image, out_dir / image_name)
                created.append(out_dir / image_name)
                map_name = None
                if s != 0.0:
                    created.append(save_weight_map(maps[s], out_dir, rec.pair_id, s))
                    map_name = weight_map_filename(rec.pair_id, s)
                group_entries.append(GroupEntry(s, image_name, map_name))
            entries[rec.pair_id] = tuple(group_entries)

        manifest = DatasetManifest(
            version=MANIFEST_VERSION,
            bilateral=bilateral,
            mask=mask_params,
            tau=tau,
            strengths=strengths,
            method=method,
            records=tuple(sorted(records, key=lambda r: r.pair_id)),
            entries=entries,
        )
        path = write_manifest(manifest, out_dir)
        created.append(path)
        return manifest
    except OSError:
        for path in created:
            path.unlink(missing_ok=True)
        raise


def refresh_weight_maps(
    dataset_dir: str | Path, mask_params: MaskParams
) -> DatasetManifest:
    """Recompute every cached weight map with new mask parameters and update
    the manifest in place."""
    dataset_dir = Path(dataset_dir)
    manifest = read_manifest(dataset_dir)
    for rec in manifest.records:
        if not rec.accepted:
            continue
        group_entries = manifest.entries[rec.pair_id]
        i0 = read_png(dataset_dir / group_entries[0].image)
        b0 = binarize_edges(i0, manifest.bilateral)
        for entry in group_entries:
            if entry.weight_map is None:
                continue
            target = read_png(dataset_dir / entry.image)
            bs = binarize_edges(target, manifest.bilateral)
            mask = unreliable_mask(b0, bs, mask_params.d, mask_params.dilate_radius)
            w = soft_weight(mask, mask_params.alpha, mask_params.w_min)
            save_weight_map(
                WeightMap(w.data, mask_params), dataset_dir, rec.pair_id, entry.strength
            )
    updated = DatasetManifest(
        version=manifest.version,
        bilateral=manifest.bilateral,
        mask=mask_params,
        tau=manifest.tau,
        strengths=manifest.strengths,
        method=manifest.method,
        records=manifest.records,
        entries=manifest.entries,
    )
    write_manifest(updated, dataset_dir)
    return updated


def load_group(
    dataset_dir: str | Path, manifest: DatasetManifest, pair_id: str
) -> StrengthGroup:
    dataset_dir = Path(dataset_dir)
    entries = manifest.entries.get(pair_id)
    if not entries:
        raise DataError(f"pair {pair_id} has no built group")
    images = tuple((e.strength, read_png(dataset_dir / e.image)) for e in entries)
    return StrengthGroup(pair_id, images, manifest.method)


def load_weight_maps(
    dataset_dir: str | Path, manifest: DatasetManifest, pair_id: str
) -> dict[float, WeightMap]:
    dataset_dir = Path(dataset_dir)
    maps = {}
    for entry in manifest.entries.get(pair_id, ()):
        if entry.weight_map is not None:
            maps[entry.strength] = load_weight_map(
                dataset_dir / entry.weight_map, manifest.mask
            )
    return maps
