"""Paired dataset layout on disk.

    root/snowy/<id>.png     8-bit RGB, always present
    root/gt/<id>.png        8-bit RGB, absent for inference-only sets
    root/mask/<id>.png      8-bit grayscale, absent for real data without masks
    root/latents/<id>.npz   optional named arrays R, Z, C, T, A (float64, (1, C, H, W))
    root/manifest.json      optional; ids and the SynthParams used to build the set
"""
from __future__ import annotations

import io
import json
import logging
import zipfile
from collections.abc import Iterable, Iterator
from pathlib import Path

import numpy as np

from smgarn.errors import DatasetError, DatasetIOError, PairingError, ParameterError
from smgarn.schemas import SynthParams
from smgarn.services.images import IMAGE_EXTENSIONS, read_png, write_png
from smgarn.services.snow_synthesis import SnowLatents, SnowSample, render_clean_scene, synth_sample


logger = logging.getLogger(__name__)

SNOWY_DIR = "snowy"
GT_DIR = "gt"
MASK_DIR = "mask"
LATENTS_DIR = "latents"
MANIFEST_NAME = "manifest.json"

# fixed member timestamp so archives are byte-identical across runs
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def format_id(index: int, width: int = 4) -> str:
    return f"{index:0{width}d}"


def save_latents(path: Path, latents: SnowLatents) -> None:
    """Write an .npz-compatible archive: one .npy member per latent name."""
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            for name, arr in latents.as_dict().items():
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.ascontiguousarray(arr, dtype=np.float64), allow_pickle=False)
                info = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_EPOCH)
                info.compress_type = zipfile.ZIP_DEFLATED
                zf.writestr(info, buf.getvalue())
    except OSError as exc:
        raise DatasetIOError(f"Cannot write latents {path}: {exc}") from exc


def load_latents(path: Path) -> SnowLatents:
    try:
        with np.load(path, allow_pickle=False) as data:
            return SnowLatents(**{name: np.asarray(data[name], dtype=np.float64) for name in ("R", "Z", "C", "T", "A")})
    except (OSError, KeyError, ValueError, zipfile.BadZipFile) as exc:
        raise DatasetIOError(f"Cannot read latents {path}: {exc}") from exc


def write_dataset(samples: Iterable[SnowSample], root: Path, *, with_latents: bool = True) -> list[str]:
    root = Path(root)
    ids: list[str] = []
    for sample in samples:
        write_png(root / SNOWY_DIR / f"{sample.id}.png", sample.snowy)
        if sample.clean is not None:
            write_png(root / GT_DIR / f"{sample.id}.png", sample.clean)
        if sample.mask is not None:
            write_png(root / MASK_DIR / f"{sample.id}.png", sample.mask)
        if with_latents and sample.latents is not None:
            save_latents(root / LATENTS_DIR / f"{sample.id}.npz", sample.latents)
        ids.append(sample.id)
    return ids


def list_ids(root: Path) -> list[str]:
    snowy_dir = Path(root) / SNOWY_DIR
    if not snowy_dir.is_dir():
        raise DatasetError(f"Dataset {root} has no {SNOWY_DIR}/ directory")
    by_id: dict[str, list[str]] = {}
    for p in sorted(snowy_dir.iterdir()):
        if p.suffix.lower() in IMAGE_EXTENSIONS:
            by_id.setdefault(p.stem, []).append(p.name)
    for sample_id, names in by_id.items():
        if len(names) > 1:
            raise PairingError(sample_id, f"ambiguous id, {SNOWY_DIR}/ holds {', '.join(names)}")
    return sorted(by_id)


def _find_image(directory: Path, sample_id: str) -> Path | None:
    for suffix in (".png", *sorted(IMAGE_EXTENSIONS - {".png"})):
        candidate = directory / f"{sample_id}{suffix}"
        if candidate.is_file():
            return candidate
    return None


def load_sample(root: Path, sample_id: str) -> SnowSample:
    root = Path(root)
    snowy_path = _find_image(root / SNOWY_DIR, sample_id)
    if snowy_path is None:
        raise PairingError(sample_id, f"missing {SNOWY_DIR}/{sample_id}.png")
    snowy = read_png(snowy_path)

    def paired(dirname: str, *, grayscale: bool) -> np.ndarray | None:
        directory = root / dirname
        if not directory.is_dir():
            return None
        path = _find_image(directory, sample_id)
        if path is None:
            raise PairingError(sample_id, f"{dirname}/ exists but has no file for this id")
        arr = read_png(path, grayscale=grayscale)
        if arr.shape[2:] != snowy.shape[2:]:
            raise PairingError(
                sample_id, f"{dirname}/ image is {arr.shape[2]}x{arr.shape[3]}, snowy is {snowy.shape[2]}x{snowy.shape[3]}"
            )
        return arr

    clean = paired(GT_DIR, grayscale=False)
    mask = paired(MASK_DIR, grayscale=True)

    latents = None
    latents_path = root / LATENTS_DIR / f"{sample_id}.npz"
    if latents_path.is_file():
        latents = load_latents(latents_path)
    return SnowSample(id=sample_id, snowy=snowy, clean=clean, mask=mask, latents=latents)


def load_dataset(root: Path) -> Iterator[SnowSample]:
    for sample_id in list_ids(root):
        yield load_sample(root, sample_id)


def require_complete(samples: list[SnowSample], *, need_clean: bool, need_mask: bool, root: Path | str) -> None:
    for sample in samples:
        if need_clean and not sample.has_clean:
            raise DatasetError(f"{Path(root) / GT_DIR}: ground truth missing for sample {sample.id!r}")
        if need_mask and not sample.has_mask:
            raise DatasetError(f"{Path(root) / MASK_DIR}: mask missing for sample {sample.id!r}")


def sample_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def synth_dataset(
    root: Path, *, count: int, height: int, width: int, params: SynthParams, with_latents: bool = True
) -> list[str]:
    """Build `count` procedural scenes, degrade them, and write the dataset plus manifest."""
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    params.check()

    def generate() -> Iterator[SnowSample]:
        for i in range(1, count + 1):
            seed = sample_seed(params.seed, i)
            scene = render_clean_scene(height, width, np.random.default_rng([params.seed, i, 2]))
            yield synth_sample(scene, params.model_copy(update={"seed": seed}), sample_id=format_id(i))

    ids = write_dataset(generate(), root, with_latents=with_latents)
    write_manifest(root, ids, params)
    logger.info("Wrote %d synthetic samples (%dx%d) to %s", len(ids), height, width, root)
    return ids


def synth_from_directory(clean_dir: Path, root: Path, params: SynthParams, *, with_latents: bool = True) -> list[str]:
    """Degrade every readable image under clean_dir."""
    params.check()
    paths = sorted(p for p in Path(clean_dir).iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    if not paths:
        raise DatasetError(f"No images found in {clean_dir}")

    def generate() -> Iterator[SnowSample]:
        for i, path in enumerate(paths, start=1):
            seed = sample_seed(params.seed, i)
            yield synth_sample(read_png(path), params.model_copy(update={"seed": seed}), sample_id=format_id(i))

    ids = write_dataset(generate(), root, with_latents=with_latents)
    write_manifest(root, ids, params)
    return ids


def write_manifest(root: Path, ids: list[str], params: SynthParams) -> None:
    payload = {"ids": ids, "synth_params": params.model_dump(mode="json")}
    path = Path(root) / MANIFEST_NAME
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"Cannot write manifest {path}: {exc}") from exc


def read_manifest(root: Path) -> dict:
    path = Path(root) / MANIFEST_NAME
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetIOError(f"Cannot read manifest {path}: {exc}") from exc
