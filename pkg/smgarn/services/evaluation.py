"""Dataset-level PSNR/SSIM evaluation.

Reports are written as `report.csv` (`id,psnr_db,ssim`, one row per image,
sorted by id) and `summary.json` (means plus the `mean_psnr/mean_ssim` line).
"""
from __future__ import annotations

import csv
import json
import logging
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from smgarn.config import get_settings
from smgarn.errors import DatasetError, DatasetIOError
from smgarn.models.smgarn import SMGARN
from smgarn.schemas import EvalReport, GuidanceCase, ImageScore
from smgarn.services.checkpoint import load_checkpoint
from smgarn.services.dataset import GT_DIR, load_dataset, require_complete
from smgarn.services.images import ImageArray
from smgarn.services.inference import restore_image
from smgarn.services.metrics import psnr, ssim
from smgarn.services.snow_synthesis import SnowSample


logger = logging.getLogger(__name__)

REPORT_FILE = "report.csv"
SUMMARY_FILE = "summary.json"
REPORT_COLUMNS = ("id", "psnr_db", "ssim")


def score_image(sample_id: str, pred: ImageArray, gt: ImageArray) -> ImageScore:
    return ImageScore(id=sample_id, psnr_db=psnr(pred, gt), ssim=ssim(pred, gt))


def evaluate_predictions(
    pairs: Iterable[tuple[str, ImageArray, ImageArray]], *, dataset_id: str = "dataset"
) -> EvalReport:
    """Score (id, prediction, ground truth) triples; scoring runs on SMGARN_NUM_WORKERS threads."""
    pairs = list(pairs)
    workers = get_settings().num_workers
    if workers > 0:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(lambda p: score_image(*p), pairs))
    else:
        scores = [score_image(*p) for p in pairs]
    return EvalReport.from_scores(dataset_id, scores)


def evaluate_model(model: SMGARN, samples: Iterable[SnowSample], *, dataset_id: str = "dataset") -> EvalReport:
    def predictions():
        for sample in samples:
            restored, _ = restore_image(model, sample.snowy, gt_mask=sample.mask)
            yield sample.id, restored, sample.clean

    return evaluate_predictions(predictions(), dataset_id=dataset_id)


def _load_for_eval(dataset_dir: Path, *, need_mask: bool) -> list[SnowSample]:
    dataset_dir = Path(dataset_dir)
    if not (dataset_dir / GT_DIR).is_dir():
        raise DatasetError(f"Dataset {dataset_dir} has no gt/ directory; evaluation needs ground truth")
    samples = list(load_dataset(dataset_dir))
    if not samples:
        raise DatasetError(f"Dataset {dataset_dir} has no images")
    require_complete(samples, need_clean=True, need_mask=need_mask, root=dataset_dir)
    return samples


def evaluate(checkpoint_path: Path, dataset_dir: Path, out_dir: Path | None = None) -> EvalReport:
    ckpt = load_checkpoint(checkpoint_path)
    model = ckpt.build_model(device=get_settings().device)
    # case4 scores against the dataset's own gt masks
    samples = _load_for_eval(dataset_dir, need_mask=ckpt.model_config.guidance_case is GuidanceCase.case4_gt_mask)
    report = evaluate_model(model, samples, dataset_id=Path(dataset_dir).name)
    logger.info("Evaluated %s on %d image(s): %s", checkpoint_path, len(report.per_image), report.summary)
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def evaluate_identity(dataset_dir: Path, out_dir: Path | None = None) -> EvalReport:
    """Score the snowy inputs themselves against ground truth."""
    samples = _load_for_eval(dataset_dir, need_mask=False)
    report = evaluate_predictions(((s.id, s.snowy, s.clean) for s in samples), dataset_id=Path(dataset_dir).name)
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def write_report(report: EvalReport, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / REPORT_FILE).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            for score in report.per_image:
                writer.writerow([score.id, repr(score.psnr_db), repr(score.ssim)])
        summary = {
            "dataset_id": report.dataset_id,
            "count": len(report.per_image),
            "mean_psnr": report.mean_psnr,
            "mean_ssim": report.mean_ssim,
            "summary": report.summary,
        }
        (out_dir / SUMMARY_FILE).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"Cannot write evaluation report to {out_dir}: {exc}") from exc


def read_report(path: Path) -> list[ImageScore]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            ImageScore(id=row["id"], psnr_db=float(row["psnr_db"]), ssim=float(row["ssim"]))
            for row in csv.DictReader(fh)
        ]
