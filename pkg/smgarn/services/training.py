from __future__ import annotations

import csv
import itertools
import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset
from tqdm import tqdm

from smgarn.config import get_settings
from smgarn.errors import CheckpointError, DatasetError, ParameterError, SizeError, TrainingDivergedError
from smgarn.models.smgarn import SMGARN, build_model
from smgarn.schemas import METRICS_COLUMNS, GuidanceCase, MetricsRecord, ModelConfig, TrainConfig
from smgarn.services.checkpoint import Checkpoint, save_checkpoint
from smgarn.services.evaluation import evaluate_model
from smgarn.services.losses import LossBundle, mask_loss, reconstruct_loss, total_loss
from smgarn.services.snow_synthesis import SnowSample


logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"


@dataclass(frozen=True)
class AugmentFlags:
    hflip: bool = True
    vflip: bool = True
    rot90: bool = True

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> "AugmentFlags":
        return cls(hflip=cfg.hflip, vflip=cfg.vflip, rot90=cfg.rot90)


def sample_patch(sample: SnowSample, size: int, rng: np.random.Generator) -> SnowSample:
    H, W = sample.size
    if H < size or W < size:
        raise SizeError(f"Sample {sample.id!r} is {H}x{W}, smaller than patch size {size}")
    top = int(rng.integers(0, H - size, endpoint=True))
    left = int(rng.integers(0, W - size, endpoint=True))
    return sample.map_arrays(lambda a: np.ascontiguousarray(a[:, :, top : top + size, left : left + size]))


def apply_transform(sample: SnowSample, *, hflip: bool = False, vflip: bool = False, k: int = 0) -> SnowSample:
    """Flip and rotate every aligned array by the same amount (k quarter turns)."""
    if k % 4 and sample.size[0] != sample.size[1]:
        raise SizeError(f"rot90 needs a square sample, {sample.id!r} is {sample.size[0]}x{sample.size[1]}")

    def transform(a: np.ndarray) -> np.ndarray:
        if hflip:
            a = a[:, :, :, ::-1]
        if vflip:
            a = a[:, :, ::-1, :]
        if k % 4:
            a = np.rot90(a, k=k % 4, axes=(2, 3))
        return np.ascontiguousarray(a)

    return sample.map_arrays(transform)


def augment(sample: SnowSample, flags: AugmentFlags, rng: np.random.Generator) -> SnowSample:
    # fixed draw order keeps the rng stream independent of which flags are on
    h, v, k = bool(rng.integers(0, 2)), bool(rng.integers(0, 2)), int(rng.integers(0, 4))
    return apply_transform(
        sample,
        hflip=flags.hflip and h,
        vflip=flags.vflip and v,
        k=k if flags.rot90 else 0,
    )


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    if epoch < 0:
        raise ParameterError(f"epoch must be >= 0, got {epoch}")
    return math.ldexp(cfg.lr_init, -(epoch // cfg.lr_halve_every))


def _to_tensor(a: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(a[0], dtype=np.float32))


class PatchDataset(Dataset):
    """Random aligned patches; item randomness is keyed on (seed, epoch, pass, index).

    `pass_index` counts loader passes within an epoch, so a sample drawn twice
    in one epoch gets a fresh crop and augmentation.
    """

    def __init__(self, samples: Sequence[SnowSample], cfg: TrainConfig) -> None:
        self.samples = list(samples)
        self.cfg = cfg
        self.flags = AugmentFlags.from_config(cfg)
        self.epoch = 0
        self.pass_index = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch
        self.pass_index = 0

    def set_pass(self, pass_index: int) -> None:
        self.pass_index = pass_index

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, idx: int) -> dict[str, torch.Tensor]:
        rng = np.random.default_rng([self.cfg.seed, self.epoch, self.pass_index, idx])
        sample = augment(sample_patch(self.samples[idx], self.cfg.patch_size, rng), self.flags, rng)
        size = self.cfg.patch_size
        return {
            "snowy": _to_tensor(sample.snowy),
            "clean": _to_tensor(sample.clean),
            "mask": _to_tensor(sample.mask) if sample.mask is not None else torch.zeros(1, size, size),
        }


def compute_losses(model: SMGARN, batch: dict[str, torch.Tensor], lam: float) -> LossBundle:
    cfg = model.cfg
    gt_mask = batch["mask"] if cfg.guidance_case is GuidanceCase.case4_gt_mask else None
    restored, m = model(batch["snowy"], gt_mask)
    rec = reconstruct_loss(restored, batch["clean"])
    mloss = None
    if cfg.uses_mask_loss and m is not None:
        target = batch["mask"]
        if m.shape[1] != target.shape[1]:
            target = target.expand(-1, m.shape[1], -1, -1)
        mloss = mask_loss(m, target)
    return total_loss(rec, mloss, lam)


class MetricsLog:
    """CSV metrics log kept in (epoch, step) order across reruns and resumes."""

    def __init__(self, path: Path | None) -> None:
        self.path = path
        self.records: list[MetricsRecord] = []

    def start(self, resume: Checkpoint | None = None) -> None:
        """Rewrite the file so it ends where this run starts.

        A fresh run starts an empty log. A resumed run keeps only the rows the
        checkpoint covers, so rows past an older checkpoint are not repeated.
        """
        if self.path is None:
            return
        kept: list[MetricsRecord] = []
        if resume is not None and self.path.exists():
            logged = read_metrics(self.path)
            kept = [r for r in logged if r.epoch < resume.epoch and r.step <= resume.global_step]
            if len(kept) < len(logged):
                logger.info("Dropping %d logged row(s) past step %d from %s",
                            len(logged) - len(kept), resume.global_step, self.path)
        elif self.path.exists():
            logger.info("Starting a fresh metrics log at %s", self.path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRICS_COLUMNS)
            writer.writerows(r.as_row() for r in kept)

    def append(self, record: MetricsRecord) -> None:
        self.records.append(record)
        if self.path is None:
            return
        new_file = not self.path.exists()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            if new_file:
                writer.writerow(METRICS_COLUMNS)
            writer.writerow(record.as_row())


def read_metrics(path: Path) -> list[MetricsRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [MetricsRecord.from_row(row) for row in csv.DictReader(fh)]


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    records: list[MetricsRecord] = field(default_factory=list)
    checkpoint_paths: list[Path] = field(default_factory=list)

    def final_train_loss(self, window: int = 10) -> float:
        losses = [r.loss_total for r in self.records if r.loss_total is not None]
        if not losses:
            return float("nan")
        tail = losses[-window:]
        return sum(tail) / len(tail)


def checkpoint_name(epoch: int) -> str:
    return f"epoch_{epoch:04d}.pt"


def _batches(loader: DataLoader, dataset: PatchDataset, steps: int | None) -> Iterator[dict[str, torch.Tensor]]:
    """One loader pass, or as many passes as `steps` batches need."""

    def passes() -> Iterator[dict[str, torch.Tensor]]:
        for pass_index in range(1) if steps is None else itertools.count():
            dataset.set_pass(pass_index)
            yield from loader

    if steps is None:
        yield from passes()
    else:
        yield from itertools.islice(passes(), steps)


def train_loop(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    samples: Sequence[SnowSample],
    *,
    out_dir: Path | None = None,
    resume: Checkpoint | None = None,
    val_samples: Sequence[SnowSample] | None = None,
) -> TrainResult:
    settings = get_settings()
    samples = list(samples)
    if not samples:
        raise DatasetError("Training needs at least one sample")
    for sample in samples:
        if not sample.has_clean:
            raise DatasetError(f"Sample {sample.id!r} has no ground truth image")
        if model_cfg.needs_gt_mask and not sample.has_mask:
            raise DatasetError(
                f"Sample {sample.id!r} has no mask; guidance_case={model_cfg.guidance_case.value} needs masks"
            )

    torch.manual_seed(train_cfg.seed)
    model = build_model(model_cfg).to(settings.device)
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=train_cfg.lr_init,
        betas=train_cfg.betas,
        eps=train_cfg.adam_eps,
        weight_decay=train_cfg.weight_decay,
    )
    start_epoch, global_step = 0, 0
    if resume is not None:
        if resume.model_config.model_dump(exclude={"variant"}) != model_cfg.model_dump(exclude={"variant"}):
            raise CheckpointError("Resume checkpoint was trained with a different model config")
        model.load_state_dict(resume.model_state)
        if resume.optimizer_state is not None:
            optimizer.load_state_dict(resume.optimizer_state)
        start_epoch, global_step = resume.epoch, resume.global_step
        logger.info("Resuming at epoch %d (step %d)", start_epoch, global_step)

    dataset = PatchDataset(samples, train_cfg)
    generator = torch.Generator().manual_seed(train_cfg.seed)
    loader = DataLoader(
        dataset,
        batch_size=train_cfg.batch_size,
        shuffle=True,
        generator=generator,
        num_workers=settings.num_workers,
        prefetch_factor=settings.prefetch_factor if settings.num_workers > 0 else None,
    )
    log = MetricsLog(None if out_dir is None else Path(out_dir) / METRICS_FILE)
    log.start(resume)
    result = TrainResult(
        checkpoint=resume
        if resume is not None
        else Checkpoint(model_config=model_cfg, model_state=model.state_dict(), train_config=train_cfg)
    )
    result.records = log.records
    steps_per_epoch = train_cfg.steps_per_epoch

    for epoch in range(start_epoch, train_cfg.epochs):
        lr = lr_schedule(epoch, train_cfg)
        for group in optimizer.param_groups:
            group["lr"] = lr
        dataset.set_epoch(epoch)
        # shuffling order is a function of (seed, epoch) so resumed runs see the same batches
        generator.manual_seed(train_cfg.seed * 1_000_003 + epoch)
        model.train()
        total = steps_per_epoch if steps_per_epoch is not None else len(loader)
        bar = tqdm(_batches(loader, dataset, steps_per_epoch), total=total, desc=f"epoch {epoch + 1}/{train_cfg.epochs}",
                   disable=not settings.progress, leave=False)
        for batch in bar:
            batch = {k: v.to(settings.device) for k, v in batch.items()}
            losses = compute_losses(model, batch, train_cfg.lambda_mask)
            global_step += 1
            value = float(losses.total.detach())
            if not math.isfinite(value):
                raise TrainingDivergedError(global_step, value)
            optimizer.zero_grad(set_to_none=True)
            losses.total.backward()
            if train_cfg.grad_clip_norm is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), train_cfg.grad_clip_norm)
            optimizer.step()
            log.append(MetricsRecord(epoch=epoch, step=global_step, lr=lr, **losses.scalars()))
            bar.set_postfix(loss=f"{value:.4f}")

        if val_samples:
            report = evaluate_model(model, val_samples, dataset_id="val")
            val_psnr, val_ssim = report.mean_psnr, report.mean_ssim
            log.append(MetricsRecord(epoch=epoch, step=global_step, lr=lr, psnr=val_psnr, ssim=val_ssim))
            logger.info("epoch %d: val %.2f/%.2f", epoch + 1, val_psnr, val_ssim)

        completed = epoch + 1
        result.checkpoint = Checkpoint(
            model_config=model_cfg,
            model_state={k: v.detach().clone() for k, v in model.state_dict().items()},
            epoch=completed,
            global_step=global_step,
            train_config=train_cfg,
            optimizer_state=optimizer.state_dict(),
        )
        if out_dir is not None and (completed % train_cfg.checkpoint_every == 0 or completed == train_cfg.epochs):
            path = Path(out_dir) / checkpoint_name(completed)
            save_checkpoint(path, result.checkpoint)
            result.checkpoint_paths.append(path)
        logger.info("epoch %d done: step %d, lr %.3g, loss %.5f", completed, global_step, lr, result.final_train_loss())

    return result
