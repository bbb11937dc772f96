"""Ablation sweeps: train each variant of a grid on one budget, score, rank.

Outputs under out_dir for a grid named G:

    ablation_G.csv        ranked table (best mean PSNR first)
    ablation_G_plot.csv   one row per variant in grid order, x = MARB count or position
    ablation_G.json       rows plus soft trend checks
    runs/NN_<variant>/    per-variant checkpoints and metrics.csv
"""
from __future__ import annotations

import csv
import json
import logging
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

from smgarn.errors import DatasetError, DatasetIOError
from smgarn.models.smgarn import param_count
from smgarn.models.variants import apply_variant, grid_variants
from smgarn.schemas import EvalReport, ModelConfig, TrainConfig
from smgarn.services.evaluation import evaluate_model
from smgarn.services.snow_synthesis import SnowSample
from smgarn.services.training import train_loop


logger = logging.getLogger(__name__)

TABLE_COLUMNS = ("rank", "variant", "params", "final_loss", "mean_psnr", "mean_ssim", "summary")
PLOT_COLUMNS = ("order", "variant", "x", "params", "final_loss", "mean_psnr", "mean_ssim")


@dataclass(frozen=True)
class AblationRow:
    order: int
    variant: str
    config: ModelConfig
    params: int
    final_loss: float
    report: EvalReport

    @property
    def x(self) -> int:
        return self.config.marb.count if self.variant.startswith("marb_count_") else self.order


@dataclass(frozen=True)
class TrendCheck:
    name: str
    ok: bool
    detail: str


@dataclass
class AblationTable:
    grid: str
    rows: list[AblationRow]
    trends: list[TrendCheck] = field(default_factory=list)

    def ranked(self) -> list[AblationRow]:
        return sorted(self.rows, key=lambda r: (-r.report.mean_psnr, -r.report.mean_ssim, r.order))

    def row(self, variant: str) -> AblationRow:
        for r in self.rows:
            if r.variant == variant:
                return r
        raise KeyError(variant)


def check_trends(table: AblationTable) -> list[TrendCheck]:
    """Soft checks; a failed check is logged, never raised."""
    names = {r.variant for r in table.rows}
    checks: list[TrendCheck] = []

    guidance = ("tbl4_case4", "tbl4_case3", "tbl4_case1")
    if set(guidance) <= names:
        losses = [table.row(v).final_loss for v in guidance]
        ok = losses[0] <= losses[1] <= losses[2]
        detail = ", ".join(f"{v}={loss:.5f}" for v, loss in zip(guidance, losses))
        checks.append(TrendCheck("guidance_loss_ordering", ok, f"final loss expected case4 <= case3 <= case1: {detail}"))

    counts = sorted((r for r in table.rows if r.variant.startswith("marb_count_")), key=lambda r: r.x)
    if len(counts) >= 2:
        psnrs = [r.report.mean_psnr for r in counts]
        ok = all(a <= b for a, b in zip(psnrs, psnrs[1:]))
        detail = ", ".join(f"{r.x}:{r.report.mean_psnr:.2f}" for r in counts)
        checks.append(TrendCheck("marb_count_monotone_psnr", ok, f"PSNR by MARB count: {detail}"))

    for check in checks:
        if check.ok:
            logger.info("Trend check %s holds (%s)", check.name, check.detail)
        else:
            logger.warning("TREND CHECK FAILED: %s (%s)", check.name, check.detail)
    return checks


def ablation_sweep(
    grid: str | Sequence[str],
    base_cfg: ModelConfig,
    train_cfg: TrainConfig,
    samples: Sequence[SnowSample],
    *,
    eval_samples: Sequence[SnowSample] | None = None,
    out_dir: Path | None = None,
) -> AblationTable:
    """Train and score every variant of `grid` (a grid name or explicit variant list).

    Every variant gets the same TrainConfig, so seed and step budget match.
    Scoring defaults to the training samples.
    """
    if isinstance(grid, str):
        grid_name, names = grid, grid_variants(grid)
    else:
        grid_name, names = "custom", list(grid)
    # resolve every name before spending any training time
    configs = [apply_variant(base_cfg, name) for name in names]
    need_mask = any(cfg.needs_gt_mask for cfg in configs)
    for sample in samples:
        if not sample.has_clean or (need_mask and not sample.has_mask):
            missing = "ground truth" if not sample.has_clean else "mask"
            raise DatasetError(f"Sample {sample.id!r} has no {missing}; grid {grid_name!r} needs it")
    eval_samples = list(samples if eval_samples is None else eval_samples)

    rows: list[AblationRow] = []
    for order, (name, cfg) in enumerate(zip(names, configs), start=1):
        logger.info("Ablation %s [%d/%d]: %s", grid_name, order, len(names), name)
        run_dir = None if out_dir is None else Path(out_dir) / "runs" / f"{order:02d}_{name}"
        result = train_loop(cfg, train_cfg, samples, out_dir=run_dir)
        model = result.checkpoint.build_model()
        report = evaluate_model(model, eval_samples, dataset_id=name)
        rows.append(
            AblationRow(
                order=order,
                variant=name,
                config=cfg,
                params=param_count(cfg),
                final_loss=result.final_train_loss(),
                report=report,
            )
        )
        logger.info("  %s: %s (%d params)", name, report.summary, rows[-1].params)

    table = AblationTable(grid=grid_name, rows=rows)
    table.trends = check_trends(table)
    if out_dir is not None:
        write_table(table, out_dir)
    return table


def write_table(table: AblationTable, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    stem = f"ablation_{table.grid}"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / f"{stem}.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(TABLE_COLUMNS)
            for rank, r in enumerate(table.ranked(), start=1):
                writer.writerow(
                    [rank, r.variant, r.params, repr(r.final_loss), repr(r.report.mean_psnr),
                     repr(r.report.mean_ssim), r.report.summary]
                )
        with (out_dir / f"{stem}_plot.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(PLOT_COLUMNS)
            for r in table.rows:
                writer.writerow(
                    [r.order, r.variant, r.x, r.params, repr(r.final_loss), repr(r.report.mean_psnr),
                     repr(r.report.mean_ssim)]
                )
        payload = {
            "grid": table.grid,
            "rows": [
                {
                    "variant": r.variant,
                    "params": r.params,
                    "final_loss": r.final_loss,
                    "mean_psnr": r.report.mean_psnr,
                    "mean_ssim": r.report.mean_ssim,
                    "summary": r.report.summary,
                }
                for r in table.rows
            ],
            "trends": [asdict(t) for t in table.trends],
        }
        (out_dir / f"{stem}.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"Cannot write ablation table to {out_dir}: {exc}") from exc

