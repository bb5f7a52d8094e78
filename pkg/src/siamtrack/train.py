"""SGD training loop: warmup + exponential decay, two-phase fine-tuning."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import labels as lbl
from .data import CropSpec, sample_pair
from .loss import LossConfig, LossReport, total_loss
from .model import BackboneConfig, SiamTrackNet, canonical_grid, save_checkpoint


@dataclass
class TrainConfig:
    batch_size: int = 8
    epochs: int = 2
    steps_per_epoch: int = 100
    lr_warmup_start: float = 0.001
    lr_peak: float = 0.005
    lr_end: float = 0.00005
    warmup_frac: float = 0.25
    momentum: float = 0.9
    weight_decay: float = 0.0001
    backbone_multiplier: float = 0.1
    frozen_stages: int = 1
    grad_clip: float = 10.0
    label_variant: str = "ellipse"
    max_pos: int = 16
    max_neg: int = 48
    seed: int = 0
    checkpoint_dir: str = "checkpoints"
    log_path: str | None = None

    @property
    def total_steps(self):
        return self.epochs * self.steps_per_epoch

    @property
    def phase2_start(self):
        """First step of the backbone fine-tune phase (second half of epochs)."""
        return (self.epochs // 2) * self.steps_per_epoch if self.epochs > 1 \
            else self.total_steps


@dataclass
class TrainReport:
    reports: list = field(default_factory=list)
    checkpoint_path: str = ""
    wall_time: float = 0.0


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Linear warmup then exponential decay to lr_end at the final step."""
    total = cfg.total_steps
    if not (0 <= step < total):
        raise ValueError(f"step {step} outside schedule of {total} steps")
    warmup = max(2, round(cfg.warmup_frac * total))
    if step < warmup:
        t = step / (warmup - 1)
        return cfg.lr_warmup_start + t * (cfg.lr_peak - cfg.lr_warmup_start)
    if total == warmup:
        return cfg.lr_peak
    t = (step - (warmup - 1)) / (total - warmup)
    return cfg.lr_peak * (cfg.lr_end / cfg.lr_peak) ** t


class Trainer:
    """Owns the model, optimizer state, and the phase/freezing policy."""

    def __init__(self, model: SiamTrackNet, cfg: TrainConfig,
                 crop_spec: CropSpec = CropSpec(),
                 loss_cfg: LossConfig = LossConfig()):
        self.model = model
        self.cfg = cfg
        self.crop_spec = crop_spec
        self.loss_cfg = loss_cfg
        self.grid = canonical_grid()
        self.assign_cfg = lbl.AssignmentConfig(cfg.label_variant)
        backbone_params = list(model.backbone.parameters())
        head_params = [p for name, p in model.named_parameters()
                       if not name.startswith("backbone.")]
        self.optimizer = torch.optim.SGD(
            [{"params": backbone_params, "lr": 0.0},
             {"params": head_params, "lr": cfg.lr_warmup_start}],
            momentum=cfg.momentum, weight_decay=cfg.weight_decay)
        self.step_count = 0

    def _configure_phase(self, step):
        """Phase 1 trains heads only; phase 2 unfreezes the backbone at a
        reduced rate, keeping the first stages frozen throughout."""
        fine_tune = step >= self.cfg.phase2_start
        self.model.train()
        for p in self.model.backbone.parameters():
            p.requires_grad_(fine_tune)
        if not fine_tune:
            self.model.backbone.eval()
        self.model.backbone.freeze_stages(self.cfg.frozen_stages)
        lr = lr_at(step, self.cfg)
        self.optimizer.param_groups[0]["lr"] = \
            lr * self.cfg.backbone_multiplier if fine_tune else 0.0
        self.optimizer.param_groups[1]["lr"] = lr

    @staticmethod
    def _to_tensor(patches):
        arr = np.stack(patches).astype(np.float32) / 255.0
        return torch.from_numpy(arr).permute(0, 3, 1, 2).contiguous()

    def train_step(self, batch, rng: np.random.Generator) -> LossReport:
        """One SGD step over a batch of PairSample."""
        self._configure_phase(self.step_count)
        template = self._to_tensor([p.template for p in batch])
        search = self._to_tensor([p.search for p in batch])
        cls, reg = self.model(template, search)
        losses, reports = [], []
        for k, pair in enumerate(batch):
            label_map = lbl.assign(pair.gt, self.grid, self.assign_cfg)
            sel = lbl.sample_training_points(
                label_map, self.cfg.max_pos, self.cfg.max_neg, rng)
            loss_k, rep = total_loss(cls[k], reg[k], label_map, sel, pair.gt,
                                     self.grid, self.loss_cfg)
            losses.append(loss_k)
            reports.append(rep)
        loss = torch.stack(losses).mean()
        if not torch.isfinite(loss):
            raise RuntimeError(
                f"non-finite loss at step {self.step_count}: "
                f"{[r.to_json_dict() for r in reports]}")
        self.optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(self.model.parameters(),
                                       self.cfg.grad_clip)
        self.optimizer.step()
        self.step_count += 1
        n = len(reports)
        return LossReport(
            cls_loss=sum(r.cls_loss for r in reports) / n,
            reg_loss=sum(r.reg_loss for r in reports) / n,
            total=float(loss.detach()),
            num_pos=sum(r.num_pos for r in reports),
            num_neg=sum(r.num_neg for r in reports))


def train(dataset, cfg: TrainConfig,
          model_cfg: BackboneConfig = BackboneConfig(),
          crop_spec: CropSpec = CropSpec(),
          loss_cfg: LossConfig = LossConfig(),
          resume: SiamTrackNet | None = None) -> TrainReport:
    """Run the full two-phase schedule over the dataset."""
    # single-threaded: deterministic and much faster than the thread pool
    # for these small convolutions
    torch.set_num_threads(1)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    model = resume if resume is not None else SiamTrackNet(model_cfg)
    trainer = Trainer(model, cfg, crop_spec, loss_cfg)
    ckpt_dir = Path(cfg.checkpoint_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    log_file = open(cfg.log_path, "w") if cfg.log_path else None
    report = TrainReport()
    start = time.time()
    try:
        for epoch in range(cfg.epochs):
            for _ in range(cfg.steps_per_epoch):
                batch = [sample_pair(dataset, rng, crop_spec)
                         for _ in range(cfg.batch_size)]
                rep = trainer.train_step(batch, rng)
                report.reports.append(rep)
                if log_file:
                    entry = {"step": trainer.step_count, **rep.to_json_dict()}
                    log_file.write(json.dumps(entry) + "\n")
            save_checkpoint(model, ckpt_dir / f"epoch_{epoch + 1}.pt",
                            extra={"epoch": epoch + 1, "cfg_seed": cfg.seed})
    finally:
        if log_file:
            log_file.close()
    final_path = ckpt_dir / "final.pt"
    save_checkpoint(model, final_path,
                    extra={"epoch": cfg.epochs, "cfg_seed": cfg.seed})
    report.checkpoint_path = str(final_path)
    report.wall_time = time.time() - start
    return report
