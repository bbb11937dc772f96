"""Sampled central finite-difference checks of autograd parameter gradients."""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from smgarn.errors import ParameterError


@dataclass(frozen=True)
class GradCheckEntry:
    parameter: str
    index: int
    analytic: float
    numeric: float

    @property
    def rel_err(self) -> float:
        scale = max(abs(self.analytic), abs(self.numeric), 1e-6)
        return abs(self.analytic - self.numeric) / scale


@dataclass(frozen=True)
class GradCheckReport:
    entries: tuple[GradCheckEntry, ...]

    @property
    def max_rel_err(self) -> float:
        return max((e.rel_err for e in self.entries), default=0.0)

    @property
    def zero_gradient_count(self) -> int:
        """Entries whose autograd gradient is exactly zero; they pass on the floor alone."""
        return sum(1 for e in self.entries if e.analytic == 0.0)

    def worst(self) -> GradCheckEntry | None:
        return max(self.entries, key=lambda e: e.rel_err, default=None)


def gradient_check(
    module: nn.Module,
    loss_fn: Callable[[], torch.Tensor],
    *,
    n_samples: int = 10,
    step: float = 1e-5,
    seed: int = 0,
    parameters: list[str] | None = None,
) -> GradCheckReport:
    """Compare d loss / d theta from autograd with (L(theta+h) - L(theta-h)) / 2h.

    `loss_fn` must rebuild the scalar loss from `module` on every call. Sampled
    entries are spread over the named parameters round-robin and drawn from
    the entries with a nonzero gradient; a parameter with no such entry falls
    back to any entry and shows up in `zero_gradient_count`.
    """
    named = {name: p for name, p in module.named_parameters() if p.requires_grad}
    if parameters is not None:
        unknown = sorted(set(parameters) - set(named))
        if unknown:
            raise ParameterError(f"unknown or frozen parameter(s) {unknown}; known: {sorted(named)}")
        named = {name: named[name] for name in parameters}
    if not named:
        raise ParameterError("module has no trainable parameters to check")
    for name, p in named.items():
        if p.dtype != torch.float64:
            raise ParameterError(f"gradient checks need float64 parameters, {name} is {p.dtype}")

    module.zero_grad(set_to_none=True)
    loss_fn().backward()
    analytic = {name: p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p) for name, p in named.items()}
    nonzero = {name: torch.flatten(torch.nonzero(g.view(-1))).tolist() for name, g in analytic.items()}

    rng = np.random.default_rng(seed)
    names = list(named)
    entries: list[GradCheckEntry] = []
    with torch.no_grad():
        for k in range(n_samples):
            name = names[k % len(names)]
            flat = named[name].view(-1)
            candidates = nonzero[name]
            if candidates:
                idx = int(candidates[int(rng.integers(0, len(candidates)))])
            else:
                idx = int(rng.integers(0, flat.numel()))
            original = flat[idx].item()
            flat[idx] = original + step
            plus = loss_fn().item()
            flat[idx] = original - step
            minus = loss_fn().item()
            flat[idx] = original
            entries.append(
                GradCheckEntry(
                    parameter=name,
                    index=idx,
                    analytic=analytic[name].view(-1)[idx].item(),
                    numeric=(plus - minus) / (2.0 * step),
                )
            )
    module.zero_grad(set_to_none=True)
    return GradCheckReport(entries=tuple(entries))
