"""LARS optimiser (layer-wise adaptive rate scaling) with momentum."""

from __future__ import annotations

from collections.abc import Callable, Iterable
from typing import Any

import torch
from torch.optim import Optimizer


class LARS(Optimizer):
    """SGD with momentum where each tensor's step is scaled by ``eta |w| / |g|``.

    One-dimensional tensors (biases, norm scales) get neither weight decay nor
    the trust-ratio scaling. A tensor whose norm is zero uses a trust ratio of
    1, so zero-initialised weights still move. A parameter group with
    ``lars_adapt=False`` skips the trust ratio entirely and takes plain
    momentum SGD steps (with the group's weight decay).

    Parameters
    ----------
    params : Iterable
        Parameters or parameter groups
    lr : float
        Learning rate
    weight_decay : float, optional
        L2 penalty added to the gradient (default: 0.0)
    momentum : float, optional
        Momentum factor (default: 0.9)
    eta : float, optional
        Trust coefficient (default: 0.001)
    lars_adapt : bool, optional
        Default of the per-group trust-ratio switch (default: True)
    """

    def __init__(
        self,
        params: Iterable[Any],
        lr: float,
        weight_decay: float = 0.0,
        momentum: float = 0.9,
        eta: float = 0.001,
        lars_adapt: bool = True,
    ) -> None:
        if lr <= 0:
            raise ValueError(f"Invalid learning rate: {lr}")
        defaults = {
            "lr": lr,
            "weight_decay": weight_decay,
            "momentum": momentum,
            "eta": eta,
            "lars_adapt": lars_adapt,
        }
        super().__init__(params, defaults)

    @torch.no_grad()
    def step(self, closure: Callable[[], float] | None = None) -> float | None:  # type: ignore[override]
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()
        for group in self.param_groups:
            for p in group["params"]:
                if p.grad is None:
                    continue
                update = p.grad
                if p.ndim > 1 and group["weight_decay"]:
                    update = update.add(p, alpha=group["weight_decay"])
                if p.ndim > 1 and group["lars_adapt"]:
                    param_norm = torch.norm(p)
                    update_norm = torch.norm(update)
                    one = torch.ones_like(param_norm)
                    trust = torch.where(
                        param_norm > 0,
                        torch.where(update_norm > 0, group["eta"] * param_norm / update_norm, one),
                        one,
                    )
                    update = update.mul(trust)
                state = self.state[p]
                if "momentum_buffer" not in state:
                    state["momentum_buffer"] = torch.zeros_like(p)
                buffer = state["momentum_buffer"]
                buffer.mul_(group["momentum"]).add_(update)
                p.add_(buffer, alpha=-group["lr"])
        return loss
