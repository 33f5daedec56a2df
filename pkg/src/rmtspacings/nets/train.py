"""Mini-batch SGD with momentum, weight decay and a piecewise-linear learning rate.

The update follows the usual heavy-ball form with decoupled momentum buffer::

    d = grad + weight_decay * w
    buf = momentum * buf + d      (buf = d on the first step)
    w = w - lr * buf
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from rmtspacings.errors import TrainingError, ValidationError
from rmtspacings.nets.mlp import MlpSpec, _tensor, init_weights, loss_t


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 0.003
    lr_final: float = 0.00003
    decay_start_epoch: int = 150
    decay_end_epoch: int = 270
    epochs: int = 300
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.lr_final <= self.lr0:
            raise ValidationError("need 0 < lr_final <= lr0")
        if not 0 <= self.decay_start_epoch <= self.decay_end_epoch <= self.epochs:
            raise ValidationError("need decay_start_epoch <= decay_end_epoch <= epochs")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be positive")

    def learning_rate(self, epoch: int) -> float:
        """Constant, then linear from ``lr0`` to ``lr_final``, then constant."""
        if epoch < self.decay_start_epoch:
            return self.lr0
        if epoch >= self.decay_end_epoch:
            return self.lr_final
        frac = (epoch - self.decay_start_epoch) / (self.decay_end_epoch - self.decay_start_epoch)
        return self.lr0 + frac * (self.lr_final - self.lr0)

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    weights: np.ndarray
    loss_trace: list = field(default_factory=list)


def train_sgd(spec: MlpSpec, data, cfg: TrainConfig, init=None) -> TrainResult:
    """Train from ``init`` (default: :func:`init_weights` with ``cfg.seed``).

    ``loss_trace[e]`` is the mean training loss over the mini-batches of
    epoch ``e``, measured before each step.
    """
    kind = spec.loss_kind
    w0 = init_weights(spec, cfg.seed) if init is None else np.asarray(init, dtype=np.float64)
    w = _tensor(w0).clone().requires_grad_(True)
    x = _tensor(data.features)
    y = _tensor(data.targets)
    n = x.shape[0]
    rng = np.random.default_rng(cfg.seed)
    buf = None
    trace = []
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate(epoch)
        perm = torch.from_numpy(rng.permutation(n))
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            batch_loss = loss_t(spec, w, x[idx], y[idx], kind)
            (g,) = torch.autograd.grad(batch_loss, w)
            with torch.no_grad():
                d = g + cfg.weight_decay * w
                buf = d.clone() if buf is None else buf.mul_(cfg.momentum).add_(d)
                w.sub_(lr * buf)
            total += float(batch_loss.detach()) * idx.numel()
        epoch_loss = total / n
        trace.append(epoch_loss)
        if not math.isfinite(epoch_loss) or not torch.isfinite(w).all():
            raise TrainingError(f"training diverged at epoch {epoch}", epoch)
    return TrainResult(w.detach().numpy().copy(), trace)
