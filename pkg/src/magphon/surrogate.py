"""Physics-informed recurrent surrogate for long-horizon magnetization
forecasting.

The sequence cell discretizes a two-time-scale ODE pair with an
implicit-explicit scheme; the learned sigmoid gates act as adaptive
per-channel time steps:

    dt_n    = dt * sigmoid(W1 y + V1 u + b1)
    dtbar_n = dt * sigmoid(W2 y + V2 u + b2)
    z'      = (1 - dt_n)    . z + dt_n    . tanh(Wz y + Vz u + bz)
    y'      = (1 - dtbar_n) . y + dtbar_n . tanh(Wy z' + Vy u + by)

(the updated z' feeds the y update).  A two-cell stacked encoder summarizes
the input window; two two-cell decoders share one linear readout: a
teacher-forced decoder reconstructs the input window and an autoregressive
decoder, starting from a zero input, generates the forecast.

The physics loss penalizes the mismatch between each predicted next value
and the one-step trapezoidal magnetization map applied to the predicted
state (bias-only effective field, transverse components (Mx, Mz) with My
recovered from the norm constraint).  All tensors are float64 so gradient
checks against finite differences are meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .constants import CONSTANTS

DTYPE = torch.float64


@dataclass(frozen=True)
class PhysicalParams:
    """Physical context of the trained channels: (Mx, Mz) per probe point,
    bias along +y, sampling interval dt_ml."""

    Ms: float
    H0: float               # A/m, along +y
    alpha: float
    gamma: float            # C/kg magnitude convention (|gamma_e|)
    dt_ml: float            # s


@dataclass(frozen=True)
class CurriculumStage:
    lr: float
    pred_len: int
    batch: int
    lambda_phy: float
    input_len: int
    epochs: int

    def __post_init__(self) -> None:
        if min(self.lr, self.pred_len, self.batch, self.input_len,
               self.epochs) <= 0 or self.lambda_phy < 0:
            raise ValueError(f"invalid curriculum stage {self}")


def default_schedule(total_epochs: int = 1250) -> list[CurriculumStage]:
    """Staged schedule: learning rate decays 0.001 -> 1.25e-4, prediction
    length grows 50 -> 400, batch grows 64 -> 512, physics weight ramps
    0 -> 2.5e6, input window alternates between 100 and 200."""
    lrs = [1e-3, 5e-4, 2.5e-4, 1.25e-4, 1.25e-4]
    pred = [50, 100, 200, 400, 400]
    batch = [64, 128, 256, 512, 512]
    lam = [0.0, 2.5e3, 2.5e4, 2.5e5, 2.5e6]
    inp = [100, 200, 100, 200, 200]
    per = total_epochs // len(lrs)
    extra = total_epochs - per * len(lrs)
    return [CurriculumStage(lr=l, pred_len=p, batch=b, lambda_phy=lm,
                            input_len=i, epochs=per + (extra if j == len(lrs) - 1 else 0))
            for j, (l, p, b, lm, i) in enumerate(zip(lrs, pred, batch, lam, inp))]


class LemCell(nn.Module):
    """One gated two-state recurrent cell (see module docstring)."""

    def __init__(self, input_size: int, hidden_size: int, dt: float = 1.0):
        super().__init__()
        d, m = hidden_size, input_size
        self.input_size = m
        self.hidden_size = d
        self.dt = dt
        k = 1.0 / math.sqrt(d)
        def mk(*shape):
            return nn.Parameter((torch.rand(*shape, dtype=DTYPE) * 2 - 1) * k)
        self.W1, self.W2 = mk(d, d), mk(d, d)
        self.Wz, self.Wy = mk(d, d), mk(d, d)
        self.V1, self.V2 = mk(d, m), mk(d, m)
        self.Vz, self.Vy = mk(d, m), mk(d, m)
        self.b1, self.b2 = mk(d), mk(d)
        self.bz, self.by = mk(d), mk(d)

    def forward(self, u: torch.Tensor, state: tuple[torch.Tensor, torch.Tensor]
                ) -> tuple[torch.Tensor, torch.Tensor]:
        y, z = state
        dt_n = self.dt * torch.sigmoid(y @ self.W1.T + u @ self.V1.T + self.b1)
        dtb_n = self.dt * torch.sigmoid(y @ self.W2.T + u @ self.V2.T + self.b2)
        z_new = (1 - dt_n) * z + dt_n * torch.tanh(y @ self.Wz.T + u @ self.Vz.T + self.bz)
        y_new = (1 - dtb_n) * y + dtb_n * torch.tanh(z_new @ self.Wy.T + u @ self.Vy.T + self.by)
        return y_new, z_new

    def zero_state(self, batch: int) -> tuple[torch.Tensor, torch.Tensor]:
        d = self.hidden_size
        return (torch.zeros(batch, d, dtype=DTYPE),
                torch.zeros(batch, d, dtype=DTYPE))


class _Stack(nn.Module):
    """Two stacked cells; layer 2 consumes layer 1 hidden outputs."""

    def __init__(self, input_size: int, hidden_size: int):
        super().__init__()
        self.cell1 = LemCell(input_size, hidden_size)
        self.cell2 = LemCell(hidden_size, hidden_size)

    def step(self, u, states):
        (y1, z1), (y2, z2) = states
        y1, z1 = self.cell1(u, (y1, z1))
        y2, z2 = self.cell2(y1, (y2, z2))
        return [(y1, z1), (y2, z2)]

    def zero_states(self, batch):
        return [self.cell1.zero_state(batch), self.cell2.zero_state(batch)]


class SurrogateModel(nn.Module):
    """Stacked encoder, reconstruction decoder, forecast decoder, shared
    readout, plus normalization and physical metadata."""

    VERSION = 1

    def __init__(self, channels: int, hidden: int, physical: PhysicalParams,
                 norm_lo: np.ndarray | None = None,
                 norm_hi: np.ndarray | None = None):
        super().__init__()
        self.channels = channels
        self.hidden = hidden
        self.physical = physical
        self.encoder = _Stack(channels, hidden)
        self.decoder = _Stack(channels, hidden)
        self.recon_decoder = _Stack(channels, hidden)
        self.readout = nn.Linear(hidden, channels, dtype=DTYPE)
        lo = np.zeros(channels) if norm_lo is None else np.asarray(norm_lo, float)
        hi = np.ones(channels) if norm_hi is None else np.asarray(norm_hi, float)
        self.register_buffer("norm_lo", torch.as_tensor(lo, dtype=DTYPE))
        self.register_buffer("norm_hi", torch.as_tensor(hi, dtype=DTYPE))

    # -- core passes --------------------------------------------------------

    def encode(self, inputs: torch.Tensor) -> list:
        """inputs: (batch, L, channels) -> final states of both layers."""
        states = self.encoder.zero_states(inputs.shape[0])
        for t in range(inputs.shape[1]):
            states = self.encoder.step(inputs[:, t], states)
        return states

    def decode(self, states: list, steps: int) -> torch.Tensor:
        """Autoregressive forecast from encoder states: zero first input,
        then the previous readout.  Returns (batch, steps, channels)."""
        batch = states[0][0].shape[0]
        u = torch.zeros(batch, self.channels, dtype=DTYPE)
        outs = []
        for _ in range(steps):
            states = self.decoder.step(u, states)
            u = self.readout(states[1][0])
            outs.append(u)
        return torch.stack(outs, dim=1)

    def reconstruct(self, states: list, inputs: torch.Tensor) -> torch.Tensor:
        """Teacher-forced reconstruction of the input window."""
        batch = inputs.shape[0]
        u = torch.zeros(batch, self.channels, dtype=DTYPE)
        outs = []
        for t in range(inputs.shape[1]):
            states = self.recon_decoder.step(u, states)
            outs.append(self.readout(states[1][0]))
            u = inputs[:, t]
        return torch.stack(outs, dim=1)

    def forward(self, inputs: torch.Tensor, pred_len: int
                ) -> tuple[torch.Tensor, torch.Tensor]:
        states = self.encode(inputs)
        recon = self.reconstruct([(y.clone(), z.clone()) for y, z in states],
                                 inputs)
        pred = self.decode(states, pred_len)
        return recon, pred

    # -- units --------------------------------------------------------------

    def denormalize(self, x: torch.Tensor) -> torch.Tensor:
        return x * (self.norm_hi - self.norm_lo) + self.norm_lo


# ---------------------------------------------------------------------------
# physics residual and loss
# ---------------------------------------------------------------------------

def _trapezoidal_map_torch(M: torch.Tensor, Heff: torch.Tensor, dt: float,
                           alpha: float, Ms: float, gamma: float
                           ) -> torch.Tensor:
    """Differentiable one-step trapezoidal magnetization map with a constant
    prescribed effective field (same algebra as llg.macrospin_step)."""
    c = CONSTANTS.mu0 * abs(gamma) * dt / 2.0
    a = -(c * Heff + (alpha / Ms) * M)
    b = M - c * torch.linalg.cross(M, Heff, dim=-1)
    adotb = (a * b).sum(-1, keepdim=True)
    m = (b + adotb * a - torch.linalg.cross(a, b, dim=-1)) / \
        (1.0 + (a * a).sum(-1, keepdim=True))
    return m * (Ms / m.norm(dim=-1, keepdim=True))


def physics_residuals(pred_phys: torch.Tensor, physical: PhysicalParams
                      ) -> torch.Tensor:
    """Residuals between the one-step magnetization map and the predicted
    next values.

    ``pred_phys``: (..., T, 2) physical-unit (Mx, Mz) predictions.  The
    longitudinal component is recovered as My = sqrt(Ms^2 - Mx^2 - Mz^2)
    (bias-aligned branch); the effective field is the static bias alone.
    Returns (..., T-1, 2) physical-unit residuals for (Mx, Mz).
    """
    p = physical
    Mx, Mz = pred_phys[..., 0], pred_phys[..., 1]
    sq = torch.clamp(p.Ms**2 - Mx**2 - Mz**2, min=0.0)
    My = torch.sqrt(sq)
    M = torch.stack([Mx, My, Mz], dim=-1)
    Heff = torch.zeros_like(M)
    Heff[..., 1] = p.H0
    M_next = _trapezoidal_map_torch(M[..., :-1, :], Heff[..., :-1, :],
                                    p.dt_ml, p.alpha, p.Ms, p.gamma)
    return torch.stack([M_next[..., 0] - Mx[..., 1:],
                        M_next[..., 2] - Mz[..., 1:]], dim=-1)


@dataclass
class LossBreakdown:
    total: torch.Tensor
    reconstruction: torch.Tensor
    prediction: torch.Tensor
    physics: torch.Tensor      # normalized (dimensionless), before lambda


def total_loss(model: SurrogateModel, recon: torch.Tensor,
               pred: torch.Tensor, inputs: torch.Tensor,
               targets: torch.Tensor, lambda_phy: float) -> LossBreakdown:
    """L_total = MSE(recon, inputs) + MSE(pred, targets) + lambda * L_phy.

    The data terms act on normalized values; the physics term is computed
    from denormalized (physical-unit) predictions and scaled by 1/Ms^2 so it
    is dimensionless and invariant to the normalization parameters.
    """
    l_rec = torch.mean((recon - inputs) ** 2)
    l_pred = torch.mean((pred - targets) ** 2)
    res = physics_residuals(model.denormalize(pred), model.physical)
    l_phy = torch.mean((res / model.physical.Ms) ** 2)
    total = l_rec + l_pred + lambda_phy * l_phy
    return LossBreakdown(total=total, reconstruction=l_rec,
                         prediction=l_pred, physics=l_phy)


# ---------------------------------------------------------------------------
# data utilities and training
# ---------------------------------------------------------------------------

def macrospin_trajectory(physical: PhysicalParams, steps: int,
                         tilt: float = 0.2) -> np.ndarray:
    """Reference ringdown generated by the same trapezoidal map the physics
    loss uses: bias along +y, initial tilt toward +x.  Returns (steps, 2)
    physical-unit (Mx, Mz) samples."""
    from . import llg
    p = physical
    M = np.array([p.Ms * math.sin(tilt), p.Ms * math.cos(tilt), 0.0])
    Heff = np.array([0.0, p.H0, 0.0])
    out = np.empty((steps, 2))
    for i in range(steps):
        out[i] = (M[0], M[2])
        M = llg.macrospin_step(M, Heff, Heff, p.dt_ml, p.alpha, p.Ms, p.gamma)
    return out


def _make_windows(seqs: list[np.ndarray], input_len: int, pred_len: int,
                  stride: int) -> tuple[torch.Tensor, torch.Tensor]:
    ins, outs = [], []
    for s in seqs:
        T = len(s)
        for start in range(0, T - input_len - pred_len + 1, stride):
            ins.append(s[start:start + input_len])
            outs.append(s[start + input_len:start + input_len + pred_len])
    if not ins:
        raise ValueError("dataset sequences too short for the requested windows")
    return (torch.as_tensor(np.stack(ins), dtype=DTYPE),
            torch.as_tensor(np.stack(outs), dtype=DTYPE))


@dataclass
class TrainRecord:
    stage: int
    epoch: int
    loss: float
    reconstruction: float
    prediction: float
    physics: float


def train(model: SurrogateModel, sequences: list[np.ndarray],
          schedule: list[CurriculumStage], seed: int,
          window_stride: int = 25) -> list[TrainRecord]:
    """Curriculum training with a fixed seed; deterministic in serial mode.

    ``sequences`` are normalized (T, channels) arrays.  Windows are cut with
    a fixed stride; batch order is shuffled with a seeded generator.
    Gradients come from reverse-mode differentiation of the full unrolled
    computation including the physics residual; the optimizer is Adam with
    default moments.  A non-finite loss aborts with stage/epoch diagnostics.
    """
    torch.manual_seed(seed)
    n_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    history: list[TrainRecord] = []
    try:
        for si, stage in enumerate(schedule):
            inputs, targets = _make_windows(sequences, stage.input_len,
                                            stage.pred_len, window_stride)
            opt = torch.optim.Adam(model.parameters(), lr=stage.lr)
            gen = torch.Generator().manual_seed(seed + 1000 * si)
            n = inputs.shape[0]
            for epoch in range(stage.epochs):
                perm = torch.randperm(n, generator=gen)
                epoch_losses = []
                for b0 in range(0, n, stage.batch):
                    sel = perm[b0:b0 + stage.batch]
                    recon, pred = model(inputs[sel], stage.pred_len)
                    lb = total_loss(model, recon, pred, inputs[sel],
                                    targets[sel], stage.lambda_phy)
                    if not torch.isfinite(lb.total):
                        raise FloatingPointError(
                            f"non-finite loss at stage {si}, epoch {epoch}: "
                            f"rec={lb.reconstruction.item():.3e} "
                            f"pred={lb.prediction.item():.3e} "
                            f"phy={lb.physics.item():.3e}")
                    opt.zero_grad()
                    lb.total.backward()
                    opt.step()
                    epoch_losses.append(lb)
                last = epoch_losses[-1]
                history.append(TrainRecord(
                    stage=si, epoch=epoch, loss=last.total.item(),
                    reconstruction=last.reconstruction.item(),
                    prediction=last.prediction.item(),
                    physics=last.physics.item()))
    finally:
        torch.set_num_threads(n_threads)
    return history


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------

def save_checkpoint(path, model: SurrogateModel,
                    history: list[TrainRecord] | None = None) -> None:
    torch.save({
        "version": SurrogateModel.VERSION,
        "channels": model.channels,
        "hidden": model.hidden,
        "physical": vars(model.physical),
        "state_dict": model.state_dict(),
        "history": [vars(r) for r in (history or [])],
    }, path)


def load_checkpoint(path) -> tuple[SurrogateModel, list[TrainRecord]]:
    blob = torch.load(path, weights_only=False)
    if blob.get("version") != SurrogateModel.VERSION:
        raise ValueError(f"unsupported checkpoint version {blob.get('version')!r}")
    model = SurrogateModel(blob["channels"], blob["hidden"],
                           PhysicalParams(**blob["physical"]))
    model.load_state_dict(blob["state_dict"])
    history = [TrainRecord(**r) for r in blob["history"]]
    return model, history
