"""Residual-minimisation training: L1 weak-form loss, Adam, plateau scheduler
and the time-marching loop.

Each time step fits the network so that its two SSP-RK2 stage outputs satisfy
the weak form, then advances the state with those outputs. The parameters (and
Adam moments) carry over to the next step as a warm start.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from dgshock import autodiff as ad
from dgshock.autodiff import Tensor
from dgshock.network import RDNConfig, init_params, predict, rdn_forward
from dgshock.timestep import SolverAbort, step_sizes
from dgshock.weakform import (Discretization, ProblemSpec, apply_dirichlet, assemble_residual,
                              dirichlet_mask, project)

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    initial_lr: float = 1e-3
    epochs: int = 1000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    factor: float = 0.5
    patience: int = 50
    min_lr: float = 1e-6
    seed: int = 0
    tolerance: float = 1e-8
    stage_weights: tuple = (1.0, 1.0)

    def __post_init__(self):
        self.stage_weights = tuple(float(w) for w in self.stage_weights)
        positive = ("initial_lr", "epochs", "eps", "patience", "min_lr", "tolerance")
        for key in positive:
            if not getattr(self, key) > 0:
                raise ValueError(f"{key} must be positive")
        if not 0 < self.factor < 1:
            raise ValueError("scheduler factor must lie in (0, 1)")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.min_lr > self.initial_lr:
            raise ValueError("min_lr exceeds initial_lr")
        if len(self.stage_weights) != 2 or min(self.stage_weights) < 0:
            raise ValueError("stage_weights must be two non-negative numbers")


# -- loss ------------------------------------------------------------------

def l1_loss(r, mask: np.ndarray | None = None):
    """Mean absolute residual over the rows selected by ``mask`` (all by default)."""
    if mask is None:
        return ad.absolute(r).mean() if ad.is_tensor(r) else float(np.mean(np.abs(r)))
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("loss mask selects no entries")
    if ad.is_tensor(r):
        return (ad.absolute(r) * mask.astype(float)).sum() * (1.0 / count)
    return float(np.abs(np.asarray(r)[mask]).sum() / count)


# -- Adam ------------------------------------------------------------------

@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float) -> AdamState:
    """Bias-corrected Adam update in place; clears gradients afterwards."""
    for name, p in params.items():
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise FloatingPointError(f"non-finite gradient in parameter {name!r} at Adam step {state.step + 1}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.grad = None
    return state


# -- plateau scheduler -----------------------------------------------------

@dataclass
class SchedulerState:
    lr: float
    factor: float = 0.5
    patience: int = 50
    min_lr: float = 1e-6
    best: float = math.inf
    bad_epochs: int = 0

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> SchedulerState:
        return cls(lr=cfg.initial_lr, factor=cfg.factor, patience=cfg.patience, min_lr=cfg.min_lr)


def scheduler_update(s: SchedulerState, loss: float) -> SchedulerState:
    if loss < s.best:
        s.best = loss
        s.bad_epochs = 0
    else:
        s.bad_epochs += 1
    if s.bad_epochs > s.patience:
        s.lr = max(s.lr * s.factor, s.min_lr)
        s.bad_epochs = 0
    return s


# -- one RK step -------------------------------------------------------------

@dataclass
class StepLoss:
    loss: Tensor
    stage_losses: tuple
    w0: object
    w1: object
    v1: object


def step_loss(u_t: np.ndarray, params: dict[str, Tensor], net_cfg: RDNConfig, prob: ProblemSpec,
              t: float, dt: float, disc: Discretization, stage_weights=(1.0, 1.0),
              rhs: Callable | None = None) -> StepLoss:
    """Weak-form loss of both SSP-RK2 stages.

    ``rhs(state, t)``, when given, replaces the network (used to check that
    the loss target is attainable).
    """
    mask = ~dirichlet_mask(prob, disc.mesh)

    def evaluate(state, time_):
        if rhs is not None:
            return rhs(ad.value(state), time_)
        return rdn_forward(state, params, net_cfg, disc.mesh.shape)

    u = Tensor(u_t)
    w0 = evaluate(u, t)
    v1 = apply_dirichlet(u + dt * w0, prob.bc, t + dt)
    w1 = evaluate(v1, t + dt)
    l0 = l1_loss(assemble_residual(u, w0, prob, t, disc), mask)
    l1 = l1_loss(assemble_residual(v1, w1, prob, t + dt, disc), mask)
    a0, a1 = stage_weights
    loss = a0 * ad.as_tensor(l0) + a1 * ad.as_tensor(l1)
    return StepLoss(loss, (float(ad.value(l0)), float(ad.value(l1))), w0, w1, v1)


@dataclass
class StepResult:
    u_next: np.ndarray
    history: list
    epochs: int
    final_loss: float
    converged: bool


def advance(u_t: np.ndarray, params, net_cfg: RDNConfig, prob: ProblemSpec, t: float, dt: float) -> np.ndarray:
    """SSP-RK2 update using the current network as the right-hand side."""
    w0 = predict(u_t, params, net_cfg)
    v1 = apply_dirichlet(u_t + dt * w0, prob.bc, t + dt)
    w1 = predict(v1, params, net_cfg)
    return apply_dirichlet(u_t + 0.5 * dt * (w0 + w1), prob.bc, t + dt)


def train_time_step(u_t: np.ndarray, params: dict[str, Tensor], net_cfg: RDNConfig, prob: ProblemSpec,
                    t: float, dt: float, disc: Discretization, cfg: TrainConfig,
                    adam: AdamState | None = None, sched: SchedulerState | None = None,
                    on_epoch: Callable | None = None) -> StepResult:
    """Fit ``params`` to the weak form at this step, then advance the state.

    The parameters with the lowest loss seen are kept. Running out of epochs
    is logged as a warning, not an error. A scheduler passed in keeps its
    learning rate; only its plateau tracking restarts, since losses of
    different steps are not comparable.
    """
    adam = adam if adam is not None else AdamState(cfg.beta1, cfg.beta2, cfg.eps)
    if sched is None:
        sched = SchedulerState.from_config(cfg)
    sched.best, sched.bad_epochs = math.inf, 0
    history = []
    best_loss, best_params = math.inf, None
    converged = False
    epoch = 0
    for epoch in range(1, cfg.epochs + 1):
        sl = step_loss(u_t, params, net_cfg, prob, t, dt, disc, cfg.stage_weights)
        loss = sl.loss.item()
        if not math.isfinite(loss):
            raise SolverAbort(f"non-finite training loss at t={t:.6g}, epoch {epoch}")
        history.append({"t": t, "epoch": epoch, "loss": loss, "lr": sched.lr})
        if on_epoch is not None:
            on_epoch(history[-1])
        if loss < best_loss:
            best_loss = loss
            best_params = {k: p.data.copy() for k, p in params.items()}
        if loss < cfg.tolerance:
            converged = True
            break
        sl.loss.backward()
        adam_step(params, adam, sched.lr)
        scheduler_update(sched, loss)
    if best_params is not None:
        for k, p in params.items():
            p.data[...] = best_params[k]
            p.grad = None
    if not converged:
        log.warning("t=%.4g: no convergence in %d epochs, best loss %.3e", t, cfg.epochs, best_loss)
    u_next = advance(u_t, params, net_cfg, prob, t, dt)
    return StepResult(u_next, history, epoch, best_loss, converged)


@dataclass
class NetworkRun:
    snapshots: list
    times: list
    epochs_per_step: list
    final_losses: list
    history: list
    params: dict
    wall_time: float


def network_solve(prob: ProblemSpec, disc: Discretization, dt: float, T: float, snapshot_times=(),
                  net_cfg: RDNConfig | None = None, cfg: TrainConfig | None = None,
                  params: dict | None = None, on_epoch: Callable | None = None,
                  on_step: Callable | None = None) -> NetworkRun:
    """March ``prob`` to ``T`` with per-step network training."""
    net_cfg = net_cfg or RDNConfig()
    cfg = cfg or TrainConfig()
    params = params if params is not None else init_params(net_cfg, cfg.seed)
    adam = AdamState(cfg.beta1, cfg.beta2, cfg.eps)
    sched = SchedulerState.from_config(cfg)
    times = sorted(set(float(s) for s in snapshot_times))
    if any(s < 0 or s > T + 1e-12 for s in times):
        raise ValueError(f"snapshot times {times} must lie in [0, {T}]")
    start = time.perf_counter()
    u = project(prob, disc)
    snapshots, epochs, losses, history = {}, [], [], []
    t = 0.0
    for target in times + ([T] if not times or times[-1] < T else []):
        for step in step_sizes(t, target, dt):
            res = train_time_step(u, params, net_cfg, prob, t, step, disc, cfg, adam, sched, on_epoch)
            u = res.u_next
            if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 1e6:
                raise SolverAbort(f"network solution blew up at t={t + step:.6g}")
            epochs.append(res.epochs)
            losses.append(res.final_loss)
            history.extend(res.history)
            t = t + step
            if on_step is not None:
                on_step(u, t, res)
        t = target
        snapshots[target] = u.copy()
    out_times = times if times else [T]
    return NetworkRun([snapshots[s] for s in out_times], out_times, epochs, losses, history, params,
                      time.perf_counter() - start)


def config_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["stage_weights"] = list(cfg.stage_weights)
    return d
