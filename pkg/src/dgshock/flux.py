"""Physical flux models and the Lax-Friedrichs interface flux.

Flux callables are written with plain arithmetic so they accept numpy arrays
and autodiff tensors interchangeably.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from dgshock import autodiff as ad


@dataclass(frozen=True)
class FluxModel:
    F: Callable
    dFdu: Callable
    name: str = "flux"


@dataclass(frozen=True)
class InterfaceState:
    u_minus: object  # interior trace
    u_plus: object  # exterior trace
    n: object = 1.0  # outward normal, +1 or -1 (array allowed)

    def __post_init__(self):
        if not np.all(np.abs(np.asarray(self.n)) == 1.0):
            raise ValueError("outward normal must be +1 or -1")


def advection_flux(v: float = 1.0) -> FluxModel:
    v = float(v)
    return FluxModel(F=lambda u: v * u, dFdu=lambda u: v + 0.0 * ad.value(u), name=f"advection(v={v:g})")


def burgers_flux() -> FluxModel:
    return FluxModel(F=lambda u: 0.5 * (u * u), dFdu=lambda u: u, name="burgers")


def zero_flux() -> FluxModel:
    """F = 0; turns the conservation law into a pure ODE u' = G."""
    return FluxModel(F=lambda u: 0.0 * u, dFdu=lambda u: 0.0 * ad.value(u), name="zero")


def wave_speed(model: FluxModel, u_minus, u_plus):
    """Local Lax-Friedrichs dissipation coefficient max(|F'(u-)|, |F'(u+)|)."""
    return ad.maximum(ad.absolute(model.dFdu(u_minus)), ad.absolute(model.dFdu(u_plus)))


def global_wave_speed(model: FluxModel, u) -> float:
    return float(np.max(np.abs(model.dFdu(ad.value(u)))))


def lax_friedrichs(model: FluxModel, s: InterfaceState, C=None):
    """Numerical flux already contracted with the outward normal.

    Returns ``n * (F(u-) + F(u+)) / 2 - C / 2 * (u+ - u-)``. The dissipation
    term is not multiplied by ``n``: that keeps the flux seen from the two
    sides of a face equal and opposite. ``C`` defaults to the local (Rusanov)
    estimate; pass a global bound for the classical global Lax-Friedrichs flux.
    """
    if C is None:
        C = wave_speed(model, s.u_minus, s.u_plus)
    central = 0.5 * (model.F(s.u_minus) + model.F(s.u_plus))
    return s.n * central - 0.5 * C * (s.u_plus - s.u_minus)
