"""Free, pseudoenergy and absorbing-screen time evolution."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np

from .errors import InputError, NumericalBlowupError
from .repspace import (
    SpatialGrid,
    WaveFunction,
    as_momentum,
    as_position,
    pseudoenergy,
    to_momentum,
    to_position,
)

Profile = Literal["gaussian", "rectangular"]

# Largest allowed damping exponent V0*dt per step.
MAX_STEP_DAMPING = 5.0


@dataclass(frozen=True)
class AbsorberSpec:
    """Imaginary screen potential -i V(x), even about ``x_center``.

    The gaussian profile is V0 exp(-(x - xc)^2 / (2 w^2)); the rectangular
    one is V0 on |x - xc| <= w.
    """

    x_center: float = 0.0
    half_width: float = 1.0
    strength: float = 0.0
    profile: Profile = "gaussian"

    def __post_init__(self):
        if not np.isfinite(self.half_width) or self.half_width <= 0:
            raise InputError(f"absorber half width must be positive, got {self.half_width}")
        if not np.isfinite(self.strength) or self.strength < 0:
            raise InputError(f"absorber strength must be non-negative, got {self.strength}")
        if not np.isfinite(self.x_center):
            raise InputError("absorber center must be finite")
        if self.profile not in ("gaussian", "rectangular"):
            raise InputError(f"unknown absorber profile {self.profile!r}")

    def potential(self, x) -> np.ndarray:
        # |x - xc| keeps V(xc + d) and V(xc - d) bitwise equal
        d = np.abs(np.asarray(x, dtype=float) - self.x_center)
        if self.strength == 0.0:
            return np.zeros_like(d)
        if self.profile == "gaussian":
            u = d / self.half_width
            return self.strength * np.exp(-0.5 * u * u)
        return np.where(d <= self.half_width, self.strength, 0.0)


@dataclass(frozen=True, eq=False)
class EvolutionRecord:
    """Norm history N(t_i) of an absorbing run and the absorption rate -dN/dt."""

    times: np.ndarray
    norms: np.ndarray
    absorbed_density: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "absorbed_density", _decay_rate(self.times, self.norms))

    @property
    def absorbed(self) -> float:
        return float(self.norms[0] - self.norms[-1])

    def trapezoid_weights(self) -> np.ndarray:
        return _trapezoid_weights(self.times)


def _trapezoid_weights(t: np.ndarray) -> np.ndarray:
    w = np.empty(t.size)
    dt = np.diff(t)
    w[0] = 0.5 * dt[0]
    w[-1] = 0.5 * dt[-1]
    w[1:-1] = 0.5 * (dt[1:] + dt[:-1])
    return w


def _decay_rate(t: np.ndarray, n: np.ndarray) -> np.ndarray:
    if t.size < 3:
        return np.zeros(t.size)
    dt = np.diff(t)
    # a scalar spacing keeps the stencil exact for constant N
    if np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        return -np.gradient(n, float(t[-1] - t[0]) / (t.size - 1))
    return -np.gradient(n, t)


def free_evolve(psi: WaveFunction, t: float) -> WaveFunction:
    """exp(-i p^2 t / 2) applied in momentum space; returns the input representation."""
    phat = as_momentum(psi)
    p = phat.grid.p
    out = phat.with_amp(phat.amp * np.exp(-0.5j * t * p * p))
    return out if psi.rep == "momentum" else to_position(out)


def pseudoenergy_evolve(psi: WaveFunction, t: float) -> WaveFunction:
    """exp(-i xi t) with xi = sgn(p) p^2 / 2; equals free_evolve on p > 0."""
    phat = as_momentum(psi)
    out = phat.with_amp(phat.amp * np.exp(-1j * t * pseudoenergy(phat.grid.p)))
    return out if psi.rep == "momentum" else to_position(out)


def free_snapshots(psi: WaveFunction, times) -> Iterator[tuple[float, WaveFunction]]:
    """Yield (t, psi_t) in position space for each requested time."""
    phat = as_momentum(psi)
    half_p2 = 0.5 * phat.grid.p ** 2
    for t in np.asarray(times, dtype=float):
        yield float(t), to_position(phat.with_amp(phat.amp * np.exp(-1j * t * half_p2)))


def _step_count(t_total: float, dt: float) -> tuple[int, float]:
    if not np.isfinite(dt) or dt <= 0:
        raise InputError(f"time step must be positive, got {dt}")
    if not np.isfinite(t_total) or t_total <= 0:
        raise InputError(f"total time must be positive, got {t_total}")
    if dt > t_total * (1 + 1e-12):
        raise InputError(f"time step {dt} exceeds total time {t_total}")
    nsteps = max(1, int(np.ceil(t_total / dt - 1e-9)))
    return nsteps, t_total / nsteps


class CapStepper:
    """Strang splitting for H = p^2/2 - i V(x) with a fixed time step.

    One step applies exp(-V dt/2), the exact kinetic propagator, and exp(-V dt/2).
    """

    def __init__(self, grid: SpatialGrid, absorber: AbsorberSpec, dt: float):
        if absorber.strength * dt > MAX_STEP_DAMPING:
            raise InputError(
                f"step damping V0*dt = {absorber.strength * dt:g} exceeds {MAX_STEP_DAMPING:g}"
            )
        self.grid = grid
        self.dt = dt
        self.half_damp = np.exp(-0.5 * dt * absorber.potential(grid.x))
        self.kinetic = np.exp(-0.5j * dt * grid.p ** 2)

    def step(self, psi: WaveFunction) -> WaveFunction:
        amp = psi.amp * self.half_damp
        phat = to_momentum(psi.with_amp(amp))
        amp = to_position(phat.with_amp(phat.amp * self.kinetic)).amp * self.half_damp
        return psi.with_amp(amp)


def cap_evolve(psi: WaveFunction, t_total: float, dt: float, absorber: AbsorberSpec,
               *, callback=None) -> tuple[WaveFunction, EvolutionRecord]:
    """Propagate under the screen potential and record the norm at every step.

    If t_total is not an integer multiple of dt the step is shortened
    uniformly.  ``callback(t, psi)`` is called after every step, and once at
    t = 0.
    """
    nsteps, h = _step_count(t_total, dt)
    cur = as_position(psi)
    stepper = CapStepper(cur.grid, absorber, h)
    dx = cur.grid.dx
    times = h * np.arange(nsteps + 1)
    norms = np.empty(nsteps + 1)
    norms[0] = np.sum(np.abs(cur.amp) ** 2) * dx
    if callback is not None:
        callback(0.0, cur)
    for i in range(1, nsteps + 1):
        cur = stepper.step(cur)
        nrm = np.sum(np.abs(cur.amp) ** 2) * dx
        if not np.isfinite(nrm):
            raise NumericalBlowupError(f"non-finite amplitudes at step {i} (t = {times[i]:g})")
        norms[i] = nrm
        if callback is not None:
            callback(float(times[i]), cur)
    return cur, EvolutionRecord(times, norms)


def absorption_density(rec: EvolutionRecord):
    """Arrival density -dN/dt of an absorbing run, on the record's time axis.

    Negative roundoff values are clamped to zero; trapezoidal end weights make
    the total mass equal N(0) - N(T).
    """
    from .arrival import ArrivalDistribution

    if rec.times.size < 3:
        raise InputError(f"need at least 3 record samples, got {rec.times.size}")
    dt = np.diff(rec.times)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        raise InputError("record times must be uniformly spaced")
    dens = np.clip(rec.absorbed_density, 0.0, None)
    return ArrivalDistribution(np.array(rec.times), dens, float(dt[0]), "cap_absorption",
                               trapezoid=True)
