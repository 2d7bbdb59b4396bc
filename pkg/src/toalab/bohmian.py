"""Bohmian trajectories dx/dt = J / |psi|^2 integrated through a stream of snapshots."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .arrival import spectral_derivative
from .errors import InputError, NodeProximityError
from .repspace import WaveFunction, as_position

NODE_FLOOR = 1e-12


@dataclass(eq=False)
class Trajectories:
    times: np.ndarray
    positions: np.ndarray  # (n_times, n_starts); NaN after truncation
    truncated: np.ndarray  # bool per trajectory
    errors: list[str] = field(default_factory=list)

    def min_abs(self) -> np.ndarray:
        return np.nanmin(np.abs(self.positions), axis=0)


class _Field:
    __slots__ = ("x0", "dx", "n", "psi", "dpsi")

    def __init__(self, wf: WaveFunction):
        pos = as_position(wf)
        g = pos.grid
        self.x0, self.dx, self.n = g.x_min, g.dx, g.n
        self.psi = pos.amp
        self.dpsi = spectral_derivative(pos).amp

    def mix(self, other: "_Field") -> "_Field":
        out = object.__new__(_Field)
        out.x0, out.dx, out.n = self.x0, self.dx, self.n
        out.psi = 0.5 * (self.psi + other.psi)
        out.dpsi = 0.5 * (self.dpsi + other.dpsi)
        return out

    def velocity(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Velocity at x and the interpolated density |psi|^2."""
        s = (x - self.x0) / self.dx
        j = np.floor(s).astype(int)
        f = s - j
        j0 = j % self.n
        j1 = (j + 1) % self.n
        psi = (1 - f) * self.psi[j0] + f * self.psi[j1]
        dpsi = (1 - f) * self.dpsi[j0] + f * self.dpsi[j1]
        rho = np.abs(psi) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.imag(np.conj(psi) * dpsi) / rho
        return v, rho


def bohmian_trajectories(snapshots: Iterable[tuple[float, WaveFunction]], starts,
                         *, node_floor: float = NODE_FLOOR, strict: bool = False) -> Trajectories:
    """Integrate guidance-equation trajectories with the explicit midpoint rule.

    The field at a half step is the average of the neighbouring snapshots.  A
    trajectory that meets |psi|^2 < ``node_floor`` is stopped there and an
    error message is recorded (raised instead when ``strict``).
    """
    x = np.array(starts, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise InputError("starts must be a nonempty 1-D sequence")
    it = iter(snapshots)
    try:
        t_prev, wf = next(it)
    except StopIteration:
        raise InputError("no snapshots supplied") from None
    prev = _Field(wf)
    _, rho = prev.velocity(x)
    if np.any(rho < node_floor):
        raise NodeProximityError("a start point lies in a near-node region")
    alive = np.ones(x.size, dtype=bool)
    times = [t_prev]
    rows = [x.copy()]
    errors: list[str] = []
    for t, wf in it:
        cur = _Field(wf)
        dt = t - t_prev
        x = np.where(alive, x, 0.0)
        v0, rho0 = prev.velocity(x)
        xh = x + 0.5 * dt * np.where(alive, v0, 0.0)
        vh, rhoh = prev.mix(cur).velocity(xh)
        xn = x + dt * vh
        bad = alive & ((rho0 < node_floor) | (rhoh < node_floor) | ~np.isfinite(xn))
        if np.any(bad):
            for k in np.flatnonzero(bad):
                msg = f"trajectory {k} reached |psi|^2 < {node_floor:g} near x = {x[k]:.6g} at t = {t_prev:.6g}"
                if strict:
                    raise NodeProximityError(msg)
                errors.append(msg)
            alive &= ~bad
        x = np.where(alive, xn, np.nan)
        times.append(t)
        rows.append(x.copy())
        t_prev, prev = t, cur
    return Trajectories(np.array(times), np.array(rows), ~alive, errors)
