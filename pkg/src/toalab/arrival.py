"""Arrival-time distributions: pseudotime spectral density, POVM density,
screen absorption, and the classical flight-time formula."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InputError, UndefinedArrivalError
from .repspace import (
    SQRT_2PI,
    ThetaGrid,
    WaveFunction,
    _direct_sum,
    as_momentum,
    as_position,
    pseudotime_amplitude,
    to_position,
    to_pseudoenergy,
)

Kind = Literal["theta_spectral", "povm", "cap_absorption", "classical"]


@dataclass(frozen=True, eq=False)
class ArrivalDistribution:
    """Density samples on a uniform theta- or t-axis.

    Each sample owns the bin [axis - daxis/2, axis + daxis/2]; with
    ``trapezoid`` set the two end bins are clipped to the axis range, which
    gives trapezoidal quadrature weights.
    """

    axis: np.ndarray
    density: np.ndarray
    daxis: float
    kind: Kind
    trapezoid: bool = False

    def __post_init__(self):
        if self.axis.shape != self.density.shape or self.axis.size == 0:
            raise InputError("axis and density must be nonempty and of equal length")

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.axis.size, self.daxis)
        if self.trapezoid and w.size > 1:
            w[0] = w[-1] = 0.5 * self.daxis
        return w

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        lo = self.axis - 0.5 * self.daxis
        hi = self.axis + 0.5 * self.daxis
        if self.trapezoid:
            lo[0] = self.axis[0]
            hi[-1] = self.axis[-1]
        return lo, hi

    def mass(self) -> float:
        return float(np.sum(self.density * self.weights))

    def values_at(self, axis: np.ndarray) -> np.ndarray:
        """Linear interpolation, zero outside the sampled range."""
        return np.interp(axis, self.axis, self.density, left=0.0, right=0.0)


def window_probability(d: ArrivalDistribution, t0: float, t1: float) -> float:
    """Mass in [t0, t1], counting the overlapping fraction of partial bins."""
    if not t0 < t1:
        raise InputError(f"need t0 < t1, got [{t0}, {t1}]")
    lo, hi = d.edges
    overlap = np.clip(np.minimum(hi, t1) - np.maximum(lo, t0), 0.0, None)
    return float(np.sum(d.density * overlap))


def l1_distance(a: ArrivalDistribution, b: ArrivalDistribution) -> float:
    """L1 distance; distributions on different axes are compared on a merged fine axis."""
    if a.axis.size == b.axis.size and np.array_equal(a.axis, b.axis):
        return float(np.sum(np.abs(a.density - b.density) * a.weights))
    step = min(a.daxis, b.daxis)
    lo = min(a.axis[0], b.axis[0])
    hi = max(a.axis[-1], b.axis[-1])
    grid = lo + step * np.arange(int(np.ceil((hi - lo) / step)) + 1)
    diff = np.abs(a.values_at(grid) - b.values_at(grid))
    return float(np.trapezoid(diff, grid))


def kijowski_theta_density(psi: WaveFunction, tg: ThetaGrid) -> ArrivalDistribution:
    """|phi^(theta)|^2, the spectral density of the pseudotime operator."""
    amp = pseudotime_amplitude(to_pseudoenergy(as_momentum(psi)), tg)
    return ArrivalDistribution(tg.axis, np.abs(amp) ** 2, tg.dtheta, "theta_spectral")


def mover_amplitudes(psi: WaveFunction, tg: ThetaGrid) -> tuple[np.ndarray, np.ndarray]:
    """Right- and left-mover arrival amplitudes A+(t), A-(t).

    Both carry the physical phase exp(-i p^2 t / 2), so each branch shifts
    covariantly under free evolution.
    """
    phat = as_momentum(psi)
    p = phat.grid.p
    dp = phat.grid.dp
    out = []
    for mask in (p > 0, p < 0):
        q = np.abs(p[mask])
        coef = np.sqrt(q) * dp * phat.amp[mask]
        out.append(_direct_sum(tg.axis, 0.5 * q * q, coef) / SQRT_2PI)
    return out[0], out[1]


def povm_density(psi: WaveFunction, tg: ThetaGrid) -> ArrivalDistribution:
    """Incoherent sum |A+(t)|^2 + |A-(t)|^2 of the two mover branches."""
    a_plus, a_minus = mover_amplitudes(psi, tg)
    dens = np.abs(a_plus) ** 2 + np.abs(a_minus) ** 2
    return ArrivalDistribution(tg.axis, dens, tg.dtheta, "povm")


def alias_free_half_width(psi: WaveFunction, tail: float = 1e-9) -> float:
    """Largest |theta| before the periodic box lets the packet arrive a second time.

    A component at x0 with speed |p| wraps around the box of length L and
    reaches the origin again after (L - |x0|) / |p|; beyond that the discrete
    spectral sum shows ghost images.
    """
    pos = as_position(psi)
    g = pos.grid
    phat = as_momentum(pos)

    def upper(values, weights):
        order = np.argsort(values)
        cdf = np.cumsum(weights[order])
        return float(values[order][np.searchsorted(cdf, (1 - tail) * cdf[-1])])

    p_hi = upper(np.abs(g.p), np.abs(phat.amp) ** 2)
    x_ext = upper(np.abs(g.x), np.abs(pos.amp) ** 2)
    return max(g.length - x_ext, 0.0) / max(p_hi, g.dp)


def auto_theta_grid(psi: WaveFunction, *, target: float = 0.999, half_width: float = 8.0,
                    dtheta: float | None = None, max_samples: int = 1 << 16,
                    max_doublings: int = 12) -> ThetaGrid:
    """Symmetric theta window, doubled until the spectral density holds ``target`` mass.

    The spacing resolves the pseudoenergy spread of the state.  The window
    never exceeds the alias-free half width, and doubling stops early if it
    would need more than ``max_samples`` points.
    """
    ps = to_pseudoenergy(as_momentum(psi))
    if dtheta is None:
        mass = ps.w * np.abs(ps.amp) ** 2
        sig = ps.xi[mass > 1e-14 * mass.max()]
        span = max(float(sig.max() - sig.min()), 1.0)
        dtheta = np.pi / (4.0 * span)
    w_max = alias_free_half_width(psi)
    w = min(half_width, w_max)
    tg = ThetaGrid.spanning(-w, w, 2 * int(np.ceil(w / dtheta)) + 1)
    for _ in range(max_doublings):
        amp = pseudotime_amplitude(ps, tg)
        if np.sum(np.abs(amp) ** 2) * tg.dtheta >= target or w >= w_max:
            break
        w_new = min(2 * w, w_max)
        m = 2 * int(np.ceil(w_new / dtheta)) + 1
        if m > max_samples:
            break
        w = w_new
        tg = ThetaGrid.spanning(-w, w, m)
    return tg


def classical_toa(x: float, p: float) -> tuple[float, float | None, bool]:
    """Classical pseudotime -x/|p| against the actual forward arrival time at 0.

    Returns (theta_value, true_arrival or None, false_flag); the flag is set
    whenever the pseudotime value is not the real arrival time.
    """
    if p == 0:
        raise UndefinedArrivalError("arrival time is undefined for zero momentum")
    theta = -x / abs(p) + 0.0
    t_true = -x / p
    true_arrival = t_true if t_true > 0 else None
    return theta, true_arrival, true_arrival is None or theta != true_arrival


def classical_false_fraction(x: np.ndarray, p: np.ndarray) -> float:
    """Fraction of a classical ensemble whose pseudotime value is false."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(p == 0):
        raise UndefinedArrivalError("ensemble contains zero momenta")
    flags = [classical_toa(xi, pi)[2] for xi, pi in zip(x, p)]
    return float(np.mean(flags))


def spectral_derivative(psi: WaveFunction) -> WaveFunction:
    """d psi / dx in position space; the unpaired Nyquist mode is dropped."""
    phat = as_momentum(psi)
    g = phat.grid
    factor = 1j * g.p
    factor[-1] = 0.0  # p = +pi/dx
    return to_position(phat.with_amp(phat.amp * factor))


def _real_derivative(f: np.ndarray, length: float) -> np.ndarray:
    k = 2.0 * np.pi / length * np.arange(f.size // 2 + 1)
    k[-1] = 0.0  # Nyquist
    return np.fft.irfft(1j * k * np.fft.rfft(f), n=f.size)


def current_field(psi: WaveFunction) -> np.ndarray:
    """J(x_j) = Im(psi* dpsi/dx) = Re(psi) (Im psi)' - Im(psi) (Re psi)'.

    The real and imaginary parts are differentiated separately, so a real
    state has exactly zero current.
    """
    pos = as_position(psi)
    re, im = pos.amp.real, pos.amp.imag
    L = pos.grid.length
    return re * _real_derivative(im, L) - im * _real_derivative(re, L)


def probability_current(psi: WaveFunction, x_probe: float) -> float:
    g = psi.grid
    if not g.x_min <= x_probe <= g.x_max:
        raise InputError(f"probe x = {x_probe} lies outside the grid [{g.x_min}, {g.x_max}]")
    return float(np.interp(x_probe, g.x, current_field(psi)))
