"""Grids, wave functions and the x <-> p <-> xi <-> theta transform chain.

Units are hbar = m = 1.  The Fourier convention is unitary with a negative
exponent in the forward direction,

    psi~(p) = (2 pi)^(-1/2) * integral psi(x) exp(-i p x) dx,

discretised as a plain Riemann sum on the periodic lattice.  With that sign
the pseudotime eigenfunctions are exp(i theta xi) and the spectral amplitude
of a state is

    phi^(theta) = (2 pi)^(-1/2) * integral exp(-i theta xi) phi(xi) dxi.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.special import sici

from .errors import InputError, RepresentationError, ResolutionError

Rep = Literal["position", "momentum"]

SQRT_2PI = np.sqrt(2.0 * np.pi)

# Element budget for one block of the direct xi -> theta sum.
_BLOCK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic x-lattice and its conjugate momentum lattice.

    Momenta are stored in ascending order and span (-pi/dx, pi/dx].
    """

    n: int = 4096
    x_min: float = -40.0
    dx: float = 80.0 / 4096

    def __post_init__(self):
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise InputError(f"grid size must be a power of two >= 8, got {self.n}")
        if not np.isfinite(self.dx) or self.dx <= 0:
            raise InputError(f"grid spacing must be positive, got {self.dx}")
        if not np.isfinite(self.x_min):
            raise InputError("grid origin must be finite")
        object.__setattr__(self, "n", n)

    @classmethod
    def from_bounds(cls, x_min: float, x_max: float, n: int) -> "SpatialGrid":
        """Grid covering [x_min, x_max) with n points."""
        return cls(n=n, x_min=x_min, dx=(x_max - x_min) / n)

    @property
    def length(self) -> float:
        return self.n * self.dx

    @property
    def x_max(self) -> float:
        """Last lattice point (the periodic image of x_min is excluded)."""
        return self.x_min + (self.n - 1) * self.dx

    @property
    def dp(self) -> float:
        return 2.0 * np.pi / (self.n * self.dx)

    @property
    def p_max(self) -> float:
        return np.pi / self.dx

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n)
        x.flags.writeable = False
        return x

    @cached_property
    def _modes(self) -> np.ndarray:
        # integer wavenumbers -n/2+1 .. n/2, ascending
        m = np.arange(-self.n // 2 + 1, self.n // 2 + 1)
        m.flags.writeable = False
        return m

    @cached_property
    def _fft_index(self) -> np.ndarray:
        idx = self._modes % self.n
        idx.flags.writeable = False
        return idx

    @cached_property
    def p(self) -> np.ndarray:
        p = self.dp * self._modes
        p.flags.writeable = False
        return p

    @cached_property
    def _shift_phase(self) -> np.ndarray:
        ph = np.exp(-1j * self.p * self.x_min)
        ph.flags.writeable = False
        return ph

    @cached_property
    def zero_index(self) -> int:
        """Index of the p = 0 bin in the ascending momentum array."""
        return self.n // 2 - 1

    def reflect_index(self) -> np.ndarray:
        """Index map j -> j' with x_j' = -x_j (periodically), for symmetric grids."""
        j0 = -self.x_min / self.dx
        if abs(j0 - round(j0)) > 1e-9:
            raise InputError("grid is not symmetric about x = 0")
        return (2 * int(round(j0)) - np.arange(self.n)) % self.n


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Complex amplitudes on a grid, tagged with their representation."""

    grid: SpatialGrid
    rep: Rep
    amp: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.rep not in ("position", "momentum"):
            raise RepresentationError(f"unknown representation {self.rep!r}")
        amp = np.array(self.amp, dtype=complex)
        if amp.shape != (self.grid.n,):
            raise InputError(f"amplitude length {amp.shape} does not match grid size {self.grid.n}")
        amp.flags.writeable = False
        object.__setattr__(self, "amp", amp)

    @property
    def measure(self) -> float:
        return self.grid.dx if self.rep == "position" else self.grid.dp

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amp) ** 2) * self.measure)

    def normalized(self) -> "WaveFunction":
        nrm = self.norm2()
        if not np.isfinite(nrm) or nrm <= 0:
            raise InputError("cannot normalize a zero or non-finite state")
        return WaveFunction(self.grid, self.rep, self.amp / np.sqrt(nrm))

    def with_amp(self, amp: np.ndarray) -> "WaveFunction":
        return WaveFunction(self.grid, self.rep, amp)

    def _require(self, rep: Rep) -> None:
        if self.rep != rep:
            raise RepresentationError(f"expected a {rep}-space wave function, got {self.rep}")


@dataclass(frozen=True, eq=False)
class PseudoSamples:
    """Pseudoenergy representation on the nonuniform points xi_k = sgn(p) p^2 / 2.

    ``w`` are the quadrature weights |p_k| dp, so that sum(w |amp|^2) is the
    momentum-space norm without the p = 0 bin, whose mass is kept in
    ``dropped_mass``.
    """

    xi: np.ndarray
    w: np.ndarray
    amp: np.ndarray
    p: np.ndarray
    dropped_mass: float = 0.0

    def norm2(self) -> float:
        return float(np.sum(self.w * np.abs(self.amp) ** 2))


@dataclass(frozen=True)
class ThetaGrid:
    """Uniform sampling of the pseudotime (or time) axis."""

    m: int
    theta_min: float
    dtheta: float

    def __post_init__(self):
        if int(self.m) < 2:
            raise InputError(f"theta grid needs at least 2 samples, got {self.m}")
        if not np.isfinite(self.dtheta) or self.dtheta <= 0:
            raise InputError(f"theta spacing must be positive, got {self.dtheta}")
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def spanning(cls, theta_min: float, theta_max: float, m: int) -> "ThetaGrid":
        """m samples from theta_min to theta_max inclusive."""
        if theta_max <= theta_min:
            raise InputError("theta_max must exceed theta_min")
        return cls(m=m, theta_min=theta_min, dtheta=(theta_max - theta_min) / (m - 1))

    @property
    def theta_max(self) -> float:
        return self.theta_min + (self.m - 1) * self.dtheta

    @property
    def axis(self) -> np.ndarray:
        return self.theta_min + self.dtheta * np.arange(self.m)

    def shifted(self, s: float) -> "ThetaGrid":
        return ThetaGrid(self.m, self.theta_min + s, self.dtheta)


def to_momentum(psi: WaveFunction) -> WaveFunction:
    psi._require("position")
    g = psi.grid
    spec = np.fft.fft(psi.amp)[g._fft_index]
    return WaveFunction(g, "momentum", spec * g._shift_phase * (g.dx / SQRT_2PI))


def to_position(psi: WaveFunction) -> WaveFunction:
    psi._require("momentum")
    g = psi.grid
    buf = np.empty(g.n, dtype=complex)
    buf[g._fft_index] = psi.amp * np.conj(g._shift_phase)
    return WaveFunction(g, "position", np.fft.ifft(buf) * (g.n * g.dp / SQRT_2PI))


def as_momentum(psi: WaveFunction) -> WaveFunction:
    return psi if psi.rep == "momentum" else to_momentum(psi)


def as_position(psi: WaveFunction) -> WaveFunction:
    return psi if psi.rep == "position" else to_position(psi)


def pseudoenergy(p):
    """xi = sgn(p) p^2 / 2 = p |p| / 2."""
    p = np.asarray(p, dtype=float)
    return 0.5 * p * np.abs(p)


def to_pseudoenergy(psi: WaveFunction) -> PseudoSamples:
    psi._require("momentum")
    g = psi.grid
    keep = g.p != 0.0
    p = g.p[keep]
    ap = np.abs(p)
    dropped = float(np.sum(np.abs(psi.amp[~keep]) ** 2) * g.dp)
    return PseudoSamples(
        xi=pseudoenergy(p),
        w=ap * g.dp,
        amp=psi.amp[keep] / np.sqrt(ap),
        p=p,
        dropped_mass=dropped,
    )


def _direct_sum(theta: np.ndarray, xi: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """sum_k coef_k exp(-i theta_l xi_k), blocked over theta."""
    out = np.empty(theta.size, dtype=complex)
    block = max(1, _BLOCK_ELEMENTS // max(xi.size, 1))
    for start in range(0, theta.size, block):
        th = theta[start:start + block]
        out[start:start + block] = np.exp(-1j * np.multiply.outer(th, xi)) @ coef
    return out


def pseudotime_amplitude(ps: PseudoSamples, tg: ThetaGrid) -> np.ndarray:
    """Spectral amplitude phi^(theta_l) by direct nonuniform quadrature, O(n m)."""
    if ps.xi.size == 0:
        raise InputError("pseudoenergy samples are empty")
    return _direct_sum(tg.axis, ps.xi, ps.w * ps.amp) / SQRT_2PI


def step_capture_fraction(theta1: float, theta2: float, xi_max: float) -> float:
    """Fraction of a theta-indicator's norm carried by |xi| <= xi_max.

    Uses the closed form of integral |(e^{i t2 xi} - e^{i t1 xi}) / (xi sqrt(2 pi))|^2
    over the band, which involves the sine integral.
    """
    width = theta2 - theta1
    if xi_max <= 0:
        return 0.0
    si, _ = sici(width * xi_max)
    captured = (4.0 / np.pi) * (0.5 * width * si - np.sin(0.5 * width * xi_max) ** 2 / xi_max)
    return float(captured / width)


def _step_band_limit(theta1: float, theta2: float, g: SpatialGrid, horizon: float,
                     margin: float) -> float:
    # A component with pseudotime theta and |p| sits at x = -theta |p| at t = 0;
    # right movers then travel to (t - theta) p, left movers to -(theta + t) |p|.
    neg = pos = 0.0
    for th in (theta1, theta2):
        for t in (0.0, horizon):
            for x_coef in (t - th, -(th + t)):
                if x_coef < 0:
                    neg = max(neg, -x_coef)
                else:
                    pos = max(pos, x_coef)
    p_lim = g.p_max
    if neg > 0:
        p_lim = min(p_lim, margin * max(-g.x_min, 0.0) / neg)
    if pos > 0:
        p_lim = min(p_lim, margin * max(g.x_max, 0.0) / pos)
    return p_lim


def theta_step_state(theta1: float, theta2: float, g: SpatialGrid, *,
                     horizon: float = 0.0, min_capture: float = 0.99,
                     margin: float = 0.9) -> WaveFunction:
    """State whose pseudotime representation is the indicator of [theta1, theta2].

    The pseudoenergy amplitude is known in closed form,
    phi(xi) = (e^{i theta2 xi} - e^{i theta1 xi}) / (i xi sqrt(2 pi)).  Momenta
    are kept only up to the largest |p| whose components stay inside the box
    for times 0..horizon; if that band holds less than ``min_capture`` of the
    indicator's norm a ResolutionError is raised.
    """
    if not (np.isfinite(theta1) and np.isfinite(theta2)) or theta2 <= theta1:
        raise InputError(f"need theta1 < theta2, got [{theta1}, {theta2}]")
    p_lim = _step_band_limit(theta1, theta2, g, horizon, margin)
    xi_lim = 0.5 * p_lim ** 2
    captured = step_capture_fraction(theta1, theta2, xi_lim)
    if captured < min_capture:
        width = theta2 - theta1
        needed = 2.0 / (np.pi * width * (1.0 - min_capture))
        raise ResolutionError(
            f"grid band |p| <= {p_lim:.4g} (|xi| <= {xi_lim:.4g}) holds {captured:.4%} of the "
            f"theta-step norm; need {min_capture:.2%}, i.e. |xi| of order {needed:.3g} "
            f"(|p| ~ {np.sqrt(2 * needed):.3g}) for width {width:g}"
        )
    p = g.p
    xi = pseudoenergy(p)
    phi = np.empty(g.n, dtype=complex)
    nz = xi != 0.0
    phi[nz] = (np.exp(1j * theta2 * xi[nz]) - np.exp(1j * theta1 * xi[nz])) / (1j * xi[nz] * SQRT_2PI)
    phi[~nz] = (theta2 - theta1) / SQRT_2PI
    spec = np.sqrt(np.abs(p)) * phi
    spec[np.abs(p) > p_lim] = 0.0
    return to_position(WaveFunction(g, "momentum", spec)).normalized()
