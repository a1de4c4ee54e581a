"""Discretization multipliers f, g, h and the operators they induce.

A :class:`MultiplierSet` fixes the symbols

* ``f``: the Laplacian correction, ``Delta_eps`` has symbol ``-|k|^2 f(eps k)``.
  Inside the box ``|x_l| <= L0`` it equals a profile ``f_tilde``; outside it is
  infinite ("blocked"), so the heat semigroup kills those modes.
* ``g``: the difference quotient, ``D^eps_j`` has symbol ``k_j g(eps k_j)`` with
  ``g(y) = (exp(i a y) - exp(-i b y)) / ((a + b) y)``.
* ``h``: the noise cutoff, the indicator of the closed ball ``|x| <= L0/2``.

Blocked values are represented by ``math.inf`` throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .spectral import SpectralField, ksq, wavevector_array

PRESETS = ("finite_difference", "galerkin", "continuum")

# relative slack for lattice points sitting exactly on a box or ball boundary
_TIE = 1e-12


def _fd_profile(x: np.ndarray) -> np.ndarray:
    """Finite-difference profile ``4 sum sin^2(x_l/2) / |x|^2`` with value 1 at 0."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    num = 4.0 * np.sum(np.sin(0.5 * x) ** 2, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(r2 > 0, num / np.where(r2 > 0, r2, 1.0), 1.0)
    return out


@dataclass(frozen=True)
class MultiplierSet:
    """The discretization triple (f, g, h).

    Parameters
    ----------
    preset : str
        ``finite_difference``, ``galerkin`` or ``continuum``.
    a, b : float
        Stencil offsets of the difference quotient, ``a, b >= 0`` and ``a + b > 0``.
    L0 : float
        Box half-width; the noise cutoff has radius ``L0 / 2``.
    f_tilde : callable, optional
        Replaces the preset profile. Must be even with ``f_tilde(0) = 1``; its
        derivative bounds are a documented precondition and are not checked.
    """

    preset: str = "finite_difference"
    a: float = 1.0
    b: float = 0.0
    L0: float = 2.0
    f_tilde: Callable | None = field(default=None, compare=True)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; expected one of {PRESETS}")
        if self.a < 0 or self.b < 0 or self.a + self.b <= 0:
            raise ValueError("need a, b >= 0 and a + b > 0")
        if self.L0 <= 0:
            raise ValueError("L0 must be positive")
        if self.preset == "finite_difference" and self.f_tilde is None and 3 * self.L0 >= 2 * math.pi:
            raise ValueError("finite-difference profile vanishes inside the 3*L0 box; need L0 < 2*pi/3")

    @property
    def h_radius(self) -> float:
        return 0.5 * self.L0

    @property
    def c_f(self) -> float:
        """Lower bound of the profile on ``{|x_l| <= 3 L0}``."""
        if self.f_tilde is not None:
            R = 3 * self.L0
            s = np.linspace(-R, R, 61)
            pts = np.stack(np.meshgrid(s, s, s, indexing="ij"), axis=-1)
            return float(np.min(self.f_tilde(pts)))
        if self.preset == "finite_difference":
            # sum sin^2(y)/sum y^2 >= min_l sin^2(y_l)/y_l^2, decreasing in |y_l| < pi
            y = 1.5 * self.L0
            return (math.sin(y) / y) ** 2
        return 1.0

    def profile(self, x: np.ndarray) -> np.ndarray:
        if self.f_tilde is not None:
            return np.asarray(self.f_tilde(x), dtype=float)
        if self.preset == "finite_difference":
            return _fd_profile(x)
        return np.ones(np.shape(x)[:-1])


def eval_f(ms: MultiplierSet, x) -> np.ndarray | float:
    """``f(x)`` for points ``x`` (last axis of length 3); ``inf`` outside the box."""
    x = np.asarray(x, dtype=float)
    if ms.preset == "continuum":
        out = np.ones(x.shape[:-1])
    else:
        inside = np.all(np.abs(x) <= ms.L0 * (1 + _TIE), axis=-1)
        out = np.where(inside, ms.profile(x), np.inf)
    return float(out) if out.ndim == 0 else out


def eval_g(ms: MultiplierSet, y) -> np.ndarray | complex:
    """Difference-quotient symbol; ``i`` at ``y = 0`` and everywhere for the continuum preset."""
    y = np.asarray(y, dtype=float)
    if ms.preset == "continuum":
        out = np.full(y.shape, 1j)
    else:
        a, b = ms.a, ms.b
        small = np.abs(y) < 1e-5
        ys = np.where(small, 1.0, y)
        exact = (np.exp(1j * a * ys) - np.exp(-1j * b * ys)) / ((a + b) * ys)
        series = 1j - 0.5 * (a - b) * y - 1j * (a**3 + b**3) / (6 * (a + b)) * y**2
        out = np.where(small, series, exact)
    return complex(out) if out.ndim == 0 else out


def eval_h(ms: MultiplierSet, x) -> np.ndarray | float:
    """Indicator of the closed ball ``|x| <= L0/2``."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    out = (r2 <= ms.h_radius**2 * (1 + _TIE)).astype(float)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- lattice symbols


@lru_cache(maxsize=128)
def lattice_symbols(N: int, eps: float, ms: MultiplierSet) -> dict:
    """Per-mode symbol arrays on the cube ``|k_l| <= N`` (cached, read-only).

    Keys: ``f``, ``lam`` (``|k|^2 f``, inf where blocked), ``h``, ``g`` (shape
    ``(3, L, L, L)``, the per-axis ``k_j g(eps k_j)``) and ``blocked``.
    """
    kv = wavevector_array(N)
    x = eps * np.moveaxis(kv, 0, -1)
    f = np.asarray(eval_f(ms, x), dtype=float)
    q = ksq(N)
    lam = np.where(np.isinf(f), np.inf, q * np.where(np.isinf(f), 0.0, f))
    h = np.asarray(eval_h(ms, x), dtype=float)
    g = kv * np.asarray(eval_g(ms, eps * kv))
    out = {"f": f, "lam": lam, "h": h, "g": g, "blocked": np.isinf(f)}
    for v in out.values():
        v.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def continuum_symbols(N: int) -> dict:
    kv = wavevector_array(N)
    out = {"lam": ksq(N), "g": 1j * kv}
    for v in out.values():
        v.setflags(write=False)
    return out


def semigroup_multiplier(lam: np.ndarray, t: float) -> np.ndarray:
    """``exp(-t lam)`` with the blocked convention (0 for ``t > 0``, 1 at ``t = 0``)."""
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    if t == 0:
        return np.ones_like(lam)
    return np.exp(-t * lam)


def phi1(lam: np.ndarray, dt: float) -> np.ndarray:
    """``(1 - exp(-lam dt)) / lam``: exact integral of the semigroup over one step."""
    lam = np.asarray(lam, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = -np.expm1(-lam * dt) / lam
    out = np.where(lam == 0, dt, out)
    return np.where(np.isinf(lam), 0.0, out)


def apply_semigroup(u: SpectralField, t: float, eps: float, ms: MultiplierSet) -> SpectralField:
    """Heat semigroup of ``Delta_eps``."""
    lam = lattice_symbols(u.N, eps, ms)["lam"]
    return SpectralField(u.coeffs * semigroup_multiplier(lam, t))


def apply_Deps(u: SpectralField, j: int, eps: float, ms: MultiplierSet) -> SpectralField:
    """Difference operator along axis ``j`` (0-based)."""
    if j not in (0, 1, 2):
        raise ValueError("axis must be 0, 1 or 2")
    return SpectralField(u.coeffs * lattice_symbols(u.N, eps, ms)["g"][j])


def apply_D(u: SpectralField, j: int) -> SpectralField:
    """Exact partial derivative along axis ``j``."""
    return SpectralField(u.coeffs * continuum_symbols(u.N)["g"][j])


def apply_Heps(u: SpectralField, eps: float, ms: MultiplierSet) -> SpectralField:
    return SpectralField(u.coeffs * lattice_symbols(u.N, eps, ms)["h"])


def shift(u: SpectralField, s) -> SpectralField:
    """Translate: returns ``x -> u(x + s)``."""
    kv = wavevector_array(u.N)
    phase = np.exp(1j * np.tensordot(np.asarray(s, dtype=float), kv, axes=(0, 0)))
    return SpectralField(u.coeffs * phase)


def default_N(eps: float, ms: MultiplierSet) -> int:
    """Truncation whose cube exactly matches the box ``|eps k_l| <= L0``."""
    return int(math.floor(ms.L0 / eps * (1 + _TIE)))


@dataclass(frozen=True)
class Operators:
    """Laplacian and difference symbols on a fixed cube.

    ``approx`` builds ``Delta_eps``/``D^eps``; ``exact`` builds the continuum
    Laplacian and derivative on all stored modes.
    """

    N: int
    lam: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    label: str = "approx"

    @classmethod
    def approx(cls, N: int, eps: float, ms: MultiplierSet) -> "Operators":
        s = lattice_symbols(N, eps, ms)
        return cls(N, s["lam"], s["g"], "approx")

    @classmethod
    def exact(cls, N: int) -> "Operators":
        s = continuum_symbols(N)
        return cls(N, s["lam"], s["g"], "exact")

    def decay(self, dt: float) -> np.ndarray:
        return semigroup_multiplier(self.lam, dt)

    def phi1(self, dt: float) -> np.ndarray:
        return phi1(self.lam, dt)

    def D(self, u: SpectralField, j: int) -> SpectralField:
        return SpectralField(u.coeffs * self.g[j])

    def div_rows(self, Q: SpectralField) -> SpectralField:
        """``sum_j D_j Q^{a j}`` for a tensor field with lead ``(..., 3, 3)``."""
        return SpectralField(np.sum(Q.coeffs * self.g, axis=-4))

    def etd_step(self, u: SpectralField, source: SpectralField, dt: float) -> SpectralField:
        """Exponential Euler: exact for a source frozen over the step."""
        return SpectralField(self.decay(dt) * u.coeffs + self.phi1(dt) * source.coeffs)
