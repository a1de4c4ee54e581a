"""Coupled Ornstein-Uhlenbeck stochastic convolutions.

``X`` solves ``dX = Delta_eps X dt + P H_eps dW`` and ``Xbar`` solves the same
equation with the exact Laplacian, both driven by one cylindrical Wiener
process. Per Fourier mode the pair is a two-dimensional OU process with rates
``lam = |k|^2 f(eps k)`` and ``lam_bar = |k|^2``, stepped exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .discrete import MultiplierSet, eval_f, eval_h, lattice_symbols
from .spectral import SpectralField, ksq, projector_symbol

KINDS = ("approx_approx", "exact_exact", "cross")


@dataclass(frozen=True)
class NoiseConfig:
    """Parameters of the coupled noise.

    Normals are drawn on the cube of half-width ``draw_radius``. By default
    that is the smallest cube holding both the noise support ``|eps k| <= L0/2``
    and nothing beyond ``N``, so once ``N`` covers the support the draws no
    longer depend on ``N``. Passing ``noise_radius`` fixes the draw cube
    instead; runs sharing it (and the seed) see the same normals at every
    shared mode whatever ``N`` and ``eps`` are.

    The exact-rate process is built from the first normal alone, so with a
    common draw cube ``Xbar`` is driven by the same white noise for every
    ``eps`` wherever the cutoffs agree.
    """

    N: int
    eps: float
    ms: MultiplierSet
    noise_radius: int | None = None
    batch: tuple = ()

    @property
    def support_radius(self) -> int:
        return int(math.floor(self.ms.h_radius / self.eps * (1 + 1e-12)))

    @property
    def draw_radius(self) -> int:
        need = min(self.N, self.support_radius)
        if self.noise_radius is None:
            return need
        R = int(self.noise_radius)
        if R < need:
            raise ValueError(f"noise_radius {R} misses modes of the noise support (need at least {need})")
        return R

    @property
    def embed_radius(self) -> int:
        return min(self.N, self.draw_radius)


@dataclass(frozen=True)
class OUState:
    """Snapshot of ``(X, Xbar)`` at time ``t``.

    The generator is shared between successive states, so a state should be
    advanced at most once.
    """

    t: float
    X: SpectralField
    Xbar: SpectralField
    cfg: NoiseConfig
    rng: np.random.Generator

    @property
    def eps(self) -> float:
        return self.cfg.eps

    @property
    def ms(self) -> MultiplierSet:
        return self.cfg.ms


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def hermitian_normal(rng: np.random.Generator, N: int, radius: int, lead: tuple) -> np.ndarray:
    """Complex normals with ``E[z(k) z(-k)] = 1``, ``E[z(k) z(k)] = 0`` and ``z(-k) = conj z(k)``."""
    L = 2 * radius + 1
    raw = rng.standard_normal(lead + (2, L, L, L))
    z = raw[..., 0, :, :, :] + 1j * raw[..., 1, :, :, :]
    z = 0.5 * (z + np.conj(z[..., ::-1, ::-1, ::-1]))
    z[..., radius, radius, radius] = 0.0
    if radius > N:
        s = slice(radius - N, radius + N + 1)
        z = z[..., s, s, s]
    return z


def _rates(cfg: NoiseConfig):
    """Rates, cutoff and support on the inner cube of half-width ``embed_radius``."""
    r = cfg.embed_radius
    c = slice(cfg.N - r, cfg.N + r + 1)
    sym = lattice_symbols(cfg.N, cfg.eps, cfg.ms)
    h = sym["h"][c, c, c]
    kk = ksq(cfg.N)[c, c, c]
    support = (h > 0) & (kk > 0)
    # off the noise support the rates are irrelevant; 1.0 keeps the arithmetic finite
    q = np.where(support, kk, 1.0)
    lam = np.where(support, sym["lam"][c, c, c], 1.0)
    return lam, q, h, support


def _embed(cfg: NoiseConfig, x: np.ndarray) -> np.ndarray:
    r, N = cfg.embed_radius, cfg.N
    if r == N:
        return x
    out = np.zeros(x.shape[:-3] + (2 * N + 1,) * 3, dtype=x.dtype)
    c = slice(N - r, N + r + 1)
    out[..., c, c, c] = x
    return out


def _cholesky(v1, v2, c12, equal):
    # exact-rate component first: Xbar depends on the first normal only
    a = np.sqrt(v2)
    b1 = np.where(equal, a, c12 / a)
    b2 = np.where(equal, 0.0, np.sqrt(np.maximum(v1 - b1 * b1, 0.0)))
    return a, b1, b2


def _draw_pair(cfg: NoiseConfig, rng: np.random.Generator, v1, v2, c12):
    lam, q, h, support = _rates(cfg)
    equal = lam == q
    a, b1, b2 = _cholesky(v1, v2, c12, equal)
    lead = tuple(cfg.batch) + (3,)
    r = cfg.embed_radius
    z1 = hermitian_normal(rng, r, cfg.draw_radius, lead)
    z2 = hermitian_normal(rng, r, cfg.draw_radius, lead)
    hz = np.where(support, h, 0.0)
    P = projector_symbol(r)
    w1 = np.einsum("ijxyz,...jxyz->...ixyz", P, z1)
    w2 = np.einsum("ijxyz,...jxyz->...ixyz", P, z2)
    xib = hz * (a * w1)
    # identical rates give the identical process, bit for bit
    xi = np.where(equal, xib, hz * (b1 * w1 + b2 * w2))
    return xi, xib


def init_stationary(cfg: NoiseConfig, seed_or_rng) -> OUState:
    """Draw ``(X, Xbar)`` from their joint stationary law."""
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else make_rng(seed_or_rng)
    lam, q, _, _ = _rates(cfg)
    xi, xib = _draw_pair(cfg, rng, 0.5 / lam, 0.5 / q, 1.0 / (lam + q))
    return OUState(0.0, SpectralField(_embed(cfg, xi)), SpectralField(_embed(cfg, xib)), cfg, rng)


def init_zero(cfg: NoiseConfig, seed_or_rng) -> OUState:
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else make_rng(seed_or_rng)
    z = SpectralField.zeros(cfg.N, tuple(cfg.batch) + (3,))
    return OUState(0.0, z, z.copy(), cfg, rng)


def draw_increments(state: OUState, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact stochastic increments ``(xi, xi_bar)`` of one step of length ``dt``.

    Arrays cover only the inner cube of half-width ``cfg.embed_radius``;
    every mode outside it carries no noise.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    lam, q, _, _ = _rates(state.cfg)
    v1 = -np.expm1(-2 * lam * dt) / (2 * lam)
    v2 = -np.expm1(-2 * q * dt) / (2 * q)
    c12 = -np.expm1(-(lam + q) * dt) / (lam + q)
    return _draw_pair(state.cfg, state.rng, v1, v2, c12)


def decay_factors(cfg: NoiseConfig, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode decay over ``dt`` on the inner cube (zero off the noise support)."""
    lam, q, _, support = _rates(cfg)
    return np.where(support, np.exp(-lam * dt), 0.0), np.where(support, np.exp(-q * dt), 0.0)


def _inner_update(cfg: NoiseConfig, X: np.ndarray, d: np.ndarray, xi: np.ndarray) -> np.ndarray:
    r, N = cfg.embed_radius, cfg.N
    c = slice(N - r, N + r + 1)
    if r == N:
        return d * X + xi
    out = np.zeros_like(X)
    out[..., c, c, c] = d * X[..., c, c, c] + xi
    return out


def advance_with(state: OUState, dt: float, xi: np.ndarray, xib: np.ndarray) -> OUState:
    """Advance using increments already drawn by :func:`draw_increments`."""
    d, db = decay_factors(state.cfg, dt)
    X = SpectralField(_inner_update(state.cfg, state.X.coeffs, d, xi))
    Xb = SpectralField(_inner_update(state.cfg, state.Xbar.coeffs, db, xib))
    return replace(state, t=state.t + dt, X=X, Xbar=Xb)


def advance(state: OUState, dt: float) -> OUState:
    xi, xib = draw_increments(state, dt)
    return advance_with(state, dt, xi, xib)


def covariance_oracle(k, t: float, s: float, i: int, j: int, kind: str, eps: float,
                      ms: MultiplierSet) -> float:
    """``E[X_t^i(k) X_s^j(-k)]`` for the stationary processes (components 0-based)."""
    k = np.asarray(k, dtype=float)
    if not np.any(k):
        raise ValueError("the zero mode carries no noise")
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    q = float(k @ k)
    f = eval_f(ms, eps * k)
    h = eval_h(ms, eps * k)
    if h == 0:
        return 0.0
    Pij = (1.0 if i == j else 0.0) - k[i] * k[j] / q
    lam = q * f
    if kind == "approx_approx":
        return float(np.exp(-lam * abs(t - s)) * h * h * Pij / (2 * lam))
    if kind == "exact_exact":
        return float(np.exp(-q * abs(t - s)) * h * h * Pij / (2 * q))
    rate = q if t <= s else lam
    return float(np.exp(-rate * abs(t - s)) * h * h * Pij / (q * (f + 1.0)))


__all__ = [
    "KINDS",
    "NoiseConfig",
    "OUState",
    "make_rng",
    "init_stationary",
    "init_zero",
    "draw_increments",
    "advance",
    "advance_with",
    "decay_factors",
    "covariance_oracle",
]
