"""Littlewood-Paley blocks, Besov norms and Bony paraproducts on the torus.

The radial profile ``rho`` equals 1 on ``r <= 1`` and 0 on ``r >= 2`` with the
smooth transition ``s(x) = e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)})``. Block ``-1``
uses ``chi(xi) = rho(2|xi|)`` and block ``j >= 0`` uses ``theta(2^{-j} xi)``
with ``theta(xi) = rho(|xi|) - rho(2|xi|)``, so block ``j`` lives on the
annulus ``2^{j-1} < |xi| < 2^{j+1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from .spectral import (
    SpectralField,
    dealiased_product,
    ksq,
    product_grid,
    projector_symbol,
    to_physical,
    to_spectral,
)


def _transition(x: np.ndarray, sharpness: float) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.exp(-sharpness / x)
        b = np.exp(-sharpness / (1.0 - x))
        out = a / (a + b)
    out = np.where(x <= 0, 0.0, out)
    return np.where(x >= 1, 1.0, out)


@dataclass(frozen=True)
class DyadicPartition:
    """Smooth dyadic partition of unity with blocks ``-1 .. j_max``."""

    sharpness: float
    j_max: int

    def rho(self, r):
        return _transition(2.0 - np.asarray(r, dtype=float), self.sharpness)

    def chi(self, r):
        return self.rho(2.0 * np.asarray(r, dtype=float))

    def theta(self, r):
        r = np.asarray(r, dtype=float)
        return self.rho(r) - self.rho(2.0 * r)

    def weight(self, j: int, r):
        """Multiplier of block ``j`` at radius ``r``."""
        if j == -1:
            return self.chi(r)
        return self.theta(np.asarray(r, dtype=float) / 2.0**j)

    @property
    def blocks(self) -> range:
        return range(-1, self.j_max + 1)

    def bandwidth(self, j: int) -> int:
        """Largest integer ``|k_l|`` that block ``j`` can touch."""
        if j == -1:
            return 0
        return 2 ** (j + 1) - 1


def j_max_for(N: int) -> int:
    """Smallest ``J`` with ``2^J >= sqrt(3) N`` so the blocks cover the cube."""
    return max(0, math.ceil(math.log2(max(math.sqrt(3.0) * N, 1.0)) - 1e-12))


def build_partition(sharpness: float = 1.0, j_max: int = 6, check_N: int | None = None) -> DyadicPartition:
    """Construct the partition and verify its invariants on the lattice.

    Raises
    ------
    ValueError
        If ``sharpness <= 0`` or an invariant fails on the lattice
        ``|k_l| <= check_N`` (default: the largest cube the blocks cover).
    """
    if sharpness <= 0:
        raise ValueError("sharpness must be positive")
    dp = DyadicPartition(float(sharpness), int(j_max))
    N = check_N if check_N is not None else int(2**j_max / math.sqrt(3.0))
    r = np.sqrt(ksq(N)).ravel()
    W = np.stack([dp.weight(j, r) for j in dp.blocks])
    if np.max(np.abs(W.sum(axis=0) - 1.0)) > 1e-12:
        raise ValueError("partition of unity fails on the lattice")
    for j in range(dp.j_max + 1):
        outside = (r < 2.0 ** (j - 1)) | (r > 2.0 ** (j + 1))
        if np.any(W[j + 1][outside] != 0):
            raise ValueError(f"block {j} leaks outside its annulus")
    for i in range(W.shape[0]):
        for j in range(i + 2, W.shape[0]):
            if np.any(W[i] * W[j] != 0):
                raise ValueError(f"blocks {i - 1} and {j - 1} overlap")
    return dp


@lru_cache(maxsize=32)
def partition_for(N: int, sharpness: float = 1.0) -> DyadicPartition:
    return build_partition(sharpness, j_max_for(N), check_N=N)


@lru_cache(maxsize=32)
def block_weights(N: int, dp: DyadicPartition) -> np.ndarray:
    """Block multipliers on the cube, shape ``(n_blocks, L, L, L)``."""
    r = np.sqrt(ksq(N))
    if np.sqrt(3.0) * N > 2.0**dp.j_max * (1 + 1e-12):
        raise ValueError(f"partition with j_max={dp.j_max} does not cover N={N}")
    W = np.stack([dp.weight(j, r) for j in dp.blocks])
    W.setflags(write=False)
    return W


@lru_cache(maxsize=32)
def resonant_weight(N: int, dp: DyadicPartition) -> np.ndarray:
    """``sum_{|i-j|<=1} w_i(k) w_j(k)`` on the cube (equal to 1 up to roundoff)."""
    W = block_weights(N, dp)
    out = np.zeros(W.shape[1:])
    n = W.shape[0]
    for i in range(n):
        for j in range(max(0, i - 1), min(n, i + 2)):
            out += W[i] * W[j]
    out.setflags(write=False)
    return out


def _dp(u: SpectralField, dp):
    return partition_for(u.N) if dp is None else dp


def lp_block(u: SpectralField, j: int, dp: DyadicPartition | None = None) -> SpectralField:
    dp = _dp(u, dp)
    if j < -1 or j > dp.j_max:
        raise ValueError(f"block index {j} outside [-1, {dp.j_max}]")
    return SpectralField(u.coeffs * block_weights(u.N, dp)[j + 1])


def lp_blocks(u: SpectralField, dp: DyadicPartition | None = None) -> list[SpectralField]:
    dp = _dp(u, dp)
    return [lp_block(u, j, dp) for j in dp.blocks]


def _grid_for(K: int, oversample: float) -> int:
    return sfft.next_fast_len(max(2 * K + 1, int(math.ceil(oversample * (2 * K + 1)))), real=True)


def block_norms(u: SpectralField, p: float = math.inf, dp: DyadicPartition | None = None,
                oversample: float = 2.0) -> np.ndarray:
    """``||Delta_j u||_{L^p}`` per leading component, shape ``lead + (n_blocks,)``.

    ``p = inf`` is a grid maximum on a grid of ``oversample`` times the block
    bandwidth; ``p = 2`` is exact (Parseval); other ``p`` use grid quadrature.
    """
    dp = _dp(u, dp)
    N = u.N
    W = block_weights(N, dp)
    out = np.zeros(u.lead_shape + (len(dp.blocks),))
    for b, j in enumerate(dp.blocks):
        c = u.coeffs * W[b]
        if p == 2:
            out[..., b] = np.sqrt(np.sum(np.abs(c) ** 2, axis=(-3, -2, -1)))
            continue
        K = min(N, dp.bandwidth(j))
        sub = SpectralField(c[..., N - K:N + K + 1, N - K:N + K + 1, N - K:N + K + 1])
        M = _grid_for(K, oversample)
        vals = np.abs(to_physical(sub, M))
        if p == math.inf:
            out[..., b] = vals.max(axis=(-3, -2, -1))
        else:
            out[..., b] = ((2 * math.pi / M) ** 3 * np.sum(vals**p, axis=(-3, -2, -1))) ** (1.0 / p)
    return out


def besov_norm(u: SpectralField, alpha: float, p: float = math.inf, q: float = math.inf,
               dp: DyadicPartition | None = None, oversample: float = 2.0, batch_axes: int = 0):
    """``sum_i ( sum_j (2^{j alpha} ||Delta_j u^i||_{L^p})^q )^{1/q}`` summed over components.

    With ``p = q = inf`` this is the Hoelder-Besov norm of ``C^alpha``. The
    first ``batch_axes`` leading axes are kept, giving one norm per member.
    """
    if not (1 <= p <= math.inf and 1 <= q <= math.inf):
        raise ValueError("need 1 <= p, q <= inf")
    dp = _dp(u, dp)
    B = block_norms(u, p, dp, oversample)
    scale = 2.0 ** (alpha * np.arange(-1, dp.j_max + 1))
    S = B * scale
    if q == math.inf:
        per = S.max(axis=-1)
    else:
        per = np.sum(S**q, axis=-1) ** (1.0 / q)
    if batch_axes:
        return per.reshape(per.shape[:batch_axes] + (-1,)).sum(axis=-1)
    return float(np.sum(per))


def holder_norm(u: SpectralField, alpha: float, dp: DyadicPartition | None = None,
                oversample: float = 2.0) -> float:
    return besov_norm(u, alpha, math.inf, math.inf, dp, oversample)


# ----------------------------------------------------------------- paraproducts


def _block_values(u: SpectralField, dp: DyadicPartition, M: int) -> np.ndarray:
    W = block_weights(u.N, dp)
    c = u.coeffs[..., None, :, :, :] * W
    return to_physical(SpectralField(c), M)


def bony(f: SpectralField, g: SpectralField, dp: DyadicPartition | None = None):
    """Return ``(pi_<, pi_0, pi_>)`` with ``pi_<(f, g) = sum_j S_{j-1} f Delta_j g``.

    The three parts sum to :func:`~nslab.spectral.dealiased_product` up to roundoff.
    """
    if f.N != g.N:
        raise ValueError("fields must share the truncation N")
    dp = _dp(f, dp)
    N = f.N
    M = product_grid(N)
    F = _block_values(f, dp, M)
    G = _block_values(g, dp, M)
    nb = F.shape[-4]
    # S_{j-1} = sum_{i <= j-2} Delta_i, stored at block position of j
    Fc = np.cumsum(F, axis=-4)
    Gc = np.cumsum(G, axis=-4)
    shape = np.broadcast_shapes(F.shape[:-4], G.shape[:-4]) + (M, M, M)
    low = np.zeros(shape)
    res = np.zeros(shape)
    high = np.zeros(shape)
    for b in range(nb):
        if b >= 2:
            low += Fc[..., b - 2, :, :, :] * G[..., b, :, :, :]
            high += F[..., b, :, :, :] * Gc[..., b - 2, :, :, :]
        for c in range(max(0, b - 1), min(nb, b + 2)):
            res += F[..., b, :, :, :] * G[..., c, :, :, :]
    return tuple(to_spectral(x, N, keep_mean=True) for x in (low, res, high))


def resonant(f: SpectralField, g: SpectralField, dp: DyadicPartition | None = None) -> SpectralField:
    """Resonant product ``pi_0(f, g)`` alone."""
    if f.N != g.N:
        raise ValueError("fields must share the truncation N")
    dp = _dp(f, dp)
    N = f.N
    M = product_grid(N)
    F = _block_values(f, dp, M)
    G = _block_values(g, dp, M)
    Gn = G.copy()
    Gn[..., 1:, :, :, :] += G[..., :-1, :, :, :]
    Gn[..., :-1, :, :, :] += G[..., 1:, :, :, :]
    return to_spectral(np.einsum("...bxyz,...bxyz->...xyz", F, Gn), N, keep_mean=True)


def paraproduct_low(f: SpectralField, g: SpectralField, dp: DyadicPartition | None = None) -> SpectralField:
    return bony(f, g, dp)[0]


def commutator_C(f: SpectralField, g: SpectralField, h: SpectralField,
                 dp: DyadicPartition | None = None) -> SpectralField:
    """Trilinear commutator ``pi_0(pi_<(f, g), h) - f pi_0(g, h)``."""
    dp = _dp(f, dp)
    return resonant(paraproduct_low(f, g, dp), h, dp) - dealiased_product(f, resonant(g, h, dp))


def leray_commutator(u: SpectralField, v: SpectralField, k: int, l: int,
                     dp: DyadicPartition | None = None) -> SpectralField:
    """``P^{kl} pi_<(u, v) - pi_<(u, P^{kl} v)`` for scalar ``u, v`` (axes 0-based)."""
    Pkl = projector_symbol(u.N)[k, l]
    low = paraproduct_low(u, v, dp)
    return SpectralField(low.coeffs * Pkl) - paraproduct_low(u, SpectralField(v.coeffs * Pkl), dp)


def grid_sup(u: SpectralField, oversample: float = 2.0) -> float:
    """Grid maximum of ``|u|`` summed over components."""
    M = _grid_for(u.N, oversample)
    v = np.abs(to_physical(u, M))
    return float(np.sum(v.max(axis=(-3, -2, -1))))


__all__ = [
    "DyadicPartition",
    "build_partition",
    "partition_for",
    "block_weights",
    "resonant_weight",
    "lp_block",
    "lp_blocks",
    "block_norms",
    "besov_norm",
    "holder_norm",
    "bony",
    "resonant",
    "paraproduct_low",
    "commutator_C",
    "leray_commutator",
    "grid_sup",
]
