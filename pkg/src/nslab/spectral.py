"""Truncated Fourier fields on the 3-torus.

Normalization
-------------
Every field is expanded in the orthonormal basis

    e_k(x) = (2 pi)^{-3/2} exp(i k.x),     k in Z^3,

so ``u = sum_k u_hat(k) e_k`` and ``u_hat(k) = (2 pi)^{-3/2} int u exp(-i k.x) dx``.
A constant function ``c`` therefore has zero-mode coefficient ``c (2 pi)^{3/2}``
and the product of two basis functions is ``e_k e_l = (2 pi)^{-3/2} e_{k+l}``.
All renormalization constants in :mod:`nslab.renorm` are tied to this choice.

Storage
-------
Coefficients live on the full centered cube ``|k_l| <= N``: the last three axes
of ``coeffs`` have length ``2N+1`` and index ``k_l + N``. Leading axes carry
components (``(3,)`` for a vector field) and optionally batch dimensions.
"""

from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

TWO_PI = 2.0 * np.pi
#: (2 pi)^{3/2}: zero-mode coefficient of the constant function 1.
UNIT_MEAN = TWO_PI**1.5


class MeanDiscardedWarning(UserWarning):
    """A grid field with nonzero mean was projected onto mean-zero fields."""


class SpectralField:
    """Fourier coefficients of a real field on the truncated lattice.

    Parameters
    ----------
    coeffs : ndarray
        Complex array whose last three axes have length ``2N+1``.
    """

    __slots__ = ("coeffs",)
    __array_priority__ = 100

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=np.complex128)
        if c.ndim < 3 or not (c.shape[-1] == c.shape[-2] == c.shape[-3]) or c.shape[-1] % 2 == 0:
            raise ValueError(f"coefficient array must end in an odd cube, got shape {c.shape}")
        self.coeffs = c

    @property
    def N(self) -> int:
        return (self.coeffs.shape[-1] - 1) // 2

    @property
    def lead_shape(self) -> tuple:
        return self.coeffs.shape[:-3]

    @property
    def role(self) -> str:
        s = self.lead_shape
        if s == ():
            return "scalar"
        if s == (3,):
            return "vector3"
        return "tensor"

    @classmethod
    def zeros(cls, N: int, lead: tuple = ()) -> "SpectralField":
        L = 2 * N + 1
        return cls(np.zeros(tuple(lead) + (L, L, L), dtype=np.complex128))

    @classmethod
    def from_modes(cls, N: int, modes: dict, lead: tuple = (), hermitian: bool = True) -> "SpectralField":
        """Build a field from ``{k: amplitude}``; ``-k`` gets the conjugate when ``hermitian``."""
        u = cls.zeros(N, lead)
        for k, amp in modes.items():
            k = tuple(int(q) for q in k)
            if max(abs(q) for q in k) > N:
                raise ValueError(f"mode {k} outside truncation N={N}")
            idx = tuple(q + N for q in k)
            u.coeffs[(...,) + idx] += amp
            if hermitian and any(k):
                nidx = tuple(-q + N for q in k)
                u.coeffs[(...,) + nidx] += np.conj(amp)
        return u

    def copy(self) -> "SpectralField":
        return SpectralField(self.coeffs.copy())

    def __getitem__(self, idx) -> "SpectralField":
        if not isinstance(idx, tuple):
            idx = (idx,)
        if len(idx) > len(self.lead_shape):
            raise IndexError("only leading (component) axes can be indexed")
        return SpectralField(self.coeffs[idx])

    def _other(self, other):
        return other.coeffs if isinstance(other, SpectralField) else other

    def __add__(self, other):
        return SpectralField(self.coeffs + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SpectralField(self.coeffs - self._other(other))

    def __rsub__(self, other):
        return SpectralField(self._other(other) - self.coeffs)

    def __neg__(self):
        return SpectralField(-self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            raise TypeError("use dealiased_product for field products")
        return SpectralField(self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SpectralField(self.coeffs / scalar)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def zero_mode(self) -> np.ndarray:
        N = self.N
        return self.coeffs[..., N, N, N]

    def mean(self) -> np.ndarray:
        """Spatial mean of each component."""
        return self.zero_mode().real / UNIT_MEAN

    def hermitian_defect(self) -> float:
        c = self.coeffs
        return float(np.max(np.abs(c - np.conj(c[..., ::-1, ::-1, ::-1])), initial=0.0))

    def check(self, tol: float = 1e-12, mean_zero: bool = True) -> "SpectralField":
        """Assert the real-field invariants; returns ``self`` for chaining."""
        scale = max(self.max_abs(), 1.0)
        if not np.all(np.isfinite(self.coeffs)):
            raise FloatingPointError("non-finite coefficients")
        if self.hermitian_defect() > tol * scale:
            raise AssertionError(f"Hermitian symmetry violated by {self.hermitian_defect():.3e}")
        if mean_zero and np.max(np.abs(self.zero_mode()), initial=0.0) > tol * scale:
            raise AssertionError("zero mode is not zero")
        return self

    def __repr__(self) -> str:
        return f"SpectralField(role={self.role}, N={self.N}, lead={self.lead_shape})"


@lru_cache(maxsize=64)
def wavenumbers(N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integer wavevector components broadcast over the centered cube."""
    k = np.arange(-N, N + 1)
    k1, k2, k3 = np.meshgrid(k, k, k, indexing="ij")
    for a in (k1, k2, k3):
        a.setflags(write=False)
    return k1, k2, k3


@lru_cache(maxsize=64)
def wavevector_array(N: int) -> np.ndarray:
    """Wavevectors as a float array of shape ``(3, L, L, L)``."""
    out = np.stack(wavenumbers(N)).astype(float)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def ksq(N: int) -> np.ndarray:
    k1, k2, k3 = wavenumbers(N)
    out = (k1 * k1 + k2 * k2 + k3 * k3).astype(float)
    out.setflags(write=False)
    return out


def hermitian_part(c: np.ndarray) -> np.ndarray:
    """Project coefficients onto the real-field subspace."""
    return 0.5 * (c + np.conj(c[..., ::-1, ::-1, ::-1]))


def product_grid(N: int) -> int:
    """Smallest FFT-friendly grid on which products of degree-N polynomials are exact.

    Truncated to ``|k_l| <= N`` the product only needs ``M >= 3N + 1``:
    aliased frequencies land at ``|k_l| >= M - 2N > N``.
    """
    return sfft.next_fast_len(3 * N + 1, real=True)


def _axis_index(N: int, M: int) -> np.ndarray:
    return np.arange(-N, N + 1) % M


def _to_rfft_layout(c: np.ndarray, M: int) -> np.ndarray:
    N = (c.shape[-1] - 1) // 2
    lead = c.shape[:-3]
    out = np.zeros(lead + (M, M, M // 2 + 1), dtype=np.complex128)
    idx = _axis_index(N, M)
    out[..., idx[:, None], idx[None, :], : N + 1] = c[..., :, :, N:]
    return out


def _from_rfft_layout(F: np.ndarray, N: int) -> np.ndarray:
    """Centered cube from an rfft array; the ``k_3 < 0`` half comes from conjugate symmetry.

    Only the ``k_3 = 0`` plane holds both halves of a conjugate pair, so it
    alone is symmetrized against rounding.
    """
    M = F.shape[-2]
    idx = _axis_index(N, M)
    pos = np.take(np.take(F[..., : N + 1], idx, axis=-3), idx, axis=-2)
    plane = pos[..., 0]
    pos[..., 0] = 0.5 * (plane + np.conj(plane[..., ::-1, ::-1]))
    neg = np.conj(pos[..., ::-1, ::-1, :0:-1])
    return np.concatenate([neg, pos], axis=-1)


def to_physical(u: SpectralField, M: int | None = None) -> np.ndarray:
    """Sample ``u`` on the uniform grid ``x_n = 2 pi n / M`` (shape ``lead + (M, M, M)``)."""
    N = u.N
    M = 2 * N + 1 if M is None else int(M)
    if M < 2 * N + 1:
        raise ValueError(f"grid size M={M} cannot represent degree N={N} (need M >= {2 * N + 1})")
    F = _to_rfft_layout(u.coeffs, M)
    return sfft.irfftn(F, s=(M, M, M), axes=(-3, -2, -1), norm="forward") / UNIT_MEAN


def to_spectral(values: np.ndarray, N: int, keep_mean: bool = False, mean_tol: float = 1e-12) -> SpectralField:
    """Truncated Fourier coefficients of real grid samples.

    The zero mode is dropped unless ``keep_mean``; a mean larger than
    ``mean_tol`` (relative to the sup of the data) emits
    :class:`MeanDiscardedWarning`.
    """
    g = np.asarray(values)
    if np.iscomplexobj(g):
        if np.max(np.abs(g.imag), initial=0.0) > 0:
            raise ValueError("grid values must be real")
        g = g.real
    M = g.shape[-1]
    if M < 2 * N + 1:
        raise ValueError(f"grid size M={M} too small for N={N}")
    F = sfft.rfftn(g, axes=(-3, -2, -1), norm="forward") * UNIT_MEAN
    c = _from_rfft_layout(F, N)
    if not keep_mean:
        m = c[..., N, N, N]
        scale = max(float(np.max(np.abs(g), initial=0.0)), 1e-300) * UNIT_MEAN
        if np.max(np.abs(m), initial=0.0) > mean_tol * scale:
            warnings.warn("nonzero mean discarded", MeanDiscardedWarning, stacklevel=2)
        c[..., N, N, N] = 0.0
    return SpectralField(c)


def leray_project(u: SpectralField) -> SpectralField:
    """Apply ``P(k) = I - k k^T / |k|^2`` mode by mode; the zero mode is left alone."""
    if u.lead_shape[-1:] != (3,):
        raise ValueError("Leray projection needs a vector field")
    kv = wavevector_array(u.N)
    q = ksq(u.N).copy()
    q[q == 0] = 1.0
    kdotu = np.sum(kv * u.coeffs, axis=-4)
    return SpectralField(u.coeffs - kv * (kdotu / q)[..., None, :, :, :])


def divergence(u: SpectralField) -> SpectralField:
    if u.lead_shape[-1:] != (3,):
        raise ValueError("divergence needs a vector field")
    kv = wavevector_array(u.N)
    return SpectralField(1j * np.sum(kv * u.coeffs, axis=-4))


@lru_cache(maxsize=64)
def projector_symbol(N: int) -> np.ndarray:
    """Leray symbol on the cube, shape ``(3, 3, L, L, L)``; zero at ``k = 0``."""
    kv = wavevector_array(N)
    q = ksq(N).copy()
    q[q == 0] = np.inf
    P = np.eye(3)[:, :, None, None, None] - kv[:, None] * kv[None, :] / q
    P[:, :, N, N, N] = 0.0
    P.setflags(write=False)
    return P


def dealiased_product(u: SpectralField, v: SpectralField, M: int | None = None) -> SpectralField:
    """Exact truncated product ``u v`` (leading axes broadcast, zero mode kept)."""
    if u.N != v.N:
        raise ValueError("fields must share the truncation N")
    N = u.N
    M = product_grid(N) if M is None else int(M)
    if M < 3 * N + 1:
        raise ValueError(f"grid size M={M} aliases products at N={N}")
    pu = to_physical(u, M)
    pv = pu if v is u else to_physical(v, M)
    return to_spectral(pu * pv, N, keep_mean=True)


def naive_product(u: SpectralField, v: SpectralField) -> SpectralField:
    """Direct convolution ``(2 pi)^{-3/2} sum_{k1+k2=k} u(k1) v(k2)``; O(N^6), for testing."""
    N = u.N
    L = 2 * N + 1
    cu, cv = u.coeffs, v.coeffs
    out = np.zeros(np.broadcast_shapes(cu.shape, cv.shape), dtype=np.complex128)
    for a in range(L):
        for b in range(L):
            for c in range(L):
                k1 = (a - N, b - N, c - N)
                uk = cu[..., a, b, c]
                # k2 = k - k1 must stay inside the cube for k inside the cube
                lo = [max(-N, -N - q) for q in k1]
                hi = [min(N, N - q) for q in k1]
                sl_out = tuple(slice(lo[i] + k1[i] + N, hi[i] + k1[i] + N + 1) for i in range(3))
                sl_v = tuple(slice(lo[i] + N, hi[i] + N + 1) for i in range(3))
                out[(...,) + sl_out] += uk[..., None, None, None] * cv[(...,) + sl_v]
    return SpectralField(out / UNIT_MEAN)


def outer_product(u: SpectralField, v: SpectralField, M: int | None = None) -> SpectralField:
    """All component products ``u^a v^b`` of two vector fields, lead shape ``(..., 3, 3)``."""
    if u.N != v.N:
        raise ValueError("fields must share the truncation N")
    N = u.N
    M = product_grid(N) if M is None else int(M)
    pu = to_physical(u, M)
    if v is u:
        # transform the 6 distinct entries only
        pairs = [(a, b) for a in range(3) for b in range(a, 3)]
        prods = np.stack([pu[..., a, :, :, :] * pu[..., b, :, :, :] for a, b in pairs], axis=-4)
        sym = to_spectral(prods, N, keep_mean=True).coeffs
        out = np.empty(sym.shape[:-4] + (3, 3) + sym.shape[-3:], dtype=np.complex128)
        for n, (a, b) in enumerate(pairs):
            out[..., a, b, :, :, :] = sym[..., n, :, :, :]
            out[..., b, a, :, :, :] = sym[..., n, :, :, :]
        return SpectralField(out)
    pv = to_physical(v, M)
    out = pu[..., :, None, :, :, :] * pv[..., None, :, :, :, :]
    return to_spectral(out, N, keep_mean=True)


def contract(M: np.ndarray, u: SpectralField, spec: str) -> SpectralField:
    """Apply a constant tensor to the component axes of ``u`` via an einsum ``spec``.

    ``spec`` names the tensor and field component indices, e.g. ``"ijl,l->ij"``;
    the spatial axes (and any batch axes) are carried along.
    """
    lhs, out = spec.split("->")
    t_idx, f_idx = lhs.split(",")
    full = f"{t_idx},...{f_idx}xyz->...{out}xyz"
    return SpectralField(np.einsum(full, M, u.coeffs))


def resize(u: SpectralField, N: int) -> SpectralField:
    """Zero-pad or truncate ``u`` to the cube ``|k_l| <= N``."""
    n = u.N
    if N == n:
        return u.copy()
    if N < n:
        c = slice(n - N, n + N + 1)
        return SpectralField(u.coeffs[..., c, c, c].copy())
    out = np.zeros(u.lead_shape + (2 * N + 1,) * 3, dtype=np.complex128)
    c = slice(N - n, N + n + 1)
    out[..., c, c, c] = u.coeffs
    return SpectralField(out)
