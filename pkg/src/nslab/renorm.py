"""Renormalization constants as lattice sums, and their continuum limits.

All sums run over the support of the noise cutoff, ``{k != 0 : |eps k| <= L0/2}``,
in lexicographic lattice order so reductions are reproducible. Tensor indices
are 0-based and follow the index order of the defining sums, e.g.
``C[i, i1, j]`` and ``C3[i1, i2, j1, j0]``.

The exact-semigroup constants (suffix ``_bar``) use ``f = 1`` and ``g = i``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .besov import DyadicPartition, build_partition, j_max_for
from .discrete import MultiplierSet, eval_f, eval_g, eval_h

TWO_PI = 2.0 * math.pi
_IMAG_TOL = 1e-10


class UnavailableCounterterm(LookupError):
    """A counterterm that the underlying analysis names but never specifies."""


@dataclass(frozen=True)
class ModeSet:
    """Lattice points in the noise support with their per-mode symbols."""

    K: np.ndarray      # (n, 3) wavevectors
    q: np.ndarray      # |k|^2
    f: np.ndarray      # f(eps k)
    lam: np.ndarray    # |k|^2 f(eps k)
    h: np.ndarray      # h(eps k)
    P: np.ndarray      # (n, 3, 3) Leray symbol
    g: np.ndarray      # (n, 3) complex, k_l g(eps k_l)
    w: np.ndarray      # resonant weight sum_{|i-j|<=1} theta_i theta_j

    @property
    def n(self) -> int:
        return self.K.shape[0]


def projector_trace(k) -> np.ndarray:
    """``sum_{i1} P^{i i1}(k) P^{j i1}(k)``, which is ``P(k)`` itself."""
    k = np.asarray(k, dtype=float)
    q = float(k @ k)
    if q == 0:
        raise ValueError("projector undefined at k = 0")
    P = np.eye(3) - np.outer(k, k) / q
    return P @ P.T


def _leray(K: np.ndarray) -> np.ndarray:
    q = np.sum(K * K, axis=-1)
    q = np.where(q == 0, 1.0, q)
    return np.eye(3) - K[..., :, None] * K[..., None, :] / q[..., None, None]


def _resonant_weight(r: np.ndarray, dp: DyadicPartition) -> np.ndarray:
    W = np.stack([dp.weight(j, r) for j in dp.blocks])
    out = np.zeros_like(r)
    n = W.shape[0]
    for i in range(n):
        for j in range(max(0, i - 1), min(n, i + 2)):
            out += W[i] * W[j]
    return out


@lru_cache(maxsize=64)
def support_modes(eps: float, ms: MultiplierSet, exact: bool = False) -> ModeSet:
    """Modes in the noise support; ``exact`` switches to ``f = 1``, ``g = i``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    R = int(math.floor(ms.h_radius / eps * (1 + 1e-12)))
    r = np.arange(-R, R + 1)
    K = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3).astype(float)
    h = eval_h(ms, eps * K)
    keep = (h > 0) & np.any(K != 0, axis=1)
    K, h = K[keep], np.asarray(h)[keep]
    q = np.sum(K * K, axis=1)
    if exact:
        f = np.ones_like(q)
        g = 1j * K
    else:
        f = np.asarray(eval_f(ms, eps * K), dtype=float)
        g = K * np.asarray(eval_g(ms, eps * K))
    dp = build_partition(1.0, j_max_for(max(R, 1)), check_N=max(R, 1))
    w = _resonant_weight(np.sqrt(q), dp)
    out = ModeSet(K=K, q=q, f=f, lam=q * f, h=h, P=_leray(K), g=g, w=w)
    for v in (out.K, out.q, out.f, out.lam, out.h, out.P, out.g, out.w):
        v.setflags(write=False)
    return out


def _real(x: np.ndarray, what: str, scale: float | None = None) -> np.ndarray:
    x = np.asarray(x)
    s = max(float(np.max(np.abs(x), initial=0.0)), 1.0) if scale is None else scale
    im = float(np.max(np.abs(np.imag(x)), initial=0.0))
    if im > _IMAG_TOL * s:
        raise ArithmeticError(f"{what}: imaginary part {im:.3e} does not cancel")
    return np.real(x).copy()


def _time_factor(lam: np.ndarray, t: float) -> np.ndarray:
    """``(1 - exp(-2 lam t)) / (2 lam)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return -np.expm1(-2.0 * lam * t) / (2.0 * lam)


# ------------------------------------------------------------------- first order


def compute_C0(eps: float, ms: MultiplierSet) -> tuple[np.ndarray, np.ndarray]:
    """Wick constants ``C0`` (discrete semigroup) and ``C0_bar`` (exact semigroup)."""
    m = support_modes(eps, ms)
    c = TWO_PI**-3
    C0 = c * np.einsum("n,nij->ij", m.h**2 / (2 * m.lam), m.P)
    C0b = c * np.einsum("n,nij->ij", m.h**2 / (2 * m.q), m.P)
    return C0, C0b


@lru_cache(maxsize=64)
def _C_weights(eps: float, ms: MultiplierSet):
    """Per-mode tensors with ``C(t) = sum_n (1 - exp(-2 lam_n t)) WC_n``."""
    m = support_modes(eps, ms)
    n = m.n
    if ms.preset == "continuum":
        z = np.zeros((n, 3, 3, 3))
        return m.lam, z, z
    a, b = ms.a, ms.b
    cosd = np.cos(a * eps * m.K) - np.cos(b * eps * m.K)            # (n, 3)
    pref = TWO_PI**-3 / eps * m.h**2 / (8 * (a + b) * m.q**2 * m.f**2)
    P = m.P
    # sum_{i2, i3} c_{i2} P^{i2 i3} P^{j i3}
    cPP = np.einsum("nk,nkl,njl->nj", cosd, P, P)
    WC = pref[:, None, None, None] * P[:, :, :, None] * cPP[:, None, None, :]
    PPP = np.einsum("nik,nkl,njl->nij", P, P, P)
    WCt = pref[:, None, None, None] * PPP[:, :, None, :] * cosd[:, None, :, None]
    for v in (WC, WCt):
        v.setflags(write=False)
    return m.lam, WC, WCt


def compute_C(eps: float, t: float, ms: MultiplierSet) -> tuple[np.ndarray, np.ndarray]:
    """First-order counterterms ``C[i, i1, j](t)`` and ``C_tilde[i, i1, j](t)``."""
    lam, WC, WCt = _C_weights(eps, ms)
    s = -np.expm1(-2.0 * lam * t) if t > 0 else np.zeros_like(lam)
    return np.tensordot(s, WC, axes=(0, 0)), np.tensordot(s, WCt, axes=(0, 0))


def compute_C_bar(eps: float, t: float, ms: MultiplierSet) -> np.ndarray:
    """Exact-semigroup analogue of ``C``; the summand is odd, so it vanishes."""
    m = support_modes(eps, ms, exact=True)
    T = _time_factor(m.q, t) * m.h**2 / (2 * m.q)
    PP = np.einsum("nkl,njl->nkj", m.P, m.P)
    out = 0.5 * TWO_PI**-3 * np.einsum("n,nab,nk,nkc->abc", T, m.P, m.g, PP)
    return out


def compute_C3(eps: float, t: float, ms: MultiplierSet) -> tuple[np.ndarray, np.ndarray]:
    """``C3[i1, i2, j1, j0]`` and ``C3_tilde[i1, j0, j1, i2]``."""
    m = support_modes(eps, ms)
    T = TWO_PI**-3 * m.w * _time_factor(m.lam, t) * m.h**2 / (2 * m.q * m.f)
    PP = np.einsum("nab,ncb->nac", m.P, m.P)                    # sum_{j2} P^{j0 j2} P^{j1 j2}
    C3 = np.einsum("n,nd,nab,ndc->abcd", T, m.g, m.P, PP)
    PPP = np.einsum("nab,nbc,ndc->nabd", m.P, m.P, m.P)         # P^{i1 i2} P^{i2 i3} P^{j1 i3}
    C3t = np.einsum("n,nd,nabc->adcb", T, m.g, PPP)
    return _real(C3, "C3"), _real(C3t, "C3_tilde")


def compute_C3_bar(eps: float, t: float, ms: MultiplierSet) -> np.ndarray:
    m = support_modes(eps, ms, exact=True)
    T = TWO_PI**-3 * m.w * _time_factor(m.q, t) * m.h**2 / (2 * m.q)
    PP = np.einsum("nab,ncb->nac", m.P, m.P)
    return np.einsum("n,nd,nab,ndc->abcd", T, m.g, m.P, PP)


# -------------------------------------------------------------- continuum limits


@dataclass(frozen=True)
class QuadratureResult:
    value: np.ndarray
    error: float
    level: int


def _leggauss(n: int, lo: float, hi: float):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def _lambda_level(ms: MultiplierSet, which: str, level: int) -> np.ndarray:
    n_r = 12 * 2**level
    n_mu = 12 * 2**level
    n_phi = 24 * 2**level
    R = ms.h_radius
    r, wr = _leggauss(n_r, 0.0, R)
    mu, wmu = _leggauss(n_mu, -1.0, 1.0)
    phi = TWO_PI * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, TWO_PI / n_phi)
    s = np.sqrt(1 - mu**2)
    om = np.stack([np.outer(s, np.cos(phi)), np.outer(s, np.sin(phi)),
                   np.outer(mu, np.ones(n_phi))], axis=-1).reshape(-1, 3)
    wang = np.outer(wmu, wphi).ravel()
    P = np.eye(3) - om[:, :, None] * om[:, None, :]
    a, b = ms.a, ms.b
    X = r[:, None, None] * om[None, :, :]                        # (n_r, n_ang, 3)
    # cos(aX) - cos(bX) = -2 sin((a+b)X/2) sin((a-b)X/2)
    cosd = -2.0 * np.sin(0.5 * (a + b) * X) * np.sin(0.5 * (a - b) * X)
    f = np.asarray(eval_f(ms, X), dtype=float)
    h = np.asarray(eval_h(ms, X), dtype=float)
    # dx = r^2 dr dOmega; integrand carries |x|^{-4}
    radial = (wr / r**2)[:, None] * h**2 / f**2
    kern = cosd * radial[..., None]                              # (n_r, n_ang, 3)
    pref = TWO_PI**-3 / (8 * (a + b))
    A = np.einsum("ran,a->an", kern, wang)                       # radial integral per direction
    if which == "Lambda":
        cP = np.einsum("al,alj->aj", A, P)
        return pref * np.einsum("aik,aj->ikj", P, cP)
    return pref * np.einsum("an,aij->inj", A, P)


@lru_cache(maxsize=16)
def compute_Lambda(ms: MultiplierSet, which: str = "Lambda", tol: float = 1e-8,
                   max_level: int = 5) -> QuadratureResult:
    """Continuum limit of ``C`` (``which="Lambda"``) or ``C_tilde`` (``"Lambda1"``).

    Tensor Gauss-Legendre in radius and polar cosine with a periodic trapezoid
    in azimuth; the resolution doubles until successive values agree to ``tol``.
    The integrand behaves like ``|x|^{-2}`` at the origin, which the ``r^2``
    Jacobian absorbs.
    """
    if which not in ("Lambda", "Lambda1"):
        raise ValueError("which must be 'Lambda' or 'Lambda1'")
    if ms.preset == "continuum" or ms.a == ms.b:
        return QuadratureResult(np.zeros((3, 3, 3)), 0.0, 0)
    prev = _lambda_level(ms, which, 0)
    err = math.inf
    for level in range(1, max_level + 1):
        cur = _lambda_level(ms, which, level)
        err = float(np.max(np.abs(cur - prev)))
        if err < tol:
            return QuadratureResult(cur, err, level)
        prev = cur
    raise ArithmeticError(f"{which} quadrature did not reach tol={tol:g}; last change {err:.3e}")


# ------------------------------------------------------------------ second order


def _pair_sums(m: ModeSet, eps: float, ms: MultiplierSet, t: float, exact: bool,
               chunk_pairs: int = 250_000) -> dict:
    """Double sums over ``(k1, k2)`` for ``C2``, ``C11`` and the ``phi`` residuals."""
    n = m.n
    out = {key: np.zeros((3, 3), dtype=complex) for key in ("C2", "phi2", "C11", "phi11")}
    if n == 0:
        return out
    S2 = _time_factor(m.lam, t)
    c = max(1, chunk_pairs // n)
    for s in range(0, n, c):
        sl = slice(s, min(n, s + c))
        K12 = m.K[sl, None, :] + m.K[None, :, :]                 # (c, n, 3)
        q12 = np.sum(K12 * K12, axis=-1)
        valid = q12 > 0
        q12s = np.where(valid, q12, 1.0)
        if exact:
            lam12 = q12s
            A = 1j * K12
            B = -1j * K12
        else:
            f12 = np.asarray(eval_f(ms, eps * K12), dtype=float)
            lam12 = q12s * f12
            A = K12 * np.asarray(eval_g(ms, eps * K12))
            B = -K12 * np.asarray(eval_g(ms, -eps * K12))
        P12 = _leray(K12)
        lam1 = m.lam[sl, None]
        lam2 = m.lam[None, :]
        Sig = lam1 + lam2 + lam12
        W = np.where(valid, (m.h[sl, None] * m.h[None, :]) ** 2, 0.0)
        base = W / (4.0 * lam1 * lam2 * Sig)
        P1 = m.P[sl]
        P2 = m.P

        # C2 and L3
        M1 = np.einsum("cnij,cjk,cnkl->cnil", P12, P1, P12)
        s1 = np.einsum("cni,nij,cnj->cn", A, P2, B)
        v1 = np.einsum("cnij,cjk,cnk->cni", P12, P1, B)
        v2 = np.einsum("cnij,njk,cnk->cni", P12, P2, A)
        T2 = M1 * s1[..., None, None] + v1[..., :, None] * v2[..., None, :]
        d12 = 2.0 * lam12 - Sig
        I12 = np.exp(-Sig * t) * _expm1_ratio(d12, t)
        out["C2"] += np.einsum("cn,cnij->ij", base / lam12, T2)
        out["phi2"] += np.einsum("cn,cnij->ij", base * (-np.exp(-2 * lam12 * t) / lam12 - 2.0 * I12), T2)

        # C11 and I7
        G = m.g
        M11 = np.einsum("nij,cnjk,nkl->cnil", P2, P12, P2)
        s11 = np.einsum("cni,cij,nj->cn", A, P1, G)
        v3 = np.einsum("nij,cnjk,ckl,nl->cni", P2, P12, P1, G)
        v4 = np.einsum("nij,cnj->cni", P2, A)
        T11 = M11 * s11[..., None, None] + v3[..., :, None] * v4[..., None, :]
        wb = base * m.w[None, :]
        d2 = 2.0 * lam2 - Sig
        J = np.exp(-Sig * t) * _expm1_ratio(d2, t)
        out["C11"] += np.einsum("cn,cnij->ij", wb * S2[None, :], T11)
        out["phi11"] += np.einsum("cn,cnij->ij", -wb * J, T11)
    for key in out:
        out[key] *= TWO_PI**-6
    return out


def _expm1_ratio(d: np.ndarray, t: float) -> np.ndarray:
    """``(1 - exp(-d t)) / d`` with the limit ``t`` at ``d = 0``."""
    small = np.abs(d * t) < 1e-12
    ds = np.where(small, 1.0, d)
    return np.where(small, t, -np.expm1(-ds * t) / ds)


@dataclass(frozen=True)
class SecondOrder:
    C2: np.ndarray
    C2_bar: np.ndarray
    C11: np.ndarray
    C11_bar: np.ndarray
    phi2: np.ndarray
    phi2_bar: np.ndarray
    phi11: np.ndarray
    phi11_bar: np.ndarray

    @property
    def phi2_residual(self) -> np.ndarray:
        return self.phi2 - self.phi2_bar

    @property
    def phi11_residual(self) -> np.ndarray:
        return self.phi11 - self.phi11_bar


def compute_second_order(eps: float, t: float, ms: MultiplierSet) -> SecondOrder:
    """``C2``, ``C11`` (discrete and exact semigroup) and the ``phi`` residuals at time ``t``.

    ``phi2 = L3(t) - C2`` and ``phi11 = I7(t) - C11`` are the parts of the
    second-order expectations that the constants leave behind; both vanish as
    ``t`` grows.
    """
    m = support_modes(eps, ms)
    mb = support_modes(eps, ms, exact=True)
    a = _pair_sums(m, eps, ms, t, exact=False)
    b = _pair_sums(mb, eps, ms, t, exact=True)
    vals = {}
    for key in a:
        vals[key] = _real(a[key], key)
        vals[key + "_bar"] = _real(b[key], key + "_bar")
    return SecondOrder(**vals)


# ------------------------------------------------------------------------- table


@dataclass(frozen=True)
class RenormTable:
    eps: float
    t: float
    ms: MultiplierSet
    C0: np.ndarray
    C0_bar: np.ndarray
    C: np.ndarray
    C_tilde: np.ndarray
    C_bar: np.ndarray
    C3: np.ndarray
    C3_tilde: np.ndarray
    C3_bar: np.ndarray
    Lambda: np.ndarray | None = None
    Lambda1: np.ndarray | None = None
    second: SecondOrder | None = None
    extra: dict = field(default_factory=dict)

    @property
    def C12(self):
        raise UnavailableCounterterm("C12 is named but never specified; no value is available")

    def identity_residuals(self) -> dict:
        return {
            "C3_sum_minus_2C": float(np.max(np.abs(self.C3.sum(axis=3) - 2 * self.C))),
            "C3_tilde_sum_minus_2C_tilde": float(np.max(np.abs(self.C3_tilde.sum(axis=3) - 2 * self.C_tilde))),
            "C_bar": float(np.max(np.abs(self.C_bar))),
            "C3_bar": float(np.max(np.abs(self.C3_bar))),
        }


def build_table(eps: float, t: float, ms: MultiplierSet, limits: bool = True,
                second_order: bool = True, tol: float = 1e-8) -> RenormTable:
    C0, C0b = compute_C0(eps, ms)
    C, Ct = compute_C(eps, t, ms)
    C3, C3t = compute_C3(eps, t, ms)
    Lam = Lam1 = None
    if limits:
        Lam = compute_Lambda(ms, "Lambda", tol).value
        Lam1 = compute_Lambda(ms, "Lambda1", tol).value
    so = compute_second_order(eps, t, ms) if second_order else None
    return RenormTable(eps=eps, t=t, ms=ms, C0=C0, C0_bar=C0b, C=C, C_tilde=Ct,
                       C_bar=compute_C_bar(eps, t, ms), C3=C3, C3_tilde=C3t,
                       C3_bar=compute_C3_bar(eps, t, ms), Lambda=Lam, Lambda1=Lam1, second=so)


def warn_partial_C1() -> None:
    warnings.warn("C12 and phi12 are unspecified; using the C11 family only", RuntimeWarning, stacklevel=3)
