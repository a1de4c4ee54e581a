"""Empirical ratio probes for the operator estimates.

Each probe draws a fixed family of random real fields, evaluates the ratio
``lhs / rhs`` of an inequality for every field and reports the supremum. The
numbers only indicate boundedness; no constant is asserted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .besov import besov_norm, commutator_C, grid_sup, leray_commutator, paraproduct_low, partition_for, resonant
from .discrete import MultiplierSet, continuum_symbols, lattice_symbols, semigroup_multiplier
from .spectral import SpectralField, hermitian_part, ksq, wavevector_array

PROBES = ("semigroup", "semigroup_increment", "difference", "difference_error", "shift")


def random_fields(N: int, n: int, alpha: float, seed: int = 0) -> SpectralField:
    """``n`` real mean-zero scalar fields with spectra decaying like ``|k|^{-(alpha + 3/2)}``.

    Every tenth field is a single Fourier mode, the extreme case for multipliers.
    """
    rng = np.random.default_rng(seed)
    L = 2 * N + 1
    r = np.sqrt(ksq(N))
    rs = np.where(r > 0, r, 1.0)
    out = np.empty((n, L, L, L), dtype=np.complex128)
    for i in range(n):
        if i % 10 == 9:
            c = np.zeros((L, L, L), dtype=np.complex128)
            k = rng.integers(-N, N + 1, size=3)
            if not k.any():
                k[0] = 1
            c[tuple(N + k)] = 1.0
            c[tuple(N - k)] = 1.0
        else:
            slope = alpha + 1.5 + rng.uniform(-0.5, 0.5)
            z = rng.standard_normal((L, L, L)) + 1j * rng.standard_normal((L, L, L))
            c = hermitian_part(z * rs ** (-slope))
        c[N, N, N] = 0.0
        out[i] = c
    return SpectralField(out)


@dataclass
class ProbeReport:
    name: str
    params: dict
    sups: dict = field(default_factory=dict)      # eps -> sup ratio

    def band_ok(self, low: float = 0.25, high: float = 2.0) -> bool:
        """No growth trend: ``sup(smallest eps) / sup(largest eps)`` within ``[low, high]``."""
        e = sorted(self.sups)
        r = self.sups[e[0]] / self.sups[e[-1]]
        return bool(low <= r <= high)

    def as_rows(self) -> list[dict]:
        return [{"probe": self.name, "eps": e, "sup_ratio": s} for e, s in sorted(self.sups.items(), reverse=True)]


def _norm(u: SpectralField, alpha: float, dp) -> np.ndarray:
    return besov_norm(u, alpha, dp=dp, batch_axes=1)


def _mult(u: SpectralField, m: np.ndarray) -> SpectralField:
    return SpectralField(u.coeffs * m)


def probe_ratios(name: str, u: SpectralField, eps: float, ms: MultiplierSet, alpha: float = -0.5,
                 delta: float = 0.5, kappa: float = 0.1, eta: float = 0.5, beta0: float = 0.5,
                 t_grid=(0.01, 0.03, 0.1, 0.3), axis: int = 0) -> np.ndarray:
    """Per-field ratio (sup over the time grid where one applies)."""
    N = u.N
    dp = partition_for(N)
    sym = lattice_symbols(N, eps, ms)
    lam = sym["lam"]
    if name == "semigroup":
        den = _norm(u, alpha, dp)
        return np.max([t ** (delta / 2) * _norm(_mult(u, semigroup_multiplier(lam, t)), alpha + delta - kappa, dp)
                       for t in t_grid], axis=0) / den
    if name == "semigroup_increment":
        den = _norm(u, alpha + delta, dp)
        vals = []
        for t in t_grid:
            s = 0.5 * t
            m = semigroup_multiplier(lam, t) - semigroup_multiplier(lam, s)
            vals.append((t - s) ** (-delta / 2) * _norm(_mult(u, m), alpha - kappa, dp))
        return np.max(vals, axis=0) / den
    if name == "difference":
        return _norm(_mult(u, sym["g"][axis]), alpha - kappa, dp) / _norm(u, alpha + 1, dp)
    if name == "difference_error":
        m = sym["g"][axis] - continuum_symbols(N)["g"][axis]
        return eps ** (-eta) * _norm(_mult(u, m), alpha - kappa, dp) / _norm(u, alpha + 1 + eta, dp)
    if name == "shift":
        k = wavevector_array(N)[axis]
        m = np.exp(1j * ms.a * eps * k) - np.exp(-1j * ms.b * eps * k)
        return eps ** (-beta0) * _norm(_mult(u, m), alpha + 1 - beta0 - kappa, dp) / _norm(u, alpha + 1, dp)
    raise ValueError(f"unknown probe {name!r}; expected one of {PROBES}")


def operator_probe(name: str, ms: MultiplierSet, eps_list=(0.2, 0.1, 0.05), trials: int = 100, N: int = 12,
                seed: int = 0, alpha: float = -0.5, **kw) -> ProbeReport:
    u = random_fields(N, trials, alpha if name != "semigroup_increment" else alpha + kw.get("delta", 0.5), seed)
    rep = ProbeReport(name, {"N": N, "trials": trials, "seed": seed, "alpha": alpha, **kw})
    for eps in eps_list:
        rep.sups[float(eps)] = float(np.max(probe_ratios(name, u, eps, ms, alpha=alpha, **kw)))
    return rep


def schauder_probe(ms: MultiplierSet, eps_list=(0.2, 0.1, 0.05), alpha: float = -0.5, delta: float = 0.5,
                   kappa: float = 0.1, t_grid=(0.01, 0.03, 0.1, 0.3), trials: int = 100, N: int = 12,
                   seed: int = 0) -> list[ProbeReport]:
    """Smoothing, time-increment and difference-error ratio sups per ``eps``."""
    kw = dict(delta=delta, kappa=kappa, t_grid=tuple(t_grid))
    return [
        operator_probe("semigroup", ms, eps_list, trials, N, seed, alpha, **kw),
        operator_probe("semigroup_increment", ms, eps_list, trials, N, seed, alpha, **kw),
        operator_probe("difference_error", ms, eps_list, trials, N, seed, alpha, kappa=kappa),
    ]


def all_operator_probes(ms: MultiplierSet, eps_list=(0.2, 0.1, 0.05), trials: int = 100, N: int = 12,
                        seed: int = 0) -> list[ProbeReport]:
    return [operator_probe(p, ms, eps_list, trials, N, seed) for p in PROBES]


# ----------------------------------------------------------- paraproduct reports


def paraproduct_ratio_report(trials: int = 100, N: int = 8, seed: int = 0) -> dict:
    """Sup ratios for the paraproduct and commutator estimates (no eps dependence)."""
    dp = partition_for(N)
    out = {}
    a, b = -0.5, 0.7
    f = random_fields(N, trials, a, seed)
    g = random_fields(N, trials, b, seed + 1)
    low = paraproduct_low(f, g, dp)
    out["paraproduct_low_neg"] = float(np.max(_norm(low, a + b, dp) / (_norm(f, a, dp) * _norm(g, b, dp))))
    fb = random_fields(N, trials, 0.3, seed + 2)
    sup_f = np.array([grid_sup(fb[i]) for i in range(trials)])
    out["paraproduct_low_sup"] = float(np.max(_norm(paraproduct_low(fb, g, dp), b, dp) / (sup_f * _norm(g, b, dp))))
    out["resonant"] = float(np.max(_norm(resonant(f, g, dp), a + b, dp) / (_norm(f, a, dp) * _norm(g, b, dp))))
    # commutator exponents: alpha in (0, 1), beta + gamma < 0 < alpha + beta + gamma
    al, be, ga = 0.6, -0.3, -0.2
    fa = random_fields(N, trials, al, seed + 3)
    gb = random_fields(N, trials, be, seed + 4)
    hc = random_fields(N, trials, ga, seed + 5)
    C = commutator_C(fa, gb, hc, dp)
    out["commutator"] = float(np.max(_norm(C, al + be + ga, dp)
                                     / (_norm(fa, al, dp) * _norm(gb, be, dp) * _norm(hc, ga, dp))))
    ua = random_fields(N, trials, 0.5, seed + 6)
    vb = random_fields(N, trials, -0.8, seed + 7)
    comm = leray_commutator(ua, vb, 0, 1, dp)
    out["leray_commutator"] = float(np.max(_norm(comm, 0.5 - 0.8, dp) / (_norm(ua, 0.5, dp) * _norm(vb, -0.8, dp))))
    return out


__all__ = [
    "PROBES",
    "random_fields",
    "ProbeReport",
    "probe_ratios",
    "operator_probe",
    "schauder_probe",
    "all_operator_probes",
    "paraproduct_ratio_report",
]
