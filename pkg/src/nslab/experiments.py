"""The computations behind the ``nslab`` subcommands.

Every function returns an :class:`Outcome`: flat tables destined for CSV,
nested documents destined for JSON, and a list of :class:`Check` verdicts.
Nothing here touches the filesystem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .besov import besov_norm, bony, lp_blocks, partition_for
from .discrete import (MultiplierSet, Operators, apply_Deps, lattice_symbols, semigroup_multiplier, shift)
from .noise import NoiseConfig, advance, covariance_oracle, init_stationary
from .probes import all_operator_probes, paraproduct_ratio_report, random_fields
from .renorm import build_table, compute_C0, compute_C3, compute_Lambda
from .solver import SimConfig, run_ensemble
from .spectral import UNIT_MEAN, SpectralField, dealiased_product, divergence, leray_project, resize
from .wick import TreeStepper, counterterm_CC, pi0_diamond_K, wick_pair, wick_u1u2

DEFAULT_LADDERS = {
    "constants": (0.2, 0.1, 0.05),
    "noise-check": (0.4, 0.2, 0.1),
    "checks": (0.2, 0.1, 0.05),
    "converge": (0.4, 0.2, 0.1),
}

EXACT_TOL = 1e-12
IDENTITY_TOL = 1e-10


@dataclass
class Check:
    """One verdict. ``kind`` is ``exact`` (identity), ``property`` (asserted) or ``report``."""

    name: str
    passed: bool
    value: float
    threshold: str
    kind: str = "property"

    def row(self) -> dict:
        return {"name": self.name, "kind": self.kind, "passed": self.passed, "value": self.value,
                "threshold": self.threshold}


@dataclass
class Outcome:
    tables: dict = field(default_factory=dict)
    documents: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.kind != "report")


def strictly_decreasing(vals, factor: float = 1.0) -> bool:
    v = list(vals)
    return all(math.isfinite(a) and math.isfinite(b) and b < a and b <= factor * a for a, b in zip(v, v[1:]))


def _by_eps_desc(eps_list) -> list:
    return sorted((float(e) for e in eps_list), reverse=True)


# -------------------------------------------------------------------- constants


def constants_ladder(ms: MultiplierSet, eps_list=DEFAULT_LADDERS["constants"], t: float = 5.0,
                     second_order: bool = False) -> Outcome:
    """Renormalization tables per ``eps`` and the distance to the continuum limits."""
    out = Outcome()
    Lam = compute_Lambda(ms, "Lambda").value
    Lam1 = compute_Lambda(ms, "Lambda1").value
    ladder = []
    docs = {"preset": ms.preset, "a": ms.a, "b": ms.b, "L0": ms.L0, "t": t,
            "Lambda": Lam.tolist(), "Lambda1": Lam1.tolist(), "tables": []}
    for eps in _by_eps_desc(eps_list):
        tab = build_table(eps, t, ms, limits=False, second_order=second_order)
        res = tab.identity_residuals()
        row = {
            "eps": eps,
            "t": t,
            "max_abs_C_minus_Lambda": float(np.max(np.abs(tab.C - Lam))),
            "max_abs_C_tilde_minus_Lambda1": float(np.max(np.abs(tab.C_tilde - Lam1))),
            "max_abs_C": float(np.max(np.abs(tab.C))),
            "max_abs_C_tilde": float(np.max(np.abs(tab.C_tilde))),
            "C3_sum_minus_2C": res["C3_sum_minus_2C"],
            "C3_tilde_sum_minus_2C_tilde": res["C3_tilde_sum_minus_2C_tilde"],
        }
        entry = {"eps": eps, "C0": tab.C0.tolist(), "C0_bar": tab.C0_bar.tolist(), "C": tab.C.tolist(),
                 "C_tilde": tab.C_tilde.tolist(), "C3": tab.C3.tolist(), "C3_tilde": tab.C3_tilde.tolist()}
        if tab.second is not None:
            so = tab.second
            row["max_abs_C2"] = float(np.max(np.abs(so.C2)))
            row["max_abs_C11"] = float(np.max(np.abs(so.C11)))
            entry.update({"C2": so.C2.tolist(), "C11": so.C11.tolist(), "phi2": so.phi2.tolist(),
                          "phi11": so.phi11.tolist()})
        ladder.append(row)
        docs["tables"].append(entry)
        worst = max(row["C3_sum_minus_2C"], row["C3_tilde_sum_minus_2C_tilde"])
        out.checks.append(Check(f"C3_identity_eps={eps!r}", worst <= IDENTITY_TOL, worst,
                                f"<= {IDENTITY_TOL:g}", "exact"))
    out.tables["ladder"] = ladder
    out.documents["tables"] = docs
    dist = [r["max_abs_C_minus_Lambda"] for r in ladder]
    if np.max(np.abs(Lam)) > 0:
        out.checks.append(Check("C_minus_Lambda_strictly_decreasing", strictly_decreasing(dist), dist[-1],
                                "strictly decreasing in eps"))
    else:
        worst = max(max(r["max_abs_C"], r["max_abs_C_tilde"]) for r in ladder)
        out.checks.append(Check("symmetric_stencil_constants_vanish", worst <= EXACT_TOL, worst,
                                f"<= {EXACT_TOL:g}", "exact"))
    return out


# ------------------------------------------------------------------------ noise


COV_MODES = ((1, 1, 1), (0, 1, 1), (1, -1, 2), (2, 1, 0), (1, 2, 2), (1, 0, 0), (0, 1, 0))
COV_PAIRS = ((0, 0), (0, 1), (1, 2))


def covariance_modes(eps: float, ms: MultiplierSet, n: int = 5) -> list:
    """The first ``n`` test modes inside the noise support."""
    R2 = (ms.h_radius / eps) ** 2 * (1 + 1e-12)
    picked = [k for k in COV_MODES if sum(x * x for x in k) <= R2][:n]
    if not picked:
        raise ValueError("no test mode inside the noise support; decrease eps")
    return picked


def noise_covariance_mc(eps: float, ms: MultiplierSet, samples: int = 10_000, seed: int = 0,
                        chunk: int = 1000) -> list[dict]:
    """Empirical equal-time second moments of the stationary pair against the oracle.

    Rows cover 5 modes, 3 component pairs and the three kinds
    ``approx_approx``, ``exact_exact`` and ``cross``.
    """
    modes = covariance_modes(eps, ms)
    N = max(max(abs(x) for x in k) for k in modes)
    idx = [tuple(N + x for x in k) for k in modes]
    acc = {}
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        st = init_stationary(NoiseConfig(N, eps, ms, batch=(b,)), rng)
        X, Xb = st.X.coeffs, st.Xbar.coeffs
        for m, p in enumerate(idx):
            xs = {"approx": X[(slice(None), slice(None)) + p], "exact": Xb[(slice(None), slice(None)) + p]}
            for kind, (u, v) in (("approx_approx", ("approx", "approx")), ("exact_exact", ("exact", "exact")),
                                 ("cross", ("approx", "exact"))):
                for i, j in COV_PAIRS:
                    prod = np.real(xs[u][:, i] * np.conj(xs[v][:, j]))
                    acc.setdefault((m, kind, i, j), []).append(prod)
        done += b
    rows = []
    for (m, kind, i, j), parts in acc.items():
        x = np.concatenate(parts)
        mean = float(x.mean())
        se = float(x.std(ddof=1) / math.sqrt(len(x)))
        oracle = covariance_oracle(modes[m], 0.0, 0.0, i, j, kind, eps, ms)
        z = 0.0 if se == 0 and mean == oracle else (mean - oracle) / se if se > 0 else math.inf
        rows.append({"eps": eps, "kind": kind, "k1": modes[m][0], "k2": modes[m][1], "k3": modes[m][2],
                     "i": i, "j": j, "empirical": mean, "oracle": oracle, "stderr": se, "z": z})
    return rows


def noise_difference_ladder(N: int, ms: MultiplierSet, eps_list, seeds, alpha: float) -> list[dict]:
    """``||X - Xbar||_{C^alpha}`` for stationary draws sharing the normals across ``eps``."""
    eps_list = _by_eps_desc(eps_list)
    R = max(min(N, NoiseConfig(N, e, ms).support_radius) for e in eps_list)
    rows = []
    for eps in eps_list:
        cfg = NoiseConfig(N, eps, ms, noise_radius=R)
        for s in seeds:
            st = init_stationary(cfg, int(s))
            d = st.X - st.Xbar
            rows.append({"eps": eps, "seed": int(s), "norm": besov_norm(d, alpha),
                         "identical": bool(np.array_equal(st.X.coeffs, st.Xbar.coeffs))})
    return rows


def noise_check(N: int, ms: MultiplierSet, eps: float, eps_list, seeds, samples: int, seed: int,
                delta: float, factor: float = 1.0) -> Outcome:
    out = Outcome()
    cov = noise_covariance_mc(eps, ms, samples, seed)
    out.tables["covariance"] = cov
    frac = float(np.mean([abs(r["z"]) <= 3 for r in cov]))
    out.checks.append(Check("covariance_z_within_3", frac >= 0.95, frac, ">= 0.95 of entries"))
    alpha = -0.5 - delta
    ladder = noise_difference_ladder(N, ms, eps_list, seeds, alpha)
    out.tables["ladder"] = ladder
    means = []
    summary = []
    for eps_v in _by_eps_desc(eps_list):
        vals = [r["norm"] for r in ladder if r["eps"] == eps_v]
        means.append(float(np.mean(vals)))
        summary.append({"eps": eps_v, "alpha": alpha, "seeds": len(vals), "mean_norm": means[-1]})
    out.tables["ladder_summary"] = summary
    if ms.preset == "galerkin":
        same = all(r["identical"] for r in ladder)
        out.checks.append(Check("galerkin_processes_identical", same, 0.0 if same else 1.0, "bitwise", "exact"))
    else:
        out.checks.append(Check("ladder_strictly_decreasing", strictly_decreasing(means, factor), means[-1],
                                "strictly decreasing" + (f", factor <= {factor:g}" if factor < 1 else "")))
    return out


# ------------------------------------------------------------------ Wick means


def wick_centering(ms: MultiplierSet, N: int = 6, eps: float = 0.4, samples: int = 10_000, chunk: int = 100,
                   dt: float = 1e-3, t: float = 0.02, seed: int = 0) -> list[dict]:
    """Monte Carlo means of the renormalized products at the zero mode.

    ``u1`` starts stationary; ``K`` and ``u2`` start at 0 and are stepped to
    time ``t``. Each row gives the mean with and without the subtraction.
    """
    ops = Operators.approx(N, eps, ms)
    C0, _ = compute_C0(eps, ms)
    C3, _ = compute_C3(eps, t, ms)
    CC = counterterm_CC(eps, t, ms)
    i3 = tuple(int(x) for x in np.unravel_index(np.argmax(np.abs(C3)), C3.shape))
    nsteps = int(round(t / dt))
    items = {}
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    done = 0
    c = (Ellipsis, N, N, N)
    while done < samples:
        b = min(chunk, samples - done)
        st = init_stationary(NoiseConfig(N, eps, ms, batch=(b,)), rng)
        stp = TreeStepper(ops, C0, None, (b,), ("K", "u2"))
        for _ in range(nsteps):
            stp.step(st.X, dt)
            st = advance(st, dt)
        u1 = st.X
        w = wick_pair(u1, C0).coeffs[c].real / UNIT_MEAN
        raw = w + C0
        for a, bb in ((0, 0), (0, 1)):
            items.setdefault(f"u1<>u1[{a},{bb}]", ([], []))[0].append(w[:, a, bb])
            items[f"u1<>u1[{a},{bb}]"][1].append(raw[:, a, bb])
        W = wick_u1u2(u1, stp.u2, CC).coeffs[c].real / UNIT_MEAN
        W0 = wick_u1u2(u1, stp.u2, None).coeffs[c].real / UNIT_MEAN
        for a, bb in ((0, 0), (1, 0)):
            items.setdefault(f"u2<>u1[{a},{bb}]", ([], []))[0].append(W[:, a, bb])
            items[f"u2<>u1[{a},{bb}]"][1].append(W0[:, a, bb])
        F = pi0_diamond_K(stp.K, u1, ops, C3, index=i3).coeffs[c].real / UNIT_MEAN
        key = "pi0<>(PDK,u1)[" + ",".join(map(str, i3)) + "]"
        items.setdefault(key, ([], []))[0].append(F)
        items[key][1].append(F + C3[i3])
        done += b
    rows = []
    for name, (v, r) in items.items():
        v = np.concatenate(v)
        r = np.concatenate(r)
        se = float(v.std(ddof=1) / math.sqrt(len(v)))
        se_r = float(r.std(ddof=1) / math.sqrt(len(r)))
        rows.append({"quantity": name, "mean": float(v.mean()), "stderr": se,
                     "z": float(v.mean() / se) if se > 0 else 0.0, "raw_mean": float(r.mean()),
                     "raw_z": float(r.mean() / se_r) if se_r > 0 else 0.0, "samples": len(v), "t": t, "dt": dt})
    return rows


# ------------------------------------------------------------------ identities


def _rel(err: float, scale: float) -> float:
    return err / scale if scale > 0 else err


def exact_identities(ms: MultiplierSet, N: int = 16, trials: int = 100, seed: int = 0, eps: float = 0.2,
                     chunk: int = 10) -> list[Check]:
    """Machine-precision identities on random fields (relative errors)."""
    dp = partition_for(N)
    f = random_fields(N, trials, -0.5, seed)
    g = random_fields(N, trials, 0.5, seed + 1)
    worst = {"bony_decomposition": 0.0, "lp_reconstruction": 0.0, "leray_idempotent": 0.0,
             "leray_divergence_free": 0.0, "difference_quotient_vs_shift": 0.0, "semigroup_property": 0.0}
    for s in range(0, trials, chunk):
        fs = SpectralField(f.coeffs[s:s + chunk])
        gs = SpectralField(g.coeffs[s:s + chunk])
        prod = dealiased_product(fs, gs)
        low, res, high = bony(fs, gs, dp)
        worst["bony_decomposition"] = max(worst["bony_decomposition"],
                                          _rel((low + res + high - prod).max_abs(), prod.max_abs()))
        rec = sum(lp_blocks(fs, dp)[1:], lp_blocks(fs, dp)[0])
        worst["lp_reconstruction"] = max(worst["lp_reconstruction"], _rel((rec - fs).max_abs(), fs.max_abs()))
    vec = SpectralField(np.stack([f.coeffs, np.roll(f.coeffs, 1, axis=0), g.coeffs], axis=1))
    for s in range(0, trials, chunk):
        u = SpectralField(vec.coeffs[s:s + chunk])
        Pu = leray_project(u)
        worst["leray_idempotent"] = max(worst["leray_idempotent"],
                                        _rel((leray_project(Pu) - Pu).max_abs(), Pu.max_abs()))
        scale = N * Pu.max_abs()
        worst["leray_divergence_free"] = max(worst["leray_divergence_free"], _rel(divergence(Pu).max_abs(), scale))
    lam = lattice_symbols(N, eps, ms)["lam"]
    for t1, t2 in ((0.01, 0.02), (0.05, 0.1)):
        m = semigroup_multiplier(lam, t1) * semigroup_multiplier(lam, t2) - semigroup_multiplier(lam, t1 + t2)
        worst["semigroup_property"] = max(worst["semigroup_property"], float(np.max(np.abs(m))))
    checks = []
    if ms.preset != "continuum":
        e = np.eye(3)
        for j in range(3):
            d = apply_Deps(f, j, eps, ms)
            ref = (shift(f, ms.a * eps * e[j]) - shift(f, -ms.b * eps * e[j])) / ((ms.a + ms.b) * eps)
            worst["difference_quotient_vs_shift"] = max(worst["difference_quotient_vs_shift"],
                                                        _rel((d - ref).max_abs(), ref.max_abs()))
    else:
        del worst["difference_quotient_vs_shift"]
    for name, v in worst.items():
        checks.append(Check(name, v <= EXACT_TOL, v, f"<= {EXACT_TOL:g} (relative)", "exact"))
    return checks


def checks(ms: MultiplierSet, N: int, eps: float, eps_list, trials: int, probe_N: int, seed: int,
           t: float = 5.0) -> Outcome:
    out = Outcome()
    out.checks.extend(exact_identities(ms, N, trials, seed, eps))
    for e in (eps_list[0], eps_list[-1]):
        tab_res = build_table(float(e), t, ms, limits=False, second_order=False).identity_residuals()
        v = max(tab_res["C3_sum_minus_2C"], tab_res["C3_tilde_sum_minus_2C_tilde"])
        out.checks.append(Check(f"C3_identity_eps={float(e)!r}", v <= IDENTITY_TOL, v, f"<= {IDENTITY_TOL:g}",
                                "exact"))
    probes = []
    for rep in all_operator_probes(ms, tuple(eps_list), trials, probe_N, seed):
        probes.extend(rep.as_rows())
        e = sorted(rep.sups)
        r = rep.sups[e[0]] / rep.sups[e[-1]]
        out.checks.append(Check(f"probe_{rep.name}_band", rep.band_ok(), r,
                                "sup(smallest eps)/sup(largest eps) in [0.25, 2]", "report"))
    out.tables["probes"] = probes
    para = paraproduct_ratio_report(trials, min(probe_N, 8), seed)
    out.tables["paraproducts"] = [{"estimate": k, "sup_ratio": v} for k, v in para.items()]
    out.tables["identities"] = [c.row() for c in out.checks]
    return out


# ------------------------------------------------------------------- solver runs


def converge(base: SimConfig, eps_list, seeds) -> Outcome:
    """Shared-noise ladder of ``approx``, ``approx_off`` and ``reference`` runs.

    The normals are drawn on one cube for every ``eps``, so the reference at
    the smallest ``eps`` is driven by the same white noise as every run and
    the terminal distance to it is reported as well.
    """
    eps_list = _by_eps_desc(eps_list)
    seeds = [int(s) for s in seeds]
    R = max(min(base.N, NoiseConfig(base.N, e, base.ms).support_radius) for e in eps_list)
    variants = ("approx", "approx_off", "reference")
    results = {}
    for eps in sorted(eps_list):
        cfg = replace(base, eps=eps, noise_radius=R)
        results[eps] = run_ensemble(cfg, seeds, variants, keep="final")
    ref_eps = min(eps_list)
    ref = results[ref_eps]
    per_seed, summary = [], []
    medians, on, off = [], [], []
    for eps in eps_list:
        res = results[eps]
        sup = {v: res.sup_discrepancy(v) for v in ("approx", "approx_off")}
        term = {v: res.terminal_discrepancy(v) for v in ("approx", "approx_off")}
        blown = res.blown_up("approx") | res.blown_up("approx_off") | res.blown_up("reference")
        cross = np.full(len(seeds), np.nan)
        for s in range(len(seeds)):
            if blown[s] or ref.blown_up("reference")[s]:
                continue
            u = resize(res.trajectories["approx"][s].final, base.N)
            ub = ref.trajectories["reference"][s].final
            cross[s] = besov_norm(u - ub, -base.z, oversample=base.norm_oversample)
        for s, sd in enumerate(seeds):
            for v in ("approx", "approx_off"):
                tr = res.trajectories[v][s]
                per_seed.append({"eps": eps, "seed": sd, "variant": v, "sup_discrepancy": float(sup[v][s]),
                                 "terminal_discrepancy": float(term[v][s]), "stop_reason": tr.stop_reason,
                                 "tau": tr.tau, "reference_stop_reason": res.trajectories["reference"][s].stop_reason,
                                 "terminal_vs_smallest_eps_reference": float(cross[s]) if v == "approx" else math.nan})
        keep = ~blown
        med = float(np.median(sup["approx"][keep])) if keep.any() else math.nan
        m_on = float(np.median(term["approx"][keep])) if keep.any() else math.nan
        m_off = float(np.median(term["approx_off"][keep])) if keep.any() else math.nan
        m_cross = float(np.median(cross[keep])) if keep.any() else math.nan
        medians.append(med)
        on.append(m_on)
        off.append(m_off)
        summary.append({"eps": eps, "seeds": len(seeds), "blowups_excluded": int(blown.sum()),
                        "median_sup_discrepancy": med, "median_terminal_on": m_on, "median_terminal_off": m_off,
                        "off_over_on": m_off / m_on if m_on > 0 else math.nan,
                        "median_terminal_vs_smallest_eps_reference": m_cross})
    out = Outcome(tables={"per_seed": per_seed, "summary": summary})
    out.checks.append(Check("median_sup_strictly_decreasing", strictly_decreasing(medians), medians[-1],
                            "strictly decreasing in eps"))
    ratios = [b / a if a > 0 else math.nan for a, b in zip(on, off)]
    asserted = base.ms.a != base.ms.b and base.preset != "continuum" and base.counterterms
    for eps, r in zip(eps_list, ratios):
        out.checks.append(Check(f"counterterm_off_over_on_eps={eps!r}", bool(r > 1), r, "> 1",
                                "property" if asserted else "report"))
    return out


def simulate(cfg: SimConfig, variants=("approx",)) -> Outcome:
    res = run_ensemble(cfg, [cfg.seed], tuple(variants), keep="none")
    rows = []
    info = {}
    for v in variants:
        tr = res.trajectories[v][0]
        info[v] = {"stop_reason": tr.stop_reason, "tau": tr.tau}
        for t, n in zip(tr.times, tr.norms):
            if np.isnan(n):
                break
            rows.append({"variant": v, "t": float(t), "norm": float(n), "stop_reason": tr.stop_reason})
    out = Outcome(tables={"trajectory": rows}, documents={"summary": info})
    for v in variants:
        norms = res.trajectories[v][0].norms
        recorded = norms[~np.isnan(norms)]
        out.checks.append(Check(f"{v}_norms_finite_before_stop", bool(np.all(np.isfinite(recorded[:-1]))),
                                float(len(recorded)), "finite at every recorded step"))
    return out


__all__ = [
    "DEFAULT_LADDERS",
    "Check",
    "Outcome",
    "strictly_decreasing",
    "constants_ladder",
    "covariance_modes",
    "noise_covariance_mc",
    "noise_difference_ladder",
    "noise_check",
    "wick_centering",
    "exact_identities",
    "checks",
    "converge",
    "simulate",
]
