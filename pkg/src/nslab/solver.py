"""Time stepping of the renormalized approximating equation and its reference.

``approx``: discrete Laplacian and difference operators, with the linear
counterterm built from ``C + C_tilde`` in the quadratic term.
``reference``: the mollified equation with exact operators and no counterterm.
Both are driven by one cylindrical Wiener process; the per-mode Ornstein-Uhlenbeck
increments come from :mod:`nslab.noise`, so the linear and noise parts are exact
and only the nonlinearity is frozen over a step (exponential Euler).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .besov import DyadicPartition, besov_norm, partition_for
from .discrete import PRESETS, MultiplierSet, Operators, default_N
from .noise import NoiseConfig, decay_factors, draw_increments, init_zero
from .spectral import SpectralField, contract, leray_project, outer_product, resize
from .wick import counterterm_CC, tree_drift

VARIANTS = ("approx", "approx_off", "reference")


@dataclass(frozen=True)
class SimConfig:
    """One simulation. ``z`` must lie in ``(1/2, 1)``; the norm is ``C^{-z}``."""

    N: int = 16
    eps: float = 0.2
    dt: float = 1e-3
    T: float = 0.25
    z: float = 0.6
    delta: float = 0.05
    preset: str = "finite_difference"
    a: float = 1.0
    b: float = 0.0
    L0: float = 2.0
    seed: int = 0
    L: float = 50.0
    noise_scale: float = 1.0
    counterterms: bool = True
    nonlinear: bool = True
    norm_oversample: float = 1.0
    noise_radius: int | None = None
    u0: SpectralField | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if not 0.5 < self.z < 1.0:
            raise ValueError("z must lie in (1/2, 1)")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.u0 is not None:
            if self.u0.N != self.N or self.u0.lead_shape != (3,):
                raise ValueError("u0 must be a vector field on the cube of size N")
        self.ms  # validates (a, b, L0)

    @property
    def ms(self) -> MultiplierSet:
        return MultiplierSet(self.preset, self.a, self.b, self.L0)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def initial(self) -> SpectralField:
        u = default_u0(self.N, self.z) if self.u0 is None else self.u0
        return leray_project(u)


def default_u0(N: int, z: float) -> SpectralField:
    """Divergence-free ABC-type field on the modes ``|k| = 1``, scaled to unit ``C^{-z}`` norm."""
    x = (1.0, 0, 0)
    y = (0, 1.0, 0)
    zz = (0, 0, 1.0)
    L = 2 * N + 1
    c = np.zeros((3, L, L, L), dtype=np.complex128)
    # u = (sin x3 + cos x2, sin x1 + cos x3, sin x2 + cos x1) in e_k coefficients
    terms = [(0, zz, "sin"), (0, y, "cos"), (1, x, "sin"), (1, zz, "cos"), (2, y, "sin"), (2, x, "cos")]
    for comp, k, kind in terms:
        k = np.asarray(k, dtype=int)
        p = tuple(N + k)
        m = tuple(N - k)
        if kind == "cos":
            c[(comp,) + p] += 0.5
            c[(comp,) + m] += 0.5
        else:
            c[(comp,) + p] += -0.5j
            c[(comp,) + m] += 0.5j
    u = SpectralField(c * (2 * math.pi) ** 1.5)
    return u / besov_norm(u, -z)


def nonlinear_drift(u: SpectralField, ops: Operators, CC: np.ndarray | None = None) -> SpectralField:
    """``-1/2 P sum_j D_j (u^i u^j + sum_c (CC[i,c,j] + CC[j,c,i]) u^c)``."""
    Q = outer_product(u, u)
    if CC is not None:
        M = CC + np.transpose(CC, (2, 1, 0))          # M[i, c, j]
        Q = Q + contract(M, u, "icj,c->ij")
    return tree_drift(Q, ops)


@dataclass
class Model:
    """One discretized equation on a working cube."""

    cfg: SimConfig
    variant: str
    N_work: int
    ops: Operators

    @classmethod
    def build(cls, cfg: SimConfig, variant: str) -> "Model":
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if variant == "reference":
            return cls(cfg, variant, cfg.N, Operators.exact(cfg.N))
        # modes outside the box |eps k_l| <= L0 are killed by the semigroup,
        # so the solution lives on a smaller cube unless u0 reaches past it
        Nw = cfg.N
        if cfg.preset != "continuum":
            Nw = min(cfg.N, default_N(cfg.eps, cfg.ms))
            u0 = cfg.initial()
            if Nw < cfg.N and np.any(resize(resize(u0, Nw), cfg.N).coeffs != u0.coeffs):
                Nw = cfg.N
        return cls(cfg, variant, Nw, Operators.approx(Nw, cfg.eps, cfg.ms))

    @property
    def uses_counterterms(self) -> bool:
        return self.variant == "approx" and self.cfg.counterterms and self.cfg.preset != "continuum"

    def counterterm(self, t: float) -> np.ndarray | None:
        if not self.uses_counterterms:
            return None
        return counterterm_CC(self.cfg.eps, t, self.cfg.ms)

    def drift(self, u: SpectralField, t: float) -> SpectralField:
        return nonlinear_drift(u, self.ops, self.counterterm(t))

    def step(self, u: SpectralField, t: float, dt: float, noise: SpectralField | None) -> SpectralField:
        """``u(t + dt) = e^{-lam dt} u + phi1 * drift(u(t)) + noise``."""
        if self.cfg.nonlinear:
            out = self.ops.etd_step(u, self.drift(u, t), dt)
        else:
            out = SpectralField(self.ops.decay(dt) * u.coeffs)
        if noise is not None:
            out = out + noise
        return out

    def lift(self, u: SpectralField) -> SpectralField:
        return resize(u, self.cfg.N)


class NoiseSource:
    """Per-seed generators producing coupled increments for both equations.

    ``increments(dt)`` returns ``(xi, xi_bar)`` stacked over seeds on the
    noise cube; ``compose`` merges consecutive increments exactly, so a path
    drawn at a fine step can drive coarser steps.
    """

    def __init__(self, cfg: SimConfig, seeds):
        self.cfg = cfg
        self.ncfg = NoiseConfig(cfg.N, cfg.eps, cfg.ms, cfg.noise_radius)
        self.states = [init_zero(self.ncfg, int(s)) for s in seeds]

    @property
    def radius(self) -> int:
        return self.ncfg.embed_radius

    def increments(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        pairs = [draw_increments(s, dt) for s in self.states]
        xi = np.stack([p[0] for p in pairs]) * self.cfg.noise_scale
        xib = np.stack([p[1] for p in pairs]) * self.cfg.noise_scale
        return xi, xib

    def compose(self, incs: list, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Exact increment over ``len(incs)`` consecutive steps of length ``dt``."""
        d, db = decay_factors(self.ncfg, dt)
        xi, xib = incs[0]
        for a, b in incs[1:]:
            xi = d * xi + a
            xib = db * xib + b
        return xi, xib


@dataclass
class Trajectory:
    """Norm series of one run; snapshots kept according to ``keep``."""

    times: np.ndarray
    norms: np.ndarray
    stop_reason: str
    tau: float
    snapshots: list = field(default_factory=list, repr=False)
    seed: int = 0
    variant: str = "approx"

    @property
    def final(self) -> SpectralField | None:
        return self.snapshots[-1] if self.snapshots else None


@dataclass
class EnsembleResult:
    cfg: SimConfig
    seeds: list
    trajectories: dict
    discrepancy: dict      # variant -> (n_seeds, n_times) array of ||u_var - u_ref||_{C^{-z}}
    times: np.ndarray

    def sup_discrepancy(self, variant: str = "approx") -> np.ndarray:
        """``sup_{t <= T ^ tau}`` per seed, with ``tau`` the earlier stopping time of the pair."""
        D = self.discrepancy[variant]
        out = np.empty(len(self.seeds))
        for s in range(len(self.seeds)):
            tau = min(self.trajectories[variant][s].tau, self.trajectories["reference"][s].tau)
            m = self.times <= tau + 1e-12
            out[s] = np.max(D[s][m])
        return out

    def terminal_discrepancy(self, variant: str = "approx") -> np.ndarray:
        return self.discrepancy[variant][:, -1]

    def blown_up(self, variant: str) -> np.ndarray:
        return np.array([tr.stop_reason == "blowup" for tr in self.trajectories[variant]])


def _norms(u: SpectralField, z: float, dp: DyadicPartition, oversample: float) -> np.ndarray:
    with np.errstate(all="ignore"):
        n = besov_norm(u, -z, dp=dp, oversample=oversample, batch_axes=1)
    return np.where(np.isfinite(n), n, np.inf)


def run_ensemble(cfg: SimConfig, seeds=None, variants=("approx", "reference"), keep: str = "none",
                 fine: int = 1) -> EnsembleResult:
    """Run the requested variants for all seeds on shared noise.

    ``keep`` is ``"none"``, ``"final"`` or ``"all"``. With ``fine > 1`` the
    noise is drawn at step ``dt / fine`` and composed, so runs at different
    ``dt`` can share one noise path.
    """
    if keep not in ("none", "final", "all"):
        raise ValueError("keep must be none, final or all")
    seeds = [cfg.seed] if seeds is None else [int(s) for s in seeds]
    variants = tuple(variants)
    models = {v: Model.build(cfg, v) for v in variants}
    noise = NoiseSource(cfg, seeds)
    S = len(seeds)
    dp = partition_for(cfg.N)
    u0 = cfg.initial()
    state = {}
    for v, m in models.items():
        c = np.broadcast_to(resize(u0, m.N_work).coeffs, (S,) + (3,) + (2 * m.N_work + 1,) * 3)
        state[v] = SpectralField(c.copy())
    n = cfg.n_steps
    times = cfg.dt * np.arange(n + 1)
    norms = {v: np.full((S, n + 1), np.nan) for v in variants}
    alive = {v: np.ones(S, bool) for v in variants}
    stop_t = {v: np.full(S, np.nan) for v in variants}
    snaps = {v: [] for v in variants}
    disc_vars = [v for v in variants if v != "reference"] if "reference" in variants else []
    disc = {v: np.full((S, n + 1), np.nan) for v in disc_vars}
    cap = min(cfg.L, cfg.T)

    def record(k):
        lifted = {}
        for v, m in models.items():
            u = state[v]
            nm = _norms(u if m.N_work == cfg.N else m.lift(u), cfg.z, dp, cfg.norm_oversample)
            nm = np.where(alive[v], nm, np.nan)
            norms[v][:, k] = nm
            newly = alive[v] & ~(nm < cfg.L)
            stop_t[v][newly] = min(times[k], cfg.L)
            alive[v] &= ~newly
            if disc_vars:
                lifted[v] = m.lift(u)
            if keep == "all":
                snaps[v].append(SpectralField(u.coeffs.copy()))
            elif keep == "final":
                snaps[v] = [u]
        for v in disc_vars:
            with np.errstate(all="ignore"):
                disc[v][:, k] = _norms(lifted[v] - lifted["reference"], cfg.z, dp, cfg.norm_oversample)

    record(0)
    r = noise.radius
    for k in range(n):
        if fine == 1:
            xi, xib = noise.increments(cfg.dt)
        else:
            xi, xib = noise.compose([noise.increments(cfg.dt / fine) for _ in range(fine)], cfg.dt / fine)
        t = times[k]
        for v, m in models.items():
            inc = xib if v == "reference" else xi
            nf = resize(SpectralField(inc), m.N_work) if cfg.noise_scale != 0 else None
            with np.errstate(all="ignore"):
                u = m.step(state[v], t, cfg.dt, nf)
            dead = ~alive[v]
            if dead.any():
                u.coeffs[dead] = 0.0
            state[v] = u
        record(k + 1)
        if not any(a.any() for a in alive.values()):
            break
    trajs = {}
    for v in variants:
        trajs[v] = []
        for s in range(S):
            stopped = not np.isnan(stop_t[v][s])
            tau = float(stop_t[v][s]) if stopped else cap
            sn = [SpectralField(x.coeffs[s]) for x in snaps[v]]
            trajs[v].append(Trajectory(times, norms[v][s], "blowup" if stopped else "horizon", tau, sn,
                                       seeds[s], v))
    return EnsembleResult(cfg, seeds, trajs, disc, times)


def run(cfg: SimConfig, keep: str = "final") -> Trajectory:
    """Integrate the renormalized approximating equation for ``cfg.seed``."""
    return run_ensemble(cfg, None, ("approx",), keep).trajectories["approx"][0]


def run_reference(cfg: SimConfig, keep: str = "final") -> Trajectory:
    """Integrate the reference equation, driven by the same increments as :func:`run`."""
    return run_ensemble(cfg, None, ("reference",), keep).trajectories["reference"][0]


__all__ = [
    "VARIANTS",
    "SimConfig",
    "default_u0",
    "nonlinear_drift",
    "Model",
    "NoiseSource",
    "Trajectory",
    "EnsembleResult",
    "run_ensemble",
    "run",
    "run_reference",
]
