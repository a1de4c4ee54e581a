"""Wick products and the explicit tree terms ``u2``, ``u3`` and ``K``.

The stationary Gaussian ``u1`` (see :mod:`nslab.noise`) feeds three linear
equations with zero initial data::

    dK  = (Delta K + u1) dt
    du2 = Delta u2 dt - 1/2 P sum_j D_j (u1 <> u1)^{. j} dt
    du3 = Delta u3 dt - 1/2 P sum_j D_j (u1 <> u2 + u2 <> u1)^{. j} dt

Each is stepped with exponential Euler (source frozen at the left endpoint).
An :class:`~nslab.discrete.Operators` object selects the discrete or the exact
Laplacian and derivative, so the same code yields both families of trees.

Tensor conventions: a "pair" field has lead shape ``(..., 3, 3)``. For the
mixed product, ``W[a, b] = u2^a <> u1^b = u1^b u2^a + sum_c CC[a, c, b] u1^c``
with ``CC = C + C_tilde`` evaluated at the current time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .besov import DyadicPartition, partition_for, resonant
from .discrete import MultiplierSet, Operators
from .renorm import RenormTable, UnavailableCounterterm, compute_C, compute_C0, warn_partial_C1
from .spectral import UNIT_MEAN, SpectralField, contract, leray_project, outer_product, projector_symbol


def _sub_constant(Q: SpectralField, C: np.ndarray) -> SpectralField:
    out = Q.coeffs.copy()
    N = Q.N
    out[..., N, N, N] -= np.asarray(C) * UNIT_MEAN
    return SpectralField(out)


def wick_pair(u1: SpectralField, C0: np.ndarray) -> SpectralField:
    """``u1^a u1^b - C0[a, b]``; only the zero mode of each entry changes."""
    return _sub_constant(outer_product(u1, u1), C0)


def counterterm_CC(eps: float, t: float, ms: MultiplierSet) -> np.ndarray:
    """``C(t) + C_tilde(t)`` indexed ``[i, i1, j]``."""
    C, Ct = compute_C(eps, t, ms)
    return C + Ct


def wick_u1u2(u1: SpectralField, u2: SpectralField, CC: np.ndarray | None) -> SpectralField:
    """``W[a, b] = u2^a <> u1^b``; ``CC=None`` gives the plain product (exact semigroup)."""
    W = outer_product(u2, u1)
    if CC is None:
        return W
    return W + contract(np.asarray(CC), u1, "acb,c->ab")


def tree_drift(Q: SpectralField, ops: Operators) -> SpectralField:
    """``-1/2 P^{i i1} sum_j D_j Q^{i1 j}`` for a pair field ``Q``."""
    return leray_project(ops.div_rows(Q)) * (-0.5)


def _symmetrize(W: SpectralField) -> SpectralField:
    return SpectralField(W.coeffs + np.swapaxes(W.coeffs, -4, -5))


class TreeStepper:
    """Advance ``(K, u2, u3)`` along a stream of ``u1`` snapshots.

    ``counterterms`` supplies ``t -> CC(t)``; ``None`` means the exact-semigroup
    convention (no linear counterterm in the mixed product).
    """

    def __init__(self, ops: Operators, C0: np.ndarray, counterterms=None, lead: tuple = (),
                 terms: tuple = ("K", "u2", "u3")):
        if "u3" in terms and "u2" not in terms:
            raise ValueError("u3 needs u2")
        self.terms = tuple(terms)
        self.ops = ops
        self.C0 = np.asarray(C0)
        self.counterterms = counterterms
        z = SpectralField.zeros(ops.N, tuple(lead) + (3,))
        self.t = 0.0
        self.K = z
        self.u2 = z.copy()
        self.u3 = z.copy()

    def step(self, u1: SpectralField, dt: float) -> None:
        """Advance from ``t`` to ``t + dt`` with sources frozen at ``u1(t)``."""
        ops = self.ops
        if "u3" in self.terms:
            CC = None if self.counterterms is None else self.counterterms(self.t)
            s3 = tree_drift(_symmetrize(wick_u1u2(u1, self.u2, CC)), ops)
            self.u3 = ops.etd_step(self.u3, s3, dt)
        if "u2" in self.terms:
            self.u2 = ops.etd_step(self.u2, tree_drift(wick_pair(u1, self.C0), ops), dt)
        if "K" in self.terms:
            self.K = ops.etd_step(self.K, u1, dt)
        self.t += dt


def _etd_path(u1_path: Iterable[SpectralField], ops: Operators, dt: float, source) -> list[SpectralField]:
    out = []
    cur = None
    for u1 in u1_path:
        if cur is None:
            cur = SpectralField.zeros(ops.N, u1.lead_shape)
        else:
            cur = ops.etd_step(cur, src, dt)
        out.append(cur)
        src = source(u1, len(out) - 1)
    return out


def solve_K(u1_path: Iterable[SpectralField], ops: Operators, dt: float) -> list[SpectralField]:
    """``K`` at every snapshot time of the input path; ``K(0) = 0``."""
    return _etd_path(u1_path, ops, dt, lambda u1, n: u1)


def solve_u2(u1_path: Iterable[SpectralField], ops: Operators, dt: float, C0: np.ndarray) -> list[SpectralField]:
    return _etd_path(u1_path, ops, dt, lambda u1, n: tree_drift(wick_pair(u1, C0), ops))


def solve_u3(u1_path: list[SpectralField], u2_path: list[SpectralField], ops: Operators, dt: float,
             counterterms=None) -> list[SpectralField]:
    """``u3`` from matching ``u1`` and ``u2`` paths; ``counterterms(t)`` gives ``CC``."""
    if len(u1_path) != len(u2_path):
        raise ValueError("u1 and u2 paths must have equal length")

    def src(u1, n):
        CC = None if counterterms is None else counterterms(n * dt)
        return tree_drift(_symmetrize(wick_u1u2(u1, u2_path[n], CC)), ops)

    return _etd_path(u1_path, ops, dt, src)


# ------------------------------------------------------------ renormalized pi_0


def _DK_fields(K: SpectralField, ops: Operators, which: str) -> SpectralField:
    """``A[i, i1, j] = P^{i i1} D_j K^j`` (``which="K"``) or ``P^{i i1} D_j K^{i1}`` (``"Ktilde"``)."""
    P = projector_symbol(K.N)
    g = ops.g
    c = K.coeffs
    if which == "K":
        DK = g * c[..., :, :, :, :]                                   # (..., j)
        out = P[:, :, None] * DK[..., None, None, :, :, :, :]
    else:
        DK = g[None, :] * c[..., :, None, :, :, :]                    # (..., i1, j)
        out = P[:, :, None] * DK[..., None, :, :, :, :, :]
    return SpectralField(out)


def _pi0_DK(K: SpectralField, u1: SpectralField, ops: Operators, which: str, index, dp) -> SpectralField:
    A = _DK_fields(K, ops, which)
    dp = partition_for(K.N) if dp is None else dp
    if index is None:
        # out[..., i, i1, j1, j]
        return resonant(SpectralField(A.coeffs[..., :, :, None, :, :, :, :]),
                        SpectralField(u1.coeffs[..., None, None, :, None, :, :, :]), dp)
    i, i1, j1, j = index
    return resonant(SpectralField(A.coeffs[..., i, i1, j, :, :, :]),
                    SpectralField(u1.coeffs[..., j1, :, :, :]), dp)


def pi0_diamond_K(K: SpectralField, u1: SpectralField, ops: Operators, C3: np.ndarray | None,
                  index: tuple | None = None, dp: DyadicPartition | None = None) -> SpectralField:
    """``pi_0(P^{i i1} D_j K^j, u1^{j1}) - C3[i, i1, j1, j]``.

    Without ``index`` the result has lead ``(..., i, i1, j1, j)``. ``C3=None``
    is the exact-semigroup convention (no subtraction).
    """
    out = _pi0_DK(K, u1, ops, "K", index, dp)
    if C3 is None:
        return out
    C = np.asarray(C3) if index is None else np.asarray(C3)[tuple(index)]
    return _sub_constant(out, C)


def pi0_diamond_Ktilde(K: SpectralField, u1: SpectralField, ops: Operators, C3t: np.ndarray | None,
                       index: tuple | None = None, dp: DyadicPartition | None = None) -> SpectralField:
    """``pi_0(P^{i i1} D_j K^{i1}, u1^{j1}) - C3_tilde[i, j, j1, i1]``, lead ``(..., i, i1, j1, j)``."""
    out = _pi0_DK(K, u1, ops, "Ktilde", index, dp)
    if C3t is None:
        return out
    # stored as C3t[i, j, j1, i1]; reorder to [i, i1, j1, j]
    C = np.transpose(np.asarray(C3t), (0, 3, 2, 1))
    if index is not None:
        C = C[tuple(index)]
    return _sub_constant(out, C)


def pi0_diamond_u3(u3: SpectralField, u1: SpectralField, u2: SpectralField, table: RenormTable | None,
                   allow_partial: bool = False, dp: DyadicPartition | None = None) -> SpectralField:
    """``pi_0(u3^i, u1^j) - phi1[i, j] - C1[i, j] + sum_c CC[i, c, j] u2^c``.

    The ``C12``/``phi12`` half of the constant is never specified, so the
    discrete-semigroup version raises :class:`UnavailableCounterterm` unless
    ``allow_partial`` is set, in which case only the ``C11`` family is used
    and a warning is emitted. ``table=None`` is the exact-semigroup
    convention, which subtracts ``phi11_bar + C11_bar`` only.
    """
    dp = partition_for(u3.N) if dp is None else dp
    out = resonant(SpectralField(u3.coeffs[..., :, None, :, :, :]),
                   SpectralField(u1.coeffs[..., None, :, :, :, :]), dp)
    if table is None:
        return out
    if table.second is None:
        raise UnavailableCounterterm("table was built without second-order constants")
    if not allow_partial:
        raise UnavailableCounterterm("C12 is unspecified; pass allow_partial=True to use C11 only")
    warn_partial_C1()
    so = table.second
    out = _sub_constant(out, so.phi11 + so.C11)
    CC = table.C + table.C_tilde
    return out + contract(CC, u2, "icj,c->ij")


# ---------------------------------------------------------------- joint paths


@dataclass
class TreePath:
    """Snapshots of ``u1, u2, u3, K`` on a uniform time grid starting at 0."""

    times: np.ndarray
    u1: list = field(repr=False)
    u2: list = field(repr=False)
    u3: list = field(repr=False)
    K: list = field(repr=False)
    eps: float = 0.0
    ms: MultiplierSet | None = None
    exact: bool = False
    renorm: RenormTable | None = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.times)
        if not all(len(x) == n for x in (self.u1, self.u2, self.u3, self.K)):
            raise ValueError("all snapshot lists must match the time grid")


def tree_operators(N: int, eps: float, ms: MultiplierSet, exact: bool):
    """``(ops, C0, counterterms)`` for the discrete or the exact family."""
    C0, C0b = compute_C0(eps, ms)
    if exact:
        return Operators.exact(N), C0b, None
    return Operators.approx(N, eps, ms), C0, (lambda t: counterterm_CC(eps, t, ms))


def iterate_trees(u1_stream: Iterable[SpectralField], N: int, eps: float, ms: MultiplierSet, dt: float,
                  exact: bool = False, terms: tuple = ("K", "u2", "u3"),
                  ) -> Iterator[tuple[float, SpectralField, TreeStepper]]:
    """Yield ``(t, u1(t), stepper)`` with the stepper holding ``K, u2, u3`` at ``t``."""
    ops, C0, cts = tree_operators(N, eps, ms, exact)
    st = None
    for u1 in u1_stream:
        if st is None:
            st = TreeStepper(ops, C0, cts, u1.lead_shape[:-1], terms)
        else:
            st.step(prev, dt)
        yield st.t, u1, st
        prev = u1


def build_tree_path(u1_path: list[SpectralField], N: int, eps: float, ms: MultiplierSet, dt: float,
                    exact: bool = False, renorm: RenormTable | None = None) -> TreePath:
    times, u1s, u2s, u3s, Ks = [], [], [], [], []
    for t, u1, st in iterate_trees(u1_path, N, eps, ms, dt, exact):
        times.append(t)
        u1s.append(u1)
        u2s.append(st.u2)
        u3s.append(st.u3)
        Ks.append(st.K)
    return TreePath(np.asarray(times), u1s, u2s, u3s, Ks, eps, ms, exact, renorm)


__all__ = [
    "wick_pair",
    "wick_u1u2",
    "counterterm_CC",
    "tree_drift",
    "TreeStepper",
    "solve_K",
    "solve_u2",
    "solve_u3",
    "pi0_diamond_K",
    "pi0_diamond_Ktilde",
    "pi0_diamond_u3",
    "TreePath",
    "tree_operators",
    "iterate_trees",
    "build_tree_path",
]
