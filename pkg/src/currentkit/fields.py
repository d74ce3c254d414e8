"""Torus field calculus.

Periodic scalar fields on (Z/side)^d with circular convolution, weighted-norm
grids, the random-walk proxy pair, geometric chain sums with certified tails,
the triangle kernel, and the diagnostic reports (convolution bound, decay
hypotheses, pointwise reduction ratios) used by the reductions suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as iproduct
from typing import Iterable, Sequence

import numpy as np

from .graphs import GraphError, SpreadOut, spread_out_coupling


class NonContracting(RuntimeError):
    """A geometric chain sum was requested but the contraction ratio is >= 1."""


@dataclass(frozen=True, eq=False)
class Field:
    """Real field on the d-dimensional torus of the given side."""

    d: int
    side: int
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != (self.side,) * self.d:
            raise GraphError("field data shape does not match (side,)*d")

    def value(self, x: Sequence[int]) -> float:
        return float(self.data[tuple(int(c) % self.side for c in x)])

    def l1(self) -> float:
        return float(np.abs(self.data).sum())

    def linf(self) -> float:
        return float(np.abs(self.data).max())

    def total(self) -> float:
        return float(self.data.sum())

    def reversed(self) -> "Field":
        """x -> f(-x)."""
        rev = self.data[(slice(None, None, -1),) * self.d]
        return Field(self.d, self.side, np.roll(rev, 1, axis=tuple(range(self.d))))

    def shifted(self, x: Sequence[int]) -> "Field":
        """x0 -> f(x0 - x)."""
        return Field(self.d, self.side,
                     np.roll(self.data, tuple(int(c) for c in x), axis=tuple(range(self.d))))

    def __add__(self, other):
        return Field(self.d, self.side, self.data + self._coerce(other))

    def __sub__(self, other):
        return Field(self.d, self.side, self.data - self._coerce(other))

    def __mul__(self, other):
        return Field(self.d, self.side, self.data * self._coerce(other))

    __rmul__ = __mul__

    def _coerce(self, other):
        if isinstance(other, Field):
            if (other.d, other.side) != (self.d, self.side):
                raise GraphError("field shape mismatch")
            return other.data
        return other


def zeros(d: int, side: int) -> Field:
    return Field(d, side, np.zeros((side,) * d))


def delta(d: int, side: int) -> Field:
    f = zeros(d, side)
    f.data[(0,) * d] = 1.0
    return f


def from_offsets(d: int, side: int, offsets: dict) -> Field:
    f = zeros(d, side)
    for off, val in offsets.items():
        f.data[tuple(int(c) % side for c in off)] += val
    return f


def convolve(f: Field, g: Field, method: str = "fft") -> Field:
    """Circular convolution (f*g)(z) = sum_x f(x) g(z - x)."""
    if (f.d, f.side) != (g.d, g.side):
        raise GraphError("field shape mismatch")
    if method == "fft":
        axes = tuple(range(f.d))
        F = np.fft.rfftn(f.data)
        G = np.fft.rfftn(g.data)
        out = np.fft.irfftn(F * G, s=f.data.shape, axes=axes)
        return Field(f.d, f.side, out)
    if method == "direct":
        out = np.zeros_like(f.data)
        axes = tuple(range(f.d))
        for idx in np.argwhere(f.data != 0):
            out += f.data[tuple(idx)] * np.roll(g.data, tuple(idx), axis=axes)
        return Field(f.d, f.side, out)
    raise GraphError(f"unknown convolution method {method!r}")


def conv_power(f: Field, j: int, method: str = "fft") -> Field:
    if j < 0:
        raise GraphError("negative convolution power")
    out = delta(f.d, f.side)
    for _ in range(j):
        out = convolve(out, f, method=method)
    return out


# ---------------------------------------------------------------------------
# weighted norms
# ---------------------------------------------------------------------------

def weighted_norm(x: Sequence[float], L: float) -> float:
    """Euclidean norm floored at L."""
    return max(math.sqrt(sum(float(c) ** 2 for c in x)), float(L))


def centered_norm_grid(d: int, side: int, L: float, power: float) -> np.ndarray:
    """Grid of weighted_norm(x)**power over centered torus displacements."""
    idx = np.arange(side)
    cent = (idx + side // 2) % side - side // 2
    sq = np.zeros((side,) * d)
    for ax in range(d):
        shape = [1] * d
        shape[ax] = side
        sq = sq + (cent.reshape(shape) ** 2)
    nrm = np.maximum(np.sqrt(sq), float(L))
    return nrm ** power


# ---------------------------------------------------------------------------
# proxy pair and smeared kernels
# ---------------------------------------------------------------------------

def step_distribution(spec: SpreadOut, side: int) -> Field:
    """One-step distribution D of the spread-out walk, wrapped on the torus."""
    if side <= 2 * spec.L:
        raise GraphError(f"side {side} must exceed 2L = {2 * spec.L}")
    return from_offsets(spec.d, side, spread_out_coupling(spec))


def rw_green_proxy(spec: SpreadOut, side: int, p: float) -> tuple:
    """Proxy pair (G, tau): G the random-walk resolvent with killing 1 - p,
    tau = p D. Solves G = delta + tau * G exactly in Fourier space, so the
    smeared kernel tau * G equals G - delta on the nose.
    """
    if not (0 <= p):
        raise GraphError("p must be nonnegative")
    D = step_distribution(spec, side)
    Dhat = np.fft.fftn(D.data)
    if np.abs(Dhat.imag).max() > 1e-12:
        raise GraphError("step distribution is not symmetric")
    top = p * Dhat.real.max()
    if top >= 1.0 - 1e-12:
        raise NonContracting(f"proxy series diverges: p * max D-hat = {top}")
    Shat = 1.0 / (1.0 - p * Dhat)
    S = np.fft.ifftn(Shat)
    if np.abs(S.imag).max() > 1e-10:
        raise GraphError("proxy transform produced a complex field")
    S = S.real
    neg = S.min()
    if neg < -1e-10 * max(S.max(), 1.0):
        raise GraphError(f"proxy field has a significant negative entry {neg}")
    S = np.where(S < 0, 0.0, S)
    return Field(spec.d, side, S), Field(spec.d, side, p * D.data)


def tilde_g(G: Field, tau: Field, method: str = "fft") -> Field:
    """Smeared two-point field tau * G, clipped of FFT rounding negatives."""
    out = convolve(tau, G, method=method)
    neg = out.data.min()
    if neg < -1e-10 * max(out.data.max(), 1.0):
        raise GraphError(f"smeared field has a significant negative entry {neg}")
    out.data[out.data < 0] = 0.0
    return out


def bubble_chain(Gt: Field, m: int | None, j_start: int = 0, atol: float = 1e-12) -> Field:
    """Sum of convolution powers of the pointwise square of Gt.

    With m an integer this is sum_{j=j_start}^{m} (Gt^2)^{*j}. With m = None
    the infinite sum is certified: for nonnegative summands the l1 mass of each
    increment contracts by exactly q = l1(Gt^2) per step, so the series is
    truncated once the increment mass drops below atol * (1 - q) / q and the
    remaining tail mass (an entrywise upper bound for the missing terms) is
    added to every entry. Raises NonContracting when q >= 1.
    """
    if j_start < 0:
        raise GraphError("j_start must be >= 0")
    sq = Gt * Gt
    cur = conv_power(sq, j_start)
    out = Field(Gt.d, Gt.side, cur.data.copy())
    if m is not None:
        if m < j_start:
            return zeros(Gt.d, Gt.side)
        for _ in range(j_start, m):
            cur = convolve(cur, sq)
            out = out + cur
        return out
    q = sq.l1()
    if q >= 1.0:
        raise NonContracting(f"bubble mass {q} >= 1, infinite chain diverges")
    if q == 0.0:
        return out
    while cur.l1() >= atol * (1.0 - q) / q:
        cur = convolve(cur, sq)
        out = out + cur
    tail = cur.l1() * q / (1.0 - q)
    return Field(Gt.d, Gt.side, out.data + tail)


# ---------------------------------------------------------------------------
# triangle kernel
# ---------------------------------------------------------------------------

def triangle_T(G: np.ndarray, o: int, x: int, y: int) -> float:
    """Triangle-with-tail kernel on a finite vertex set.

    T(o, x, y) = sum_z G(o,z) G(z,x) G(y,z) * [ G(o,x) G(y,z)
                  + G(o,y) G(z,x) + G(o,z) G(x,y) ].
    With G the identity this collapses to 3 on the full diagonal: only z = o
    survives and each bracket term contributes 1.
    """
    G = np.asarray(G)
    core = G[o, :] * G[:, x] * G[y, :]
    bracket = G[o, x] * G[y, :] + G[o, y] * G[:, x] + G[o, :] * G[x, y]
    return float(np.dot(core, bracket))


def triangle_tensor(G: np.ndarray) -> np.ndarray:
    """All triangle values T(a, b, c) as an (n, n, n) tensor."""
    G = np.asarray(G)
    G2 = G * G
    t1 = np.einsum("az,zb,cz,cz->abc", G, G, G, G) * G[:, :, None]
    t2 = np.einsum("az,zb,cz->abc", G, G2, G) * G[:, None, :]
    t3 = np.einsum("az,zb,cz->abc", G2, G, G) * G[None, :, :]
    return t1 + t2 + t3


def triangle_T_field(G: Field, x: Sequence[int], y: Sequence[int]) -> float:
    """Triangle kernel rooted at the torus origin."""
    Grev = G.reversed()
    A = G.data * Grev.shifted(x).data          # G(z) G(x-z)
    B = G.shifted(y).data                      # G(z-y)
    C = (G.value(x) * B
         + G.value(y) * G.shifted(x).data      # G(z-x)
         + G.data * G.value(tuple(a - b for a, b in zip(y, x))))
    return float((A * B * C).sum())


# ---------------------------------------------------------------------------
# convolution bound check
# ---------------------------------------------------------------------------

def _box_norm_grids(d: int, R: int, L: float, shift=None) -> np.ndarray:
    """Weighted norm of (shift - y) over the box {-R..R}^d (shift defaults 0)."""
    offs = np.arange(-R, R + 1, dtype=float)
    sq = np.zeros((2 * R + 1,) * d)
    for ax in range(d):
        shape = [1] * d
        shape[ax] = 2 * R + 1
        c = offs if shift is None else (float(shift[ax]) - offs)
        sq = sq + (c.reshape(shape) ** 2)
    return np.maximum(np.sqrt(sq), float(L))


def default_probes(d: int, R: int) -> list:
    probes = [(0,) * d]
    r = 1
    while r <= R // 2:
        probes.append((r,) + (0,) * (d - 1))
        probes.append((r,) * d)
        r *= 2
    return probes


def convolution_bound_check(d: int, a: float, b: float, L: float, R: int,
                            probes: Iterable | None = None) -> dict:
    """Measure sum_y <x-y>^-a <y>^-b over the box {-R..R}^d against its
    asserted envelope, for a family of probe points x.

    Requires a >= b > 0, a + b > d and a != d. The envelope is
    L^(d-a) <x>^-b for a > d and <x>^(d-a-b) for a < d. Returns the per-probe
    ratios and their maximum (the measured constant).
    """
    if not (a >= b > 0):
        raise GraphError("need a >= b > 0")
    if not (a + b > d):
        raise GraphError("need a + b > d")
    if a == d:
        raise GraphError("the marginal case a == d is rejected")
    if probes is None:
        probes = default_probes(d, R)
    wY = _box_norm_grids(d, R, L) ** (-b)
    ratios = {}
    for x in probes:
        wXY = _box_norm_grids(d, R, L, shift=x) ** (-a)
        lhs = float((wXY * wY).sum())
        nx = weighted_norm(x, L)
        env = (L ** (d - a)) * nx ** (-b) if a > d else nx ** (d - a - b)
        ratios[tuple(x)] = lhs / env
    return {"ratios": ratios, "constant": max(ratios.values())}


# ---------------------------------------------------------------------------
# hypothesis and reduction reports
# ---------------------------------------------------------------------------

def wrap_mass(f: Field) -> float:
    """Fraction of |f| living at centered sup-norm distance > side/4; a
    diagnostic for how much of the field feels the periodic wrap."""
    idx = np.arange(f.side)
    cent = np.abs((idx + f.side // 2) % f.side - f.side // 2)
    far = np.zeros((f.side,) * f.d, dtype=bool)
    for ax in range(f.d):
        shape = [1] * f.d
        shape[ax] = f.side
        far |= cent.reshape(shape) > f.side / 4
    tot = np.abs(f.data).sum()
    if tot == 0:
        return 0.0
    return float(np.abs(f.data[far]).sum() / tot)


def hyp1_report(G: Field, tau: Field, L: float) -> dict:
    """Norm hypothesis: l1(tau) and sup over x != 0 of G(x) <x>^(d-2) / theta,
    both required to be at most 2."""
    theta = float(L) ** (-2)
    grid = centered_norm_grid(G.d, G.side, L, float(G.d - 2))
    ratio = G.data * grid / theta
    ratio[(0,) * G.d] = 0.0
    sup = float(ratio.max())
    t1 = tau.l1()
    return {"tau_l1": t1, "sup_ratio": sup,
            "value": max(t1, sup), "passed": max(t1, sup) <= 2.0}


def hyp2_report(G: Field, Gt: Field, L: float) -> dict:
    """Pointwise domination G - delta <= Gt, and the scale of
    Gt(x) <x>^(d-2) / theta (reported, finite by construction here)."""
    theta = float(L) ** (-2)
    dlt = delta(G.d, G.side)
    gap = float((Gt.data - (G.data - dlt.data)).min())
    grid = centered_norm_grid(G.d, G.side, L, float(G.d - 2))
    scale = float((Gt.data * grid / theta).max())
    return {"min_gap": gap, "dominates": gap >= -1e-12, "scale": scale}


def hyp3_report(Gt: Field, tau: Field, floor: float = 0.0) -> dict:
    """Stability of Gt under one and two tau-smearing steps: the sup of
    (tau^{*j} * Gt) / Gt over entries with Gt above the floor."""
    out = {}
    cur = Field(Gt.d, Gt.side, Gt.data.copy())
    thr = max(floor, 1e-300)
    for j in (1, 2):
        cur = convolve(tau, cur)
        mask = Gt.data > thr
        out[f"ratio_{j}"] = float((cur.data[mask] / Gt.data[mask]).max())
    return out


def key_lemma_gap(tau: Field, f: Field) -> float:
    """Min of ((delta+tau) * f)^2 - (delta+tau^2) * f^2; nonnegative iff the
    square-absorption lemma holds pointwise for this pair."""
    dlt = delta(tau.d, tau.side)
    lhs = convolve(dlt + tau * tau, f * f)
    rhs = convolve(dlt + tau, f)
    return float((rhs.data ** 2 - lhs.data).min())


def key_lemma_gap_matrix(Tau: np.ndarray, F: np.ndarray) -> float:
    """Entrywise version on a finite vertex set: min of
    ((I+Tau) F)_{uv}^2 - ((I+Tau^2)(F o F))_{uv} over pairs, with o the
    elementwise square and matrix products playing convolution."""
    n = Tau.shape[0]
    I = np.eye(n)
    lhs = (I + Tau * Tau) @ (F * F)
    rhs = (I + Tau) @ F
    return float((rhs * rhs - lhs).min())


def psi1_report(Gt: Field, tau: Field) -> dict:
    """Three-step decomposition of the sandwiched bubble chain head.

    Step 1 is an exact rearrangement: (d+t2)*(d+Gt2)*(d+t2) - d equals
    (d+t2) + (d+t2)*t2 + (d+t2)*(d+t2)*Gt2 - d, with d the delta and t2, Gt2
    the pointwise squares. Step 2 absorbs squares via the key lemma; step 3
    replaces tau by Gt. Returns the identity residual and the minimal slack of
    each inequality (nonnegative means satisfied).
    """
    d, side = Gt.d, Gt.side
    dlt = delta(d, side)
    t2 = tau * tau
    g2 = Gt * Gt
    e = dlt + t2
    full = convolve(convolve(e, dlt + g2), e)
    lhs1 = full - dlt
    rhs1 = e + convolve(e, t2) + convolve(convolve(e, e), g2) - dlt
    resid = float(np.abs(lhs1.data - rhs1.data).max())
    s_tau = convolve(dlt + tau, tau)
    s2_gt = convolve(convolve(dlt + tau, dlt + tau), Gt)
    rhs2 = t2 + s_tau * s_tau + s2_gt * s2_gt
    slack2 = float((rhs2.data - lhs1.data).min())
    s_gt = convolve(dlt + tau, Gt)
    rhs3 = g2 + s_gt * s_gt + s2_gt * s2_gt
    slack3 = float((rhs3.data - rhs2.data).min())
    # FFT rounding is absolute at the scale of the unit delta spikes in the
    # inputs, so the residual is normalised against 1, not the output max
    # (which can sit orders of magnitude lower without any loss of exactness).
    scale = max(np.abs(lhs1.data).max(), 1.0)
    return {"identity_residual": resid, "identity_rel": resid / scale,
            "slack_step2": slack2, "slack_step3": slack3,
            "key_lemma_tau": key_lemma_gap(tau, tau),
            "key_lemma_gt": key_lemma_gap(tau, Gt)}


def _probe_pairs(d: int) -> list:
    e1 = (1,) + (0,) * (d - 1)
    e2 = (0, 1) + (0,) * (d - 2) if d >= 2 else (2,)
    z = (0,) * d
    two = tuple(2 * c for c in e1)
    return [z, e1, e2, two, tuple(a + b for a, b in zip(e1, e2))]


def depicted_ratios(G: Field, Gt: Field) -> dict:
    """Pointwise reduction ratios for eliminating a degree-4 vertex.

    Six families, indexed as in the reduction step of the chain bound:
      0: all four legs smeared; against Gt(u-u') Gt(v-v').
      1: one full-G leg (its delta collapses the vertex), same target.
      2: two full-G legs on opposite sides, same target.
      3: the two full-G legs land on a coincident endpoint (u' = v'), where
         the delta-delta term reproduces the target itself; O(1) expected.
      4: bubble elimination at u = v (two full-G legs from the same root);
         target keeps one full-G segment; O(1) expected.
      5: triangle against its three-two-point product envelope; O(1) expected.
    Families 0 to 2 are expected to scale like side-range**(-d).
    """
    d = G.d
    probes = _probe_pairs(d)

    def four_point(leftA, leftB, rightA, rightB, u, up, v, vp):
        # sum_x A(u-x) B(x-u') C(v-x) D(x-v')
        arrA = leftA.reversed().shifted(u).data
        arrB = leftB.shifted(up).data
        arrC = rightA.reversed().shifted(v).data
        arrD = rightB.shifted(vp).data
        return float((arrA * arrB * arrC * arrD).sum())

    def gt(a, b):
        return Gt.value(tuple(q - p for p, q in zip(a, b)))

    def gfull(a, b):
        return G.value(tuple(q - p for p, q in zip(a, b)))

    out = {}
    z = (0,) * d
    quads = [(z, p, q, r) for p in probes[1:3] for q in probes[1:3] for r in probes[2:4]]
    # 0: Gt Gt Gt Gt
    out["ratio0"] = max(
        four_point(Gt, Gt, Gt, Gt, u, up, v, vp) / (gt(u, up) * gt(v, vp))
        for (u, up, v, vp) in quads)
    # 1: G Gt Gt Gt
    out["ratio1"] = max(
        four_point(G, Gt, Gt, Gt, u, up, v, vp) / (gt(u, up) * gt(v, vp))
        for (u, up, v, vp) in quads)
    # 2: G Gt G Gt
    out["ratio2"] = max(
        four_point(G, Gt, G, Gt, u, up, v, vp) / (gt(u, up) * gt(v, vp))
        for (u, up, v, vp) in quads)
    # 3: coincident endpoint u' = v', slashed legs into it
    out["ratio3"] = max(
        four_point(Gt, G, Gt, G, u, w, v, w) / (gt(u, w) * gt(v, w))
        for u in probes[1:3] for v in probes[2:4] for w in probes[:2])
    # 4: bubble at u = v, target keeps one full segment
    out["ratio4"] = max(
        four_point(G, Gt, G, Gt, z, up, z, vp)
        / (gfull(z, up) * gt(z, vp) + gt(z, up) * gfull(z, vp))
        for up in probes[1:4] for vp in probes[1:4])
    # 5: triangle against its product envelope
    t5 = []
    for x in probes[1:4]:
        for a in probes[1:4]:
            if x == a:
                continue
            t5.append(triangle_T_field(G, x, a)
                      / (gfull(z, x) * gfull(z, a) * gfull(x, a)))
    out["ratio5"] = max(t5)
    return out
