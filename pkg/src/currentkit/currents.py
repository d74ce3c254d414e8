"""Parity-class sweeps over bond currents and event-weighted measures.

A current configuration on a bond set is summarised by one of three parity
classes per bond: zero, positive even, or odd. The class weights at inverse
temperature beta are 1, cosh(beta*J) - 1 and sinh(beta*J); summing a product of
class weights over all assignments with a prescribed source set reproduces the
partition function and correlation ratios exactly. Events (connectivity,
double connectivity, through-sets) depend on a configuration only through its
positive-bond mask, so sweeps aggregate weight by (positive mask, source mask)
and events are evaluated once per mask.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .graphs import CouplingGraph, GraphError

ZERO, EVEN, ODD = 0, 1, 2

SINGLE_LAYER_CAP = 16
MULTI_LAYER_CAP = 12
PI1_CAP = 10

_CHUNK = 1 << 18
_MEM_LIMIT = 1 << 30


class CapExceeded(ValueError):
    """Requested sweep is larger than the configured enumeration cap."""


def class_weights(g: CouplingGraph, b: int) -> tuple:
    """(zero, positive-even, odd) weights for bond ``b``."""
    a = g.beta * g.couplings[b]
    return (1.0, math.cosh(a) - 1.0, math.sinh(a))


def class_weight_product(g: CouplingGraph, bonds: Sequence[int], classes: Sequence[int]) -> float:
    w = 1.0
    for b, c in zip(bonds, classes):
        w *= class_weights(g, b)[c]
    return w


def _bonds_arg(g: CouplingGraph, restriction) -> tuple:
    if restriction is None:
        return tuple(range(g.n_bonds))
    bs = tuple(sorted(set(int(b) for b in restriction)))
    for b in bs:
        if not (0 <= b < g.n_bonds):
            raise GraphError(f"bond index {b} out of range")
    return bs


def _source_mask(g: CouplingGraph, vertices: Iterable) -> int:
    m = 0
    for lab in vertices:
        m ^= 1 << g.index(lab)
    return m


def _vertex_masks(g: CouplingGraph, bonds: Sequence[int]) -> np.ndarray:
    vm = np.zeros(len(bonds), dtype=np.int64)
    for k, b in enumerate(bonds):
        i, j = g.bonds[b]
        vm[k] = (1 << i) | (1 << j)
    return vm


def _sweep(g: CouplingGraph, bonds: tuple, with_positive: bool) -> np.ndarray:
    """Aggregate class-weight products by (positive mask, source mask).

    Returns shape (2**len(bonds), 2**n) when ``with_positive`` else (2**n,).
    Positive-mask bit k refers to position k within ``bonds``.
    """
    nb = len(bonds)
    n = g.n_vertices
    if with_positive and (1 << (nb + n)) * 8 > _MEM_LIMIT:
        raise CapExceeded(f"positive table for {nb} bonds on {n} vertices too large")
    wt = np.array([class_weights(g, b) for b in bonds], dtype=float)
    vm = _vertex_masks(g, bonds)
    total = 3 ** nb
    out_n = (1 << (nb + n)) if with_positive else (1 << n)
    acc = np.zeros(out_n, dtype=float)
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        rem = np.arange(lo, hi, dtype=np.int64)
        w = np.ones(hi - lo, dtype=float)
        pm = np.zeros(hi - lo, dtype=np.int64)
        sm = np.zeros(hi - lo, dtype=np.int64)
        for k in range(nb):
            dig = rem % 3
            rem //= 3
            w *= wt[k, dig]
            if with_positive:
                pm |= (dig >= 1).astype(np.int64) << k
            sm ^= np.where(dig == ODD, vm[k], 0)
        key = (pm << n) | sm if with_positive else sm
        acc += np.bincount(key, weights=w, minlength=out_n)
    if with_positive:
        return acc.reshape(1 << nb, 1 << n)
    return acc


@lru_cache(maxsize=64)
def _source_table(g: CouplingGraph, bonds: tuple) -> np.ndarray:
    return _sweep(g, bonds, with_positive=False)


@lru_cache(maxsize=32)
def _positive_table(g: CouplingGraph, bonds: tuple) -> np.ndarray:
    return _sweep(g, bonds, with_positive=True)


def _check_cap(bonds_total: int, cap: int | None, default: int) -> None:
    limit = default if cap is None else cap
    if bonds_total > limit:
        raise CapExceeded(f"{bonds_total} bonds exceeds cap {limit}")


# ---------------------------------------------------------------------------
# partition function and correlations
# ---------------------------------------------------------------------------

def partition_function(g: CouplingGraph, restriction=None, cap: int | None = None) -> float:
    """Total even-source weight on the restricted bond set.

    Equals 2**(-n) times the spin sum of exp(-beta H) restricted to those bonds.
    """
    bonds = _bonds_arg(g, restriction)
    _check_cap(len(bonds), cap, SINGLE_LAYER_CAP)
    return float(_source_table(g, bonds)[0])


def correlation(g: CouplingGraph, x, y, restriction=None, cap: int | None = None) -> float:
    bonds = _bonds_arg(g, restriction)
    _check_cap(len(bonds), cap, SINGLE_LAYER_CAP)
    st = _source_table(g, bonds)
    sm = _source_mask(g, (x, y))
    return float(st[sm] / st[0])


def four_point(g: CouplingGraph, x, y, u, v, restriction=None, cap: int | None = None) -> float:
    bonds = _bonds_arg(g, restriction)
    _check_cap(len(bonds), cap, SINGLE_LAYER_CAP)
    st = _source_table(g, bonds)
    sm = _source_mask(g, (x, y, u, v))
    return float(st[sm] / st[0])


def two_point_matrix(g: CouplingGraph, restriction=None, cap: int | None = None) -> np.ndarray:
    """Symmetric matrix of pair correlations over all vertex index pairs."""
    bonds = _bonds_arg(g, restriction)
    _check_cap(len(bonds), cap, SINGLE_LAYER_CAP)
    st = _source_table(g, bonds)
    n = g.n_vertices
    M = np.empty((n, n), dtype=float)
    for i in range(n):
        for j in range(n):
            M[i, j] = st[(1 << i) ^ (1 << j)]
    return M / st[0]


# ---------------------------------------------------------------------------
# spin-sum second route (cross-check oracle used by the identities suite)
# ---------------------------------------------------------------------------

def _spin_matrix(n: int) -> np.ndarray:
    if n > 20:
        raise CapExceeded("spin sweep limited to 20 vertices")
    bits = (np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1
    return 1.0 - 2.0 * bits


def spin_expectation(g: CouplingGraph, vertices: Iterable = (), restriction=None) -> float:
    """<prod phi_v> by direct spin summation; empty product gives the
    normalised partition sum 2**(-n) * sum exp(-beta H)."""
    bonds = _bonds_arg(g, restriction)
    s = _spin_matrix(g.n_vertices)
    energy = np.zeros(s.shape[0])
    for b in bonds:
        i, j = g.bonds[b]
        energy += g.beta * g.couplings[b] * s[:, i] * s[:, j]
    boltz = np.exp(energy)
    obs = np.ones(s.shape[0])
    for lab in vertices:
        obs *= s[:, g.index(lab)]
    num = float(np.dot(obs, boltz))
    den = float(boltz.sum())
    if vertices:
        return num / den
    return den / s.shape[0]


# ---------------------------------------------------------------------------
# connectivity on positive-bond masks
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1 << 18)
def _components(g: CouplingGraph, mask: int) -> tuple:
    """Component id per vertex in the graph of mask-positive bonds."""
    n = g.n_vertices
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    m = mask
    while m:
        b = (m & -m).bit_length() - 1
        m &= m - 1
        i, j = g.bonds[b]
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    return tuple(find(v) for v in range(n))


def _connected(g: CouplingGraph, mask: int, iu: int, iv: int) -> bool:
    if iu == iv:
        return True
    c = _components(g, mask)
    return c[iu] == c[iv]


def _doubly_connected(g: CouplingGraph, mask: int, iu: int, iv: int) -> bool:
    """Two bond-disjoint positive paths between iu and iv (true at iu == iv).

    Menger on the simple graph of positive bonds: doubly connected iff
    connected and still connected after removing any single positive bond.
    """
    if iu == iv:
        return True
    if not _connected(g, mask, iu, iv):
        return False
    m = mask
    while m:
        bbit = m & -m
        m &= m - 1
        if not _connected(g, mask & ~bbit, iu, iv):
            return False
    return True


def _incident_mask(g: CouplingGraph, A_idx: frozenset) -> int:
    m = 0
    for b, (i, j) in enumerate(g.bonds):
        if i in A_idx or j in A_idx:
            m |= 1 << b
    return m


def _through(g: CouplingGraph, mask: int, iu: int, iv: int, A_idx: frozenset) -> bool:
    """Doubly connected, and every positive path iu -> iv meets A_idx.

    At iu == iv the only path is the empty one at iu, so the event is iu in A.
    """
    if iu == iv:
        return iu in A_idx
    if not _doubly_connected(g, mask, iu, iv):
        return False
    if iu in A_idx or iv in A_idx:
        return True
    return not _connected(g, mask & ~_incident_mask(g, A_idx), iu, iv)


# ---------------------------------------------------------------------------
# events and layered measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Event:
    """Positive-mask event. ``bonds`` restricts which bonds may carry the
    connection (None means all bonds of the graph)."""

    kind: str
    u: object = None
    v: object = None
    A: frozenset = frozenset()
    bonds: tuple | None = None
    parts: tuple = ()


def conn(u, v, bonds=None) -> Event:
    return Event("conn", u, v, bonds=None if bonds is None else tuple(sorted(bonds)))


def double_conn(u, v, bonds=None) -> Event:
    return Event("double", u, v, bonds=None if bonds is None else tuple(sorted(bonds)))


def through(u, v, A, bonds=None) -> Event:
    return Event("through", u, v, frozenset(A),
                 bonds=None if bonds is None else tuple(sorted(bonds)))


def conj(*events: Event) -> Event:
    return Event("and", parts=tuple(events))


def _bonds_mask(g: CouplingGraph, bonds) -> int:
    if bonds is None:
        return (1 << g.n_bonds) - 1
    m = 0
    for b in bonds:
        m |= 1 << b
    return m


def event_holds(g: CouplingGraph, ev: Event, mask: int) -> bool:
    """Evaluate ``ev`` on a global positive-bond mask."""
    if ev.kind == "and":
        return all(event_holds(g, p, mask) for p in ev.parts)
    m = mask & _bonds_mask(g, ev.bonds)
    iu, iv = g.index(ev.u), g.index(ev.v)
    if ev.kind == "conn":
        return _connected(g, m, iu, iv)
    if ev.kind == "double":
        return _doubly_connected(g, m, iu, iv)
    if ev.kind == "through":
        A_idx = frozenset(g.index(a) for a in ev.A)
        return _through(g, m, iu, iv, A_idx)
    raise ValueError(f"unknown event kind {ev.kind!r}")


@dataclass(frozen=True)
class Layer:
    """One sourced current layer: bond restriction plus source vertices."""

    bonds: tuple | None = None
    sources: tuple = ()


def _global_mask_map(g: CouplingGraph, bonds: tuple) -> np.ndarray:
    """Local positive mask (over positions in ``bonds``) -> global bond mask."""
    nb = len(bonds)
    gm = np.zeros(1 << nb, dtype=np.int64)
    for pm in range(1, 1 << nb):
        low = (pm & -pm).bit_length() - 1
        gm[pm] = gm[pm & (pm - 1)] | (1 << bonds[low])
    return gm


def _layer_weights(g: CouplingGraph, layer: Layer) -> tuple:
    bonds = _bonds_arg(g, layer.bonds)
    W = _positive_table(g, bonds)
    Z = W[:, 0].sum()
    sm = _source_mask(g, layer.sources)
    return _global_mask_map(g, bonds), np.asarray(W[:, sm]) / Z, len(bonds)


def event_measure(g: CouplingGraph, layers: Sequence[Layer], event: Event,
                  cap: int | None = None) -> float:
    """Sum over the layers' class assignments of the product of normalised
    weights, times the event indicator on the superposed positive mask."""
    layers = list(layers)
    if not layers:
        raise GraphError("at least one layer required")
    widest = max(len(_bonds_arg(g, l.bonds)) for l in layers)
    default = SINGLE_LAYER_CAP if len(layers) == 1 else MULTI_LAYER_CAP
    _check_cap(max(widest, g.n_bonds), cap, default)

    masks = np.zeros(1, dtype=np.int64)
    vals = np.ones(1, dtype=float)
    for layer in layers:
        gm, wv, _ = _layer_weights(g, layer)
        nz = np.flatnonzero(wv)
        GM = masks[:, None] | gm[nz][None, :]
        WT = vals[:, None] * wv[nz][None, :]
        dense = np.zeros(1 << g.n_bonds, dtype=float)
        np.add.at(dense, GM.ravel(), WT.ravel())
        masks = np.flatnonzero(dense)
        vals = dense[masks]
    total = 0.0
    for mk, wv in zip(masks.tolist(), vals.tolist()):
        if event_holds(g, event, mk):
            total += wv
    return total


# ---------------------------------------------------------------------------
# double-connection weights and through-set measures
# ---------------------------------------------------------------------------

def _origin_label(g: CouplingGraph, o):
    return g.labels[0] if o is None else o


def pi0(g: CouplingGraph, x, o=None, cap: int | None = None) -> float:
    """Sourced weight of double connection between the origin and x.

    Diagonal x == o gives exactly 1 (the sourceless sum is the partition sum).
    """
    o = _origin_label(g, o)
    return event_measure(g, [Layer(None, (o, x))], double_conn(o, x), cap=cap)


def pi0_tilde(g: CouplingGraph, x, y, o=None, cap: int | None = None) -> float:
    o = _origin_label(g, o)
    ev = conj(double_conn(o, x), conn(o, y))
    return event_measure(g, [Layer(None, (o, x))], ev, cap=cap)


def _outside_bonds(g: CouplingGraph, A_labels) -> tuple:
    A_idx = set(g.index(a) for a in A_labels)
    return tuple(b for b, (i, j) in enumerate(g.bonds) if i not in A_idx and j not in A_idx)


def theta_prime(g: CouplingGraph, x, A, o=None, cap: int | None = None) -> float:
    """Two-layer through-set measure.

    Outer sourceless layer on the bonds avoiding A, inner layer sourced at
    {o, x} on all bonds; the indicator asks for double connection in the
    superposition with every positive path from o to x meeting A. With A empty
    this is 0 for x != o; on the diagonal it degenerates to 1{o in A}.
    """
    o = _origin_label(g, o)
    layers = [Layer(_outside_bonds(g, A), ()), Layer(None, (o, x))]
    return event_measure(g, layers, through(o, x, A), cap=cap)


def theta_double_prime(g: CouplingGraph, x, y, A, o=None, cap: int | None = None) -> float:
    """Through-set measure with the extra demand that o reaches y in the
    superposition."""
    o = _origin_label(g, o)
    layers = [Layer(_outside_bonds(g, A), ()), Layer(None, (o, x))]
    ev = conj(through(o, x, A), conn(o, y))
    return event_measure(g, layers, ev, cap=cap)


def sst_lhs(g: CouplingGraph, x, y, B=None, B_prime=None, o=None,
            cap: int | None = None) -> float:
    """Sourced weight on B of {o connected to y}, optionally with a second
    sourceless layer on B_prime; the connection only uses positive bonds of B."""
    o = _origin_label(g, o)
    B = _bonds_arg(g, B)
    ev = conn(o, y, bonds=B)
    if B_prime is None:
        return event_measure(g, [Layer(B, (o, x))], ev, cap=cap)
    B_prime = _bonds_arg(g, B_prime)
    return event_measure(g, [Layer(B_prime, ()), Layer(B, (o, x))], ev, cap=cap)


def sst_switch_rhs(g: CouplingGraph, x, y, B=None, B_prime=None, o=None,
                   cap: int | None = None) -> float:
    """Partner expression of the source-switching identity: sources moved to
    {o, y} on B_prime and {y, x} on B, same superposed connection event."""
    o = _origin_label(g, o)
    B = _bonds_arg(g, B)
    B_prime = _bonds_arg(g, B_prime)
    ev = conn(o, y, bonds=B)
    return event_measure(g, [Layer(B_prime, (o, y)), Layer(B, (y, x))], ev, cap=cap)


def pi1_upper(g: CouplingGraph, x, o=None, cap: int | None = None) -> float:
    """First-order upper envelope: sourced double-connection weight to a pivot
    u, one explicit tanh step u -> v, a two-point factor v -> y, and the
    through-set measure re-rooted at y with A the positive cluster of the
    origin after deleting the stepped bond."""
    o = _origin_label(g, o)
    bonds = _bonds_arg(g, None)
    _check_cap(len(bonds), cap, PI1_CAP)
    io = g.index(o)
    W = _positive_table(g, bonds)
    Z = W[:, 0].sum()
    G = two_point_matrix(g)
    gm = _global_mask_map(g, bonds)
    theta_cache: dict = {}
    total = 0.0
    for iu in range(g.n_vertices):
        wv = np.asarray(W[:, (1 << io) ^ (1 << iu)]) / Z
        for pm_local in np.flatnonzero(wv):
            mk = int(gm[pm_local])
            if not _doubly_connected(g, mk, io, iu):
                continue
            w = float(wv[pm_local])
            for b in g.incident(iu):
                iv = g.other_end(b, iu)
                comp = _components(g, mk & ~(1 << b))
                A = frozenset(g.labels[k] for k in range(g.n_vertices)
                              if comp[k] == comp[io])
                inner = 0.0
                for iy in range(g.n_vertices):
                    key = (iy, A)
                    if key not in theta_cache:
                        theta_cache[key] = theta_prime(g, x, A, o=g.labels[iy],
                                                       cap=MULTI_LAYER_CAP)
                    inner += G[iv, iy] * theta_cache[key]
                total += w * g.tau(b) * inner
    return total


def clear_caches() -> None:
    _source_table.cache_clear()
    _positive_table.cache_clear()
    _components.cache_clear()
