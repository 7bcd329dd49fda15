"""
Truncated index space of auxiliary density operators (ADOs).

An ADO is labelled by a multiset ``j`` of bosonic exponent ids and a set ``q``
of fermionic exponent ids. Both are stored as ascending tuples, ``j`` with
repetition and ``q`` without (Pauli exclusion). The position of an id inside
``q`` fixes the fermionic exchange signs used by the generator.
"""

from __future__ import annotations

import bisect
import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "Parity",
    "Direction",
    "HierarchyError",
    "AdoNotFound",
    "AdoIndex",
    "Neighbor",
    "HierarchySpace",
    "closed_form_count",
    "enumerate_space",
    "count_space",
    "importance",
    "index_of",
    "ado_at",
    "neighbors",
]

DEFAULT_MAX_ADOS = 5_000_000


class HierarchyError(ValueError):
    pass


class AdoNotFound(KeyError):
    """Key is not part of the space; ``reason`` says why when it can tell."""

    def __init__(self, key, reason):
        super().__init__(f"{key!r}: {reason}")
        self.key = key
        self.reason = reason


class Parity(enum.Enum):
    EVEN = 1
    ODD = -1

    @property
    def sign(self) -> int:
        return self.value


class Direction(enum.Enum):
    UP_B = "up_b"
    DOWN_B = "down_b"
    UP_F = "up_f"
    DOWN_F = "down_f"


@dataclass(frozen=True)
class AdoIndex:
    j: tuple
    q: tuple
    flat: int = -1
    parity: Parity = Parity.EVEN

    @property
    def m(self) -> int:
        return len(self.j)

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def key(self) -> tuple:
        return (self.j, self.q)

    @property
    def level(self) -> int:
        return len(self.j) + len(self.q)


class Neighbor(NamedTuple):
    """One coupling of an ADO to another ADO in the space.

    ``factor`` is the scalar the generator attaches to this coupling: the
    exchange sign for fermionic moves, the multiplicity for ``DOWN_B`` and 1
    for ``UP_B``. ``position`` is the 1-based rank (ascending) of the removed
    or inserted fermionic id inside the larger of the two sets.
    """

    flat: int
    exponent: int
    direction: Direction
    factor: int
    position: int = 0


def _always_kept(m: int, n: int) -> bool:
    return m <= 1 and n <= 1


def _boson_importance(j, babs, bre):
    val, cum = 1.0, 0.0
    for k in j:
        cum += bre[k]
        val *= babs[k] / bre[k] / cum
    return val


def _fermion_importance(q, fabs, fre):
    val, cum = 1.0, 0.0
    for k in q:
        cum += fre[k]
        val *= fabs[k] / fre[k] / cum
    return val


def _exponent_arrays(exponents):
    coeffs = np.array([abs(e.coeff) for e in exponents], dtype=float)
    rates = np.array([e.rate.real for e in exponents], dtype=float)
    return coeffs.tolist(), rates.tolist()


def closed_form_count(K_b: int, K_f: int, m_max: int, n_max: int) -> int:
    """Size of the unfiltered space: fermionic subsets times bosonic multisets."""
    nf = sum(math.comb(K_f, n) for n in range(min(n_max, K_f) + 1))
    nb = sum(math.comb(K_b + m - 1, m) for m in range(m_max + 1)) if K_b else 1
    return nf * nb


def _check_domain(K_b, K_f, m_max, n_max, I_th):
    for name, v in (("K_b", K_b), ("K_f", K_f), ("m_max", m_max), ("n_max", n_max)):
        if int(v) != v or v < 0:
            raise HierarchyError(f"{name} must be a non-negative integer, got {v!r}")
    if not I_th >= 0:
        raise HierarchyError(f"importance threshold must be >= 0, got {I_th!r}")


class HierarchySpace:
    """Enumerated, importance-filtered set of ADO labels.

    Build with :func:`enumerate_space` or :meth:`from_baths`. ``keys[i]`` is
    the ``(j, q)`` label of flat position ``i`` and ``lookup`` is the inverse
    map. The root ``((), ())`` is always at position 0.
    """

    def __init__(self, keys, K_b, K_f, m_max, n_max, I_th,
                 bosonic=None, fermionic=None, parity=Parity.EVEN):
        self.keys = keys
        self.lookup = {k: i for i, k in enumerate(keys)}
        self.K_b = K_b
        self.K_f = K_f
        self.m_max = m_max
        self.n_max = n_max
        self.I_th = I_th
        self.bosonic = list(bosonic or [])
        self.fermionic = list(fermionic or [])
        self.parity = parity
        self._babs, self._bre = _exponent_arrays(self.bosonic)
        self._fabs, self._fre = _exponent_arrays(self.fermionic)

    @classmethod
    def from_baths(cls, baths, m_max, n_max, I_th=0.0, max_ados=DEFAULT_MAX_ADOS):
        """Space for the exponents of ``baths`` (bath order, then exponent order)."""
        from .bath import Flavor

        bos = [e for b in baths if b.flavor is Flavor.BOSONIC for e in b.exponents]
        fer = [e for b in baths if b.flavor is Flavor.FERMIONIC for e in b.exponents]
        return enumerate_space(len(bos), len(fer), m_max, n_max, I_th,
                               (bos, fer), max_ados=max_ados)

    def __len__(self):
        return len(self.keys)

    def __iter__(self):
        for i in range(len(self.keys)):
            yield self.ado_at(i)

    @property
    def ados(self):
        return list(self)

    def ado_at(self, flat: int) -> AdoIndex:
        if not 0 <= flat < len(self.keys):
            raise IndexError(f"flat index {flat} outside space of {len(self.keys)} ADOs")
        j, q = self.keys[flat]
        return AdoIndex(j, q, flat, self.parity)

    def index_of(self, key) -> int:
        if isinstance(key, AdoIndex):
            key = key.key
        j, q = tuple(sorted(key[0])), tuple(key[1])
        try:
            return self.lookup[(j, q)]
        except KeyError:
            raise AdoNotFound((j, q), self.why_missing(j, q)) from None

    def why_missing(self, j, q) -> str:
        if len(set(q)) != len(q) or list(q) != sorted(q):
            return "invalid fermionic label (repeated or unsorted ids)"
        if any(not 0 <= k < self.K_f for k in q) or any(not 0 <= k < self.K_b for k in j):
            return "unknown exponent id"
        if len(j) > self.m_max or len(q) > self.n_max:
            return "exceeds tier"
        if self.I_th > 0 and self.importance(j, q) < self.I_th:
            return "pruned (importance below threshold)"
        return "not in space"

    def importance(self, j, q) -> float:
        if (j and not self._babs) or (q and not self._fabs):
            raise HierarchyError("importance needs the exponent lists of the space")
        return (_boson_importance(j, self._babs, self._bre)
                * _fermion_importance(q, self._fabs, self._fre))

    def with_parity(self, parity: Parity) -> "HierarchySpace":
        """Same labels, tagged for another parity sector (shares the dictionary)."""
        other = object.__new__(HierarchySpace)
        other.__dict__.update(self.__dict__)
        other.parity = parity
        return other

    def level_indices(self, m: int, n: int) -> list[int]:
        return [i for i, (j, q) in enumerate(self.keys) if len(j) == m and len(q) == n]

    def neighbors(self, ado) -> list[Neighbor]:
        if isinstance(ado, int):
            j, q = self.keys[ado]
        else:
            j, q = ado.key if isinstance(ado, AdoIndex) else ado
        lookup = self.lookup
        out = []
        n = len(q)
        qset = set(q)
        # fermionic: insert q' (sign from the ids it passes over), remove q_w
        if n < self.n_max:
            for k in range(self.K_f):
                if k in qset:
                    continue
                pos = bisect.bisect_left(q, k)
                b = lookup.get((j, q[:pos] + (k,) + q[pos:]))
                if b is not None:
                    sign = -1 if (n - pos) % 2 else 1
                    out.append(Neighbor(b, k, Direction.UP_F, sign, pos + 1))
        for w in range(n):
            b = lookup.get((j, q[:w] + q[w + 1:]))
            if b is not None:
                sign = -1 if (n - 1 - w) % 2 else 1
                out.append(Neighbor(b, q[w], Direction.DOWN_F, sign, w + 1))
        # bosonic: multiset count changes
        if len(j) < self.m_max:
            for k in range(self.K_b):
                pos = bisect.bisect_right(j, k)
                b = lookup.get((j[:pos] + (k,) + j[pos:], q))
                if b is not None:
                    out.append(Neighbor(b, k, Direction.UP_B, 1))
        for k in sorted(set(j)):
            pos = j.index(k)
            b = lookup.get((j[:pos] + j[pos + 1:], q))
            if b is not None:
                out.append(Neighbor(b, k, Direction.DOWN_B, j.count(k)))
        return out


def _exponents_pair(exponents, K_b, K_f):
    if exponents is None:
        return [], []
    bos, fer = exponents
    bos, fer = list(bos), list(fer)
    if len(bos) != K_b or len(fer) != K_f:
        raise HierarchyError(
            f"exponent lists ({len(bos)} bosonic, {len(fer)} fermionic) do not "
            f"match K_b={K_b}, K_f={K_f}"
        )
    return bos, fer


def _suffix_bounds(abs_, re_):
    """Suffix max of |c|/Re(r) and suffix min of Re(r), for pruning."""
    K = len(abs_)
    ratio_max = [0.0] * (K + 1)
    rate_min = [math.inf] * (K + 1)
    for k in range(K - 1, -1, -1):
        ratio_max[k] = max(ratio_max[k + 1], abs_[k] / re_[k])
        rate_min[k] = min(rate_min[k + 1], re_[k])
    return ratio_max, rate_min


def _walk(K, depth_max, abs_, re_, bounds, threshold, always_depth, multiset):
    """Depth-first walk over ascending id tuples of length <= depth_max.

    Yields ``(label, importance)`` for every label that is kept: labels of
    length <= ``always_depth`` unconditionally, the rest when their importance
    reaches ``threshold``. Appending an id never changes the earlier factors,
    so a subtree is cut once the node is below threshold and no further
    factor can exceed 1.
    """
    ratio_max, rate_min = bounds
    stack = [((), 1.0, 0.0)]
    while stack:
        label, val, cum = stack.pop()
        depth = len(label)
        kept = depth <= always_depth or val >= threshold
        if kept:
            yield label, val
        if depth == depth_max:
            continue
        start = (label[-1] if multiset else label[-1] + 1) if label else 0
        if start >= K:
            continue
        if not kept and depth + 1 > always_depth:
            if ratio_max[start] / (cum + rate_min[start]) <= 1.0:
                continue
        children = []
        for k in range(start, K):
            c = cum + re_[k]
            children.append((label + (k,), val * abs_[k] / re_[k] / c, c))
        stack.extend(reversed(children))


def _iter_space(K_b, K_f, m_max, n_max, I_th, bos, fer):
    babs, bre = _exponent_arrays(bos)
    fabs, fre = _exponent_arrays(fer)
    if I_th == 0:
        babs, bre = [1.0] * K_b, [1.0] * K_b
        fabs, fre = [1.0] * K_f, [1.0] * K_f
    bb = _suffix_bounds(babs, bre)
    fb = _suffix_bounds(fabs, fre)
    n_top = min(n_max, K_f)
    m_top = m_max if K_b else 0
    # bosonic multisets are kept unconditionally here; the joint test below
    # applies the product rule
    for j, bv in _walk(K_b, m_top, babs, bre, bb, 0.0, m_top, True):
        always = 1 if len(j) <= 1 else -1
        thr = I_th / bv if bv > 0 else math.inf
        if I_th == 0:
            thr, always = 0.0, n_top
        for q, _ in _walk(K_f, n_top, fabs, fre, fb, thr, always, False):
            yield j, q


def enumerate_space(K_b, K_f, m_max, n_max, I_th=0.0, exponents=None, *,
                    max_ados=DEFAULT_MAX_ADOS, parity=Parity.EVEN) -> HierarchySpace:
    """Enumerate the ADO space.

    Parameters
    ----------
    K_b, K_f : int
        Number of bosonic and fermionic exponents.
    m_max, n_max : int
        Bosonic and fermionic truncation tiers.
    I_th : float
        Importance threshold. ADOs outside ``m <= 1, n <= 1`` are kept only
        if their importance is at least ``I_th``.
    exponents : (bosonic, fermionic) pair of exponent lists, optional
        Required when ``I_th > 0``; anything with ``coeff`` and ``rate``
        attributes works.
    max_ados : int
        Memory budget on the number of retained labels; larger spaces raise
        :class:`HierarchyError` (use :func:`count_space` instead).

    The result is ordered by level ``m + n`` and lexicographically by
    ``(j, q)`` within a level, so the root sits at position 0.
    """
    _check_domain(K_b, K_f, m_max, n_max, I_th)
    bos, fer = _exponents_pair(exponents, K_b, K_f)
    if I_th > 0 and exponents is None:
        raise HierarchyError("importance filtering needs the exponent lists")
    if I_th == 0 and closed_form_count(K_b, K_f, m_max, n_max) > max_ados:
        raise HierarchyError(
            f"space has {closed_form_count(K_b, K_f, m_max, n_max)} ADOs, above "
            f"the budget of {max_ados}; use count-only mode"
        )
    keys = []
    for key in _iter_space(K_b, K_f, m_max, n_max, I_th, bos, fer):
        keys.append(key)
        if len(keys) > max_ados:
            raise HierarchyError(
                f"space exceeds the budget of {max_ados} ADOs; use count-only mode"
            )
    keys.sort(key=lambda k: (len(k[0]) + len(k[1]), k))
    return HierarchySpace(keys, K_b, K_f, m_max, n_max, I_th, bos, fer, parity)


def count_space(K_b, K_f, m_max, n_max, I_th=0.0, exponents=None) -> int:
    """Number of ADOs without materialising the labels.

    Closed form at ``I_th = 0``; otherwise a pruned walk over the labels.
    """
    _check_domain(K_b, K_f, m_max, n_max, I_th)
    if I_th == 0:
        return closed_form_count(K_b, K_f, m_max, n_max)
    bos, fer = _exponents_pair(exponents, K_b, K_f)
    return sum(1 for _ in _iter_space(K_b, K_f, m_max, n_max, I_th, bos, fer))


def importance(ado, exponents) -> float:
    """Importance value of one label.

    ``exponents`` is the ``(bosonic, fermionic)`` pair of exponent lists the
    ids in ``ado`` refer to. The root has importance 1.
    """
    j, q = ado.key if isinstance(ado, AdoIndex) else ado
    bos, fer = exponents
    babs, bre = _exponent_arrays(bos)
    fabs, fre = _exponent_arrays(fer)
    return _boson_importance(tuple(j), babs, bre) * _fermion_importance(tuple(q), fabs, fre)


def index_of(space: HierarchySpace, key) -> int:
    return space.index_of(key)


def ado_at(space: HierarchySpace, flat: int) -> AdoIndex:
    return space.ado_at(flat)


def neighbors(space: HierarchySpace, ado) -> list[Neighbor]:
    return space.neighbors(ado)
