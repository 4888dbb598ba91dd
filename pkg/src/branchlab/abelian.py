"""Finite abelian quotient groups of matrix tori and their character groups.

A group is handed over as the full list of its elements mod some K_L,
together with a subgroup to quotient by.  A basis is built greedily: each
new generator e_j comes with the least m_j such that e_j^m_j falls into the
span of the earlier ones, which gives a triangular presentation.  A
character is then a vector of exponents c_j (values zeta_E^c_j on e_j, E the
group exponent) satisfying m_j c_j = sum_i v_ji c_i mod E.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .groups import KeyTable, encode, mat_mul
from .scalars import FieldParams


@dataclass
class AbelianCharacter:
    group: "FiniteAbelianGroup"
    exps: tuple  # c_j, exponents of zeta_E on the generators
    index: int

    def exponent_of_labels(self, labels: np.ndarray) -> np.ndarray:
        """Exponent of zeta_E at each coset label."""
        c = np.array(self.exps, dtype=np.int64)
        return (self.group.coords[labels] @ c) % self.group.exponent

    def __call__(self, A: np.ndarray) -> np.ndarray:
        return self.exponent_of_labels(self.group.labels_of(A))

    @property
    def order(self) -> int:
        E = self.group.exponent
        g = E
        for c in self.exps:
            g = math.gcd(g, c)
        return E // g

    def is_trivial_on(self, A: np.ndarray) -> bool:
        return bool(np.all(self(A) == 0))


class FiniteAbelianGroup:
    """G / S for elements G (mod K_level) of an abelian matrix group."""

    def __init__(self, G: np.ndarray, S: np.ndarray, params: FieldParams, level: int, name: str = "A"):
        self.params, self.level, self.name = params, level, name
        P, eps = params.p ** level, params.epsilon
        self._P, self._eps = P, eps
        self.elements = G
        self.table = KeyTable(encode(G, P))
        # coset labels
        lab = np.full(len(G), -1, dtype=np.int64)
        reps = []
        for i in range(len(G)):
            if lab[i] >= 0:
                continue
            ok, idx = self.table.find(encode(mat_mul(G[i][None], S, eps, P), P))
            if not np.all(ok):
                raise ValueError("subgroup is not contained in the group")
            lab[idx] = len(reps)
            reps.append(i)
        self.elem_label = lab
        self.reps = G[reps]
        self.order = len(reps)
        self._build_basis()

    def _mul_labels(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        prod = mat_mul(self.reps[a], self.reps[b], self._eps, self._P)
        ok, idx = self.table.find(encode(prod, self._P))
        assert np.all(ok), "group not closed under multiplication"
        return self.elem_label[idx]

    def _build_basis(self):
        n = self.order
        ident = int(self.labels_of(np.array([[[1, 0], [0, 0]], [[0, 0], [1, 0]]])))
        # element orders, all at once
        allx = np.arange(n)
        order = np.ones(n, dtype=np.int64)
        y = allx.copy()
        live = y != ident
        while live.any():
            y[live] = self._mul_labels(y[live], allx[live])
            order[live] += 1
            live = y != ident
        coords: dict[int, list] = {ident: []}
        gens, rels = [], []
        while len(coords) < n:
            g = max((x for x in range(n) if x not in coords), key=lambda x: (order[x], -x))
            powers = [ident]
            while powers[-1] not in coords or len(powers) == 1:
                powers.append(int(self._mul_labels(np.array([powers[-1]]), np.array([g]))[0]))
            m = len(powers) - 1  # least m with g^m in the span
            rels.append((m, list(coords[powers[m]])))
            gens.append(g)
            span = np.array(list(coords.keys()))
            new = {}
            for k in range(m):
                moved = self._mul_labels(span, np.full(len(span), powers[k]))
                for s_lbl, lbl in zip(span.tolist(), moved.tolist()):
                    new[int(lbl)] = coords[s_lbl] + [k]
            coords = new
        r = len(gens)
        self.gens = gens
        self.relations = [(m, tuple(v) + (0,) * (r - len(v))) for m, v in rels]
        self.coords = np.array([coords[i] for i in range(n)], dtype=np.int64).reshape(n, r)
        self.exponent = int(np.lcm.reduce(order))
        self.invariants = [m for m, _ in self.relations]

    def labels_of(self, A: np.ndarray) -> np.ndarray:
        A = np.asarray(A) % self._P
        ok, idx = self.table.find(encode(A, self._P))
        if not np.all(ok):
            raise ValueError(f"element not in {self.name}")
        return self.elem_label[idx]

    def character(self, index: int) -> AbelianCharacter:
        """Character number ``index`` in mixed radix over the generators."""
        if not 0 <= index < self.order:
            raise IndexError("character index out of range")
        E = self.exponent
        exps: list[int] = []
        rem = index
        for m, v in self.relations:
            k, rem = rem % m, rem // m
            rhs = sum(vi * ci for vi, ci in zip(v, exps)) % E
            # m c = rhs mod E has m solutions spaced E/m apart
            g = math.gcd(m, E)
            assert rhs % g == 0 and g == m, "inconsistent presentation"
            c0 = (rhs // g) * pow(m // g, -1, E // g) % (E // g) if E // g > 1 else 0
            exps.append((c0 + k * (E // m)) % E)
        return AbelianCharacter(self, tuple(exps), index)

    def characters(self):
        for i in range(self.order):
            yield self.character(i)
