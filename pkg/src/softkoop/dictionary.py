"""Lifting dictionaries built from Hermite bases and Kronecker products.

A dictionary term is a product of Hermite polynomials of named scalar
variables, stored as a tuple of ``(variable, order)`` pairs sorted by the
variable's position in ``state_vars + input_vars``. The empty tuple is the
constant term. Order-1 factors are the variable itself since ``He_1(x) = x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import INPUT_NAMES, STATE_NAMES

MAX_HERMITE_ORDER = 12

Term = tuple[tuple[str, int], ...]


class UnsupportedOrderError(ValueError):
    pass


class InvalidSpecError(ValueError):
    pass


def hermite_eval(order: int, x):
    """Probabilists' Hermite polynomial ``He_order`` via the three-term recurrence.

    ``He_0 = 1``, ``He_1 = x``, ``He_{n+1} = x He_n - n He_{n-1}``. Works
    elementwise on arrays.
    """
    if order < 0 or order > MAX_HERMITE_ORDER:
        raise UnsupportedOrderError(
            f"Hermite order {order} outside [0, {MAX_HERMITE_ORDER}]")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if order == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for n in range(1, order):
        prev, cur = cur, x * cur - n * prev
    return cur if cur.ndim else float(cur)


def kron_compose(a, b) -> np.ndarray:
    """Kronecker product of two 1-D vectors: ``out[i * len(b) + j] = a[i] * b[j]``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.size == 0 or b.size == 0:
        raise ValueError("kron_compose needs nonempty inputs")
    return np.outer(a, b).ravel()


def _kron_terms(a: Sequence[Term], b: Sequence[Term], var_rank: dict) -> list[Term]:
    """Symbolic counterpart of :func:`kron_compose` on term descriptors."""
    return [_canonical(ta + tb, var_rank) for ta in a for tb in b]


def _canonical(factors, var_rank: dict) -> Term:
    merged: dict[str, int] = {}
    for var, order in factors:
        if order == 0:
            continue
        if var in merged:
            # Products of Hermite factors of one variable do not reduce to a
            # single He term; builders here never produce them.
            raise InvalidSpecError(f"repeated variable {var!r} in one term")
        merged[var] = order
    return tuple(sorted(merged.items(), key=lambda f: var_rank[f[0]]))


def _dedupe(terms: Sequence[Term]) -> list[Term]:
    seen = set()
    out = []
    for t in terms:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def term_to_str(term: Term) -> str:
    if not term:
        return "1"
    parts = []
    for var, order in term:
        parts.append(var if order == 1 else f"He{order}({var})")
    return "*".join(parts)


def term_from_str(text: str) -> list[tuple[str, int]]:
    text = text.strip()
    if text == "1":
        return []
    factors = []
    for part in text.split("*"):
        part = part.strip()
        if part.startswith("He") and part.endswith(")") and "(" in part:
            order_str, var = part[2:-1].split("(", 1)
            factors.append((var, int(order_str)))
        else:
            factors.append((part, 1))
    return factors


@dataclass(frozen=True)
class Dictionary:
    """Ordered, duplicate-free list of lifting functions ``Psi(state, input)``.

    Attributes
    ----------
    terms : tuple of Term
        Term descriptors in output order.
    state_vars, input_vars : tuple of str
        Names of the state and input components, in vector order.
    state_indices : tuple of int
        For each state component, the position of the term equal to that
        component. This is what makes the state-recovery matrix a selection.
    """

    terms: tuple
    state_vars: tuple
    input_vars: tuple = ()
    state_indices: tuple = field(init=False)
    _plan: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        terms = tuple(tuple(tuple(f) for f in t) for t in self.terms)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "state_vars", tuple(self.state_vars))
        object.__setattr__(self, "input_vars", tuple(self.input_vars))
        if len(set(terms)) != len(terms):
            raise InvalidSpecError("dictionary contains duplicate terms")
        columns = {v: i for i, v in enumerate(self.state_vars + self.input_vars)}
        if len(columns) != len(self.state_vars) + len(self.input_vars):
            raise InvalidSpecError("variable names must be unique")
        # Gather plan: distinct (column, order) factors become columns of an
        # extended matrix whose last column is all ones (padding).
        factor_ids: dict = {}
        rows = []
        for t in terms:
            row = []
            for var, order in t:
                if var not in columns:
                    raise InvalidSpecError(f"unknown variable {var!r}")
                if not 0 < order <= MAX_HERMITE_ORDER:
                    raise UnsupportedOrderError(f"order {order} in term {t}")
                row.append(factor_ids.setdefault((columns[var], order), len(factor_ids)))
            rows.append(row)
        width = max([len(r) for r in rows] + [1])
        pad = len(factor_ids)
        gather = np.full((len(terms), width), pad, dtype=np.intp)
        for k, row in enumerate(rows):
            gather[k, : len(row)] = row
        object.__setattr__(self, "_plan", (tuple(factor_ids), gather))
        lookup = {t: i for i, t in enumerate(terms)}
        idx = []
        for v in self.state_vars:
            if ((v, 1),) not in lookup:
                raise InvalidSpecError(f"state component {v!r} is not a term")
            idx.append(lookup[((v, 1),)])
        object.__setattr__(self, "state_indices", tuple(idx))

    @property
    def dim(self) -> int:
        return len(self.terms)

    @property
    def n_state(self) -> int:
        return len(self.state_vars)

    @property
    def n_input(self) -> int:
        return len(self.input_vars)

    def evaluate(self, state, u=None) -> np.ndarray:
        """Lift ``(state, u)``; leading batch dimensions are preserved.

        ``state`` has shape ``(..., n_state)`` and ``u`` shape ``(..., n_input)``.
        Returns shape ``(..., dim)``.
        """
        state = np.asarray(state, dtype=float)
        if self.n_input:
            if u is None:
                raise ValueError("this dictionary needs an input vector")
            u = np.asarray(u, dtype=float)
            batch = np.broadcast_shapes(state.shape[:-1], u.shape[:-1])
            z = np.concatenate([np.broadcast_to(state, batch + state.shape[-1:]),
                                np.broadcast_to(u, batch + u.shape[-1:])], axis=-1)
        else:
            z = state
        if z.shape[-1] != self.n_state + self.n_input:
            raise ValueError(
                f"expected {self.n_state + self.n_input} variables, got {z.shape[-1]}")
        factors, gather = self._plan
        ext = np.empty(z.shape[:-1] + (len(factors) + 1,))
        for k, (col, order) in enumerate(factors):
            ext[..., k] = z[..., col] if order == 1 else hermite_eval(order, z[..., col])
        ext[..., -1] = 1.0
        return np.prod(ext[..., gather], axis=-1)

    def selection_matrix(self) -> np.ndarray:
        """``B`` with ``Psi @ B == state``: one unit entry per column."""
        B = np.zeros((self.dim, self.n_state))
        B[list(self.state_indices), np.arange(self.n_state)] = 1.0
        return B

    def to_text(self) -> str:
        """One term per line; header lines list the state and input variables."""
        lines = ["# state: " + " ".join(self.state_vars),
                 "# input: " + " ".join(self.input_vars)]
        lines += [term_to_str(t) for t in self.terms]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Dictionary":
        state_vars: tuple = ()
        input_vars: tuple = ()
        terms = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("# state:"):
                state_vars = tuple(line[len("# state:"):].split())
            elif line.startswith("# input:"):
                input_vars = tuple(line[len("# input:"):].split())
            elif not line.startswith("#"):
                terms.append(term_from_str(line))
        rank = {v: i for i, v in enumerate(state_vars + input_vars)}
        return cls(tuple(_canonical(t, rank) for t in terms), state_vars, input_vars)


def build_gripper_dictionary() -> Dictionary:
    """Canonical 30-term gripper dictionary.

    Layout: the nine raw tip coordinates, then ``[1, z1z2, z1z3, z2z3, z1z2z3]``
    (the z-products of ``D_xi`` whose singletons already appear among the
    raw coordinates), then ``u1 * D_xi`` and ``u2 * D_xi`` with
    ``D_xi = [1, z1, z2, z3, z1z2, z1z3, z2z3, z1z2z3]``.
    """
    rank = {v: i for i, v in enumerate(STATE_NAMES + INPUT_NAMES)}
    d_xi = [()]
    for z in ("z1", "z2", "z3"):
        # successive Kronecker products of [1, z_i], reordered by degree below
        d_xi = d_xi + [t + ((z, 1),) for t in d_xi]
    d_xi = sorted((_canonical(t, rank) for t in d_xi),
                  key=lambda t: (len(t), [rank[v] for v, _ in t]))
    raw = [((v, 1),) for v in STATE_NAMES]
    u_terms = [((u, 1),) for u in INPUT_NAMES]
    terms = raw + list(d_xi) + _kron_terms(u_terms, d_xi, rank)
    return Dictionary(tuple(_dedupe(terms)), STATE_NAMES, INPUT_NAMES)


def build_generic_dictionary(space_spec: Sequence[int], input_dim: int = 0) -> Dictionary:
    """Kronecker dictionary over Hermite bases of each coordinate and input.

    Coordinate ``i`` (named ``z{i+1}``, or ``z`` when there is one) gets the
    basis ``[He_0, ..., He_{order_i}]``. Inputs ``u1..`` get ``[1, u_j]``.
    The result is ``kron(D(u), D(z))`` with duplicates removed, so the
    input-free block comes first.
    """
    if len(space_spec) == 0:
        raise InvalidSpecError("space_spec must name at least one coordinate")
    if any(o < 1 for o in space_spec):
        raise InvalidSpecError("each coordinate needs order >= 1 to be observable")
    n = len(space_spec)
    state_vars = ("z",) if n == 1 else tuple(f"z{i + 1}" for i in range(n))
    input_vars = ("u",) if input_dim == 1 else tuple(f"u{j + 1}" for j in range(input_dim))
    rank = {v: i for i, v in enumerate(state_vars + input_vars)}
    d_state: list[Term] = [()]
    for var, order in zip(state_vars, space_spec):
        basis = [() if k == 0 else ((var, k),) for k in range(order + 1)]
        d_state = _kron_terms(d_state, basis, rank)
    d_input: list[Term] = [()]
    for var in input_vars:
        d_input = _kron_terms(d_input, [(), ((var, 1),)], rank)
    return Dictionary(tuple(_dedupe(_kron_terms(d_input, d_state, rank))),
                      state_vars, input_vars)


def build_linear_dictionary(n_state: int, n_input: int = 0, constant: bool = False,
                            lift_inputs: bool = True) -> Dictionary:
    """Identity lifting ``[state, (inputs), (1)]`` for linear test systems."""
    state_vars = tuple(f"s{i + 1}" for i in range(n_state))
    input_vars = tuple(f"u{j + 1}" for j in range(n_input))
    terms = [((v, 1),) for v in state_vars]
    if lift_inputs:
        terms += [((v, 1),) for v in input_vars]
    if constant:
        terms.append(())
    return Dictionary(tuple(terms), state_vars, input_vars)


def make_dictionary(name: str) -> Dictionary:
    """Look up a named dictionary used by experiment configs."""
    if name == "gripper":
        return build_gripper_dictionary()
    if name == "linear":
        return Dictionary(tuple([((v, 1),) for v in STATE_NAMES + INPUT_NAMES] + [()]),
                          STATE_NAMES, INPUT_NAMES)
    raise InvalidSpecError(f"unknown dictionary {name!r}")
