"""Deterministic finite automata over letters ``2^AP`` and an LTLf compiler.

Letters are bitmasks over the automaton's ``ap`` tuple (sorted atom names,
bit ``k`` set iff ``ap[k]`` holds). A :class:`Dfa` stores a dense transition
table ``delta[state, letter]``.

The compiler uses formula progression. A state is the residual obligation
on the rest of the trace, stored canonically as a truth table over the
"temporal variables" of the formula: a marker ``NE`` (the remaining trace is
nonempty), the bodies of ``X`` nodes and the ``U``/``F``/``G`` nodes
themselves. Two residuals with the same truth table are the same state, so
exploration always terminates; the result is then minimized.
"""
from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .ltlf import (Always, And, Atom, Bottom, Eventually, Formula, Implies,
                   Next, Not, Or, Top, Until, atomic_props, subformulas)

__all__ = [
    "Dfa", "AlphabetTooLarge", "MAX_ATOMS", "compile_formula", "accepts",
    "product", "minimize", "letter_mask", "to_dot", "to_json", "from_json",
    "all_words",
]

MAX_ATOMS = 16


class AlphabetTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dfa:
    ap: tuple[str, ...]
    delta: np.ndarray = field(repr=False)  # (n_states, 2**len(ap)) int
    accepting: frozenset[int]
    q0: int = 0

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=np.int64)
        if list(self.ap) != sorted(set(self.ap)):
            raise ValueError("ap must be sorted and duplicate free")
        if delta.ndim != 2 or delta.shape[1] != 1 << len(self.ap):
            raise ValueError(f"delta must have shape (n, {1 << len(self.ap)})")
        n = delta.shape[0]
        if n == 0 or delta.min() < 0 or delta.max() >= n:
            raise ValueError("delta is not a total function on the state set")
        if not 0 <= self.q0 < n or any(not 0 <= q < n for q in self.accepting):
            raise ValueError("state index out of range")
        delta.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "accepting", frozenset(int(q) for q in self.accepting))

    @property
    def n_states(self) -> int:
        return self.delta.shape[0]

    def __len__(self) -> int:
        return self.n_states

    def step(self, q: int, letter: Iterable[str]) -> int:
        return int(self.delta[q, letter_mask(self.ap, letter)])

    def run(self, word: Sequence[Iterable[str]]) -> list[int]:
        qs = [self.q0]
        for letter in word:
            qs.append(self.step(qs[-1], letter))
        return qs

    def is_accepting(self, q: int) -> bool:
        return q in self.accepting

    def accepting_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_states, dtype=bool)
        mask[list(self.accepting)] = True
        return mask

    def reachable(self) -> list[int]:
        seen = {self.q0}
        order = [self.q0]
        queue = deque(order)
        while queue:
            q = queue.popleft()
            for r in self.delta[q]:
                r = int(r)
                if r not in seen:
                    seen.add(r)
                    order.append(r)
                    queue.append(r)
        return order


def letter_mask(ap: Sequence[str], letter: Iterable[str]) -> int:
    """Project ``letter`` onto ``ap`` and encode it as a bitmask."""
    letter = set(letter)
    return sum(1 << k for k, a in enumerate(ap) if a in letter)


def accepts(d: Dfa, word: Sequence[Iterable[str]]) -> bool:
    return d.run(word)[-1] in d.accepting


# ------------------------------------------------------------ minimization

def minimize(d: Dfa) -> Dfa:
    """Drop unreachable states and merge equivalent ones.

    States are renumbered in BFS order from ``q0`` (letters in increasing
    mask order), so equal languages over equal ``ap`` give equal tables.
    """
    order = d.reachable()
    index = {q: i for i, q in enumerate(order)}
    delta = np.array([[index[int(r)] for r in d.delta[q]] for q in order], dtype=np.int64)
    acc = np.array([q in d.accepting for q in order])

    # Moore refinement: a block id per state until the partition is stable
    block = acc.astype(np.int64)
    n_blocks = len(np.unique(block))
    while True:
        signature = np.column_stack([block, block[delta]])
        _, new_block = np.unique(signature, axis=0, return_inverse=True)
        new_block = new_block.ravel()
        n_new = int(new_block.max()) + 1
        block = new_block
        if n_new == n_blocks:
            break
        n_blocks = n_new

    reps = {}
    for q in range(len(order)):
        reps.setdefault(int(block[q]), q)
    quotient = np.array([[block[r] for r in delta[reps[b]]] for b in range(n_blocks)])
    quot_acc = {b for b in range(n_blocks) if acc[reps[b]]}
    return _canonical(d.ap, quotient, quot_acc, int(block[0]))


def _canonical(ap, delta, accepting, q0) -> Dfa:
    order = [q0]
    index = {q0: 0}
    queue = deque(order)
    while queue:
        q = queue.popleft()
        for r in delta[q]:
            r = int(r)
            if r not in index:
                index[r] = len(order)
                order.append(r)
                queue.append(r)
    table = np.array([[index[int(r)] for r in delta[q]] for q in order], dtype=np.int64)
    acc = {index[q] for q in accepting if q in index}
    return Dfa(tuple(ap), table, frozenset(acc), 0)


# ----------------------------------------------------------------- product

def product(d1: Dfa, d2: Dfa, max_atoms: int = MAX_ATOMS) -> Dfa:
    """Minimal DFA for the intersection of two languages over the union AP."""
    ap = tuple(sorted(set(d1.ap) | set(d2.ap)))
    if len(ap) > max_atoms:
        raise AlphabetTooLarge(f"{len(ap)} atoms exceed the cap of {max_atoms}")
    letters = np.arange(1 << len(ap))
    proj1 = _projection(ap, d1.ap, letters)
    proj2 = _projection(ap, d2.ap, letters)

    start = (d1.q0, d2.q0)
    index = {start: 0}
    order = [start]
    rows = []
    i = 0
    while i < len(order):
        q1, q2 = order[i]
        n1 = d1.delta[q1, proj1]
        n2 = d2.delta[q2, proj2]
        row = []
        for pair in zip(n1.tolist(), n2.tolist()):
            if pair not in index:
                index[pair] = len(order)
                order.append(pair)
            row.append(index[pair])
        rows.append(row)
        i += 1
    acc = {k for k, (q1, q2) in enumerate(order)
           if q1 in d1.accepting and q2 in d2.accepting}
    return minimize(Dfa(ap, np.array(rows, dtype=np.int64), frozenset(acc), 0))


def _projection(full: Sequence[str], sub: Sequence[str], letters: np.ndarray) -> np.ndarray:
    out = np.zeros_like(letters)
    for k, a in enumerate(sub):
        bit = full.index(a)
        out |= ((letters >> bit) & 1) << k
    return out


# ---------------------------------------------------------------- compiler

_NE = "NE"


def _temporal_vars(f: Formula) -> list:
    out = [_NE]
    for g in subformulas(f):
        match g:
            case Next(arg):
                cand = [arg]
            case Until() | Eventually() | Always():
                cand = [g]
            case _:
                cand = []
        for c in cand:
            if c not in out:
                out.append(c)
    return out


def _progress(f: Formula, letter: frozenset, cols: dict, size: int) -> np.ndarray:
    """Truth of the residual of ``f`` after ``letter``, for every assignment
    of the temporal variables (``cols[v]`` is the column of variable ``v``).
    """
    match f:
        case Top():
            return np.ones(size, dtype=bool)
        case Bottom():
            return np.zeros(size, dtype=bool)
        case Atom(name):
            return np.full(size, name in letter)
        case Not(a):
            return ~_progress(a, letter, cols, size)
        case And(l, r):
            return _progress(l, letter, cols, size) & _progress(r, letter, cols, size)
        case Or(l, r):
            return _progress(l, letter, cols, size) | _progress(r, letter, cols, size)
        case Implies(l, r):
            return ~_progress(l, letter, cols, size) | _progress(r, letter, cols, size)
        case Next(a):
            return cols[_NE] & cols[a]
        case Until(l, r):
            return (_progress(r, letter, cols, size)
                    | (_progress(l, letter, cols, size) & cols[_NE] & cols[f]))
        case Eventually(a):
            return _progress(a, letter, cols, size) | (cols[_NE] & cols[f])
        case Always(a):
            return _progress(a, letter, cols, size) & (~cols[_NE] | cols[f])
    raise TypeError(f"not a formula: {f!r}")


def _holds_on_empty(f: Formula) -> bool:
    # Convention for the empty word: atoms, X, U and F are false; G is true.
    match f:
        case Top() | Always():
            return True
        case Bottom() | Atom() | Next() | Until() | Eventually():
            return False
        case Not(a):
            return not _holds_on_empty(a)
        case And(l, r):
            return _holds_on_empty(l) and _holds_on_empty(r)
        case Or(l, r):
            return _holds_on_empty(l) or _holds_on_empty(r)
        case Implies(l, r):
            return (not _holds_on_empty(l)) or _holds_on_empty(r)
    raise TypeError(f"not a formula: {f!r}")


def compile_formula(f: Formula, max_atoms: int = MAX_ATOMS) -> Dfa:
    """Minimal DFA accepting exactly the (nonempty) words satisfying ``f``."""
    ap = tuple(sorted(atomic_props(f)))
    if len(ap) > max_atoms:
        raise AlphabetTooLarge(f"{len(ap)} atoms exceed the cap of {max_atoms}")
    variables = _temporal_vars(f)
    nv = len(variables)
    size = 1 << nv
    beta = np.arange(size)
    cols = {v: ((beta >> k) & 1).astype(bool) for k, v in enumerate(variables)}
    weights = 1 << np.arange(nv)
    letters = [frozenset(a for k, a in enumerate(ap) if m >> k & 1)
               for m in range(1 << len(ap))]

    # Per letter: where each assignment of the successor variables sends the
    # assignment of the current variables. NE is always true afterwards.
    pullback = []
    for letter in letters:
        idx = np.zeros(size, dtype=np.int64)
        for k, v in enumerate(variables):
            col = np.ones(size, dtype=bool) if v == _NE else _progress(v, letter, cols, size)
            idx += col.astype(np.int64) * weights[k]
        pullback.append(idx)

    # State 0 is the formula itself; every other state is a truth table.
    tables: dict[bytes, int] = {}
    stored: list[np.ndarray] = []
    rows: list[list[int]] = [[]]
    accepting = {0} if _holds_on_empty(f) else set()

    def intern(table: np.ndarray) -> int:
        key = np.packbits(table).tobytes()
        if key not in tables:
            tables[key] = len(rows)
            stored.append(table)
            rows.append([])
            if table[0]:  # NE false, every other variable irrelevant
                accepting.add(tables[key])
        return tables[key]

    for letter in letters:
        rows[0].append(intern(_progress(f, letter, cols, size)))
    k = 1
    while k < len(rows):
        table = stored[k - 1]
        for idx in pullback:
            rows[k].append(intern(table[idx]))
        k += 1
    return minimize(Dfa(ap, np.array(rows, dtype=np.int64), frozenset(accepting), 0))


# ----------------------------------------------------------------- exports

def _letter_label(ap: Sequence[str], mask: int) -> str:
    if not ap:
        return "true"
    return " & ".join(a if mask >> k & 1 else f"!{a}" for k, a in enumerate(ap))


def to_dot(d: Dfa, name: str = "dfa") -> str:
    """Graphviz source: one node per state, one edge per (state, target) class
    labelled with the disjunction of the letters that take it."""
    lines = [f"digraph {name} {{", "  rankdir=LR;", '  init [shape=point];']
    for q in range(d.n_states):
        shape = "doublecircle" if q in d.accepting else "circle"
        lines.append(f'  q{q} [shape={shape}, label="{q}"];')
    lines.append(f"  init -> q{d.q0};")
    for q in range(d.n_states):
        groups: dict[int, list[int]] = {}
        for mask, r in enumerate(d.delta[q].tolist()):
            groups.setdefault(r, []).append(mask)
        for r, masks in groups.items():
            if len(masks) == 1 << len(d.ap):
                label = "true"
            else:
                label = " | ".join(f"({_letter_label(d.ap, m)})" for m in masks)
            lines.append(f'  q{q} -> q{r} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(d: Dfa) -> str:
    return json.dumps({
        "states": d.n_states,
        "ap": list(d.ap),
        "q0": d.q0,
        "delta": d.delta.tolist(),
        "accepting": sorted(d.accepting),
    }, indent=1)


def from_json(text: str) -> Dfa:
    obj = json.loads(text)
    d = Dfa(tuple(obj["ap"]), np.array(obj["delta"], dtype=np.int64),
            frozenset(obj["accepting"]), int(obj["q0"]))
    if d.n_states != obj["states"]:
        raise ValueError("state count does not match delta")
    return d


def all_words(ap: Sequence[str], max_len: int, min_len: int = 0):
    """Every word over ``2^ap`` with length in ``[min_len, max_len]``."""
    alphabet = [frozenset(a for k, a in enumerate(ap) if m >> k & 1)
                for m in range(1 << len(ap))]
    for n in range(min_len, max_len + 1):
        yield from itertools.product(alphabet, repeat=n)
