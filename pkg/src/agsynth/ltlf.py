"""LTLf formulas: abstract syntax, a small recursive-descent parser, and
finite-trace evaluation.

Surface syntax::

    true  false  a  !f  X f  F f  G f  f U g  f & g  f | g  f -> g  ( f )

Unary operators bind tightest, then ``U`` (right associative), ``&``, ``|``
and ``->`` (right associative). Atom names match ``[a-z][a-z0-9_]*``.

Words are sequences of letters; a letter is any collection of atom names.
Positions passed to :func:`evaluate` are 1-based.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "Formula", "Top", "Bottom", "Atom", "Not", "And", "Or", "Implies",
    "Next", "Until", "Eventually", "Always",
    "LtlfSyntaxError", "UnknownTokenError", "PositionOutOfRange",
    "parse", "pretty", "atomic_props", "evaluate", "holds", "desugar",
    "subformulas",
]


class Formula:
    """Base class of all LTLf syntax nodes."""

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bottom(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    name: str

    def __post_init__(self):
        if not _ATOM_RE.fullmatch(self.name) or self.name in _KEYWORDS:
            raise ValueError(f"invalid atom name {self.name!r}")


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    arg: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    arg: Formula


@dataclass(frozen=True)
class Always(Formula):
    arg: Formula


class LtlfSyntaxError(ValueError):
    """Malformed formula text; ``offset`` is the 0-based character position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownTokenError(LtlfSyntaxError):
    pass


class PositionOutOfRange(IndexError):
    pass


# ---------------------------------------------------------------- parsing

_ATOM_RE = re.compile(r"[a-z][a-z0-9_]*")
_KEYWORDS = {"true", "false"}
_TOKEN_RE = re.compile(r"\s*(?:(->)|([!&|()XUFG])|([a-z][a-z0-9_]*))")
_UNARY = {"!": Not, "X": Next, "F": Eventually, "G": Always}


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos == len(text):
                break
            raise UnknownTokenError(f"unknown token {text[pos]!r}", pos)
        tok = m.group(1) or m.group(2) or m.group(3)
        start = m.start(1) if m.group(1) else m.start(2) if m.group(2) else m.start(3)
        tokens.append((tok, start))
        pos = m.end()
    tokens.append(("", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> str:
        return self.tokens[self.i][0]

    def offset(self) -> int:
        return self.tokens[self.i][1]

    def take(self) -> str:
        tok = self.tokens[self.i][0]
        self.i += 1
        return tok

    def expect(self, tok: str) -> None:
        if self.peek() != tok:
            found = self.peek() or "end of input"
            raise LtlfSyntaxError(f"expected {tok!r}, found {found!r}", self.offset())
        self.take()

    def implication(self) -> Formula:
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.implication())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.peek() == "|":
            self.take()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.until()
        while self.peek() == "&":
            self.take()
            left = And(left, self.until())
        return left

    def until(self) -> Formula:
        left = self.unary()
        if self.peek() == "U":
            self.take()
            return Until(left, self.until())
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        if tok in _UNARY:
            self.take()
            return _UNARY[tok](self.unary())
        return self.primary()

    def primary(self) -> Formula:
        tok, off = self.tokens[self.i]
        if tok == "(":
            self.take()
            inner = self.implication()
            self.expect(")")
            return inner
        if tok == "true":
            self.take()
            return Top()
        if tok == "false":
            self.take()
            return Bottom()
        if tok and _ATOM_RE.fullmatch(tok):
            self.take()
            return Atom(tok)
        raise LtlfSyntaxError(f"unexpected {tok or 'end of input'!r}", off)


def parse(text: str) -> Formula:
    """Parse LTLf surface syntax into a formula tree.

    >>> parse("F(a) & G(!b)")
    And(left=Eventually(arg=Atom(name='a')), right=Always(arg=Not(arg=Atom(name='b'))))
    """
    if not text or not text.strip():
        raise LtlfSyntaxError("empty formula", 0)
    p = _Parser(text)
    f = p.implication()
    if p.peek() != "":
        raise LtlfSyntaxError(f"unexpected {p.peek()!r}", p.offset())
    return f


def pretty(f: Formula) -> str:
    """Render ``f`` in the surface syntax accepted by :func:`parse`.

    Binary nodes are always parenthesised, so ``parse(pretty(f)) == f``.
    """
    match f:
        case Top():
            return "true"
        case Bottom():
            return "false"
        case Atom(name):
            return name
        case Not(arg):
            return f"!{_wrap(arg)}"
        case Next(arg):
            return f"X{_wrap(arg)}"
        case Eventually(arg):
            return f"F{_wrap(arg)}"
        case Always(arg):
            return f"G{_wrap(arg)}"
        case And(l, r):
            return f"({pretty(l)} & {pretty(r)})"
        case Or(l, r):
            return f"({pretty(l)} | {pretty(r)})"
        case Implies(l, r):
            return f"({pretty(l)} -> {pretty(r)})"
        case Until(l, r):
            return f"({pretty(l)} U {pretty(r)})"
    raise TypeError(f"not a formula: {f!r}")


def _wrap(f: Formula) -> str:
    s = pretty(f)
    return s if s.startswith("(") else f"({s})"


# ------------------------------------------------------------- inspection

def subformulas(f: Formula) -> Iterable[Formula]:
    """Yield every node of ``f`` in post-order (children before parents)."""
    match f:
        case Not(a) | Next(a) | Eventually(a) | Always(a):
            yield from subformulas(a)
        case And(l, r) | Or(l, r) | Implies(l, r) | Until(l, r):
            yield from subformulas(l)
            yield from subformulas(r)
    yield f


def atomic_props(f: Formula) -> set[str]:
    return {g.name for g in subformulas(f) if isinstance(g, Atom)}


def desugar(f: Formula) -> Formula:
    """Rewrite into the core grammar {true, a, !, &, X, U}."""
    match f:
        case Top() | Atom():
            return f
        case Bottom():
            return Not(Top())
        case Not(a):
            return Not(desugar(a))
        case Next(a):
            return Next(desugar(a))
        case And(l, r):
            return And(desugar(l), desugar(r))
        case Or(l, r):
            return Not(And(Not(desugar(l)), Not(desugar(r))))
        case Implies(l, r):
            return Not(And(desugar(l), Not(desugar(r))))
        case Until(l, r):
            return Until(desugar(l), desugar(r))
        case Eventually(a):
            return Until(Top(), desugar(a))
        case Always(a):
            return Not(Until(Top(), Not(desugar(a))))
    raise TypeError(f"not a formula: {f!r}")


# -------------------------------------------------------------- semantics

def evaluate(f: Formula, word: Sequence[Iterable[str]], i: int = 1) -> bool:
    """Finite-trace truth of ``f`` on ``word`` at 1-based position ``i``.

    ``X`` is the strong next: false at the last position.
    """
    n = len(word)
    if n == 0:
        raise ValueError("LTLf words must have at least one letter")
    if not 1 <= i <= n:
        raise PositionOutOfRange(f"position {i} outside [1, {n}]")
    letters = [frozenset(w) for w in word]
    return _eval(f, letters, i - 1, {})


def holds(f: Formula, word: Sequence[Iterable[str]]) -> bool:
    """``w |= f``, i.e. truth at the first position."""
    return evaluate(f, word, 1)


def _eval(f: Formula, w: list[frozenset], i: int, memo: dict) -> bool:
    key = (f, i)
    if key in memo:
        return memo[key]
    n = len(w)
    match f:
        case Top():
            v = True
        case Bottom():
            v = False
        case Atom(name):
            v = name in w[i]
        case Not(a):
            v = not _eval(a, w, i, memo)
        case And(l, r):
            v = _eval(l, w, i, memo) and _eval(r, w, i, memo)
        case Or(l, r):
            v = _eval(l, w, i, memo) or _eval(r, w, i, memo)
        case Implies(l, r):
            v = (not _eval(l, w, i, memo)) or _eval(r, w, i, memo)
        case Next(a):
            v = i + 1 < n and _eval(a, w, i + 1, memo)
        case Until(l, r):
            v = False
            for j in range(i, n):
                if _eval(r, w, j, memo):
                    v = True
                    break
                if not _eval(l, w, j, memo):
                    break
        case Eventually(a):
            v = any(_eval(a, w, j, memo) for j in range(i, n))
        case Always(a):
            v = all(_eval(a, w, j, memo) for j in range(i, n))
        case _:
            raise TypeError(f"not a formula: {f!r}")
    memo[key] = v
    return v
