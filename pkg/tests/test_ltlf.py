import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agsynth.ltlf import (Always, And, Atom, Bottom, Eventually, Implies, LtlfSyntaxError,
                          Next, Not, Or, PositionOutOfRange, Top, UnknownTokenError, Until,
                          atomic_props, desugar, evaluate, parse, pretty)

a, b, c = Atom("a"), Atom("b"), Atom("c")


def formulas(atoms=("a", "b", "c"), max_leaves=8):
    leaves = st.sampled_from([Top(), Bottom()] + [Atom(x) for x in atoms])

    def extend(children):
        return st.one_of(
            st.builds(Not, children), st.builds(Next, children),
            st.builds(Eventually, children), st.builds(Always, children),
            st.builds(And, children, children), st.builds(Or, children, children),
            st.builds(Implies, children, children), st.builds(Until, children, children),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def words(ap, max_len):
    letters = [frozenset(s) for k in range(len(ap) + 1) for s in itertools.combinations(ap, k)]
    for n in range(1, max_len + 1):
        yield from itertools.product(letters, repeat=n)


class TestParse:
    def test_reach_avoid(self):
        assert parse("F(a) & G(!b)") == And(Eventually(a), Always(Not(b)))

    def test_single_atom(self):
        assert parse("a") == a

    def test_ordered_goals(self):
        f = parse("F(b) & G(!c) & (!b U a)")
        assert f == And(And(Eventually(b), Always(Not(c))), Until(Not(b), a))

    def test_unbalanced_paren_offset(self):
        with pytest.raises(LtlfSyntaxError) as err:
            parse("(a")
        assert err.value.offset == 2

    def test_unknown_token(self):
        with pytest.raises(UnknownTokenError) as err:
            parse("a & $")
        assert err.value.offset == 4

    @pytest.mark.parametrize("text", ["", "   ", "a b", "& a", "a U", "F", "()"])
    def test_malformed(self, text):
        with pytest.raises(LtlfSyntaxError):
            parse(text)

    def test_precedence(self):
        assert parse("a | b & c") == Or(a, And(b, c))
        assert parse("a -> b -> c") == Implies(a, Implies(b, c))
        assert parse("a U b U c") == Until(a, Until(b, c))
        assert parse("!a U b") == Until(Not(a), b)
        assert parse("a & b U c") == And(a, Until(b, c))
        assert parse("X a & F b") == And(Next(a), Eventually(b))
        assert parse("true | false") == Or(Top(), Bottom())

    @settings(max_examples=300, deadline=None)
    @given(formulas())
    def test_round_trip(self, f):
        assert parse(pretty(f)) == f


class TestAtomicProps:
    def test_examples(self):
        assert atomic_props(parse("F(a) & G(!b)")) == {"a", "b"}
        assert atomic_props(Top()) == set()
        assert atomic_props(parse("!b U a")) == {"a", "b"}


class TestEvaluate:
    def test_eventually_single_letter(self):
        assert evaluate(Eventually(a), [{"a"}], 1)

    def test_strong_next(self):
        assert not evaluate(Next(a), [{"a"}], 1)
        assert evaluate(Next(a), [set(), {"a"}], 1)

    def test_until_expansion(self):
        # a holds at j=2, !b holds at k=1
        assert evaluate(parse("!b U a"), [set(), {"a", "b"}], 1)

    def test_always(self):
        assert not evaluate(Always(Not(b)), [set(), {"b"}], 1)

    def test_position_range(self):
        with pytest.raises(PositionOutOfRange):
            evaluate(a, [{"a"}], 2)
        with pytest.raises(PositionOutOfRange):
            evaluate(a, [{"a"}], 0)

    def test_empty_word_rejected(self):
        with pytest.raises(ValueError):
            evaluate(a, [], 1)

    def test_sugar_equivalence_exhaustive(self):
        body = [a, Not(b), And(a, Next(b)), Until(a, b), Always(a)]
        for phi in body:
            for w in words(("a", "b"), 6):
                for i in range(1, len(w) + 1):
                    assert evaluate(Eventually(phi), w, i) == evaluate(Until(Top(), phi), w, i)
                    assert evaluate(Always(phi), w, i) == \
                        evaluate(Not(Until(Top(), Not(phi))), w, i)

    @settings(max_examples=60, deadline=None)
    @given(formulas(max_leaves=6))
    def test_desugar_preserves_semantics(self, f):
        g = desugar(f)
        for w in words(("a", "b", "c"), 3):
            assert evaluate(f, w, 1) == evaluate(g, w, 1)

    @settings(max_examples=60, deadline=None)
    @given(formulas(max_leaves=6))
    def test_negation_pointwise(self, f):
        for w in words(("a", "b"), 3):
            for i in range(1, len(w) + 1):
                assert evaluate(Not(f), w, i) == (not evaluate(f, w, i))
