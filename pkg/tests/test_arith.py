import io
import json
import math
import random
from collections import Counter
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from optimal_cot.arith import (
    END_TOKEN,
    CorpusSpec,
    Leaf,
    Plus,
    Step,
    count_ops,
    emit_corpus,
    evaluate,
    format_record,
    generate_cot,
    is_pruned,
    iter_corpus,
    leaves,
    parse_infix,
    parse_polish,
    parse_record,
    sample_problem,
    split_records,
    to_infix,
    to_polish,
    verify_solution,
)
from optimal_cot.errors import MalformedStreamError, PruningViolationError

# 5+(4+((2+1)+3))
WORKED = Plus(Leaf(5), Plus(Leaf(4), Plus(Plus(Leaf(2), Leaf(1)), Leaf(3))))

trees = st.builds(sample_problem, st.integers(1, 80), st.integers(0, 2**32 - 1))


def left_chain(digits):
    node = Leaf(digits[0])
    for d in digits[1:]:
        node = Plus(node, Leaf(d))
    return node


class TestSampling:
    def test_single_operator(self):
        tree = sample_problem(1, seed=0)
        assert isinstance(tree, Plus)
        assert isinstance(tree.left, Leaf) and isinstance(tree.right, Leaf)

    @pytest.mark.parametrize("seed", range(20))
    def test_structure(self, seed):
        tree = sample_problem(4, seed)
        assert count_ops(tree) == 4
        assert len(leaves(tree)) == 5
        assert is_pruned(tree)

    def test_deterministic(self):
        assert sample_problem(30, 7) == sample_problem(30, 7)

    def test_diversity(self):
        shapes = {tuple(to_polish(sample_problem(30, s))) for s in range(1000)}
        assert len(shapes) >= 990

    def test_leaf_side_is_balanced(self):
        left = right = 0
        for s in range(200):
            node = sample_problem(20, s)
            while isinstance(node, Plus):
                if isinstance(node.left, Plus):
                    right += 1
                    node = node.left
                elif isinstance(node.right, Plus):
                    left += 1
                    node = node.right
                else:
                    break
        assert abs(left - right) < 5 * math.sqrt(left + right) / 2

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            sample_problem(0, 1)

    def test_leaf_range(self):
        with pytest.raises(ValueError):
            Leaf(10)


class TestPolish:
    def test_leaf(self):
        assert to_polish(Leaf(7)) == ["7"]
        assert parse_polish("3") == Leaf(3)

    def test_worked_example(self):
        assert " ".join(to_polish(WORKED)) == "+ 5 + 4 + + 2 1 3"
        assert parse_polish("+ 5 + 4 + + 2 1 3") == WORKED

    def test_pruning_violation(self):
        with pytest.raises(PruningViolationError):
            parse_polish("+ + 1 2 + 3 4")

    @pytest.mark.parametrize("text,pos", [("+ 1", 2), ("+ 1 2 3", 3), ("+ 1 x", 2), ("", 0), ("12", 0)])
    def test_malformed(self, text, pos):
        with pytest.raises(MalformedStreamError) as err:
            parse_polish(text)
        assert err.value.position == pos

    def test_long_spine(self):
        tokens = to_polish(sample_problem(5000, 1))
        assert to_polish(parse_polish(tokens)) == tokens

    def test_round_trip_bulk(self):
        rng = random.Random(0)
        for _ in range(10_000):
            tree = sample_problem(rng.randint(1, 40), rng)
            assert parse_polish(to_polish(tree)) == tree

    @given(trees)
    def test_round_trip(self, tree):
        assert parse_polish(to_polish(tree)) == tree


class TestInfix:
    def test_leaf(self):
        assert to_infix(Leaf(9)) == "9"

    def test_worked_example(self):
        assert to_infix(WORKED) == "5+(4+((2+1)+3))"

    def test_display_mode(self):
        chain = left_chain([1, 2, 3, 4, 5, 6, 7])
        assert to_infix(chain, display=True) == "1+2+3+4+5+6+7"
        assert to_infix(chain) == "(((((1+2)+3)+4)+5)+6)+7"
        assert parse_infix("1+2+3+4+5+6+7") == chain

    @given(trees)
    def test_round_trip_both_modes(self, tree):
        assert parse_infix(to_infix(tree)) == tree
        assert parse_infix(to_infix(tree, display=True)) == tree

    @pytest.mark.parametrize("text", ["(1+2", "1+", "1+2)", "a+1"])
    def test_malformed(self, text):
        with pytest.raises(MalformedStreamError):
            parse_infix(text)


class TestEvaluate:
    def test_leaf(self):
        assert evaluate(Leaf(4)) == 4

    def test_worked_example(self):
        assert evaluate(WORKED) == 5

    @given(trees)
    def test_flat_sum_oracle(self, tree):
        digits = [int(tok) for tok in to_polish(tree) if tok != "+"]
        assert evaluate(tree) == sum(digits) % 10


class TestGenerate:
    def test_one_op_per_step(self):
        sol = generate_cot(WORKED, 1)
        assert [s.render() for s in sol.steps] == ["2+1=3", "3+3=6", "4+6=0", "5+0=5"]
        assert sol.answer == 5

    def test_two_ops_per_step(self):
        sol = generate_cot(WORKED, 2)
        assert [s.render() for s in sol.steps] == ["(2+1)+3=6", "5+(4+6)=5"]

    def test_remainder_step(self):
        sol = generate_cot(sample_problem(7, 3), 3)
        assert [s.n_ops for s in sol.steps] == [3, 3, 1]

    def test_step_size_range(self):
        with pytest.raises(ValueError):
            generate_cot(WORKED, 0)
        with pytest.raises(ValueError):
            generate_cot(WORKED, 5)

    def test_operands_and_results(self):
        for step in generate_cot(sample_problem(17, 2), 4).steps:
            assert step.result == sum(step.operand_values) % 10

    @given(trees, st.data())
    def test_step_count_law(self, tree, data):
        T = count_ops(tree)
        t = data.draw(st.integers(1, T))
        sol = generate_cot(tree, t)
        assert len(sol.steps) == math.ceil(T / t)
        assert sol.answer == evaluate(tree)
        assert generate_cot(tree, t) == sol

    def test_bulk_verification(self):
        rng = random.Random(42)
        for _ in range(10_000):
            T = rng.choice([4, 8, 16, 24])
            t = rng.randint(1, 4)
            tree = sample_problem(T, rng)
            sol = generate_cot(tree, t)
            assert len(sol.steps) == math.ceil(T / t)
            assert verify_solution(tree, sol)


class TestVerify:
    def setup_method(self):
        self.tree = sample_problem(9, 5)
        self.sol = generate_cot(self.tree, 2)

    def test_accepts_generated(self):
        assert verify_solution(self.tree, self.sol)

    def test_corrupted_result(self):
        steps = list(self.sol.steps)
        steps[1] = replace(steps[1], result=(steps[1].result + 1) % 10)
        assert not verify_solution(self.tree, replace(self.sol, steps=tuple(steps)))

    def test_wrong_step_count(self):
        assert not verify_solution(self.tree, replace(self.sol, steps=self.sol.steps[:-1]))

    def test_wrong_step_size(self):
        assert not verify_solution(self.tree, replace(self.sol, step_size=3))

    def test_consistent_but_foreign_subquestion(self):
        # arithmetic is right, but the step does not compute a subtree of this task
        first = self.sol.steps[0]
        digits = [(d + 1) % 10 for d in first.operand_values]
        fake = Step("(" + "+".join(map(str, digits[:2])) + ")+" + str(digits[2]), tuple(digits), sum(digits) % 10)
        assert fake.result != first.result
        steps = (fake,) + self.sol.steps[1:]
        assert not verify_solution(self.tree, replace(self.sol, steps=steps))

    def test_unpruned_tree(self):
        bad = Plus(Plus(Leaf(1), Leaf(2)), Plus(Leaf(3), Leaf(4)))
        assert not verify_solution(bad, self.sol)


class TestCorpus:
    def test_empty(self):
        out = io.StringIO()
        assert emit_corpus(CorpusSpec((24,), tuple(range(1, 13)), 0), out) == 0
        assert out.getvalue() == ""

    def test_record_format(self):
        text = format_record(WORKED, generate_cot(WORKED, 1))
        assert text == "+ 5 + 4 + + 2 1 3 = <1>\n2+1=3\n3+3=6\n4+6=0\n5+0=5" + END_TOKEN

    def test_step_size_counts(self):
        spec = CorpusSpec((24,), tuple(range(1, 13)), 1200, seed=3)
        counts = Counter(sol.step_size for _, sol in iter_corpus(spec))
        assert set(counts) == set(range(1, 13))
        assert all(60 <= c <= 140 for c in counts.values())

    def test_round_trip_and_verify(self):
        spec = CorpusSpec((12, 30, 80), tuple(range(1, 13)), 300, seed=1)
        out, js = io.StringIO(), io.StringIO()
        assert emit_corpus(spec, out, js) == 300
        records = split_records(out.getvalue())
        assert len(records) == 300
        for text, line in zip(records, js.getvalue().splitlines()):
            tree, sol = parse_record(text)
            assert verify_solution(tree, sol)
            mirror = json.loads(line)
            assert mirror["polish"] == " ".join(to_polish(tree))
            assert mirror["T"] == count_ops(tree) and mirror["t"] == sol.step_size
            assert [s["answer"] for s in mirror["steps"]] == [s.result for s in sol.steps]
            assert mirror["answer"] == evaluate(tree)

    def test_deterministic_and_order_free(self):
        spec = CorpusSpec((8, 16), (1, 2, 3), 50, seed=9)
        a, b = io.StringIO(), io.StringIO()
        emit_corpus(spec, a)
        emit_corpus(spec, b)
        assert a.getvalue() == b.getvalue()
        backwards = [format_record(*rec) for rec in reversed(list(iter_corpus(spec)))]
        assert backwards[::-1] == split_records(a.getvalue())

    def test_fixed_step_sizes(self):
        spec = CorpusSpec((12, 24), (1,), 40, seed=2, fixed_step_sizes={12: 3, 24: 6})
        for tree, sol in iter_corpus(spec):
            assert sol.step_size == {12: 3, 24: 6}[count_ops(tree)]
            assert len(sol.steps) == 4

    def test_omit_token(self):
        spec = CorpusSpec((8,), (2,), 5, omit_token=True)
        out = io.StringIO()
        emit_corpus(spec, out)
        for text in split_records(out.getvalue()):
            assert text.split("\n")[0].endswith(" =")
            with pytest.raises(MalformedStreamError):
                parse_record(text)
            tree, sol = parse_record(text, step_size=2)
            assert verify_solution(tree, sol)

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            CorpusSpec((4,), (5, 6), 1)
        with pytest.raises(ValueError):
            CorpusSpec((4,), (1,), -1)

    @pytest.mark.parametrize("text", ["+ 1 2 = <1>", "+ 1 2 = <1>\n1+2=3", "+ 1 2 <1>\n1+2=3<END>", "+ 1 2 = <x>\n1+2=3<END>"])
    def test_malformed_records(self, text):
        with pytest.raises(MalformedStreamError):
            parse_record(text)
