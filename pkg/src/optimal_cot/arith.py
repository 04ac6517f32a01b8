"""Synthetic mod-10 addition tasks and their fixed-step CoT solutions.

A task is a binary tree of ``+`` nodes over single-digit leaves in which
every ``+`` has at least one leaf child.  Such a tree is a chain ("spine")
of ``+`` nodes, so a ``t``-hop solution simply walks the spine bottom-up,
folding ``t`` operators into each step.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import IO, Iterator, Sequence, Union

import numpy as np

from .errors import MalformedStreamError, PruningViolationError

END_TOKEN = "<END>"


@dataclass(frozen=True)
class Leaf:
    value: int

    def __post_init__(self):
        if not 0 <= self.value <= 9:
            raise ValueError(f"leaf value must be a digit, got {self.value}")


@dataclass(frozen=True)
class Plus:
    left: "ExprTree"
    right: "ExprTree"


ExprTree = Union[Leaf, Plus]


@dataclass(frozen=True)
class Step:
    sub_question: str
    operand_values: tuple[int, ...]
    result: int

    @property
    def n_ops(self) -> int:
        return self.sub_question.count("+")

    def render(self) -> str:
        return f"{self.sub_question}={self.result}"


@dataclass(frozen=True)
class CoTSolution:
    step_size: int
    steps: tuple[Step, ...]

    @property
    def control_token(self) -> str:
        return control_token(self.step_size)

    @property
    def answer(self) -> int:
        return self.steps[-1].result


def control_token(step_size: int) -> str:
    return f"<{step_size}>"


def count_ops(tree: ExprTree) -> int:
    if isinstance(tree, Leaf):
        return 0
    return 1 + count_ops(tree.left) + count_ops(tree.right)


def leaves(tree: ExprTree) -> list[int]:
    """Leaf values in left-to-right order."""
    out: list[int] = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            out.append(node.value)
        else:
            stack.append(node.right)
            stack.append(node.left)
    return out


def is_pruned(tree: ExprTree) -> bool:
    """Every ``+`` node has at least one leaf child."""
    node = tree
    while isinstance(node, Plus):
        if isinstance(node.left, Plus) and isinstance(node.right, Plus):
            return False
        node = node.left if isinstance(node.left, Plus) else node.right
    return True


def sample_problem(n_ops: int, seed: int | random.Random) -> ExprTree:
    """Random pruned tree with ``n_ops`` operators.

    Built bottom-up: the deepest ``+`` gets two leaves, and each operator
    above it places its leaf on the left or right with equal odds.
    """
    if n_ops < 1:
        raise ValueError("a task needs at least one operator")
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    digit = lambda: Leaf(rng.randrange(10))  # noqa: E731
    tree: ExprTree = Plus(digit(), digit())
    for _ in range(n_ops - 1):
        if rng.random() < 0.5:
            tree = Plus(digit(), tree)
        else:
            tree = Plus(tree, digit())
    return tree


def to_polish(tree: ExprTree) -> list[str]:
    out: list[str] = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            out.append(str(node.value))
        else:
            out.append("+")
            stack.append(node.right)
            stack.append(node.left)
    return out


def parse_polish(tokens: Sequence[str] | str) -> ExprTree:
    """Inverse of :func:`to_polish`; validates the pruning constraint."""
    if isinstance(tokens, str):
        tokens = tokens.split()
    tokens = list(tokens)
    if not tokens:
        raise MalformedStreamError("empty token stream", 0)
    return _parse_polish_iter(tokens)


def _parse_polish_iter(tokens: list[str]) -> ExprTree:
    # explicit stack of (operator position, children so far); long spines
    # would otherwise hit the recursion limit
    stack: list[tuple[int, list[ExprTree]]] = []
    for pos, tok in enumerate(tokens):
        if tok == "+":
            stack.append((pos, []))
            continue
        if not (len(tok) == 1 and tok.isdigit()):
            raise MalformedStreamError(f"unexpected token {tok!r}", pos)
        node: ExprTree = Leaf(int(tok))
        while True:
            if not stack:
                if pos != len(tokens) - 1:
                    raise MalformedStreamError("trailing tokens after complete expression", pos + 1)
                return node
            op_pos, children = stack[-1]
            children.append(node)
            if len(children) < 2:
                break
            stack.pop()
            left, right = children
            if isinstance(left, Plus) and isinstance(right, Plus):
                raise PruningViolationError(f"'+' at token {op_pos} has no leaf child")
            node = Plus(left, right)
    raise MalformedStreamError("unexpected end of stream", len(tokens))


def to_infix(tree: ExprTree, display: bool = False) -> str:
    """Infix text with brackets around every ``+`` child.

    ``display=True`` drops the brackets around left children, so a
    left-nested chain reads ``1+2+3``.  Either way the left-to-right order
    of digits is preserved.
    """
    if isinstance(tree, Leaf):
        return str(tree.value)
    lt = to_infix(tree.left, display)
    if isinstance(tree.left, Plus) and not display:
        lt = f"({lt})"
    rt = to_infix(tree.right, display)
    if isinstance(tree.right, Plus):
        rt = f"({rt})"
    return f"{lt}+{rt}"


def parse_infix(text: str) -> ExprTree:
    """Parse infix text (digits, ``+``, brackets) into a tree.

    Unbracketed chains associate to the left, which inverts the display
    form of :func:`to_infix`.
    """
    s = text.replace(" ", "")
    pos = 0

    def atom() -> ExprTree:
        nonlocal pos
        if pos >= len(s):
            raise MalformedStreamError("unexpected end of expression", pos)
        ch = s[pos]
        if ch == "(":
            pos += 1
            node = expr()
            if pos >= len(s) or s[pos] != ")":
                raise MalformedStreamError("missing ')'", pos)
            pos += 1
            return node
        if ch.isdigit():
            pos += 1
            return Leaf(int(ch))
        raise MalformedStreamError(f"unexpected character {ch!r}", pos)

    def expr() -> ExprTree:
        nonlocal pos
        node = atom()
        while pos < len(s) and s[pos] == "+":
            pos += 1
            node = Plus(node, atom())
        return node

    tree = expr()
    if pos != len(s):
        raise MalformedStreamError("trailing characters", pos)
    return tree


def evaluate(tree: ExprTree) -> int:
    return sum(leaves(tree)) % 10


def spine(tree: ExprTree) -> list[Plus]:
    """The chain of ``+`` nodes from the root down to the deepest one."""
    if not is_pruned(tree):
        raise PruningViolationError("tree has a '+' node with two '+' children")
    out = []
    node = tree
    while isinstance(node, Plus):
        out.append(node)
        node = node.left if isinstance(node.left, Plus) else node.right
    return out


def _replace_plus_child(node: Plus, new: ExprTree) -> Plus:
    if isinstance(node.left, Plus):
        return Plus(new, node.right)
    if isinstance(node.right, Plus):
        return Plus(node.left, new)
    return node


def generate_cot(tree: ExprTree, step_size: int) -> CoTSolution:
    """Solve the task deepest-first, ``step_size`` operators per step.

    The last step takes the remaining ``T mod t`` operators when ``t`` does
    not divide ``T``; every intermediate value is reduced mod 10.
    """
    ops = spine(tree)[::-1]  # deepest first
    if not 1 <= step_size <= len(ops):
        raise ValueError(f"step size must lie in [1, {len(ops)}], got {step_size}")
    steps = []
    carried: ExprTree | None = None
    for start in range(0, len(ops), step_size):
        node: ExprTree | None = carried
        for op in ops[start:start + step_size]:
            node = op if node is None else _replace_plus_child(op, node)
        values = tuple(leaves(node))
        result = sum(values) % 10
        steps.append(Step(sub_question=to_infix(node), operand_values=values, result=result))
        carried = Leaf(result)
    return CoTSolution(step_size=step_size, steps=tuple(steps))


def verify_solution(tree: ExprTree, solution: CoTSolution) -> bool:
    """Re-check a solution against the task from scratch.

    Checks step count, per-step operator counts, that each sub-question's
    digits sum (mod 10) to its stated result, that each step starts from
    the previous result, and that step results match the values of the
    corresponding subtrees of the original task.
    """
    try:
        chain = spine(tree)
    except PruningViolationError:
        return False
    T, t = len(chain), solution.step_size
    if not 1 <= t <= T or len(solution.steps) != math.ceil(T / t):
        return False
    # subtree values at each step boundary, computed from the original leaves
    expected = [evaluate(chain[T - min(k * t, T)]) for k in range(1, len(solution.steps) + 1)]
    prev = None
    for k, step in enumerate(solution.steps):
        want_ops = t if k < len(solution.steps) - 1 or T % t == 0 else T % t
        try:
            parsed = parse_infix(step.sub_question)
        except MalformedStreamError:
            return False
        digits = leaves(parsed)
        if count_ops(parsed) != want_ops or tuple(digits) != tuple(step.operand_values):
            return False
        if sum(digits) % 10 != step.result or step.result != expected[k]:
            return False
        if prev is not None and not _contains_carried(parsed, prev):
            return False
        prev = step.result
    return solution.steps[-1].result == evaluate(tree)


def _contains_carried(tree: ExprTree, value: int) -> bool:
    # the carried value sits as the non-leaf-side child of the deepest '+'
    deepest = spine(tree)[-1]
    return value in (getattr(deepest.left, "value", None), getattr(deepest.right, "value", None))


# --- corpus -----------------------------------------------------------------


def format_record(tree: ExprTree, solution: CoTSolution, omit_token: bool = False) -> str:
    """Render one record in the text corpus format (no trailing newline)."""
    head = " ".join(to_polish(tree)) + " ="
    if not omit_token:
        head += " " + solution.control_token
    lines = [head] + [s.render() for s in solution.steps]
    lines[-1] += END_TOKEN
    return "\n".join(lines)


def parse_record(text: str, step_size: int | None = None) -> tuple[ExprTree, CoTSolution]:
    """Parse one text record back into a task and its solution.

    ``step_size`` is needed only for records written without a control
    token; it is otherwise read from the header.
    """
    lines = [ln for ln in text.strip("\n").split("\n")]
    if len(lines) < 2:
        raise MalformedStreamError("record needs a header and at least one step", 0)
    head = lines[0]
    if " =" not in head:
        raise MalformedStreamError("header lacks ' ='", 0)
    polish, _, tail = head.rpartition(" =")
    tree = parse_polish(polish)
    tail = tail.strip()
    if tail:
        if not (tail.startswith("<") and tail.endswith(">") and tail[1:-1].isdigit()):
            raise MalformedStreamError(f"bad control token {tail!r}", 0)
        step_size = int(tail[1:-1])
    elif step_size is None:
        raise MalformedStreamError("no control token and no step size given", 0)
    if not lines[-1].endswith(END_TOKEN):
        raise MalformedStreamError(f"last step lacks {END_TOKEN}", len(lines) - 1)
    lines[-1] = lines[-1][: -len(END_TOKEN)]
    steps = []
    for i, line in enumerate(lines[1:], start=1):
        question, eq, answer = line.rpartition("=")
        if not eq or not answer.isdigit():
            raise MalformedStreamError(f"bad step line {line!r}", i)
        steps.append(Step(question, tuple(leaves(parse_infix(question))), int(answer)))
    return tree, CoTSolution(step_size=step_size, steps=tuple(steps))


def record_json(tree: ExprTree, solution: CoTSolution) -> dict:
    return {
        "polish": " ".join(to_polish(tree)),
        "infix": to_infix(tree),
        "T": count_ops(tree),
        "t": solution.step_size,
        "steps": [{"question": s.sub_question, "answer": s.result} for s in solution.steps],
        "answer": solution.answer,
    }


@dataclass(frozen=True)
class CorpusSpec:
    """What to generate.

    Attributes:
        difficulties: operator counts ``T`` to draw from (uniformly).
        step_sizes: step sizes ``t`` to draw from (uniformly, restricted to
            ``t <= T``).  Ignored for a ``T`` listed in ``fixed_step_sizes``.
        count: number of records.
        seed: master seed; record ``i`` uses a seed derived from (seed, i).
        fixed_step_sizes: optional ``T -> t`` map, e.g. the optimal step
            size per difficulty.
        omit_token: write headers without the ``<t>`` control token.
    """

    difficulties: tuple[int, ...]
    step_sizes: tuple[int, ...]
    count: int
    seed: int = 0
    fixed_step_sizes: dict = field(default_factory=dict)
    omit_token: bool = False

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be nonnegative")
        if not self.difficulties or min(self.difficulties) < 1:
            raise ValueError("need at least one positive difficulty")
        for T in self.difficulties:
            if T not in self.fixed_step_sizes and not any(1 <= t <= T for t in self.step_sizes):
                raise ValueError(f"no admissible step size for T={T}")


def record_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence(entropy=master, spawn_key=(index,)).generate_state(1)[0])


def generate_record(spec: CorpusSpec, index: int) -> tuple[ExprTree, CoTSolution]:
    rng = random.Random(record_seed(spec.seed, index))
    T = rng.choice(spec.difficulties)
    if T in spec.fixed_step_sizes:
        t = int(spec.fixed_step_sizes[T])
    else:
        t = rng.choice([s for s in spec.step_sizes if 1 <= s <= T])
    tree = sample_problem(T, rng)
    return tree, generate_cot(tree, t)


def iter_corpus(spec: CorpusSpec) -> Iterator[tuple[ExprTree, CoTSolution]]:
    for i in range(spec.count):
        yield generate_record(spec, i)


def emit_corpus(spec: CorpusSpec, out: IO[str], jsonl: IO[str] | None = None) -> int:
    """Write ``spec.count`` records to ``out`` (and the JSON-lines mirror).

    Records are separated by one blank line and end with a newline.
    """
    n = 0
    for tree, sol in iter_corpus(spec):
        if n:
            out.write("\n")
        out.write(format_record(tree, sol, spec.omit_token) + "\n")
        if jsonl is not None:
            jsonl.write(json.dumps(record_json(tree, sol)) + "\n")
        n += 1
    return n


def split_records(text: str) -> list[str]:
    return [chunk.strip("\n") for chunk in text.split("\n\n") if chunk.strip()]
