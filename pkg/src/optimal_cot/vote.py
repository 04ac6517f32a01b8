"""Length-filtered majority voting over sampled answer candidates.

Candidates are binned by chain length into width-``D`` groups, each group's
answer distribution is scored by Shannon entropy, and the vote runs over
the ``K`` lowest-entropy groups only.  Choosing the ``K`` groups that
minimise the summed entropy is the same as taking the ``K`` individually
smallest, which is what :func:`select_groups` does.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from .errors import EmptyPoolError, UnresolvableLengthError


@dataclass(frozen=True)
class Candidate:
    id: str
    question_id: str
    answer: str
    text: str | None = None
    length: int | None = None

    def __post_init__(self):
        if self.length is not None and self.length < 0:
            raise ValueError(f"candidate {self.id}: negative length")

    @property
    def resolved_length(self) -> int | None:
        if self.length is not None:
            return self.length
        if self.text is not None:
            return segment_steps(self.text)
        return None

    @classmethod
    def from_dict(cls, d: dict) -> "Candidate":
        return cls(
            id=str(d["id"]),
            question_id=str(d.get("question_id", "")),
            answer=str(d["answer"]),
            text=d.get("text"),
            length=None if d.get("length") is None else int(d["length"]),
        )


@dataclass(frozen=True)
class VoteConfig:
    bin_width: int = 2
    selected_groups: int = 3
    # groups smaller than this are never selected (1 = no floor)
    min_group_size: int = 1

    def __post_init__(self):
        if self.bin_width < 1 or self.selected_groups < 1 or self.min_group_size < 1:
            raise ValueError("bin_width, selected_groups and min_group_size must be >= 1")


@dataclass
class LengthGroup:
    bin_index: int
    bin_range: tuple[int, int]
    members: list[Candidate]
    distribution: dict[str, float] = field(init=False)
    entropy: float = field(init=False)

    def __post_init__(self):
        if not self.members:
            raise ValueError("a length group needs at least one member")
        counts = Counter(c.answer for c in self.members)
        n = len(self.members)
        self.distribution = {a: counts[a] / n for a in sorted(counts)}
        self.entropy = _entropy(counts.values())

    @property
    def size(self) -> int:
        return len(self.members)

    def to_json(self) -> dict:
        return {
            "bin_index": self.bin_index,
            "bin_range": list(self.bin_range),
            "size": self.size,
            "entropy": self.entropy,
            "distribution": self.distribution,
        }


def _entropy(counts: Iterable[int]) -> float:
    # sorted so equal multisets of counts give bit-identical floats
    counts = sorted(c for c in counts if c > 0)
    n = sum(counts)
    return max(0.0, -sum((c / n) * math.log(c / n) for c in counts))


def segment_steps(text: str) -> int:
    """Number of non-empty lines in a reasoning chain."""
    return sum(1 for line in text.split("\n") if line.strip())


def group_by_length(pool: Sequence[Candidate], bin_width: int) -> list[LengthGroup]:
    """Bin candidates by length; group ``j`` holds lengths in ``[D(j-1), Dj)``."""
    if bin_width < 1:
        raise ValueError("bin width must be >= 1")
    missing = [c.id for c in pool if c.resolved_length is None]
    if missing:
        raise UnresolvableLengthError(missing)
    bins: dict[int, list[Candidate]] = {}
    for c in pool:
        j = c.resolved_length // bin_width + 1
        bins.setdefault(j, []).append(c)
    return [
        LengthGroup(j, (bin_width * (j - 1), bin_width * j), bins[j])
        for j in sorted(bins)
    ]


def group_entropy(group: LengthGroup) -> float:
    return group.entropy


def select_groups(groups: Sequence[LengthGroup], config: VoteConfig) -> list[LengthGroup]:
    """The ``K`` lowest-entropy groups; ties prefer larger, then earlier bins."""
    eligible = [g for g in groups if g.size >= config.min_group_size] or list(groups)
    ranked = sorted(eligible, key=lambda g: (g.entropy, -g.size, g.bin_index))
    return sorted(ranked[: config.selected_groups], key=lambda g: g.bin_index)


def _plurality(answers: Iterable[str]) -> tuple[str, dict[str, int]]:
    tally = Counter(answers)
    if not tally:
        raise EmptyPoolError("no candidates to vote over")
    best = max(tally.values())
    winner = min(a for a, n in tally.items() if n == best)
    return winner, dict(sorted(tally.items()))


def majority_vote(pool: Sequence[Candidate]) -> str:
    """Most frequent answer; ties go to the lexicographically smallest."""
    return _plurality(c.answer for c in pool)[0]


@dataclass
class VoteReport:
    groups: list[LengthGroup]
    selected_bins: list[int]
    final_answer: str
    tally: dict[str, int]
    config: VoteConfig

    def to_json(self) -> dict:
        return {
            "groups": [g.to_json() for g in self.groups],
            "selected_bins": self.selected_bins,
            "final_answer": self.final_answer,
            "tally": self.tally,
        }


def length_filtered_vote(pool: Sequence[Candidate], config: VoteConfig = VoteConfig()) -> tuple[str, VoteReport]:
    if not pool:
        raise EmptyPoolError("length-filtered vote needs at least one candidate")
    groups = group_by_length(pool, config.bin_width)
    chosen = select_groups(groups, config)
    answer, tally = _plurality(c.answer for g in chosen for c in g.members)
    report = VoteReport(
        groups=groups,
        selected_bins=[g.bin_index for g in chosen],
        final_answer=answer,
        tally=tally,
        config=config,
    )
    return answer, report


@dataclass(frozen=True)
class Band:
    """Lengths ``lo <= l < hi`` answered correctly with probability ``p_correct``."""

    lo: int
    hi: int
    p_correct: float

    def __post_init__(self):
        if not 0 <= self.lo < self.hi:
            raise ValueError(f"bad band range [{self.lo}, {self.hi})")
        if not 0.0 <= self.p_correct <= 1.0:
            raise ValueError("p_correct must lie in [0, 1]")


def simulate_pool(
    bands: Sequence[Band],
    n: int,
    correct_answer: str,
    distractors: Sequence[str],
    seed: int,
    question_id: str = "q0",
) -> list[Candidate]:
    """Synthetic candidate pool.

    Each candidate picks a band uniformly, a length uniformly inside it,
    and is correct with the band's probability; otherwise its answer is a
    uniformly chosen distractor.
    """
    if not bands:
        raise ValueError("need at least one band")
    if not distractors and any(b.p_correct < 1.0 for b in bands):
        raise ValueError("wrong answers need at least one distractor")
    rng = random.Random(seed)
    pool = []
    for i in range(n):
        band = bands[rng.randrange(len(bands))]
        length = rng.randrange(band.lo, band.hi)
        if rng.random() < band.p_correct:
            answer = correct_answer
        else:
            answer = distractors[rng.randrange(len(distractors))]
        pool.append(Candidate(id=f"{question_id}-{i}", question_id=question_id, answer=answer, length=length))
    return pool


def read_candidates(stream: IO[str]) -> list[Candidate]:
    """Parse JSON-lines candidates, skipping blank lines."""
    out = []
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            out.append(Candidate.from_dict(json.loads(line)))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"line {lineno}: bad candidate record ({exc})") from exc
    return out


def by_question(pool: Iterable[Candidate]) -> dict[str, list[Candidate]]:
    out: dict[str, list[Candidate]] = {}
    for c in pool:
        out.setdefault(c.question_id, []).append(c)
    return out
