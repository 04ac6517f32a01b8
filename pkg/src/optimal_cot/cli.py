"""Command-line interface: ``optimal-cot {optimal,sweep,bandit,gen,vote,replay}``.

Exit codes: 0 success, 2 validation failure, 3 numeric non-convergence.
Every command that writes ``--out`` also writes ``<out>.manifest.json``;
``optimal-cot replay <manifest>`` re-runs it with identical outputs.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path

from . import __version__, arith, bandit, theory, vote
from .errors import ConvergenceError, OptimalCotError
from .reporting import RunManifest, atomic_write, to_csv, to_json, write_manifest

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3


class CliError(Exception):
    """Validation failure reported to the user with exit code 2."""


def parse_grid(text: str, cast=float) -> list:
    """Parse ``"8,16,24"``, ``"2:12"`` or ``"8:80:8"`` (inclusive ranges)."""
    values = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = part.split(":")
            if len(bits) not in (2, 3):
                raise CliError(f"bad range {part!r}")
            lo, hi = cast(bits[0]), cast(bits[1])
            step = cast(bits[2]) if len(bits) == 3 else 1
            if step <= 0:
                raise CliError(f"range step must be positive in {part!r}")
            v = lo
            while v <= hi + 1e-9:
                values.append(v)
                v += step
        else:
            values.append(cast(part))
    if not values:
        raise CliError(f"empty grid {text!r}")
    return values


def _number(s: str):
    f = float(s)
    return int(f) if f.is_integer() and "." not in s else f


def _setting(T, C, M) -> theory.TheorySetting:
    try:
        return theory.TheorySetting(T, C, M)
    except OptimalCotError as exc:
        raise CliError(str(exc)) from exc


class _Run:
    """Collects outputs of one command and writes the manifest at the end."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.outputs: list[str] = []

    def write(self, path, data):
        atomic_write(path, data)
        self.outputs.append(str(path))

    def finish(self):
        if self.args.out is None:
            return
        params = {k: v for k, v in vars(self.args).items() if k not in ("func", "command")}
        manifest = RunManifest(
            command=self.args.command, parameters=params, seed=self.args.seed, outputs=self.outputs,
        )
        write_manifest(manifest, self.args.out)


def _emit(run: _Run, text: str, suffix_path=None):
    if run.args.out is None:
        sys.stdout.write(text)
    else:
        run.write(suffix_path or run.args.out, text)


# --- optimal -------------------------------------------------------------------


def optimal_report(setting: theory.TheorySetting, n_max: int | None = None) -> dict:
    T, C, M = setting.as_tuple()
    n_max = n_max or 8 * math.ceil(T)
    z = theory.lambert_z(setting)
    n_star = theory.optimal_length_closed_form(setting)
    # nearest integer that is still feasible (N M > T)
    n_int = max(round(n_star), math.floor(T / M) + 1)
    argmax = theory.optimal_length_discrete(setting, 1, n_max)
    try:
        n_lb = theory.lower_bound_linear(setting)
    except OptimalCotError:
        n_lb = math.nan
    return {
        "T": T, "C": C, "M": M,
        "sigma": setting.sigma,
        "Z": z,
        "n_star_closed": n_star,
        "n_star_nearest_feasible": n_int,
        "t_star": theory.optimal_step_size(setting),
        "n_lb": n_lb,
        "argmax_discrete": argmax,
        "n_max": n_max,
        "agreement": abs(n_star - argmax) <= 1.0,
    }


def cmd_optimal(args) -> int:
    run = _Run(args)
    setting = _setting(args.difficulty, args.max_difficulty, args.capability)
    rep = optimal_report(setting, args.n_max)
    lines = [
        f"sigma = T/C           {rep['sigma']:.12g}",
        f"Z = W-1(-(1-sigma)/e) {rep['Z']:.12g}",
        f"N* (closed form)      {rep['n_star_closed']:.12g}",
        f"nearest feasible N    {rep['n_star_nearest_feasible']}",
        f"t* = T/N*             {rep['t_star']:.12g}",
        f"N_LB (linear error)   {rep['n_lb']:.12g}",
        f"brute-force argmax    {rep['argmax_discrete']}  (N in [1, {rep['n_max']}])",
        f"|N* - argmax| <= 1    {'yes' if rep['agreement'] else 'NO'}",
    ]
    print("\n".join(lines))
    if args.out is not None:
        if (args.format or "json") == "csv":
            _emit(run, to_csv([rep], list(rep)))
        else:
            _emit(run, to_json(rep))
    run.finish()
    return EXIT_OK


# --- sweep ---------------------------------------------------------------------


def _settings_from_grid(args) -> tuple[list[theory.TheorySetting], int]:
    settings, skipped = [], 0
    for C in parse_grid(args.max_difficulty, _number):
        for T in parse_grid(args.difficulty, _number):
            for M in parse_grid(args.capability, _number):
                try:
                    settings.append(theory.TheorySetting(T, C, M))
                except OptimalCotError:
                    skipped += 1
    if not settings:
        raise CliError("no legal setting in the grid (need C > T, T/C <= 0.9, M > 0)")
    return settings, skipped


def cmd_sweep(args) -> int:
    run = _Run(args)
    settings, skipped = _settings_from_grid(args)
    if skipped:
        print(f"skipped {skipped} grid cell(s) outside the legal region", file=sys.stderr)
    fmt = args.format or "csv"
    if args.envelope:
        steps = [int(t) for t in parse_grid(args.step_sizes, _number)]
        points = theory.step_size_envelope(settings, steps)
        rows = list(theory.envelope_rows(points))
        text = to_csv(rows, theory.ENVELOPE_COLUMNS) if fmt == "csv" else to_json(rows)
        _emit(run, text)
        if args.plot:
            run.write(_figure_path(args), _render(lambda p: _plotting().plot_envelope(points, p)))
    else:
        n_max = args.n_max or 8 * math.ceil(max(s.difficulty for s in settings))
        results = theory.accuracy_sweep(settings, range(args.n_min, n_max + 1))
        rows = list(theory.sweep_rows(results))
        text = to_csv(rows, theory.SWEEP_COLUMNS) if fmt == "csv" else to_json(rows)
        _emit(run, text)
        if args.plot:
            run.write(_figure_path(args), _render(lambda p: _plotting().plot_sweep(results, p)))
    run.finish()
    return EXIT_OK


# --- bandit --------------------------------------------------------------------


def _arms_from_args(args) -> tuple[bandit.ArmSet, theory.TheorySetting | None]:
    if args.accuracies is not None:
        acc = parse_grid(args.accuracies, float)
        lengths = (
            [int(n) for n in parse_grid(args.lengths, _number)] if args.lengths else list(range(1, len(acc) + 1))
        )
        try:
            return bandit.ArmSet(lengths, acc), None
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    if None in (args.difficulty, args.max_difficulty, args.capability) or args.lengths is None:
        raise CliError("give --accuracies, or -T/-C/-M together with --lengths")
    setting = _setting(args.difficulty, args.max_difficulty, args.capability)
    lengths = [int(n) for n in parse_grid(args.lengths, _number)]
    try:
        return bandit.ArmSet.from_theory(setting, lengths, None if args.raw else args.peak), setting
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def cmd_bandit(args) -> int:
    run = _Run(args)
    arms, setting = _arms_from_args(args)
    policy = bandit.Policy.uniform(arms.k)
    if args.mode == "exact":
        eta = args.eta if args.eta is not None else 0.5
        try:
            traj = bandit.gradient_ascent(arms, policy, eta, args.max_steps, args.tol, args.stride or 1)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    else:
        eta = args.eta if args.eta is not None else 0.05
        traj = bandit.reinforce_simulate(
            arms, policy, eta, args.episodes, args.batch, args.seed, args.stride or 100, args.tol,
        )
    summary = {
        "mode": args.mode,
        "eta": eta,
        "converged": bool(traj.converged),
        "steps": traj.steps_taken,
        "winner_index": traj.winner,
        "winner_length": arms.lengths[traj.winner],
        "winner_mass": float(traj.final_probabilities[traj.winner]),
        "best_arms": [arms.lengths[i] for i in traj.near_maximal_arms()],
    }
    if setting is not None:
        summary["theory_argmax"] = theory.optimal_length_discrete(setting, min(arms.lengths), max(arms.lengths))
    for k, v in summary.items():
        print(f"{k:16s}{v}")
    fmt = args.format or "csv"
    if fmt == "csv":
        text = to_csv(traj.rows(), bandit.TRAJECTORY_COLUMNS)
    else:
        text = to_json({"summary": summary, "records": list(traj.rows())})
    if args.out is not None:
        _emit(run, text)
        if args.plot:
            run.write(_figure_path(args), _render(lambda p: _plotting().plot_trajectory(traj, p)))
    run.finish()
    return EXIT_OK


# --- gen -----------------------------------------------------------------------


def cmd_gen(args) -> int:
    run = _Run(args)
    if args.out is None:
        raise CliError("gen needs --out")
    difficulties = tuple(int(t) for t in parse_grid(args.difficulties, _number))
    step_sizes = tuple(int(t) for t in parse_grid(args.step_sizes, _number))
    fixed = {}
    if args.optimal_only:
        if args.max_difficulty is None or args.capability is None:
            raise CliError("--optimal-only needs -C and -M")
        for T in difficulties:
            s = _setting(T, args.max_difficulty, args.capability)
            fixed[T] = min(T, max(1, round(theory.optimal_step_size(s))))
    try:
        spec = arith.CorpusSpec(
            difficulties=difficulties, step_sizes=step_sizes, count=args.count, seed=args.seed,
            fixed_step_sizes=fixed, omit_token=args.omit_token,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    text_buf, json_buf = io.StringIO(), io.StringIO()
    n = arith.emit_corpus(spec, text_buf, json_buf)
    bad = _check_corpus(text_buf.getvalue(), json_buf.getvalue())
    if bad:
        raise CliError(f"{len(bad)} generated record(s) failed verification: {bad[:5]}")
    out = Path(args.out)
    run.write(out, text_buf.getvalue())
    run.write(out.with_suffix(".jsonl"), json_buf.getvalue())
    print(f"wrote {n} records to {out} (+ {out.with_suffix('.jsonl').name})")
    run.finish()
    return EXIT_OK


def _check_corpus(text: str, jsonl: str) -> list[int]:
    bad = []
    metas = [json.loads(line) for line in jsonl.splitlines() if line.strip()]
    for i, (rec, meta) in enumerate(zip(arith.split_records(text), metas)):
        try:
            tree, sol = arith.parse_record(rec, step_size=meta["t"])
        except OptimalCotError:
            bad.append(i)
            continue
        if not arith.verify_solution(tree, sol):
            bad.append(i)
    return bad


# --- vote ----------------------------------------------------------------------


def cmd_vote(args) -> int:
    run = _Run(args)
    try:
        with open(args.candidates, encoding="utf-8") as fh:
            pool = vote.read_candidates(fh)
    except OSError as exc:
        raise CliError(f"cannot read candidates: {exc}") from exc
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if not pool:
        raise CliError("candidate file is empty")
    missing = [c.id for c in pool if c.resolved_length is None]
    if missing:
        raise CliError(f"records without 'length' or 'text': {', '.join(missing)}")
    try:
        config = vote.VoteConfig(args.bin_width, args.groups, args.min_group_size)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    reports = []
    for qid, cands in vote.by_question(pool).items():
        answer, rep = vote.length_filtered_vote(cands, config)
        reports.append({"question_id": qid, **rep.to_json(), "majority_answer": vote.majority_vote(cands)})
    for r in reports:
        print(f"{r['question_id']}: length-filtered={r['final_answer']} majority={r['majority_answer']} "
              f"bins={r['selected_bins']}")
    if (args.format or "json") == "csv":
        rows = [
            {
                "question_id": r["question_id"],
                "final_answer": r["final_answer"],
                "majority_answer": r["majority_answer"],
                "selected_bins": " ".join(str(b) for b in r["selected_bins"]),
            }
            for r in reports
        ]
        text = to_csv(rows, ("question_id", "final_answer", "majority_answer", "selected_bins"))
    else:
        text = to_json(reports)
    if args.out is not None:
        _emit(run, text)
    run.finish()
    return EXIT_OK


# --- replay --------------------------------------------------------------------


def cmd_replay(args) -> int:
    manifest = RunManifest.load(args.manifest)
    if manifest.command not in COMMANDS:
        raise CliError(f"manifest names unknown command {manifest.command!r}")
    ns = argparse.Namespace(**manifest.parameters)
    ns.command = manifest.command
    ns.seed = manifest.seed
    return COMMANDS[manifest.command](ns)


COMMANDS = {
    "optimal": cmd_optimal,
    "sweep": cmd_sweep,
    "bandit": cmd_bandit,
    "gen": cmd_gen,
    "vote": cmd_vote,
}


# --- plumbing ------------------------------------------------------------------


def _plotting():
    try:
        from . import plotting
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise CliError("--plot needs matplotlib (pip install 'optimal-cot[plot]')") from exc
    return plotting


def _figure_path(args) -> Path:
    if args.out is None:
        raise CliError("--plot needs --out")
    return Path(f"{args.out}.png")


def _render(draw) -> bytes:
    buf = io.BytesIO()
    draw(buf)
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
    common.add_argument("--out", default=None, help="output path; a manifest is written next to it")
    common.add_argument("--format", choices=("csv", "json"), default=None, help="table format")

    def setting_args(p, required):
        p.add_argument("-T", "--difficulty", type=_number, required=required, help="total operators T")
        p.add_argument("-C", "--max-difficulty", type=_number, required=required, help="training cap C")
        p.add_argument("-M", "--capability", type=_number, required=required, help="operators per step M")

    parser = argparse.ArgumentParser(prog="optimal-cot", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("optimal", parents=[common], help="closed-form and brute-force optimal length")
    setting_args(p, required=True)
    p.add_argument("--n-max", type=int, default=None, help="brute-force range upper end (default 8T)")
    p.set_defaults(func=cmd_optimal)

    p = subs.add_parser("sweep", parents=[common], help="accuracy curves over a (T, C, M) grid")
    p.add_argument("-T", "--difficulty", required=True, help="T grid, e.g. 8:80:8 or 8,16,24")
    p.add_argument("-C", "--max-difficulty", required=True, help="C grid")
    p.add_argument("-M", "--capability", required=True, help="M grid")
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--n-max", type=int, default=None, help="default 8 * max(T)")
    p.add_argument("--envelope", action="store_true", help="best integer step size per setting instead")
    p.add_argument("--step-sizes", default="1:12", help="step sizes for --envelope (default 1:12)")
    p.add_argument("--plot", action="store_true", help="also render <out>.png")
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("bandit", parents=[common], help="policy-gradient bandit over chain lengths")
    p.add_argument("--accuracies", default=None, help="explicit arm success rates, e.g. 0.9,0.5")
    p.add_argument("--lengths", default=None, help="arm lengths, e.g. 5:14")
    setting_args(p, required=False)
    p.add_argument("--peak", type=float, default=0.9, help="success rate of the best theory arm (default 0.9)")
    p.add_argument("--raw", action="store_true", help="use unscaled theory accuracies")
    p.add_argument("--mode", choices=("exact", "reinforce"), default="exact")
    p.add_argument("--eta", type=float, default=None, help="step size (default 0.5 exact, 0.05 reinforce)")
    p.add_argument("--max-steps", type=int, default=50_000)
    p.add_argument("--tol", type=float, default=1e-2)
    p.add_argument("--episodes", type=int, default=20_000)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--stride", type=int, default=None, help="record every n-th step (default 1 / 100)")
    p.add_argument("--plot", action="store_true", help="also render <out>.png")
    p.set_defaults(func=cmd_bandit)

    p = subs.add_parser("gen", parents=[common], help="synthetic arithmetic CoT corpus")
    p.add_argument("--difficulties", default="12:80", help="T values (default 12:80)")
    p.add_argument("--step-sizes", default="1:12", help="t values (default 1:12)")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--optimal-only", action="store_true", help="use t = round(t*) for each T (needs -C, -M)")
    p.add_argument("-C", "--max-difficulty", type=_number, default=None)
    p.add_argument("-M", "--capability", type=_number, default=None)
    p.add_argument("--omit-token", action="store_true", help="write headers without the <t> token")
    p.set_defaults(func=cmd_gen)

    p = subs.add_parser("vote", parents=[common], help="length-filtered vote over candidate pools")
    p.add_argument("--candidates", required=True, help="JSON-lines candidate file")
    p.add_argument("-D", "--bin-width", type=int, default=2)
    p.add_argument("-K", "--groups", type=int, default=3)
    p.add_argument("--min-group-size", type=int, default=1)
    p.set_defaults(func=cmd_vote)

    p = subs.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (CliError, OptimalCotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
