"""``macvlc`` command line: capacities, regions, boundary curves, simulations, checks.

Human-facing numbers are in bits; JSON carries nats alongside.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from .channel import McChannel, load_channel, parse_channel_name
from .decoders import DecoderConfig, Rule
from .errors import MacVlcError
from .infomeasures import (
    ProductInput,
    WalkKind,
    chernoff_root,
    channel_summary,
    drift,
    info_triple,
    lambda_condition_check,
    max_increment,
)
from .regions import (
    RegionQuery,
    block_capacity_region,
    eq1_boundary,
    feedback_outer_region,
    fmt6,
    outer_region,
    rectangle_region,
    region_corners,
    region_to_csv,
    timeshare_rates,
)
from .schemes import SchemeSpec
from .simharness import (
    ExperimentConfig,
    concentration_check,
    entropy_slack_check,
    experiment_json,
    records_to_csv,
    run_experiment,
    run_trials,
    wald_check,
)

LN2 = math.log(2.0)


class CliError(Exception):
    pass


def _channel(text: str) -> McChannel:
    path = Path(text)
    if path.suffix == ".json" or path.exists():
        try:
            return load_channel(path)
        except json.JSONDecodeError as exc:
            raise CliError(f"{text}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        except OSError as exc:
            raise CliError(f"{text}: {exc.strerror}") from None
    return parse_channel_name(text)


def _pmf(text: str | None):
    if text is None:
        return None
    return [float(v) for v in text.split(",")]


def _input(ch: McChannel, p1: str | None, p2: str | None) -> ProductInput:
    uni = ProductInput.uniform(ch)
    return ProductInput(_pmf(p1) or uni.p1, _pmf(p2) or uni.p2)


def _seed(args) -> int:
    env = os.environ.get("MACVLC_SEED")
    seed = int(env) if env not in (None, "") else args.seed
    if not 0 <= seed < 2**64:
        raise CliError("seed must be a 64-bit unsigned integer")
    return seed


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _fmt_pmf(p) -> str:
    return "[" + ", ".join(fmt6(v) for v in p) + "]"


def cmd_capacity(args, out) -> None:
    ch = _channel(args.channel)
    summ = channel_summary(ch)
    inp = _input(ch, args.p1, args.p2)
    tri = info_triple(ch, inp)
    print(f"channel: {ch.name}", file=out)
    print(f"C1 = {fmt6(summ.c1 / LN2)} bits/use ({fmt6(summ.c1)} nats/use), "
          f"X2 fixed at letter {summ.c1_letter}, p(x1) = {_fmt_pmf(summ.c1_argmax.p1)}", file=out)
    print(f"C2 = {fmt6(summ.c2 / LN2)} bits/use ({fmt6(summ.c2)} nats/use), "
          f"X1 fixed at letter {summ.c2_letter}, p(x2) = {_fmt_pmf(summ.c2_argmax.p2)}", file=out)
    print(f"input p(x1) = {_fmt_pmf(inp.p1)}, p(x2) = {_fmt_pmf(inp.p2)}", file=out)
    for label, v in (("I(X1;Y|X2)", tri.i1), ("I(X2;Y|X1)", tri.i2), ("I(X1,X2;Y)", tri.i12),
                     ("I(X1;Y)", tri.marginal1), ("I(X2;Y)", tri.marginal2)):
        print(f"{label} = {fmt6(v / LN2)} bits/use ({fmt6(v)} nats/use)", file=out)


def cmd_region(args, out) -> None:
    ch = _channel(args.channel)
    if args.kind == "rmac":
        region = block_capacity_region(ch, args.grid, args.grid_large)
    elif args.kind == "rect":
        region = rectangle_region(channel_summary(ch))
    else:
        q = RegionQuery(args.r1, args.r2, args.s)
        if args.kind == "outer":
            region = outer_region(ch, q, args.grid, args.grid_large)
        else:
            region = feedback_outer_region(ch, q, grid=args.feedback_grid)
    out.write(region_to_csv(region))


def cmd_curve(args, out) -> None:
    ch = _channel(args.channel)
    summ = channel_summary(ch)
    corners = region_corners(ch, summ, args.grid, args.grid_large)
    curve = eq1_boundary(summ, corners, args.p_grid).curve
    out.write("p,R1_bits,R2_bits,lambda,R1_ts_bits,R2_ts_bits\n")
    for p, r1, r2 in curve:
        # equal log M / C ratios make the mixture weight coincide with p
        t1, t2 = timeshare_rates(summ, corners, p, summ.c1, summ.c2, args.eps)
        out.write(",".join(fmt6(v) for v in (p, r1 / LN2, r2 / LN2, p, t1 / LN2, t2 / LN2)) + "\n")


def _decoder(args) -> DecoderConfig:
    return DecoderConfig(args.epsilon, Rule(args.decoder), args.max_steps)


def _load_scheme(text: str) -> SchemeSpec:
    try:
        obj = json.loads(Path(text).read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{text}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise CliError(f"{text}: {exc.strerror}") from None
    return SchemeSpec.from_json(obj)


def cmd_simulate(args, out) -> None:
    ch = _channel(args.channel)
    cfg = ExperimentConfig(ch, _load_scheme(args.scheme), _decoder(args), args.trials, _seed(args), args.workers)
    summary, records = run_experiment(cfg, return_records=True)
    out.write(experiment_json(cfg, summary) + "\n")
    if args.records_csv:
        Path(args.records_csv).write_text(records_to_csv(records))


def _ratio_sizes(rho: float, m_base: int) -> tuple[int, int]:
    """``M2 = m_base`` and ``M1 = round(m_base ** rho)``; ``rho = inf`` means ``M2 = 1``."""
    if math.isinf(rho):
        return m_base, 1
    return max(int(round(m_base**rho)), 1), m_base


def cmd_sweep(args, out) -> None:
    ch = _channel(args.channel)
    try:
        ratios = [float(v) for v in args.m_ratio_grid.split(",")]
    except ValueError:
        raise CliError(f"bad ratio grid {args.m_ratio_grid!r}") from None
    if any(not r > 0 for r in ratios):
        raise CliError("ratios must be positive")
    dec = _decoder(args)
    seed = _seed(args)
    out.write("logM1_over_logM2,M1,M2,rate1_bits,rate2_bits,rate1_nats,rate2_nats,pe,en1,en2\n")
    for rho in ratios:
        m1, m2 = _ratio_sizes(rho, args.m_base)
        scheme = SchemeSpec("random", m1, m2, seed=seed)
        cfg = ExperimentConfig(ch, scheme, dec, args.trials, seed, args.workers)
        s = run_experiment(cfg)
        actual = math.log(m1) / math.log(m2) if m2 > 1 else math.inf
        cells = [actual, m1, m2, s.rate1_bits, s.rate2_bits, s.rate1_nats, s.rate2_nats, s.pe_hat,
                 s.en1.mean, s.en2.mean]
        out.write(",".join(_cell(v) for v in cells) + "\n")


def _cell(v) -> str:
    if v is None:
        return "0.000000"
    if isinstance(v, int):
        return str(v)
    if math.isinf(v):
        return "inf"
    return fmt6(v)


def _check_lines(args, ch: McChannel):
    inp = _input(ch, args.p1, args.p2)
    tri = info_triple(ch, inp)
    eps = args.epsilon
    if args.suite == "drift":
        # correct walks have drift equal to an information quantity, wrong walks negative drift
        expect = {
            WalkKind.JOINT_CORRECT: tri.i12,
            WalkKind.COND_CORRECT_GIVEN_X2: tri.i1,
            WalkKind.COND_CORRECT_GIVEN_X1: tri.i2,
            WalkKind.SINGLE_CORRECT_USER1: tri.marginal1,
            WalkKind.SINGLE_CORRECT_USER2: tri.marginal2,
        }
        for kind in WalkKind:
            d = drift(ch, inp, kind)
            ok = abs(d - expect[kind]) < 1e-9 if kind in expect else d <= 1e-12
            yield kind.value, ok, f"drift {fmt6(d)} nats/use"
        return
    if args.suite == "roots":
        for kind in WalkKind:
            if not kind.is_wrong:
                continue
            try:
                root = chernoff_root(ch, inp, kind)
            except MacVlcError as exc:
                yield kind.value, True, f"no finite root ({type(exc).__name__})"
                continue
            one = kind not in (WalkKind.JOINT_W1_WRONG, WalkKind.JOINT_W2_WRONG)
            ok = abs(root - 1.0) < 1e-9 if one else root > 0
            yield kind.value, ok, f"root {root:.10f}"
        c2_ok, c1_ok = lambda_condition_check(ch, inp)
        yield "partial_mismatch_conditions", True, f"user2-wrong {c2_ok}, user1-wrong {c1_ok}"
        return
    m = args.m
    scheme = SchemeSpec("random", m, m, seed=args.seed)
    rule = Rule.GENIE_COND_USER1
    thr = (1 + eps) * math.log(m)
    dec = DecoderConfig(eps, rule, None)
    if args.suite == "wald":
        cfg = ExperimentConfig(ch, scheme, dec, args.trials, _seed(args), args.workers)
        rep = wald_check(run_trials(cfg), tri.i1, thr,
                         max_increment(ch, inp, WalkKind.COND_CORRECT_GIVEN_X2))
        yield "wald", rep["passed"], (f"gap {fmt6(rep['gap'])} nats, residual {fmt6(rep['residual'])} "
                                      f"+- {fmt6(rep['residual_stderr'])}")
        return
    if args.suite == "concentration":
        tails = []
        for mm in (m, m**4):
            cfg = ExperimentConfig(ch, SchemeSpec("random", mm, 1, seed=args.seed), dec, args.trials,
                                   _seed(args), args.workers)
            tails.append(concentration_check(run_trials(cfg), args.eps_star))
        yield "concentration", tails[1] < tails[0], f"tail x1 {fmt6(tails[0])}, x4 {fmt6(tails[1])}"
        return
    if args.suite == "slack":
        cfg = ExperimentConfig(ch, scheme, dec, max(args.trials, 1000), _seed(args), args.workers)
        rep = entropy_slack_check(run_trials(cfg))
        yield "slack", rep["passed"], f"H(N) {fmt6(rep['entropy'])} nats, bound {fmt6(rep['bound'])} nats"
        return
    raise CliError(f"unknown suite {args.suite!r}")


def cmd_check(args, out) -> bool:
    ch = _channel(args.channel)
    ok_all = True
    for name, ok, detail in _check_lines(args, ch):
        ok_all &= bool(ok)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=out)
    return ok_all


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="macvlc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def channel_arg(sp):
        sp.add_argument("channel", help="channel JSON file or builtin name (adder, multiplier, noisy_adder:0.1, ...)")

    def grid_args(sp):
        sp.add_argument("--grid", type=int, default=101, help="simplex grid resolution for binary alphabets")
        sp.add_argument("--grid-large", type=int, default=21, help="grid resolution for larger alphabets")

    def sim_args(sp, decoder_default="combined"):
        sp.add_argument("--decoder", choices=[r.value for r in Rule], default=decoder_default)
        sp.add_argument("--epsilon", type=_positive_float, default=0.2, help="threshold inflation")
        sp.add_argument("--max-steps", type=_positive_int, default=None)
        sp.add_argument("--trials", type=_positive_int, default=1000)
        sp.add_argument("--seed", type=int, default=0, help="master seed (MACVLC_SEED overrides)")
        sp.add_argument("--workers", type=_positive_int, default=1)

    sp = sub.add_parser("capacity", help="C1, C2 and the information triple")
    channel_arg(sp)
    sp.add_argument("--p1", help="comma-separated input pmf of user 1 (default uniform)")
    sp.add_argument("--p2", help="comma-separated input pmf of user 2 (default uniform)")

    sp = sub.add_parser("region", help="rate region vertices as CSV (bits/use)")
    channel_arg(sp)
    sp.add_argument("--kind", choices=["rmac", "outer", "feedback", "rect"], default="rmac")
    sp.add_argument("--r1", type=float, default=1.0)
    sp.add_argument("--r2", type=float, default=1.0)
    sp.add_argument("--s", type=float, default=None)
    sp.add_argument("--feedback-grid", type=int, default=21)
    grid_args(sp)

    sp = sub.add_parser("curve", help="boundary of the equal-ratio region and mixture rates as CSV")
    channel_arg(sp)
    sp.add_argument("--p-grid", type=int, default=101)
    sp.add_argument("--eps", type=float, default=0.01, help="capacity backoff of the concatenated codes (nats)")
    grid_args(sp)

    sp = sub.add_parser("simulate", help="Monte Carlo run of a scheme file, JSON summary")
    channel_arg(sp)
    sp.add_argument("scheme", help="scheme JSON file")
    sp.add_argument("--records-csv", help="also write per-trial records to this CSV file")
    sim_args(sp)

    sp = sub.add_parser("sweep", help="rates over log M1 / log M2 ratios as CSV")
    channel_arg(sp)
    sp.add_argument("--m-ratio-grid", default="1", help="comma-separated log M1 / log M2 values; inf allowed")
    sp.add_argument("--m-base", type=_positive_int, default=16, help="M2 (M1 = M2 ** ratio)")
    sim_args(sp)

    sp = sub.add_parser("check", help="diagnostic suites")
    channel_arg(sp)
    sp.add_argument("--suite", required=True, choices=["drift", "roots", "wald", "concentration", "slack"])
    sp.add_argument("--p1")
    sp.add_argument("--p2")
    sp.add_argument("--m", type=_positive_int, default=8, help="message count for simulated suites")
    sp.add_argument("--eps-star", type=_positive_float, default=0.2)
    sp.add_argument("--epsilon", type=_positive_float, default=0.2)
    sp.add_argument("--trials", type=_positive_int, default=2000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=_positive_int, default=1)
    return p


_COMMANDS = {
    "capacity": cmd_capacity,
    "region": cmd_region,
    "curve": cmd_curve,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "check": cmd_check,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        result = _COMMANDS[args.command](args, out)
    except (CliError, MacVlcError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"macvlc {args.command}: error: {msg}", file=sys.stderr)
        return 2
    return 1 if result is False else 0


if __name__ == "__main__":
    sys.exit(main())
