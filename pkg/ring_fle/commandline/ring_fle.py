#!/usr/bin/env python
import argparse
import functools
import json
import logging
import sys
import tempfile
from fractions import Fraction

from ._utils import ListProtocolsAction, ShowVersionAction
from .._harness import ATTACKS, PLACEMENTS, AttackSpec, load_config
from .._ring import PROTOCOLS, SCHEDULES
from .._utils import ConfigError, GraphError, PreconditionError, ProtocolTreeError


print = functools.partial(print, file=sys.stderr)

# Used when neither a flag nor the --config file gives a value.
DEFAULTS = {
    "n": 16,
    "protocol": None,
    "origin": 0,
    "schedule": "rr",
    "l": None,
    "m": None,
    "fseed": 0,
    "attack": None,
    "target": 0,
    "k": None,
    "positions": None,
    "placement": None,
    "p": None,
    "c": 3,
    "trials": 1000,
    "seed": 0,
    "oracle": False,
    "workers": 1,
    "progress": False,
    "out": None,
    "format": "json",
    "strict": False,
    "grid": None,
    "eps": 0,
    "p0": None,
    "coalition_bit": None,
}
TREE_ACTIONS = ("decompose", "assure", "coalition", "parity")
REDUCTIONS = ("coin-from-fle", "fle-from-coins", "coin-from-consensus")


def _ring_group(parser):
    group = parser.add_argument_group(description="Which ring?")
    group.add_argument("--n", type=int, help="Ring size. 16 by default.")
    group.add_argument(
        "--protocol",
        choices=PROTOCOLS,
        type=str.lower,  # Makes choices case-insensitive
        help="Protocol run by honest processors. By default, the one the attack targets, else alead.",
    )
    group.add_argument("--origin", type=int, help="Id of the A-LEAD origin. 0 by default.")
    group.add_argument(
        "--schedule",
        choices=SCHEDULES,
        type=str.lower,
        help="Message delivery order: rotating (rr, default) or seeded random.",
    )
    group.add_argument(
        "--l", type=int, help="PhaseAsyncLead: rounds left out of f. Default ceil(10 sqrt(n)), at most n - 1."
    )
    group.add_argument("--m", type=int, help="PhaseAsyncLead: validation alphabet size. Default 2 n^2.")
    group.add_argument("--fseed", type=int, help="PhaseAsyncLead: key selecting f. 0 by default.")


def _attack_group(parser):
    group = parser.add_argument_group(description="Which coalition attacks?")
    group.add_argument(
        "--attack",
        choices=ATTACKS,
        type=str.lower,
        help="Attack run by the coalition.",
    )
    group.add_argument("--target", type=int, help="Leader the coalition forces. 0 by default.")
    group.add_argument("--k", type=int, help="Coalition size, for equal and cubic placements.")
    group.add_argument("--positions", type=str, help="Explicit adversary ids, like 0,3,6")
    group.add_argument(
        "--placement",
        choices=PLACEMENTS,
        type=str.lower,
        help="How adversaries are placed. The default depends on the attack.",
    )
    group.add_argument(
        "--p", type=float, help="Adversary probability of the bernoulli placement. Default sqrt(8 ln n / n)."
    )
    group.add_argument("--c", type=int, help="Repeat length C of the randomized attack. 3 by default.")


def _trials_group(parser):
    group = parser.add_argument_group(description="How many trials?")
    group.add_argument("--trials", type=int, help="Number of trials. 1000 by default.")
    group.add_argument("--seed", type=int, help="Master seed. Trial i draws from (seed, i). 0 by default.")
    group.add_argument(
        "--oracle",
        action="store_true",
        default=None,
        help="Cross-check every trial against the validity oracle (basic and alead only).",
    )
    group.add_argument("--workers", type=int, help="Number of worker processes. 1 by default.")


def _other_group(parser):
    # By making a group "other" we can place the less-frequently-used options
    # at the bottom.
    group = parser.add_argument_group()
    group.add_argument("--out", type=str, help="Also write the report to this path.")
    group.add_argument(
        "--format",
        choices=["json", "csv"],
        type=str.lower,  # Makes choices case-insensitive
        help="Format of --out. Choose json (default) for the full report or csv for the histogram.",
    )
    group.add_argument(
        "--config",
        type=str,
        help="YAML file of option values, keyed by long option name. Flags given here take precedence.",
    )
    group.add_argument("--progress", action="store_true", default=None, help="Show a progress bar.")
    group.add_argument(
        "--strict",
        action="store_true",
        default=None,
        help=(
            "Exit when error occurs. Otherwise failures are logged to "
            "stderr as they happen "
            "and again all together at the end."
        ),
    )


def _resolve(args):
    "Merge built-in defaults, the --config file and the flags, in that order."
    options = dict(DEFAULTS)
    if getattr(args, "config", None) is not None:
        from_file = load_config(args.config)
        unknown = set(from_file) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"Unknown keys {sorted(unknown)} in {args.config}.")
        for name in ("protocol", "schedule", "attack", "placement", "format"):
            if isinstance(from_file.get(name), str):
                from_file[name] = from_file[name].lower()
        options.update(from_file)
    for key, value in vars(args).items():
        if value is not None:
            options[key] = value
    return argparse.Namespace(**options)


def _ring_config(options):
    from .._protocols import PhaseParams
    from .._ring import RingConfig

    protocol = options.protocol
    if protocol is None:
        protocol = AttackSpec.protocol_of(options.attack) if options.attack else "alead"
    params = None
    if protocol in ("phase", "phase-sum"):
        default = PhaseParams.default(options.n, options.fseed)
        params = PhaseParams(
            l=default.l if options.l is None else options.l,
            m=default.m if options.m is None else options.m,
            fseed=options.fseed,
        )
    elif options.l is not None or options.m is not None:
        logging.getLogger("ring_fle").warning("--l and --m apply to the phase protocols only; ignoring them.")
    return RingConfig(
        n=options.n,
        origin=options.origin,
        protocol=protocol,
        params=params,
        schedule=options.schedule,
    )


def _attack_spec(options):
    if options.attack is None:
        return None
    return AttackSpec(
        name=options.attack,
        target=options.target,
        k=options.k,
        positions=options.positions,
        placement=options.placement,
        p=options.p,
        c=options.c,
    )


def _parse_grid(items):
    import yaml

    grid = {}
    for item in items or ():
        name, sep, values = item.partition("=")
        if not sep or not values:
            raise ConfigError(f"Could not parse --grid {item!r}. Expected e.g. n=8,16,32")
        grid[name.strip().replace("-", "_")] = [yaml.safe_load(v) for v in values.split(",")]
    if not grid:
        raise ConfigError("Give at least one --grid NAME=VALUES.")
    return grid


def _write(options, write_json, write_csv=None):
    if options.out is None:
        return
    with open(options.out, "w", newline="") as file:
        if options.format == "csv" and write_csv is not None:
            write_csv(file)
        else:
            write_json(file)


def _trials(options, attack):
    from .._harness import run_trials

    config = _ring_config(options)
    report = run_trials(
        config,
        attack,
        options.trials,
        options.seed,
        oracle=options.oracle,
        workers=options.workers,
        progress=options.progress,
        strict=options.strict,
    )
    sys.stdout.write(report.format_table() + "\n")
    _write(options, report.to_json, report.write_csv)
    return report.errors


def _sweep(options):
    import csv

    from .._harness import sweep

    grid = _parse_grid(options.grid)
    results = list(
        sweep(
            _ring_config(options),
            _attack_spec(options),
            grid,
            options.trials,
            options.seed,
            oracle=options.oracle,
            workers=options.workers,
            progress=options.progress,
            strict=options.strict,
        )
    )
    for point, report in results:
        label = ", ".join(f"{name}={value}" for name, value in point.items())
        sys.stdout.write(f"== {label} ==\n{report.format_table()}\n")

    def write_json(file):
        doc = [{"point": point, "report": report.to_dict()} for point, report in results]
        file.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")

    def write_csv(file):
        columns = ["epsilon_hat", "tv_distance", "chi2_pvalue", "target_rate", "trials"]
        writer = csv.DictWriter(file, fieldnames=sorted(grid) + columns)
        writer.writeheader()
        for point, report in results:
            doc = report.to_dict()
            writer.writerow({**point, **{column: doc[column] for column in columns}})

    _write(options, write_json, write_csv)
    return sum(report.errors for _, report in results)


def _tree(args):
    from .. import _treesim as treesim

    if args.action in ("decompose", "parity"):
        graph = treesim.load_graph(args.path)
        if args.action == "parity":
            return treesim.protocol_to_dict(treesim.parity_protocol(graph))
        simulation = treesim.decompose_half(graph)
        return {
            "k": simulation.k,
            "tree": treesim.graph_to_dict(simulation.tree),
            "fibers": [[v, members] for v, members in sorted(simulation.fibers().items())],
        }
    protocol = treesim.load_protocol(args.path, max_depth=args.max_depth)
    if args.action == "coalition":
        graph = treesim.load_graph(args.graph) if args.graph else None
        found = treesim.assuring_coalition(protocol, graph)
        return None if found is None else found.to_dict()
    if len(protocol.parties) == 2:
        assured = treesim.assure_search_two_party(protocol)
        return [
            {"party": party, "bit": bit, "witness": treesim.witness_to_list(witness)}
            for (party, bit), witness in sorted(assured.items(), key=repr)
        ]
    found = treesim.tree_assure_search(protocol)
    return None if found is None else found.to_dict()


def _exact(value):
    return str(value) if isinstance(value, Fraction) else value


def _distribution(dist):
    return {str(outcome): _exact(p) for outcome, p in dist.support.items()}


def _reduce(args, options):
    from .. import _reductions as reductions

    eps = Fraction(str(options.eps))
    n = options.n
    if args.reduction == "coin-from-fle":
        if options.trials_given:
            import numpy as np

            election = reductions.ElectionRunner(_ring_config(options), _attack_spec(options))
            runner = reductions.coin_from_fle(election)
            rng = np.random.default_rng(options.seed)
            outcomes = [runner(rng) for _ in range(options.trials)]
            histogram = [outcomes.count(0), outcomes.count(1)]
            coin = reductions.OutcomeDistribution.from_histogram(
                histogram, 2, fails=outcomes.count(reductions.FAIL)
            )
            return {"reduction": args.reduction, "n": n, "trials": options.trials, "coin": _distribution(coin)}
        fle = reductions.biased_fle(n, eps)
        coin = reductions.coin_from_fle(fle)
        return {
            "reduction": args.reduction,
            "n": n,
            "fle_bias": _exact(fle.bias()),
            "coin": _distribution(coin),
            "coin_bias": _exact(coin.bias()),
            "bound": _exact(reductions.fle_coin_bias_bound(n, eps)),
        }
    if args.reduction == "fle-from-coins":
        p0 = Fraction(str(options.p0)) if options.p0 is not None else Fraction(1, 2) + eps
        coin = reductions.OutcomeDistribution({0: p0, 1: 1 - p0}, 2)
        fle = reductions.fle_from_coins(coin, n)
        return {
            "reduction": args.reduction,
            "n": n,
            "coin_bias": _exact(coin.bias()),
            "fle": _distribution(fle),
            "fle_bias": _exact(fle.bias()),
            "bound": _exact(reductions.coins_leader_bound(n, coin.bias())),
        }
    k = 1 if options.k is None else options.k
    consensus = reductions.biased_bit_consensus(eps)
    coin = reductions.coin_from_bit_consensus(consensus, n, k, options.coalition_bit)
    return {
        "reduction": args.reduction,
        "n": n,
        "k": k,
        "coin": _distribution(coin),
        "coin_bias": _exact(coin.bias()),
        "bound": _exact(reductions.bit_consensus_coin_bound(eps, n, k)),
    }


def main():
    with tempfile.NamedTemporaryFile("w", delete=False) as file:
        error_logfile_name = file.name
    error_handler = logging.FileHandler(error_logfile_name)
    logging.getLogger("ring_fle").addHandler(error_handler)
    parser = argparse.ArgumentParser(
        description="Simulate fair leader election on asynchronous rings, and attack it.",
        formatter_class=argparse.RawTextHelpFormatter,
        epilog="""
*~ Examples ~*

List the protocols and the attacks on each of them, and exit.

$ ring-fle --list-protocols
...

Elect honestly on a ring of 16 and check the histogram against uniform.

$ ring-fle run --n 16 --trials 100000

Force leader 11 with the cubic attack and check every run with the oracle.

$ ring-fle attack --attack cubic --k 3 --n 15 --target 11 --oracle

Attack PhaseAsyncLead with 9 equally spaced adversaries.

$ ring-fle attack --attack phase-rush --n 36 --k 9 --l 4 --trials 200

Sweep the target of the naive attack and write a CSV summary.

$ ring-fle sweep --attack naive --positions 0,3,6 --n 9 --grid target=0,4,8 --out naive.csv --format csv

Decompose a network onto a tree, or find a coalition that assures a coin.

$ ring-fle tree decompose graph.json
$ ring-fle tree coalition protocol.json

Compute the coin built from an election of bias 0.01, exactly.

$ ring-fle reduce coin-from-fle --n 8 --eps 0.01
""",
    )
    parser.register("action", "list_protocols", ListProtocolsAction)
    parser.register("action", "show_version", ShowVersionAction)
    parser.add_argument(
        "--list-protocols",
        action="list_protocols",
        default=argparse.SUPPRESS,
        help="List allowed values for --protocol and --attack and exit.",
    )
    parser.add_argument(
        "-V",
        "--version",
        action="show_version",
        default=argparse.SUPPRESS,
        help="Show ring_fle version and exit.",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True

    run_parser = subparsers.add_parser("run", help="Honest elections.")
    _ring_group(run_parser)
    _trials_group(run_parser)
    _other_group(run_parser)

    attack_parser = subparsers.add_parser("attack", help="Elections against a coalition.")
    _ring_group(attack_parser)
    _attack_group(attack_parser)
    _trials_group(attack_parser)
    _other_group(attack_parser)

    sweep_parser = subparsers.add_parser("sweep", help="Trials over a grid of parameters.")
    sweep_parser.add_argument(
        "--grid",
        action="append",
        help="Parameter and the values to try, like n=8,16,32. Repeat for a product.",
    )
    _ring_group(sweep_parser)
    _attack_group(sweep_parser)
    _trials_group(sweep_parser)
    _other_group(sweep_parser)

    tree_parser = subparsers.add_parser("tree", help="Coin tossing on tree networks.")
    tree_parser.add_argument("action", choices=TREE_ACTIONS, type=str.lower, help="What to compute.")
    tree_parser.add_argument("path", type=str, help="Graph document (decompose, parity) or protocol document.")
    tree_parser.add_argument(
        "--graph", type=str, help="coalition: network to decompose, if not the protocol's own."
    )
    tree_parser.add_argument("--max-depth", type=int, help="Refuse protocols deeper than this.")
    tree_parser.add_argument("--out", type=str, help="Also write the result to this path.")

    reduce_parser = subparsers.add_parser("reduce", help="Exact reductions between FLE, coin toss and consensus.")
    reduce_parser.add_argument("reduction", choices=REDUCTIONS, type=str.lower, help="Which reduction.")
    reduce_parser.add_argument(
        "--eps", type=str, help="Bias of the input primitive, like 0.01 or 1/100. 0 by default."
    )
    reduce_parser.add_argument("--p0", type=str, help="fle-from-coins: probability of coin 0. Default 1/2 + eps.")
    reduce_parser.add_argument(
        "--coalition-bit", type=int, choices=[0, 1], help="coin-from-consensus: bit the first k processors input."
    )
    _ring_group(reduce_parser)
    _attack_group(reduce_parser)
    reduce_parser.add_argument(
        "--trials",
        type=int,
        help="coin-from-fle: sample the coin from this many simulated elections instead of computing it exactly.",
    )
    reduce_parser.add_argument("--seed", type=int, help="Seed of the sampled elections. 0 by default.")
    reduce_parser.add_argument("--out", type=str, help="Also write the result to this path.")
    args = parser.parse_args()
    try:
        if args.command in ("run", "attack", "sweep"):
            options = _resolve(args)
            if args.command == "sweep":
                failed = _sweep(options)
            else:
                attack = _attack_spec(options) if args.command == "attack" else None
                if args.command == "attack" and attack is None:
                    parser.error("The attack command needs --attack.")
                failed = _trials(options, attack)
            if failed:
                print(f"{failed} trials failed to run.")
                print(f"See {error_logfile_name} for error logs with more information.")
                sys.exit(1)
            return
        if args.command == "tree":
            result = _tree(args)
        else:
            options = _resolve(args)
            options.trials_given = args.trials is not None
            result = _reduce(args, options)
    except (ConfigError, PreconditionError, GraphError, ProtocolTreeError) as err:
        parser.error(str(err))
    text = json.dumps(result, sort_keys=True, indent=2)
    sys.stdout.write(text + "\n")
    if args.out is not None:
        with open(args.out, "w") as file:
            file.write(text + "\n")


if __name__ == "__main__":
    main()
