"""Command-line entry point: generation, ordering, training, evaluation,
partitioning, and matrix rendering, all reproducible from a seed."""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import baselines, downstream, graph, locality, scorer, tuner

CONFIG_KEYS = {
    "w": int,
    "seed": int,
    "hidden": int,
    "repr_dim": int,
    "don_learning_rate": float,
    "batch_size": int,
    "global_steps": int,
    "eval_every": int,
    "policy_learning_rate": float,
    "policy_hidden": int,
    "trajectory_len": int,
    "rl_steps": int,
    "gamma": float,
    "tuning_scale": float,
    "eval_size": int,
    "don_steps_per_t": int,
    "warmup_steps": int,
}


def read_config(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = CONFIG_KEYS[key](val)
    return values


def _setting(args, config: dict, name: str, fallback):
    flag = getattr(args, name, None)
    if flag is not None:
        return flag
    if name in config:
        return config[name]
    return fallback


def _load_graph(path: str) -> graph.Graph:
    result = graph.load_edge_list(Path(path).read_text().splitlines())
    if result.self_loops_dropped or result.duplicates_dropped:
        print(f"dropped {result.self_loops_dropped} self-loops, "
              f"{result.duplicates_dropped} duplicate arcs", file=sys.stderr)
    return result.graph


def _load_source(path: str, use_matrix: bool):
    if use_matrix:
        return locality.load_similarity_matrix(Path(path).read_text())
    return _load_graph(path)


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def cmd_generate(args, config) -> int:
    seed = _setting(args, config, "seed", 0)
    if args.kind == "er":
        if args.p is None:
            raise ValueError("--p is required for --kind er")
        g = graph.gen_erdos_renyi(args.n, args.p, seed)
    else:
        if args.gamma_exp is None:
            raise ValueError("--gamma-exp is required for --kind powerlaw")
        g = graph.gen_power_law(args.n, args.gamma_exp, seed)
    Path(args.out).write_text(graph.format_edge_list(g))
    print(f"n={g.n} arcs={g.arc_count}")
    return 0


def _order_with_merge(g: graph.Graph, w: int, seed: int, algo, **kw):
    merged, groups = merge = graph.merge_degree_one(g)
    perm_merged = algo(merged, w, **kw)
    return graph.expand_permutation(perm_merged, groups, seed), merge


def cmd_order(args, config) -> int:
    w = _setting(args, config, "w", 5)
    seed = _setting(args, config, "seed", 0)
    source = _load_source(args.input, args.matrix)
    if args.matrix and args.algo not in ("go", "brute"):
        raise ValueError("matrix input supports only --algo go or brute")
    if args.merge and args.matrix:
        raise ValueError("--merge needs a graph input")

    work = source
    groups = None
    if args.merge:
        work, groups = graph.merge_degree_one(source)
        kept = work.n / source.n if source.n else 1.0
        print(f"merged {source.n} -> {work.n} vertices "
              f"({(1 - kept) * 100:.1f}% removed)", file=sys.stderr)

    if args.algo == "go":
        perm = baselines.greedy_order(work, w)
    elif args.algo == "degree":
        perm = baselines.degree_order(work)
    elif args.algo == "brute":
        perm, _ = baselines.brute_force_order(work, w)
    else:  # don
        if not args.model:
            raise ValueError("--model is required for --algo don")
        model = scorer.load_scorer(args.model)
        perm = scorer.model_order(work, model, w, start=args.start)

    if groups is not None:
        perm = graph.expand_permutation(perm, groups, seed)
    score = locality.locality_score(source, perm, w)
    if args.out:
        Path(args.out).write_text(locality.format_permutation(perm))
    print(f"F={score}")
    return 0


def cmd_eval(args, config) -> int:
    w = _setting(args, config, "w", 5)
    source = _load_source(args.input, args.matrix)
    perm = locality.load_permutation(Path(args.perm).read_text())
    print(f"F={locality.locality_score(source, perm, w)}")
    return 0


def _scorer_config(args, config) -> scorer.ScorerConfig:
    hidden = _setting(args, config, "hidden", 64)
    return scorer.ScorerConfig(
        hidden_phi=hidden,
        repr_dim=_setting(args, config, "repr_dim", hidden),
        hidden_rho=hidden,
        learning_rate=_setting(args, config, "don_learning_rate", 1e-3),
        batch_size=_setting(args, config, "batch_size", 64),
    )


def _rl_config(args, config) -> tuner.RlConfig:
    return tuner.RlConfig(
        trajectory_len=_setting(args, config, "trajectory_len", 5),
        rl_steps=_setting(args, config, "rl_steps", 50),
        gamma=_setting(args, config, "gamma", 0.95),
        tuning_scale=_setting(args, config, "tuning_scale", 0.15),
        policy_lr=_setting(args, config, "policy_learning_rate", 1e-3),
        policy_hidden=_setting(args, config, "policy_hidden", 64),
        eval_size=_setting(args, config, "eval_size", 2000),
        global_steps=_setting(args, config, "global_steps", 5000),
        don_steps_per_t=_setting(args, config, "don_steps_per_t", None),
        warmup_steps=_setting(args, config, "warmup_steps", 50),
    )


def _write_loss_csv(path: str, losses, rmse_points, wall_times, with_wall: bool):
    rmse_at = dict(rmse_points)
    lines = ["step,loss,rmse" + (",wall_time" if with_wall else "")]
    for i, (step, loss) in enumerate(losses):
        rm = _fmt(rmse_at[step]) if step in rmse_at else ""
        row = f"{step},{_fmt(loss)},{rm}"
        if with_wall:
            row += f",{_fmt(wall_times[i]) if i < len(wall_times) else ''}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_train(args, config) -> int:
    w = _setting(args, config, "w", 5)
    seed = _setting(args, config, "seed", 0)
    g = _load_graph(args.input)
    if args.merge:
        g, _ = graph.merge_degree_one(g)
        print(f"training on merged graph: n={g.n}", file=sys.stderr)
    scfg = _scorer_config(args, config)
    metrics = args.metrics or (args.out + ".metrics.csv")

    if args.algo == "don":
        steps = _setting(args, config, "global_steps", 5000)
        eval_size = min(_setting(args, config, "eval_size", 2000), 5000)
        eval_every = _setting(args, config, "eval_every", 50)
        eval_set = tuner.build_eval_set(g, w, eval_size, seed + 1)
        model, log = scorer.train_scorer(g, w, steps, scfg, seed,
                                         eval_set=eval_set, eval_every=eval_every)
        scorer.save_scorer(model, args.out)
        _write_loss_csv(metrics, log.losses, log.rmse_points, log.wall_times,
                        args.wall_time)
    else:
        rcfg = _rl_config(args, config)
        model, policy, history = tuner.train_scorer_rl(g, w, scfg, rcfg, seed)
        scorer.save_scorer(model, args.out)
        tuner.save_policy(policy, args.out + ".policy.npz")
        lines = ["rl_step,t,reward,baseline,mean_action_prob"]
        for row in history.rl_rows:
            lines.append(",".join([
                str(row["rl_step"]), str(row["t"]), _fmt(row["reward"]),
                _fmt(row["baseline"]), _fmt(row["mean_action_prob"]),
            ]))
        Path(metrics).write_text("\n".join(lines) + "\n")
        _write_loss_csv(metrics + ".don.csv", history.don_losses, [], [], False)
    print(f"checkpoint written to {args.out}")
    return 0


def cmd_compress_cost(args, config) -> int:
    g = _load_graph(args.input)
    perm = (locality.load_permutation(Path(args.perm).read_text())
            if args.perm else np.arange(g.n))
    widths = [int(tok) for tok in args.b.split(",")]
    lines = ["b,cost_nz,cost_r"]
    for b in widths:
        nz, ratio = downstream.compression_cost(g, perm, b)
        lines.append(f"{b},{nz},{_fmt(ratio)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return 0


def cmd_partition(args, config) -> int:
    seed = _setting(args, config, "seed", 0)
    g = _load_graph(args.input)
    if args.method == "order":
        if not args.perm:
            raise ValueError("--perm is required for --method order")
        perm = locality.load_permutation(Path(args.perm).read_text())
        part = downstream.partition_from_order(g, perm, args.k)
    elif args.method == "random":
        part = downstream.random_partition(g, args.k, seed)
    else:
        part = downstream.greedy_partition(g, args.k)
    if args.out:
        Path(args.out).write_text(downstream.format_partition_csv(part))
    print(f"RF={_fmt(downstream.replication_factor(g, part))}")
    return 0


def render_pgm(g: graph.Graph, order, fmt: str = "p2",
               block: int | None = None) -> bytes:
    """Permuted adjacency as a portable graymap; set cells are black.

    With ``block`` the image is the block-nonempty map, one pixel per
    ceil(n/b)-sized block row/column.
    """
    perm = locality.check_permutation(order, g.n)
    pos = np.empty(g.n, dtype=np.int64)
    pos[perm] = np.arange(g.n)
    if block:
        size = math.ceil(g.n / block)
        img = np.full((size, size), 255, dtype=np.uint8)
        if g.arc_count:
            img[pos[g.arcs[:, 0]] // block, pos[g.arcs[:, 1]] // block] = 0
    else:
        img = np.full((g.n, g.n), 255, dtype=np.uint8)
        if g.arc_count:
            img[pos[g.arcs[:, 0]], pos[g.arcs[:, 1]]] = 0
    h, wdt = img.shape
    if fmt == "p5":
        return f"P5\n{wdt} {h}\n255\n".encode() + img.tobytes()
    rows = "\n".join(" ".join(str(px) for px in row) for row in img)
    return f"P2\n{wdt} {h}\n255\n{rows}\n".encode()


def cmd_render_matrix(args, config) -> int:
    g = _load_graph(args.input)
    perm = (locality.load_permutation(Path(args.perm).read_text())
            if args.perm else np.arange(g.n))
    data = render_pgm(g, perm, args.format, args.block)
    Path(args.out).write_bytes(data)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="master seed; all randomness derives from it")
    common.add_argument("--w", type=int, default=None, help="window size")
    common.add_argument("--config", default=None, help="key = value config file")

    parser = argparse.ArgumentParser(
        prog="graphorder",
        description="Vertex orderings that maximize windowed locality, with "
                    "downstream compression and partitioning evaluators.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic graph")
    p.add_argument("--kind", choices=["er", "powerlaw"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, default=None, help="edge probability (er)")
    p.add_argument("--gamma-exp", type=float, default=None,
                   help="power-law exponent (powerlaw)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("order", parents=[common], help="order a graph's vertices")
    p.add_argument("input", help="edge-list file (or matrix fixture with --matrix)")
    p.add_argument("--algo", choices=["go", "degree", "don", "brute"], default="go")
    p.add_argument("--model", default=None, help="scorer checkpoint for --algo don")
    p.add_argument("--start", type=int, default=None,
                   help="first vertex for --algo don (default: highest degree)")
    p.add_argument("--merge", action="store_true",
                   help="merge degree-1 fans before ordering, expand after")
    p.add_argument("--matrix", action="store_true",
                   help="input is a similarity-matrix fixture")
    p.add_argument("--out", default=None, help="permutation file to write")
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("eval", parents=[common],
                       help="locality score of a permutation file")
    p.add_argument("input")
    p.add_argument("--perm", required=True)
    p.add_argument("--matrix", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train", parents=[common], help="train the set scorer")
    p.add_argument("input")
    p.add_argument("--algo", choices=["don", "don-rl"], default="don-rl")
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.add_argument("--metrics", default=None, help="metrics CSV path")
    p.add_argument("--merge", action="store_true")
    p.add_argument("--wall-time", action="store_true",
                   help="add a wall_time column (breaks byte-reproducibility)")
    for flag, typ in [("--hidden", int), ("--repr-dim", int),
                      ("--don-learning-rate", float), ("--batch-size", int),
                      ("--global-steps", int), ("--eval-every", int),
                      ("--policy-learning-rate", float), ("--policy-hidden", int),
                      ("--trajectory-len", int), ("--rl-steps", int),
                      ("--gamma", float), ("--tuning-scale", float),
                      ("--eval-size", int), ("--don-steps-per-t", int),
                      ("--warmup-steps", int)]:
        p.add_argument(flag, type=typ, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compress-cost", parents=[common],
                       help="nonempty-block cost of the reordered adjacency")
    p.add_argument("input")
    p.add_argument("--perm", default=None, help="permutation file (default identity)")
    p.add_argument("--b", default="8,16,32", help="comma-separated block widths")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_compress_cost)

    p = sub.add_parser("partition", parents=[common], help="partition the edge set")
    p.add_argument("input")
    p.add_argument("--method", choices=["order", "random", "greedy"], required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--perm", default=None)
    p.add_argument("--out", default=None, help="CSV of u,v,part rows")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("render-matrix", parents=[common],
                       help="permuted adjacency as a PGM bitmap")
    p.add_argument("input")
    p.add_argument("--perm", default=None)
    p.add_argument("--format", choices=["p2", "p5"], default="p2")
    p.add_argument("--block", type=int, default=None,
                   help="downsample to one pixel per b-wide block")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render_matrix)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = read_config(args.config) if args.config else {}
    try:
        return args.func(args, config)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
