"""Command-line entry point.

Every subcommand writes its artifacts into ``--output`` together with
``manifest.txt``, a flat ``key = value`` file holding the resolved run
configuration.  Passing that file back through ``--config`` repeats the run.

Exit codes: 0 ok, 1 usage or configuration error, 2 data error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from ._atomic import write_text
from .data import XMCParseError, l2_normalize_rows, load_xmc
from .embed import pifa_embeddings
from .evaluation import (COVERAGE_MODES, DEFAULT_KS, DEFAULT_LAMBDA_PRIMES, PipelineConfig,
                         coverage_curve, coverage_to_csv, evaluate_model, fit_pipeline,
                         reports_to_csv, sweep_lambda)
from .freq import FTILDE_BUILDERS, InterpolationParams, marginal_frequencies, write_frequencies
from .model import UntrainedTreeError, format_predictions, train_node_classifiers
from .plotting import plot_coverage, plot_tradeoff
from .tree import (TreeFormatError, build_tree, huffman_tree, load_tree, save_tree,
                   tree_expected_depth)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("freq", "build-tree", "train", "predict", "eval", "sweep", "coverage", "huffman")
DEFAULT_FRACTIONS = (0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = ""
    train: str = ""
    test: str = ""
    model: str = ""
    output: str = "."
    leaf_size: int = 100
    beam_width: int = 10
    k: tuple = DEFAULT_KS
    lambda_prime: tuple = DEFAULT_LAMBDA_PRIMES
    gamma: float = 0.1
    ftilde_mode: str = "marginal"
    seed: int = 0
    reg_cost: float = 1.0
    max_iterations: int = 50
    rel_tolerance: float = 1e-4
    fractions: tuple = DEFAULT_FRACTIONS
    coverage_mode: str = "any"

    def pipeline(self, threads=1):
        return PipelineConfig(self.leaf_size, self.beam_width, tuple(self.k), self.gamma,
                              self.ftilde_mode, self.seed, self.reg_cost, self.max_iterations,
                              self.rel_tolerance, threads)


FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _float_list(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _int_list(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


CONVERTERS = {
    "leaf_size": int, "beam_width": int, "seed": int, "max_iterations": int,
    "gamma": float, "reg_cost": float, "rel_tolerance": float,
    "k": _int_list, "lambda_prime": _float_list, "fractions": _float_list,
}


def _convert(key, raw, where):
    conv = CONVERTERS.get(key, str)
    try:
        return conv(raw)
    except ValueError:
        raise UsageError(f"{where}: cannot parse {raw!r}") from None


def _format_value(value):
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_manifest(config):
    return "".join(f"{name} = {_format_value(getattr(config, name))}\n" for name in FIELDS)


def read_config_file(path):
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"--config: cannot read {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in FIELDS:
            raise UsageError(f"--config: {path} line {lineno}: unknown setting {key!r}")
        if key == "command":
            continue
        out[key] = _convert(key, value.strip(), f"--config line {lineno} ({key})")
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="labeltree", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    add = parser.add_argument
    add("--config", help="flat key = value file; flags override it")
    add("--train", help="training data in sparse multi-label text format")
    add("--test", help="test data in the same format")
    add("--model", "--tree", dest="model", help="serialized tree (input)")
    add("--output", help="directory for artifacts (default: .)")
    add("--leaf-size", help="max labels per leaf (default 100)")
    add("--beam-width", help="beam width (default 10)")
    add("--k", help="comma list of k for metrics (default 1,3,5)")
    add("--lambda-prime", help="comma list of lambda' values")
    add("--gamma", help="smoothing weight (default 0.1)")
    add("--ftilde-mode", help="greedy or marginal (default marginal)")
    add("--seed")
    add("--reg-cost", help="classifier cost C (default 1.0)")
    add("--max-iterations")
    add("--rel-tolerance")
    add("--fractions", help="comma list of label fractions for coverage")
    add("--coverage-mode", help="any, three or all (default any)")
    add("--threads", help="worker threads (default: $PLT_THREADS or 1)")
    return parser


def resolve(argv):
    """Parse ``argv`` into ``(RunConfig, threads)``; defaults < config file < flags."""
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key in FIELDS:
        raw = getattr(args, key, None)
        if raw is not None and key != "command":
            values[key] = _convert(key, raw, "--" + key.replace("_", "-"))
    config = RunConfig(command=args.command, **values)
    threads_raw = args.threads if args.threads is not None else os.environ.get("PLT_THREADS", "1")
    try:
        threads = int(threads_raw)
    except ValueError:
        raise UsageError(f"--threads: cannot parse {threads_raw!r}") from None
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    _validate(config)
    return config, threads


def _validate(c):
    checks = [
        (c.leaf_size >= 1, "--leaf-size must be >= 1"),
        (c.beam_width >= 1, "--beam-width must be >= 1"),
        (len(c.k) > 0 and min(c.k) >= 1, "--k values must be >= 1"),
        (all(v >= 0 for v in c.lambda_prime), "--lambda-prime values must be >= 0"),
        (c.gamma >= 0 and math.isfinite(c.gamma), "--gamma must be a finite value >= 0"),
        (c.ftilde_mode in FTILDE_BUILDERS, f"--ftilde-mode must be one of {sorted(FTILDE_BUILDERS)}"),
        (c.reg_cost > 0, "--reg-cost must be > 0"),
        (c.max_iterations >= 1, "--max-iterations must be >= 1"),
        (c.rel_tolerance > 0, "--rel-tolerance must be > 0"),
        (all(0 <= q <= 1 for q in c.fractions), "--fractions must lie in [0, 1]"),
        (c.coverage_mode in COVERAGE_MODES, f"--coverage-mode must be one of {list(COVERAGE_MODES)}"),
    ]
    for ok, message in checks:
        if not ok:
            raise UsageError(message)


def _need(config, *names):
    for name in names:
        if not getattr(config, name):
            raise UsageError(f"{config.command} requires --{name.replace('_', '-')}")


def _single_lambda(config):
    if len(config.lambda_prime) != 1:
        raise UsageError(f"{config.command} takes exactly one --lambda-prime value")
    return InterpolationParams.from_lambda_prime(config.lambda_prime[0], config.gamma)


def _load(config, name):
    path = getattr(config, name)
    if not os.path.isfile(path):
        raise DataError(f"--{name}: no such file: {path}")
    try:
        return load_xmc(path)
    except XMCParseError as exc:
        raise DataError(f"--{name}: {path}: {exc}") from None


def _load_tree(config):
    if not os.path.isfile(config.model):
        raise DataError(f"--model: no such file: {config.model}")
    try:
        return load_tree(config.model)
    except TreeFormatError as exc:
        raise DataError(f"--model: {config.model}: {exc}") from None


def run(config, threads=1, out=None):
    out = sys.stdout if out is None else out
    cmd = config.command
    dest = config.output
    os.makedirs(dest, exist_ok=True)
    path = lambda name: os.path.join(dest, name)  # noqa: E731
    pipeline = config.pipeline(threads)

    if cmd == "freq":
        _need(config, "train")
        train = _load(config, "train")
        write_frequencies(marginal_frequencies(train), path("f.txt"))
        write_frequencies(FTILDE_BUILDERS[config.ftilde_mode](train), path("ftilde.txt"))

    elif cmd in ("build-tree", "train"):
        _need(config, "train")
        params = _single_lambda(config)
        train = _load(config, "train")
        if cmd == "train" and config.model:
            tree = train_node_classifiers(_load_tree(config), l2_normalize_rows(train)[0],
                                          config.reg_cost, threads=threads)
        elif cmd == "train":
            tree = fit_pipeline(train, params, pipeline).tree
        else:
            V, _ = pifa_embeddings(l2_normalize_rows(train)[0])
            tree = build_tree(V, marginal_frequencies(train),
                              FTILDE_BUILDERS[config.ftilde_mode](train), params,
                              config.leaf_size, config.seed, config.max_iterations,
                              config.rel_tolerance, threads)
        save_tree(tree, path("tree.plt" if cmd == "build-tree" else "model.plt"))
        depths = tree.label_depths()
        print(f"{len(tree.leaves())} leaves, depth {int(depths.max())}", file=out)

    elif cmd in ("predict", "eval"):
        _need(config, "model", "test")
        tree = _load_tree(config)
        test = _load(config, "test")
        report, preds = evaluate_model(tree, test, tuple(config.k), config.beam_width,
                                       config.lambda_prime[0] if len(config.lambda_prime) == 1
                                       else None)
        if cmd == "predict":
            write_text(path("predictions.txt"), format_predictions(preds))
        else:
            write_text(path("eval.csv"), reports_to_csv([report], tuple(config.k)))
            if report.n_empty_truth:
                print(f"{report.n_empty_truth} contexts without labels left out of depth",
                      file=out)

    elif cmd == "sweep":
        _need(config, "train", "test")
        train, test = _load(config, "train"), _load(config, "test")
        reports = sweep_lambda(train, test, config.lambda_prime, pipeline)
        write_text(path("sweep.csv"), reports_to_csv(reports, tuple(config.k)))
        if reports:
            plot_tradeoff(reports, path("tradeoff.png"), tuple(config.k))

    elif cmd == "coverage":
        _need(config, "train")
        train = _load(config, "train")
        f = marginal_frequencies(train)
        curves = {m: coverage_curve(train, f, config.fractions, m) for m in COVERAGE_MODES}
        write_text(path("coverage.csv"), coverage_to_csv(curves[config.coverage_mode]))
        plot_coverage(curves, path("coverage.png"))

    elif cmd == "huffman":
        _need(config, "train")
        f = marginal_frequencies(_load(config, "train"))
        tree = huffman_tree(f)
        save_tree(tree, path("huffman.plt"))
        nz = f[f > 0]
        print(f"expected depth {tree_expected_depth(tree, f):.6f}, "
              f"entropy {-float(np.dot(nz, np.log2(nz))):.6f} bits", file=out)

    write_text(path("manifest.txt"), format_manifest(config))


def main(argv=None):
    try:
        config, threads = resolve(sys.argv[1:] if argv is None else argv)
        run(config, threads)
    except UsageError as exc:
        print(f"labeltree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, UntrainedTreeError) as exc:
        print(f"labeltree: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"labeltree: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
