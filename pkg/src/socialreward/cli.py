"""Command-line entry point (``srf``).

Exit codes: 0 success, 1 data error, 2 configuration or usage error.
Set ``SRF_LOG`` (e.g. ``INFO``, ``DEBUG``) for more diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import contextmanager
from typing import List, Optional, Sequence

from . import evaluation
from .config import RunConfig, load_config
from .errors import ConfigError, InvalidSpec, SocialRewardError
from .fusion import format_sample, run
from .population import InternalisationFn, internalise, load_returns, population_return
from .sources import TcpListener, file_source, text_source
from .stream import Diagnostic, format_frame, merge_streams, read_trace, write_trace
from .synth import builtin_scenario, parse_scenario, synth_trace

log = logging.getLogger("socialreward")

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _emit_samples(samples, out_path: Optional[str]) -> int:
    n = 0
    with _output(out_path) as fh:
        for sample in samples:
            fh.write(format_sample(sample) + "\n")
            if fh is sys.stdout:
                fh.flush()
            n += 1
    return n


def _require_file(path: str, what: str) -> str:
    if not os.path.isfile(path):
        raise UsageError(f"no such {what}: {path}")
    return path


def _report_diagnostics(diagnostics: List[Diagnostic]) -> None:
    if diagnostics:
        log.info("%d frame(s) rejected", len(diagnostics))


def cmd_run(args, cfg: RunConfig) -> int:
    diagnostics: List[Diagnostic] = []
    sources = []
    if args.listen:
        n = args.connections or len(cfg.registry.channels)
        listener = TcpListener(args.listen, cfg.registry, n, diagnostics)
        host, port = listener.address
        print(f"listening on {host}:{port}", file=sys.stderr, flush=True)
        sources.extend(listener.sources())
    for path in args.sources:
        if path == "-":
            sources.append(text_source(sys.stdin.buffer, cfg.registry, "<stdin>", diagnostics))
        else:
            sources.append(file_source(_require_file(path, "trace file"), cfg.registry, diagnostics))
    if not sources:
        sources.append(text_source(sys.stdin.buffer, cfg.registry, "<stdin>", diagnostics))
    frames = merge_streams(sources, diagnostics)
    n = _emit_samples(run(frames, cfg.fusion, cfg.registry, cfg.taxonomy), args.out or cfg.rewards_path)
    _report_diagnostics(diagnostics)
    log.info("emitted %d reward samples", n)
    return EXIT_OK


def cmd_replay(args, cfg: RunConfig) -> int:
    frames, diagnostics = read_trace(_require_file(args.trace, "trace file"), cfg.registry)
    _emit_samples(run(frames, cfg.fusion, cfg.registry, cfg.taxonomy), args.out or cfg.rewards_path)
    _report_diagnostics(diagnostics)
    return EXIT_OK


def _write_tables(tables: dict, out_dir: Optional[str]) -> None:
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        for name, text in tables.items():
            with open(os.path.join(out_dir, f"{name}.csv"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return
    first = True
    for name, text in tables.items():
        if not first:
            sys.stdout.write("\n")
        sys.stdout.write(f"# {name}\n{text}")
        first = False


def cmd_eval_clips(args, cfg: RunConfig) -> int:
    clips = evaluation.read_manifest(_require_file(args.manifest, "manifest"))
    bins = args.bins if args.bins is not None else cfg.eval.bins
    report = evaluation.evaluate_clips(clips, cfg.fusion, cfg.registry, bins=bins)
    for diag in report.diagnostics:
        print(f"warning: {diag}", file=sys.stderr)
    _write_tables(evaluation.report_tables(report), args.out or cfg.reports_dir)
    return EXIT_OK


def cmd_eval_model(args, cfg: RunConfig) -> int:
    taxonomy = cfg.taxonomy
    preds = evaluation.read_predictions(_require_file(args.predictions, "predictions file"), taxonomy)
    k_max = args.k_max or cfg.eval.k_max
    tables = {}
    if args.test_fraction is not None:
        seed = args.seed if args.seed is not None else cfg.eval.seed
        train, test = evaluation.split_by_actor(preds, args.test_fraction, seed)
        tables["top_k_accuracy"] = evaluation.topk_table(
            evaluation.top_k_accuracy(train, taxonomy, k_max),
            evaluation.top_k_accuracy(test, taxonomy, k_max),
        )
        for side, subset in (("train", train), ("test", test)):
            tables[f"confusion_counts_{side}"] = evaluation.confusion_table(
                evaluation.confusion_matrix(subset, taxonomy, "counts"), taxonomy
            )
            tables[f"confusion_row_{side}"] = evaluation.confusion_table(
                evaluation.confusion_matrix(subset, taxonomy, "row"), taxonomy
            )
    else:
        tables["top_k_accuracy"] = evaluation.topk_table(evaluation.top_k_accuracy(preds, taxonomy, k_max))
        tables["confusion_counts"] = evaluation.confusion_table(
            evaluation.confusion_matrix(preds, taxonomy, "counts"), taxonomy
        )
        tables["confusion_row"] = evaluation.confusion_table(
            evaluation.confusion_matrix(preds, taxonomy, "row"), taxonomy
        )
    _write_tables(tables, args.out or cfg.reports_dir)
    return EXIT_OK


def cmd_split_actors(args, cfg: RunConfig) -> int:
    preds = evaluation.read_predictions(_require_file(args.predictions, "predictions file"), cfg.taxonomy)
    fraction = args.fraction if args.fraction is not None else cfg.eval.test_fraction
    seed = args.seed if args.seed is not None else cfg.eval.seed
    train, test = evaluation.split_by_actor(preds, fraction, seed)
    rows = []
    for side, subset in (("test", test), ("train", train)):
        counts = {}
        for p in subset:
            counts[p.actor_id] = counts.get(p.actor_id, 0) + 1
        rows.extend((actor, side, counts[actor]) for actor in sorted(counts))
    with _output(args.out) as fh:
        fh.write(evaluation.table(["actor_id", "side", "samples"], rows))
    return EXIT_OK


def cmd_population(args, cfg: RunConfig) -> int:
    f = InternalisationFn.parse(args.f)
    returns = load_returns(_require_file(args.manifest, "manifest"))
    rows = [(r.individual_id, r.R, internalise(f, r.R)) for r in returns]
    total_R = sum((r.R for r in returns), 0.0)
    rows.append(("TOTAL", total_R, population_return(returns, f)))
    with _output(args.out) as fh:
        fh.write(evaluation.table(["individual_id", "R", "f_R"], rows))
    return EXIT_OK


def cmd_synth(args, cfg: RunConfig) -> int:
    if os.path.exists(args.scenario):
        with open(args.scenario, encoding="utf-8") as fh:
            spec = parse_scenario(fh.read(), cfg.taxonomy)
    else:
        spec = builtin_scenario(args.scenario, cfg.taxonomy)
    frames = synth_trace(spec, args.seed or 0)
    if args.out:
        write_trace(args.out, frames)
    else:
        for frame in frames:
            sys.stdout.write(format_frame(frame) + "\n")
    return EXIT_OK


def cmd_serve(args, cfg: RunConfig) -> int:
    import uvicorn

    from .service.app import create_app
    from .sources import parse_address

    host, port = parse_address(args.listen or "127.0.0.1:8000")
    uvicorn.run(create_app(cfg), host=host, port=port, log_level=os.environ.get("SRF_LOG", "warning").lower())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srf", description="Social reward fusion engine and evaluation harness.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--out", help="output file (or directory for report tables)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="fuse live frames from stdin, files or TCP")
    p.add_argument("sources", nargs="*", help="trace files, or - for stdin (default)")
    p.add_argument("--listen", metavar="ADDR:PORT", help="accept perceptor connections on this address")
    p.add_argument("--connections", type=int, help="number of TCP perceptors to wait for (default: registered channels)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", parents=[common], help="fuse a recorded .srft trace")
    p.add_argument("trace")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("eval-clips", parents=[common], help="correlate clip-mean rewards with labels")
    p.add_argument("manifest")
    p.add_argument("--bins", type=int)
    p.set_defaults(func=cmd_eval_clips)

    p = sub.add_parser("eval-model", parents=[common], help="confusion matrices and top-k accuracy")
    p.add_argument("predictions")
    p.add_argument("--k-max", type=int)
    p.add_argument("--test-fraction", type=float, help="report train/test after an actor-partitioned split")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval_model)

    p = sub.add_parser("split-actors", parents=[common], help="actor-partitioned train/test split")
    p.add_argument("predictions")
    p.add_argument("--fraction", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_split_actors)

    p = sub.add_parser("population", parents=[common], help="internalised population return")
    p.add_argument("manifest")
    p.add_argument("--f", default="identity", help="identity | soft_equity[:a]")
    p.set_defaults(func=cmd_population)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic trace")
    p.add_argument("scenario", help="scenario INI file, an emotion name, or 'demo'")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", parents=[common], help="start the HTTP service")
    p.add_argument("--listen", metavar="ADDR:PORT")
    p.set_defaults(func=cmd_serve)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("SRF_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, cfg)
    except (ConfigError, InvalidSpec, UsageError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SocialRewardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head)
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
