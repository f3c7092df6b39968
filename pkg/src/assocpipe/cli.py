"""Command-line driver.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import analytics, pipeline
from .bench import bench, dump_store
from .config import ConfigError, PipelineConfig, default_work_dir, parse_stages, read_config_file
from .packets import GenConfig, generate_dataset
from .tablestore import open_store

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--data-dir", type=Path)
    p.add_argument("--work-dir", type=Path, help="default: $ASSOCPIPE_WORK_DIR or ./work")
    p.add_argument("--store-dir", type=Path)
    p.add_argument("--domain")
    p.add_argument("--workers", type=int)
    p.add_argument("--split-size", type=int)
    p.add_argument("--stages", type=parse_stages, help="e.g. 1-6 or 3,4")
    p.add_argument("--time-zone", help="zone for frame.time: UTC, an IANA name or NAME+HH:MM")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="assocpipe", description="Packet-capture graph pipeline on associative arrays.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", metavar="{generate,run,query,bench,dump}")

    g = sub.add_parser("generate", help="write synthetic .pcap.gz captures with truth sidecars")
    g.add_argument("--data-dir", type=Path, default=Path("data"))
    g.add_argument("--domain", default="synthetic")
    g.add_argument("--packets", type=int, default=10_000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--files", type=int, default=1)
    g.add_argument("--hosts", type=int, default=500)
    g.add_argument("--heavy-fraction", type=float, default=0.3)
    g.add_argument("--heavy-hitter", default="1.1.1.1")
    g.add_argument("--tcp-fraction", type=float, default=0.8)

    r = sub.add_parser("run", help="run pipeline stages")
    _pipeline_args(r)
    r.add_argument("--report", type=Path, help="write timing CSV here")

    q = sub.add_parser("query", help="query an ingested store")
    q.add_argument("--store-dir", type=Path)
    q.add_argument("--work-dir", type=Path)
    q.add_argument("--format", choices=("tsv", "jsonl"), default="tsv")
    qsub = q.add_subparsers(dest="query", metavar="{connections,topk,degdist}")
    qc = qsub.add_parser("connections", help="packets to or from an IP")
    qc.add_argument("ip")
    qc.add_argument("--via-array", action="store_true", help="answer from the E files instead of the store")
    qc.add_argument("--domain", default="synthetic")
    qt = qsub.add_parser("topk", help="highest-degree values of a field")
    qt.add_argument("field")
    qt.add_argument("-k", type=int, default=10)
    qd = qsub.add_parser("degdist", help="degree histogram of a field")
    qd.add_argument("field")

    b = sub.add_parser("bench", help="per-stage speedup over worker counts")
    _pipeline_args(b)
    b.add_argument("--workers-list", default="1,2,4,8")
    b.add_argument("--out", type=Path, default=Path("."))
    b.add_argument("--repeats", type=int, default=1)

    d = sub.add_parser("dump", help="print table cells as TSV")
    d.add_argument("--store-dir", type=Path)
    d.add_argument("--work-dir", type=Path)
    d.add_argument("--table")
    d.add_argument("--no-compact", action="store_true")
    return ap


def pipeline_config(args) -> PipelineConfig:
    values: dict = {}
    if args.config is not None:
        values.update(read_config_file(args.config))
    for key in ("data_dir", "work_dir", "store_dir", "domain", "workers", "split_size", "stages",
                "time_zone"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return PipelineConfig.from_mapping(values)


def _store_dir(args) -> Path:
    if args.store_dir is not None:
        return args.store_dir
    return (args.work_dir or default_work_dir()) / "store"


def cmd_generate(args) -> int:
    cfg = GenConfig(packet_count=args.packets, seed=args.seed, host_count=args.hosts,
                    heavy_hitter_fraction=args.heavy_fraction, heavy_hitter=args.heavy_hitter,
                    tcp_fraction=args.tcp_fraction)
    for p in generate_dataset(args.data_dir / args.domain, cfg, args.files):
        print(p)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = pipeline_config(args)
    report = pipeline.run(cfg)
    print("stage,workers,seconds,bytes_in,bytes_out,files")
    for r in report.records:
        print(f"{r.stage},{r.workers},{r.seconds:.6f},{r.bytes_in},{r.bytes_out},{r.files}")
    if args.report:
        report.write_csv(args.report)
    for stage, task, err in report.errors:
        print(f"stage {stage} failed on {task}: {err.splitlines()[0]}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_RUNTIME


def cmd_query(args) -> int:
    if args.query is None:
        raise UsageError("query: choose one of connections, topk, degdist")
    fmt = args.format
    if args.query == "connections":
        try:
            analytics.endpoint_columns(args.ip)
        except ValueError as e:
            raise UsageError(str(e)) from None
        if args.via_array:
            cfg = PipelineConfig(work_dir=args.work_dir or default_work_dir(), domain=args.domain)
            res = analytics.query_via_array(pipeline.e_files(cfg), args.ip)
        else:
            res = analytics.connections_to(open_store(_store_dir(args)), args.ip)
        sys.stdout.write(res.to_tsv() if fmt == "tsv" else res.to_jsonl())
        print(f"# {len(res.packet_ids)} packets in {res.elapsed:.4f}s", file=sys.stderr)
        return EXIT_OK
    store = open_store(_store_dir(args))
    if args.query == "topk":
        pairs = analytics.top_k(store, args.field, args.k)
        names = ("value", "degree")
    else:
        pairs = list(analytics.degree_distribution(store, args.field).items())
        names = ("degree", "count")
    sys.stdout.write(analytics.pairs_to_tsv(pairs) if fmt == "tsv" else analytics.pairs_to_jsonl(pairs, names))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = pipeline_config(args)
    try:
        workers = [int(x) for x in args.workers_list.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --workers-list {args.workers_list!r}") from None
    report = bench(cfg, workers, repeats=args.repeats)
    args.out.mkdir(parents=True, exist_ok=True)
    report.write_csv(args.out / "bench.csv")
    report.write_dat(args.out / "bench.dat")
    report.write_plot_script(args.out / "bench.gp")
    print(report.table())
    if report.error:
        print(f"bench aborted: {report.error}", file=sys.stderr)
        return EXIT_RUNTIME
    if not report.consistent:
        print("store contents differ between worker counts", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_dump(args) -> int:
    store_dir = _store_dir(args)
    if args.table:
        t = open_store(store_dir).table(args.table)
        if not args.no_compact:
            t.compact()
        t.dump(sys.stdout)
    else:
        sys.stdout.write(dump_store(store_dir, compact=not args.no_compact))
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "query": cmd_query, "bench": cmd_bench, "dump": cmd_dump}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.cmd is None:
            raise UsageError(parser.format_usage().rstrip())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.cmd](args)
    except (UsageError, ConfigError) as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    except Exception as e:
        print(f"assocpipe: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
