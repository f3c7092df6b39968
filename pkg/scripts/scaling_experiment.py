"""Fixed-size scaling run: per-stage speedup for a list of worker counts.

Writes bench.csv, bench.dat and bench.gp (log-log speedup plot) to --out.

    python scripts/scaling_experiment.py --packets 64000 --workers-list 1,2,4,8 --out results/scaling
    gnuplot -p results/scaling/bench.gp
"""
import argparse
import os
import shutil
import sys
from pathlib import Path

from assocpipe import pipeline
from assocpipe.bench import bench
from assocpipe.config import PipelineConfig
from assocpipe.packets import GenConfig, generate_dataset


def main(argv=None):
    ap = argparse.ArgumentParser(description="per-stage speedup over worker counts")
    ap.add_argument("--packets", type=int, default=64_000)
    ap.add_argument("--files", type=int, default=16)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--split-size", type=int, default=64 * 1024)
    ap.add_argument("--workers-list", default="1,2,4,8")
    ap.add_argument("--repeats", type=int, default=1)
    ap.add_argument("--target", type=float, default=4.0, help="speedup wanted at the largest worker count")
    ap.add_argument("--out", type=Path, default=Path("results/scaling"))
    args = ap.parse_args(argv)

    scratch = args.out / "scratch"
    shutil.rmtree(scratch, ignore_errors=True)
    data = scratch / "data"
    generate_dataset(data / "synthetic", GenConfig(packet_count=args.packets, seed=args.seed), args.files)
    cfg = PipelineConfig(data_dir=data, work_dir=scratch / "work", split_size=args.split_size)

    # count the split files once so the input size is on record
    probe = pipeline.run(cfg.with_(stages=(1, 2)))
    n_splits = len(pipeline.stage_tasks(3, cfg))
    print(f"{args.packets} packets, {n_splits} split files, {os.cpu_count()} CPUs visible")
    if not probe.ok:
        print(probe.errors[0][2], file=sys.stderr)
        return 2

    workers = [int(x) for x in args.workers_list.split(",")]
    report = bench(cfg, workers, scratch=scratch / "points", repeats=args.repeats)
    args.out.mkdir(parents=True, exist_ok=True)
    report.write_csv(args.out / "bench.csv")
    report.write_dat(args.out / "bench.dat")
    report.write_plot_script(args.out / "bench.gp")
    shutil.rmtree(scratch, ignore_errors=True)
    print(report.table())
    if report.error:
        print(f"aborted: {report.error}", file=sys.stderr)
        return 2
    print(f"store identical across worker counts: {report.consistent}")

    top = workers[-1]
    reached = True
    for stage in (2, 3, 4, 5):
        row = report.get(stage, top)
        ok = row.speedup >= args.target
        reached &= ok
        print(f"stage {stage} at {top} workers: speedup {row.speedup:.2f} "
              f"(efficiency {row.efficiency:.2f}) {'meets' if ok else 'below'} {args.target}")
    return 0 if reached and report.consistent else 1


if __name__ == "__main__":
    sys.exit(main())
