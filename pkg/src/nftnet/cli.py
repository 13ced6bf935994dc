"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numerical fault.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import InvalidArgument, NftError, NumericalFault

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _u64(s):
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"{s} is not an unsigned 64-bit integer")
    return v


def _pos_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"{s} must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    def globals_(default):
        # subcommands use SUPPRESS so they do not overwrite values given before the subcommand
        g = _Parser(add_help=False)
        g.add_argument("--seed", type=_u64, default=0 if default else argparse.SUPPRESS, help="global seed")
        g.add_argument("--threads", type=_pos_int, default=1 if default else argparse.SUPPRESS,
                       help="worker thread bound")
        g.add_argument("--quiet", action="store_true", default=False if default else argparse.SUPPRESS,
                       help="suppress logs")
        return g

    common = globals_(False)
    p = _Parser(prog="nftnet", description="Nonlinear Fourier transform workbench", parents=[globals_(True)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common], help="generate a dataset")
    g.add_argument("--count", type=_pos_int, default=2000)
    g.add_argument("--out", required=True)
    g.add_argument("--samples", type=int, default=2048)
    g.add_argument("--rate", type=float, default=96e9)

    def raw_opts(sp):
        sp.add_argument("--in", dest="inp", required=True, help="raw interleaved re/im file")
        sp.add_argument("--out", required=True)
        sp.add_argument("--rate", type=float, default=96e9)
        sp.add_argument("--precision", choices=("f32", "f64"), default="f32",
                        help="sample type of raw files (default f32)")

    n = sub.add_parser("nft", parents=[common], help="forward transform of a raw signal")
    raw_opts(n)
    n.add_argument("--method", choices=("bo", "al"), default="bo")
    n.add_argument("--emit", choices=("a", "b", "q"), default="q")

    i = sub.add_parser("inft", parents=[common], help="inverse transform of a raw spectrum")
    raw_opts(i)

    t = sub.add_parser("train", parents=[common], help="train a model")
    t.add_argument("--data", required=True)
    t.add_argument("--direction", choices=("nft", "inft"), required=True)
    t.add_argument("--epochs", type=_pos_int, default=20)
    t.add_argument("--batch", type=int, default=32)
    t.add_argument("--lr", type=float, default=3e-4)
    t.add_argument("--ckpt", required=True, help="checkpoint directory")
    t.add_argument("--max-steps", type=int, default=None)

    e = sub.add_parser("eval", parents=[common], help="RMSE report for one model")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--report", required=True)
    e.add_argument("--format", choices=("json", "csv"), default="json")

    b = sub.add_parser("b2b", parents=[common], help="back-to-back BER report")
    b.add_argument("--data", required=True)
    b.add_argument("--nft")
    b.add_argument("--inft")
    b.add_argument("--classical", action="store_true")
    b.add_argument("--report", required=True)
    b.add_argument("--format", choices=("json", "csv"), default="json")

    f = sub.add_parser("flops", parents=[common], help="parameter and FLOP audit")
    f.add_argument("--spec", choices=("default",), default="default")

    pr = sub.add_parser("probe", parents=[common], help="out-of-distribution probe set")
    pr.add_argument("--model", required=True)
    pr.add_argument("--direction", choices=("nft", "inft"), required=True)
    pr.add_argument("--out", required=True)
    return p


def _log(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr, flush=True)


def _read_raw(path, precision):
    import numpy as np

    dt = "<f4" if precision == "f32" else "<f8"
    a = np.fromfile(path, dtype=dt).astype(np.float64)
    if a.size % 2:
        raise NftError(f"{path}: odd number of values in raw complex file")
    return a[0::2] + 1j * a[1::2]


def _write_raw(path, values, precision):
    import numpy as np

    dt = "<f4" if precision == "f32" else "<f8"
    out = np.empty(2 * values.size, dtype=dt)
    out[0::2] = values.real
    out[1::2] = values.imag
    out.tofile(path)


def _cmd_gen(args):
    from .dataset import generate, write_dataset

    step = max(1, args.count // 20)

    def progress(i, n):
        if i % step == 0 or i == n:
            _log(args, f"gen: {i}/{n} records")

    ds = generate(args.count, args.seed, args.samples, args.rate, progress=progress)
    write_dataset(ds, args.out)
    _log(args, f"gen: wrote {args.out}")


def _cmd_nft(args):
    from .core import make_nonlinear_grid
    from .dataset import burst_time_grid
    from .core import TimeSignal
    from .scattering import forward_nft

    q = _read_raw(args.inp, args.precision)
    tg = burst_time_grid(q.size, args.rate)
    sd = forward_nft(TimeSignal(tg, q), make_nonlinear_grid(tg), args.method)
    out = {"a": sd.a, "b": sd.b, "q": sd.q_spec}[args.emit].values
    _write_raw(args.out, out, args.precision)


def _cmd_inft(args):
    from .core import SpectrumKind, SpectrumSamples, make_nonlinear_grid
    from .dataset import burst_time_grid
    from .synthesis import inverse_nft

    v = _read_raw(args.inp, args.precision)
    tg = burst_time_grid(v.size, args.rate)
    q = inverse_nft(SpectrumSamples(make_nonlinear_grid(tg), v, SpectrumKind.NonlinearQ), tg)
    _write_raw(args.out, q.samples, args.precision)


def _cmd_train(args):
    from pathlib import Path

    from .dataset import read_dataset
    from .neuralnet import ModelSpec, train

    ds = read_dataset(args.data)
    spec = ModelSpec(direction=args.direction, length=ds.header.n_samples)
    res = train(spec, ds, args.epochs, args.batch, args.lr, args.seed, args.ckpt,
                log=lambda m: _log(args, f"train: {m}"), max_steps=args.max_steps)
    hist = Path(args.ckpt) / "loss_history.json"
    hist.write_text(json.dumps({"epoch_rmse": res.epoch_loss}, indent=2) + "\n")


def _cmd_eval(args):
    from .dataset import read_dataset
    from .evalharness import emit_report, evaluate
    from .neuralnet import Direction, load_checkpoint

    state = load_checkpoint(args.model)
    ds = read_dataset(args.data)
    if state.spec.direction is Direction.NFT:
        rep = evaluate(ds, nft_model=state)
    else:
        rep = evaluate(ds, inft_model=state)
    emit_report(rep, args.report, args.format)


def _cmd_b2b(args):
    from .dataset import read_dataset
    from .evalharness import emit_report, evaluate
    from .neuralnet import load_checkpoint

    if (args.nft is None) != (args.inft is None):
        raise InvalidArgument("--nft and --inft must be given together")
    if args.nft is None and not args.classical:
        raise InvalidArgument("nothing to evaluate: give --nft/--inft and/or --classical")
    nft = load_checkpoint(args.nft) if args.nft else None
    inft = load_checkpoint(args.inft) if args.inft else None
    ds = read_dataset(args.data)
    rep = evaluate(ds, nft_model=nft, inft_model=inft, classical=args.classical)
    emit_report(rep, args.report, args.format)
    _log(args, f"b2b: totals {json.dumps(rep.totals)}")


def _cmd_flops(args):
    from .neuralnet import ModelSpec, count_flops, count_params

    spec = ModelSpec()
    fl = count_flops(spec)
    print(f"params={count_params(spec)} conv={fl['conv']} lstm={fl['lstm']} total={fl['total']}")


def _cmd_probe(args):
    from pathlib import Path

    from .evalharness import run_probes
    from .neuralnet import Direction, load_checkpoint

    state = load_checkpoint(args.model)
    if state.spec.direction is not Direction.parse(args.direction):
        raise InvalidArgument(f"checkpoint is a {state.spec.direction.value} model, not {args.direction}")
    res = run_probes(state, args.out)
    (Path(args.out) / "probes.json").write_text(json.dumps(res, indent=2) + "\n")
    for name, v in res.items():
        print(f"{name} rmse={v:.6e}")


_COMMANDS = {
    "gen": _cmd_gen,
    "nft": _cmd_nft,
    "inft": _cmd_inft,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "b2b": _cmd_b2b,
    "flops": _cmd_flops,
    "probe": _cmd_probe,
}


def run(argv=None) -> int:
    """Run one subcommand and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "NUMBA_NUM_THREADS"):
            os.environ.setdefault(var, str(args.threads))
    config = {k: v for k, v in sorted(vars(args).items())}
    _log(args, "config: " + json.dumps(config, sort_keys=True))
    try:
        _COMMANDS[args.command](args)
    except NumericalFault as exc:
        print(f"{args.command}: numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidArgument as exc:
        print(f"{args.command}: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NftError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"{args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
