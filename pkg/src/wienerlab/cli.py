"""Command-line front end: degrade, restore, train, eval, gradcheck.

Exit codes: 0 success, 2 usage or input error, 3 numeric/convergence
failure.  All output files are written via temp-then-rename, so a failing
command leaves no partial outputs.  `WIENERLAB_THREADS` caps the worker
count of batch subcommands.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import dataset, formats, pipeline
from .degrade import DegradeConfig, PsfSpec, degrade, make_rng, synthesize_psf
from .errors import InvalidInputError, NumericError
from .gradients import fd_check, grad_bank, grad_input
from .iterative import IterConfig, iterate, tikhonov_prior, tv_prior, zero_prior
from .metrics import format_psnr, psnr, ssim
from .spatial_cg import CgConfig, read_field, solve_sa
from .training import TrainConfig, save_adam_state, train_wfk
from .wiener import KernelBank, plan, read_bank, wiener_solve, write_bank

GRADCHECK_TOL = 1e-4


def _workers() -> int:
    cap = os.environ.get("WIENERLAB_THREADS")
    try:
        return max(1, int(cap)) if cap else min(8, os.cpu_count() or 1)
    except ValueError:
        return 1


def _require_files(*paths):
    for p in paths:
        if p and not os.path.exists(p):
            raise InvalidInputError(f"{p}: file not found")


def _write_restored(path, image, raw: bool):
    formats.write_pgm(path, image)
    if raw:
        formats.write_image(os.path.splitext(path)[0] + ".wkimg", image)


def cmd_degrade(args) -> int:
    if args.dataset:
        _require_files(*args.inputs)
        dataset.make_dataset(
            args.inputs, args.out, protocol=args.noise, seed=args.seed, patch=args.patch
        )
        return 0
    if len(args.inputs) != 2:
        raise InvalidInputError("single-image mode needs exactly: input output")
    src, dst = args.inputs
    _require_files(src)
    cfg = DegradeConfig(
        psf_spec=PsfSpec.parse(args.psf),
        noise=args.noise,
        std=args.std,
        peak=args.peak,
        seed=args.seed,
    )
    result = degrade(formats.load_any(src), cfg)
    if args.noise == "poisson":
        formats.write_image(dst, result)  # counts exceed [0,1]; keep raw floats
    else:
        formats.write_pgm(dst, result)
    return 0


def _make_prior(spec: str, shape):
    if spec == "none":
        return zero_prior
    if spec == "tv":
        return tv_prior
    if spec.startswith("tikhonov:"):
        path = spec.split(":", 1)[1]
        _require_files(path)
        return tikhonov_prior(read_bank(path))
    raise InvalidInputError(f"unknown prior {spec!r}; use none, tv, or tikhonov:<bankfile>")


def cmd_restore(args) -> int:
    _require_files(args.input, args.truth)
    y = formats.load_any(args.input)
    psf = synthesize_psf(PsfSpec.parse(args.psf))

    if args.vst:
        if args.method != "wf":
            raise InvalidInputError("--vst is supported with --method wf")
        _require_files(args.bank)
        bank = read_bank(args.bank)
        restored = pipeline.restore_vst(y, psf, bank, peak=args.peak)
    elif args.method == "wf":
        _require_files(args.bank)
        restored = pipeline.restore(y, psf, read_bank(args.bank))
    elif args.method == "sa":
        if not args.field:
            raise InvalidInputError("--method sa requires --field")
        _require_files(args.field)
        field = read_field(args.field)
        restored, report = solve_sa(
            y, psf, field, alpha=args.alpha,
            cfg=CgConfig(max_iter=args.max_iter, rel_tol=args.rel_tol),
        )
        if not report.converged:
            print(
                f"cg did not converge: {report.iterations} iterations, "
                f"residual {report.residual_norm:.3e}",
                file=sys.stderr,
            )
            return 3
    elif args.method == "iter":
        prior = _make_prior(args.prior, y.shape)
        cfg = IterConfig(steps=args.steps, beta=args.beta, alpha=args.alpha)
        restored, trace = iterate(y, psf, prior, cfg)
        if args.trace:
            buf = io.StringIO()
            writer = csv.writer(buf)
            writer.writerow(["step", "fidelity", "objective"])
            for i, fid in enumerate(trace.fidelity, 1):
                obj = trace.objective[i - 1] if trace.objective else ""
                writer.writerow([i, repr(fid), obj])
            formats.atomic_write(args.trace, buf.getvalue().encode())
    else:
        raise InvalidInputError(f"unknown method {args.method!r}")

    _write_restored(args.output, restored, args.raw)
    if args.truth:
        truth = formats.load_any(args.truth)
        print(f"psnr={format_psnr(psnr(restored, truth))} ssim={ssim(restored, truth):.4f}")
    return 0


def cmd_train(args) -> int:
    _require_files(args.manifest)
    records = dataset.read_manifest(args.manifest)
    train_pairs = dataset.pairs_from_records([r for r in records if r.split == "train"])
    val_pairs = dataset.pairs_from_records([r for r in records if r.split == "val"])
    init = read_bank(args.init) if args.init else KernelBank.dct(args.d, args.k)
    cfg = TrainConfig(
        lr=args.lr,
        epochs=args.epochs,
        batch=args.batch,
        seed=args.seed,
        vst=args.vst,
        grad_weight=args.grad_weight,
    )
    bank, history = train_wfk(train_pairs, init, cfg, val_pairs=val_pairs)
    write_bank(bank, args.out)
    if history.adam is not None:
        save_adam_state(history.adam, args.out + ".adam")
    if args.history:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["epoch", "train_loss", "val_psnr", "val_ssim"])
        for e in history.epochs:
            writer.writerow([e["epoch"], repr(e["train_loss"]), e.get("val_psnr", ""), e.get("val_ssim", "")])
        formats.atomic_write(args.history, buf.getvalue().encode())
    if history.aborted:
        print("training aborted on non-finite loss; wrote last good checkpoint", file=sys.stderr)
        return 3
    return 0


def cmd_eval(args) -> int:
    _require_files(args.manifest, args.bank)
    records = [r for r in dataset.read_manifest(args.manifest) if r.split == args.split]
    if not records:
        raise InvalidInputError(f"manifest has no {args.split!r} records")
    bank = read_bank(args.bank)
    pairs = dataset.pairs_from_records(records)

    def score(item):
        record, pair = item
        if args.vst:
            pred = pipeline.restore_vst(pair.degraded, pair.psf, bank, peak=pair.peak)
        else:
            pred = pipeline.restore(pair.degraded, pair.psf, bank)
        level = pair.peak if record.noise == "poisson" else record.std
        return level, psnr(pred, pair.truth), ssim(pred, pair.truth)

    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        rows = list(pool.map(score, zip(records, pairs)))

    by_level: dict = {}
    for level, p, s in rows:
        by_level.setdefault(level, []).append((p, s))
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["level", "count", "psnr", "ssim"])
    for level in sorted(by_level):
        scores = by_level[level]
        finite = [p for p, _ in scores if np.isfinite(p)]
        mean_psnr = format_psnr(np.mean(finite) if len(finite) == len(scores) else np.inf)
        if finite and len(finite) == len(scores):
            mean_psnr = f"{np.mean(finite):.2f}"
        writer.writerow([level, len(scores), mean_psnr, f"{np.mean([s for _, s in scores]):.4f}"])
    table = buf.getvalue()
    print(table, end="")
    if args.out:
        formats.atomic_write(args.out, table.encode())
    return 0


def cmd_gradcheck(args) -> int:
    size, d, k = args.size, args.d, args.k
    rng = make_rng(args.seed)
    psf = synthesize_psf(PsfSpec("gaussian", 5, 1.0))
    y = rng.random((size, size))
    upstream = rng.random((size, size)) - 0.5
    kernels = rng.random((d, k, k)) - 0.5
    alpha = 0.3
    bank = KernelBank(kernels, alpha)
    p = plan(psf, bank, size, size)
    g = grad_bank(y, p, bank, upstream)

    def loss_at(params):
        b = KernelBank(np.asarray(params[1:]).reshape(d, k, k), params[0])
        return float(np.sum(upstream * wiener_solve(y, plan(psf, b, size, size))))

    params = np.concatenate(([alpha], kernels.ravel()))
    analytic = np.concatenate(([g.d_alpha], g.d_kernels.ravel()))
    bank_report = fd_check(loss_at, params, analytic)

    gy = grad_input(p, upstream)
    probe = make_rng(args.seed, stream=1)

    def loss_y(flat):
        return float(np.sum(upstream * wiener_solve(np.asarray(flat).reshape(size, size), p)))

    idx = probe.permutation(size * size)[:20]
    input_report = fd_check(loss_y, y.ravel(), gy.ravel())
    errs = input_report.errors[idx]

    rows = [
        ("alpha", bank_report.errors[0]),
        ("kernels", float(np.nanmax(bank_report.errors[1:]))),
        ("input", float(np.nanmax(errs))),
    ]
    print(f"{'group':<10}{'max rel err':>14}")
    worst = 0.0
    for name, err in rows:
        print(f"{name:<10}{err:>14.3e}")
        worst = max(worst, err)
    return 0 if worst < args.tol else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wienerlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="blur and add noise to images")
    p.add_argument("--noise", choices=["gaussian", "poisson"], required=True)
    p.add_argument("--std", type=float)
    p.add_argument("--peak", type=float)
    p.add_argument("--psf", default="gaussian:7:1.0", help="family:size[:param]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dataset", action="store_true", help="dataset mode: inputs are sources")
    p.add_argument("--out", help="dataset output directory")
    p.add_argument("--patch", type=int, default=64)
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("restore", help="restore a degraded image")
    p.add_argument("--method", choices=["wf", "sa", "iter"], default="wf")
    p.add_argument("--vst", action="store_true", help="Anscombe pipeline for Poisson data")
    p.add_argument("--bank", help="WKBANK kernel bank file (wf)")
    p.add_argument("--field", help="WKFLD1 per-pixel kernel field (sa)")
    p.add_argument("--prior", default="none", help="iter prior: none | tv | tikhonov:<bank>")
    p.add_argument("--psf", default="gaussian:7:1.0")
    p.add_argument("--peak", type=float, help="rescale VST output by this peak")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--trace", help="write per-step objective CSV (iter)")
    p.add_argument("--truth", help="ground truth for a metrics line")
    p.add_argument("--raw", action="store_true", help="also write raw float output")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("train", help="train a kernel bank on a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--init", help="initial WKBANK file (default: DCT bank)")
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--grad-weight", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vst", action="store_true")
    p.add_argument("--history", help="write per-epoch CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="PSNR/SSIM table per noise level")
    p.add_argument("--manifest", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--vst", action="store_true")
    p.add_argument("--out", help="write the CSV table here as well")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    p.add_argument("--size", type=int, default=12)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--tol", type=float, default=GRADCHECK_TOL)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, FileNotFoundError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
