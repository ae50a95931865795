"""Command-line entry point tying the toolkit into reproducible pipelines.

Subcommands: phantom, coilmaps, maskgen, augment, codebook-train,
branchnav, recon, metrics, sampler, experiment. Tensors travel as CTNS
files, reports as JSON, tabular outputs as CSV.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import ctns
from .augment import AugPolicy, augment_sample, sample_augmentation
from .balance import draws_from_weights, read_manifest, update_weights
from .experiment import ExperimentConfig, derive_seed, run_experiment
from .masks import DEFAULT_ACS, SamplingMask, make_mask
from .metrics import evaluate
from .mri import AcquisitionModel, make_coil_maps, make_phantom, sense_combine
from .recon import load_grid, reconstruct
from .routing import BranchNav
from .vq import VqCodebook, extract_features

logger = logging.getLogger(__name__)


def _out_path(args, name: str) -> Path:
    path = Path(name)
    if not path.is_absolute() and args.out_dir:
        path = Path(args.out_dir) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_complex(path: Path, arr: np.ndarray) -> None:
    ctns.write(path, arr.astype(np.complex64))


def _cmd_phantom(args) -> int:
    x = make_phantom(args.height, args.width, args.seed)
    _write_complex(_out_path(args, args.out), x)
    return 0


def _cmd_coilmaps(args) -> int:
    maps = make_coil_maps(args.coils, args.height, args.width, args.seed)
    _write_complex(_out_path(args, args.out), maps)
    return 0


def _cmd_maskgen(args) -> int:
    mask = make_mask(args.family, args.height, args.accel, acs=args.acs,
                     seed=args.seed)
    ctns.write(_out_path(args, args.out), mask.lines)
    return 0


def _cmd_augment(args) -> int:
    y = ctns.read(args.infile).astype(np.complex128)
    sens = ctns.read(args.sens).astype(np.complex128)
    policy = AugPolicy.from_json(args.policy)
    descriptors = sample_augmentation(policy, derive_seed(args.seed, "augment"))
    x = sense_combine(y, sens)
    _, sens_aug, y_aug = augment_sample(x, sens, descriptors,
                                        noise_seed=derive_seed(args.seed, "noise"))
    _write_complex(_out_path(args, args.out), y_aug)
    if args.out_sens:
        _write_complex(_out_path(args, args.out_sens), sens_aug)
    return 0


def _cmd_codebook_train(args) -> int:
    batches = [extract_features(ctns.read(p).astype(np.complex128), args.patch)
               for p in args.images]
    features = np.concatenate(batches, axis=0)
    cb = VqCodebook(n_codes=args.n_codes, decay=args.decay,
                    random_state=args.seed)
    cb.fit(features)
    for _ in range(args.steps):
        cb.ema_update(features)
    cb.save(_out_path(args, args.out))
    return 0


def _cmd_branchnav(args) -> int:
    stream = ctns.read(args.stream).astype(np.float64)
    nav = BranchNav(args.branches, n_buffer=args.buffer, random_state=args.seed)
    nav.advance_epoch()  # simulation runs with buffering enabled
    assignments = []
    for wf in stream:
        nav.observe(wf)
        assignments.append(nav.route(wf))
    report = {
        "n_samples": int(stream.shape[0]),
        "n_branch": args.branches,
        "routing_counts": nav.routing_counts_.tolist(),
        "utilization": (nav.routing_counts_ / max(1, stream.shape[0])).tolist(),
        "kernel_initialized": nav.centers_ is not None,
        "assignments": assignments,
    }
    _out_path(args, args.out).write_text(json.dumps(report, sort_keys=True, indent=1))
    if args.state:
        nav.save(_out_path(args, args.state))
    return 0


def _cmd_recon(args) -> int:
    y = ctns.read(args.y).astype(np.complex128)
    sens = ctns.read(args.sens).astype(np.complex128)
    mask = SamplingMask.from_lines(ctns.read(args.mask))
    grid = load_grid(args.grid)
    model = AcquisitionModel(sens, mask)
    xhat, trace = reconstruct(y, model, grid)
    _write_complex(_out_path(args, args.out), xhat)
    if args.trace:
        _out_path(args, args.trace).write_text(
            json.dumps(trace.to_dict(), sort_keys=True, indent=1))
    return 0


def _cmd_metrics(args) -> int:
    ref = ctns.read(args.ref)
    test = ctns.read(args.test)
    payload = evaluate(test, ref).to_dict()
    # JSON has no inf; serialize the +inf PSNR sentinel as a string.
    if payload["psnr"] == float("inf"):
        payload["psnr"] = "inf"
    _out_path(args, args.out).write_text(json.dumps(payload, sort_keys=True))
    return 0


def _cmd_sampler(args) -> int:
    records = read_manifest(args.manifest)
    categories = [c for c in args.categories.split(",") if c]
    base = None
    if args.compound:
        base = json.loads(Path(args.compound).read_text())["weights"]
    weights = update_weights(records, categories, base=base)
    draws = draws_from_weights(weights, seed=args.seed)
    payload = {"weights": weights, "draws": draws,
               "expected_total": sum(weights.values())}
    _out_path(args, args.out).write_text(json.dumps(payload, sort_keys=True, indent=1))
    return 0


def _cmd_experiment(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        config.seed = args.seed
    out_dir = Path(args.out_dir) if args.out_dir else Path("experiment-out")
    _, failures = run_experiment(config, out_dir,
                                 independent_routing=args.independent_routing,
                                 base_dir=Path(args.config).parent)
    if failures:
        for sample_id, error in failures:
            print(f"sample {sample_id} failed: {error}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchgrid",
        description="Dual-domain MRI augmentation and branch-grid reconstruction",
    )
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--out-dir", default=None,
                        help="directory prefix for relative output paths")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a complex phantom image")
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("coilmaps", help="generate normalized coil maps")
    p.add_argument("--coils", type=int, default=4)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_coilmaps)

    p = sub.add_parser("maskgen", help="generate an undersampling mask")
    p.add_argument("--family", required=True,
                   choices=["uniform", "kt_gaussian", "kt_radial"])
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--accel", type=int, required=True)
    p.add_argument("--acs", type=int, default=DEFAULT_ACS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_maskgen)

    p = sub.add_parser("augment", help="augment fully sampled k-space")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--sens", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--out-sens", default=None,
                   help="also write the transformed coil maps")
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("codebook-train", help="fit a codebook on image features")
    p.add_argument("--images", nargs="+", required=True)
    p.add_argument("--n-codes", type=int, default=16)
    p.add_argument("--patch", type=int, default=2)
    p.add_argument("--decay", type=float, default=0.99)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_codebook_train)

    p = sub.add_parser("branchnav", help="router simulation")
    nav_sub = p.add_subparsers(dest="nav_command", required=True)
    p = nav_sub.add_parser("simulate",
                           help="route a stream of token-frequency vectors")
    p.add_argument("--branches", type=int, required=True)
    p.add_argument("--stream", required=True,
                   help="CTNS float32 [N, K] of frequency rows")
    p.add_argument("--buffer", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--state", default=None, help="also save the router state")
    p.set_defaults(func=_cmd_branchnav)

    p = sub.add_parser("recon", help="branch-grid reconstruction")
    p.add_argument("--y", required=True)
    p.add_argument("--sens", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--trace", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_recon)

    p = sub.add_parser("metrics", help="SSIM/PSNR/NMSE report")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("sampler", help="adaptive sample balancing draws")
    p.add_argument("--manifest", required=True)
    p.add_argument("--categories", required=True,
                   help="comma-separated category names")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--compound", default=None,
                   help="previous sampler output JSON to compound weights from")
    p.set_defaults(func=_cmd_sampler)

    p = sub.add_parser("experiment", help="end-to-end experiment driver")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--independent-routing", action="store_true")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level))
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
