import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from pds.config import settings
from pds.config.settings import setup_logging
from pds.core.exceptions import DivergenceError, PDSError, VerificationError
from pds.core.factory import create_experiment
from pds.core.rng import RngStream
from pds.models.experiment import ExperimentConfig
from pds.models.masks import Preconditioner
from pds.services import alpha_fit
from pds.services.bench import run_bench
from pds.services.diagnostics import TrajectoryRecorder, energy_distance, moment_check
from pds.services.loaders import DatasetSource, ValueScaling, load_dataset, subsample, synthetic_power_law_dataset
from pds.services.preconditioners import build_masks, mask_summary
from pds.services.storage import save_mask, save_pixmap, save_tensor
from pds.services.verification import SUITES, run_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3
EXIT_VERIFICATION = 4


def _print_table(rows) -> pd.DataFrame:
    table = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(rows)
    print(table.to_string(index=False))
    return table


def _resolve_alpha(args) -> float:
    if args.alpha is not None:
        return args.alpha
    if args.alpha_fit and args.T:
        observations = alpha_fit.load_observations(args.alpha_fit)
        fitted = alpha_fit.fit(observations, args.variant)
        prediction = alpha_fit.predict_alpha(fitted, args.T)
        logger.info(f"alpha={prediction.alpha:.6g} predicted for T={args.T} (extrapolated={prediction.extrapolated})")
        return prediction.alpha
    return 2.0


def cmd_build_masks(args) -> int:
    rng = RngStream(args.seed, 1)
    alpha = _resolve_alpha(args)
    if args.synthetic:
        dataset = synthetic_power_law_dataset(args.subsample, args.shape, rng)
    else:
        if args.dataset is None:
            raise PDSError("build-masks needs --dataset or --synthetic")
        source = DatasetSource(Path(args.dataset), tuple(args.shape) if args.shape else None, scaling=ValueScaling(args.scaling))
        dataset = subsample(load_dataset(source), args.subsample, rng)

    freq, pixel = build_masks(dataset, alpha)
    out = Path(args.out)
    written = []
    if args.kind in ('both', 'frequency'):
        written.append((save_mask(out / 'frequency.pdsm', freq), freq))
    if args.kind in ('both', 'pixel'):
        written.append((save_mask(out / 'pixel.pdsm', pixel), pixel))
    _print_table([{**mask_summary(mask), 'path': str(path)} for path, mask in written])
    return EXIT_OK


def _config_from_args(args) -> ExperimentConfig:
    overrides = {
        'run.seed': args.seed,
        'run.n_chains': args.chains,
        'run.out': args.out,
        'run.pgm': args.pgm or None,
        'schedule.T': args.T,
        'schedule.accel': args.accel,
        'sampler.alpha': args.alpha,
        'sampler.omega': args.omega,
        'sampler.gradient_order': args.gradient_order,
        'sampler.initial_law': args.initial_law,
        'sampler.mode': args.mode,
        'sampler.solenoidal': args.solenoidal,
    }
    return ExperimentConfig.load(args.config, overrides)


def cmd_sample(args) -> int:
    config = _config_from_args(args)
    experiment = create_experiment(config)
    recorder = TrajectoryRecorder(experiment.schedule.T)
    batch = experiment.pipeline().run(config.run.n_chains, experiment.rng, recorder, strict=False)

    report = recorder.report()
    report.divergences = [str(d) for d in batch.divergences]
    survivors = batch.survivors
    if len(survivors) >= 2:
        try:
            report.moments = moment_check(survivors, experiment.oracle)
            exact = experiment.oracle.sample_exact(RngStream(config.run.seed, 2), len(survivors))
            report.distances['energy_to_exact'] = energy_distance(survivors, exact)
        except (PDSError, NotImplementedError) as e:
            logger.info(f"No reference moments for this target: {e}")

    out = Path(config.run.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, x in enumerate(batch.samples):
        if np.all(np.isfinite(x)):
            save_tensor(out / f"sample_{i:05d}.pdst", x)
            if config.run.pgm:
                for c, channel in enumerate(x):
                    save_pixmap(out / f"sample_{i:05d}_c{c}.pgm", channel)
    (out / 'report.txt').write_text('\n'.join(report.to_lines()) + '\n', encoding='utf-8')
    (out / 'report.json').write_text(json.dumps(report.to_dict(), indent=2), encoding='utf-8')
    (out / 'config.json').write_text(config.model_dump_json(indent=2), encoding='utf-8')
    logger.info(f"Wrote {len(survivors)} samples and report to {out}")
    print('\n'.join(report.to_lines()))

    if batch.divergences:
        logger.error(f"✗ {len(batch.divergences)} chains diverged, first: {batch.divergences[0]}")
        return EXIT_DIVERGENCE
    return EXIT_OK


def cmd_verify(args) -> int:
    names = sorted(SUITES) if args.suite == 'all' else [args.suite]
    results = [r for name in names for r in run_suite(name, args.seed)]
    for r in results:
        print(r.to_line())
    _print_table([vars(r) for r in results])
    failed = [r for r in results if not r.passed]
    if failed:
        raise VerificationError(f"{len(failed)} of {len(results)} checks failed")
    return EXIT_OK


def cmd_fit_alpha(args) -> int:
    if args.observations:
        observations = alpha_fit.load_observations(args.observations)
    else:
        observations = alpha_fit.as_observations(
            alpha_fit.REFERENCE_CIFAR10 if args.reference == 'cifar10' else alpha_fit.REFERENCE_CELEBA64
        )
    fitted = alpha_fit.fit(observations, args.variant)
    _print_table([{'variant': fitted.variant.value, 'a': fitted.a, 'b': fitted.b, 'r_squared': fitted.r_squared}])
    if args.predict_T:
        predictions = [alpha_fit.predict_alpha(fitted, T) for T in args.predict_T]
        _print_table([vars(p) for p in predictions])
    return EXIT_OK


def cmd_bench(args) -> int:
    shape = tuple(args.shape)
    if args.identity:
        preconditioner = Preconditioner()
    else:
        freq, pixel = build_masks(synthetic_power_law_dataset(8, shape, RngStream(args.seed, 1)), args.alpha or 2.0)
        preconditioner = Preconditioner(freq, pixel)
    _print_table(run_bench(shape, preconditioner, args.iterations, args.latency, args.seed))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=settings.PDS_SEED)
    common.add_argument('--log-level', default=None)

    parser = argparse.ArgumentParser(prog='pds', description='Preconditioned diffusion sampling with analytic score oracles')
    commands = parser.add_subparsers(dest='command', required=True)

    masks = commands.add_parser('build-masks', parents=[common], help='Build frequency and pixel masks from a dataset')
    masks.add_argument('--dataset')
    masks.add_argument('--synthetic', action='store_true')
    masks.add_argument('--shape', type=int, nargs=3, default=[3, 32, 32])
    masks.add_argument('--alpha', type=float)
    masks.add_argument('--alpha-fit', dest='alpha_fit')
    masks.add_argument('--T', type=int)
    masks.add_argument('--variant', choices=[v.value for v in alpha_fit.FitVariant], default='both_masks')
    masks.add_argument('--subsample', type=int, default=settings.PDS_SUBSAMPLE)
    masks.add_argument('--scaling', choices=[s.value for s in ValueScaling], default='unit')
    masks.add_argument('--kind', choices=['both', 'frequency', 'pixel'], default='both')
    masks.add_argument('--out', default='masks')
    masks.set_defaults(handler=cmd_build_masks)

    sample = commands.add_parser('sample', parents=[common], help='Run a sampling experiment')
    sample.add_argument('--config')
    sample.add_argument('--out')
    sample.add_argument('--chains', type=int)
    sample.add_argument('--T', type=int)
    sample.add_argument('--accel', type=float)
    sample.add_argument('--alpha', type=float)
    sample.add_argument('--omega', type=float)
    sample.add_argument('--gradient-order', dest='gradient_order', choices=['mmt', 'mtm'])
    sample.add_argument('--initial-law', dest='initial_law', choices=['ve', 'unit'])
    sample.add_argument('--mode', choices=['corrector_only', 'predictor_only', 'predictor_corrector'])
    sample.add_argument('--solenoidal')
    sample.add_argument('--pgm', action='store_true')
    sample.set_defaults(handler=cmd_sample)

    verify = commands.add_parser('verify', parents=[common], help='Run a property suite')
    verify.add_argument('--suite', choices=sorted(SUITES) + ['all'], default='all')
    verify.set_defaults(handler=cmd_verify)

    fit = commands.add_parser('fit-alpha', parents=[common], help='Fit the alpha-T law')
    fit.add_argument('observations', nargs='?')
    fit.add_argument('--reference', choices=['cifar10', 'celeba64'], default='cifar10')
    fit.add_argument('--variant', choices=[v.value for v in alpha_fit.FitVariant], default='freq_only')
    fit.add_argument('--predict-T', dest='predict_T', type=float, nargs='*')
    fit.set_defaults(handler=cmd_fit_alpha)

    bench = commands.add_parser('bench', parents=[common], help='Time vanilla vs preconditioned iterations')
    bench.add_argument('--shape', type=int, nargs=3, default=[3, 256, 256])
    bench.add_argument('--iterations', type=int, default=5)
    bench.add_argument('--latency', type=float)
    bench.add_argument('--alpha', type=float)
    bench.add_argument('--identity', action='store_true')
    bench.set_defaults(handler=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    setup_logging(args.log_level)

    try:
        return args.handler(args)
    except VerificationError as e:
        logger.error(f"✗ Verification failed: {e}")
        return EXIT_VERIFICATION
    except DivergenceError as e:
        logger.error(f"✗ Diverged: {e}")
        return EXIT_DIVERGENCE
    except (PDSError, ValueError, OSError) as e:
        logger.error(f"✗ Failed: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
