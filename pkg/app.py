"""
DEAL - command-line entry point for degradation, training, enhancement and evaluation.
"""
import argparse
import json
import logging
import os
import sys
from typing import Callable, List, Optional

import numpy as np

from autodiff.gradcheck import run_suite
from config import config, load_train_config
from degradation.compose import parse_degradation_spec
from networks.classifier import DegradationClassifier
from networks.enhancer import DualInteractionNet, parameter_census
from services.dataset_service import DatasetService
from services.evaluation_service import EvaluationService
from services.trainer_service import TrainerService, ablate_data_usage, ablate_strategies, load_enhancer
from storage.checkpoint import load_checkpoint
from storage.images import list_images
from storage.runlog import RunLog
from utils.errors import DivergenceError
from utils.helpers import split_values

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_DIVERGED = 2


class CliParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_FAILURE)


def cmd_synth(args: argparse.Namespace) -> int:
    path = DatasetService.write_synthetic_dataset(args.out, args.count, args.size, args.seed, bit_depth=args.bit_depth)
    print(path)
    return EXIT_OK


def cmd_degrade(args: argparse.Namespace) -> int:
    if args.spec:
        spec = args.spec
    elif args.family is None:
        raise ValueError("either --family or --spec is required")
    elif args.family == 'identity':
        spec = 'identity'
    else:
        if args.level is None:
            raise ValueError("--level is required with --family")
        spec = load_train_config(args.config).bank.spec_for(args.family, args.level)
    parse_degradation_spec(spec)
    DatasetService.degrade_directory(args.input, args.out, spec, args.seed)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_train_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    pairs, _ = DatasetService.load_pairs(args.data)
    if args.out is None:
        args.out = os.path.join(config.OUTPUT_DIR, 'model.ckpt')
    log_path = args.log or os.path.splitext(args.out)[0] + '.jsonl'

    if args.resume:
        ckpt = load_checkpoint(args.resume)
        trainer = TrainerService.from_checkpoint(ckpt)
        logger.info(f"Resuming from {args.resume}; the checkpoint's config replaces --config")
    else:
        trainer = TrainerService(cfg)

    with RunLog(log_path, append=bool(args.resume)) as run_log:
        result = trainer.train(pairs, run_log=run_log, checkpoint_path=args.out)
    if result.epoch_losses:
        logger.info(f"Final epoch loss {result.epoch_losses[-1]:.5f}; checkpoint {args.out}, log {log_path}")
    return EXIT_OK


def cmd_enhance(args: argparse.Namespace) -> int:
    enhancer = load_enhancer(load_checkpoint(args.ckpt))
    EvaluationService.enhance_images(enhancer, list_images(args.input), args.out)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    enhancer = load_enhancer(load_checkpoint(args.ckpt))
    pairs, _ = DatasetService.load_pairs(args.data)
    report = EvaluationService.evaluate(enhancer, pairs, args.degradation, seed=args.seed)
    report.write_csv(args.report)
    report.write_json(args.summary or os.path.splitext(args.report)[0] + '.json')
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    results = run_suite(seed=args.seed, instances=args.instances)
    failed = [r for r in results if not r.passed]
    for result in failed:
        print(f"error: gradient check failed: {result}", file=sys.stderr)
    print(f"gradcheck: {len(results) - len(failed)}/{len(results)} passed")
    return EXIT_OK if not failed else EXIT_FAILURE


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = load_train_config(args.config)
    train_pairs, _ = DatasetService.load_pairs(args.data)
    test_pairs, _ = DatasetService.load_pairs(args.test)
    sizes = [int(s) for s in split_values(args.sizes)] if args.sizes else list(config.DATA_USAGE_SIZES)
    table = {
        'strategies': ablate_strategies(train_pairs, test_pairs, cfg),
        'data_usage': {str(k): v for k, v in ablate_data_usage(train_pairs, test_pairs, cfg, sizes).items()},
    }
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, 'w', encoding='utf-8') as handle:
        json.dump(table, handle, indent=2, sort_keys=True)
    logger.info(f"Wrote ablation tables to {args.out}")
    return EXIT_OK


def cmd_census(args: argparse.Namespace) -> int:
    cfg = load_train_config(args.config)
    rng = np.random.default_rng(cfg.seed)
    enhancer = DualInteractionNet(rng, width=cfg.width, time_steps=cfg.time_steps, tau=cfg.tau, v_th=cfg.v_th)
    classifier = DegradationClassifier(cfg.steps, cfg.bank.n_ops, rng)
    for name, count in parameter_census(enhancer).items():
        print(f"enhancer.{name}\t{count}")
    print(f"generator.total\t{classifier.num_parameters()}")
    return EXIT_OK


def build_parser() -> CliParser:
    parser = CliParser(prog='deal', description='Adversarial thermal image enhancement toolkit.')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', help='write synthetic thermal-like scenes and a manifest')
    p.add_argument('--out', required=True)
    p.add_argument('--count', type=int, default=config.SYNTH_COUNT)
    p.add_argument('--size', type=int, default=config.SYNTH_SIZE)
    p.add_argument('--seed', type=int, default=config.DEFAULT_SEED)
    p.add_argument('--bit-depth', type=int, choices=(8, 16), default=8)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser('degrade', help='apply one banked degradation to a directory')
    p.add_argument('--in', dest='input', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--family', choices=('identity', 'stripe', 'lowres', 'contrast'))
    p.add_argument('--level', type=int)
    p.add_argument('--spec', help='explicit degradation spec, e.g. stripe:0.15+lowres:2')
    p.add_argument('--config')
    p.add_argument('--seed', type=int, default=config.DEFAULT_SEED)
    p.set_defaults(handler=cmd_degrade)

    p = sub.add_parser('train', help='run dynamic adversarial training')
    p.add_argument('--data', required=True)
    p.add_argument('--config')
    p.add_argument('--out', help='checkpoint path, rewritten every epoch (default: DEAL_OUTPUT_DIR/model.ckpt)')
    p.add_argument('--resume', help='checkpoint to resume from')
    p.add_argument('--log', help='run log path (default: next to the checkpoint)')
    p.add_argument('--seed', type=int)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser('enhance', help='enhance every image in a directory')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--in', dest='input', required=True)
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_enhance)

    p = sub.add_parser('eval', help='corrupt, enhance and score a dataset')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--data', required=True)
    p.add_argument('--degradation', help='degradation spec; omit to use paired degraded images')
    p.add_argument('--report', required=True, help='CSV output path')
    p.add_argument('--summary', help='JSON summary path (default: next to the report)')
    p.add_argument('--seed', type=int, default=config.DEFAULT_SEED)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser('gradcheck', help='finite-difference check of every differentiable op')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--instances', type=int, default=3)
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser('ablate', help='training-strategy and data-usage ablations')
    p.add_argument('--data', required=True)
    p.add_argument('--test', required=True)
    p.add_argument('--config')
    p.add_argument('--out', required=True)
    p.add_argument('--sizes', help='comma-separated training set sizes')
    p.set_defaults(handler=cmd_ablate)

    p = sub.add_parser('census', help='print parameter counts of both networks')
    p.add_argument('--config')
    p.set_defaults(handler=cmd_census)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        config.validate_log_level()
        logging.basicConfig(level=config.LOG_LEVEL, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
