import argparse
import logging
import sys
from pathlib import Path
from typing import List, Sequence

import numpy as np
import pandas as pd

from motion_emd.attention import FlowGuidedAttention, attention_sequence
from motion_emd.config import PipelineConfig
from motion_emd.emd_core import decompose_trace, feature_names, write_imf_csv
from motion_emd.errors import ConfigError, MotionEmdError, UsageError
from motion_emd.flow_core import GrayFrame, estimate_flow, magnitude
from motion_emd.helpers import read_image, write_flow, write_pgm
from motion_emd.motion_traces import SERIES_NAMES, read_trace_csv, write_trace_csv
from motion_emd.nn_core import CongestionClassifier
from motion_emd.pipeline import (SyntheticSceneConfig, TraceDataset, evaluate,
                                 generate_synthetic_clip, load_manifest, sweep_descriptors,
                                 sweep_imfs, train, write_sweep_csv, write_synthetic_dataset)
from motion_emd.pipeline.dataset import clip_trace, ingest_frames
from motion_emd.pipeline.sweeps import DEFAULT_IMF_COUNTS, DEFAULT_MASKS

"""
Command-line entry point: one verb per pipeline stage.
Exit codes: 0 success, 1 usage error, 2 data or model error.
"""

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-4
# feature settings written into model files so eval featurizes like train did
MODEL_META_KEYS = ('n_imfs', 'descriptor_mask', 'direction_stats', 'sd_threshold',
                   'max_sift_iters', 'boundary', 'n_mirror')


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting"""

    def error(self, message):
        raise UsageError("{}: {}".format(self.prog, message))


def _default(name: str) -> str:
    value = getattr(PipelineConfig, name)
    if isinstance(value, tuple):
        value = ','.join(str(v) for v in value)
    return 'default: {} (config key {})'.format(value, name)


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma separated integers, got {!r}".format(text))


def _add_common(parser: argparse.ArgumentParser, out_help: str) -> None:
    parser.add_argument('--config', type=Path, default=None,
                        help='flat key = value config file (default: built-in defaults)')
    parser.add_argument('--seed', type=int, default=0, help='random seed (default: 0)')
    parser.add_argument('--out', type=Path, default=None, help=out_help)


def _add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--manifest', type=Path, default=None,
                        help='CSV with columns clip_id,frame_dir,label,split')
    parser.add_argument('--workers', type=int, default=None, help=_default('n_workers'))
    parser.add_argument('--epochs', type=int, default=None, help=_default('epochs'))


def build_parser() -> CliParser:
    parser = CliParser(prog='motion-emd',
                       description='Traffic congestion classification from motion-trace EMD '
                                   'features.')
    parser.add_argument('--verbose', action='store_true', help='debug logging')
    parser.add_argument('--quiet', action='store_true', help='warnings and errors only')
    verbs = parser.add_subparsers(dest='verb', metavar='verb')
    verbs.required = True

    synth = verbs.add_parser('synth', help='render a synthetic scene-disjoint dataset')
    _add_common(synth, 'output directory for clips/, manifest.csv and config.cfg')
    synth.add_argument('--clips', type=int, default=300, help='number of clips (default: 300)')
    synth.add_argument('--frame-size', type=int, default=64,
                       help='frame side in pixels (default: 64)')
    synth.add_argument('--frames', type=int, default=None, help=_default('n_frames'))
    synth.add_argument('--noise', type=float, default=0.0,
                       help='std of additive pixel noise (default: 0.0)')

    flow = verbs.add_parser('flow', help='dense optical flow between two frames')
    _add_common(flow, 'FLO1 flow dump')
    flow.add_argument('--prev', type=Path, required=True, help='first frame (PGM/PNG)')
    flow.add_argument('--next', type=Path, required=True, help='second frame (PGM/PNG)')
    flow.add_argument('--frame-size', type=int, default=None,
                      help='resize both frames to this side (default: native size)')

    trace = verbs.add_parser('trace', help='motion trace CSV of one frame directory')
    _add_common(trace, 'trace CSV')
    trace.add_argument('--frames', type=Path, required=True, help='directory of numbered frames')

    emd = verbs.add_parser('emd', help='decompose a motion trace into IMFs')
    _add_common(emd, "IMF CSV; with --series all, one file per series named <stem>_<series>")
    emd.add_argument('--trace', type=Path, required=True, help='trace CSV')
    emd.add_argument('--n-imfs', type=int, default=None, help=_default('n_imfs'))
    emd.add_argument('--series', choices=SERIES_NAMES + ('all',), default='mu_m',
                     help='series to decompose (default: mu_m)')

    featurize = verbs.add_parser('featurize', help='EMD feature vectors of every manifest clip')
    _add_common(featurize, 'feature CSV')
    featurize.add_argument('--manifest', type=Path, default=None,
                           help='CSV with columns clip_id,frame_dir,label,split')
    featurize.add_argument('--n-imfs', type=int, default=None, help=_default('n_imfs'))
    featurize.add_argument('--mask', default=None, help=_default('descriptor_mask'))
    featurize.add_argument('--workers', type=int, default=None, help=_default('n_workers'))

    train_verb = verbs.add_parser('train', help='train the classifier on the train split')
    _add_common(train_verb, 'parameter file of the trained model')
    _add_dataset_flags(train_verb)
    train_verb.add_argument('--n-imfs', type=int, default=None, help=_default('n_imfs'))
    train_verb.add_argument('--mask', default=None, help=_default('descriptor_mask'))
    train_verb.add_argument('--log', type=Path, default=None,
                            help='training-log CSV (default: <out>.log.csv)')

    eval_verb = verbs.add_parser('eval', help='metrics report of a trained model')
    _add_common(eval_verb, 'JSON report (default: standard output)')
    eval_verb.add_argument('--manifest', type=Path, default=None,
                           help='CSV with columns clip_id,frame_dir,label,split')
    eval_verb.add_argument('--model', type=Path, default=None, help='parameter file')
    eval_verb.add_argument('--split', choices=('train', 'val', 'test'), default='test',
                           help='split to evaluate (default: test)')
    eval_verb.add_argument('--workers', type=int, default=None, help=_default('n_workers'))

    sweep_n = verbs.add_parser('sweep-imfs', help='accuracy against the number of IMFs')
    _add_common(sweep_n, 'sweep CSV')
    _add_dataset_flags(sweep_n)
    sweep_n.add_argument('--n-list', type=_int_list,
                         default=list(DEFAULT_IMF_COUNTS),
                         help='IMF counts (default: {})'.format(
                             ','.join(str(n) for n in DEFAULT_IMF_COUNTS)))

    sweep_d = verbs.add_parser('sweep-desc', help='accuracy against descriptor subsets')
    _add_common(sweep_d, 'sweep CSV')
    _add_dataset_flags(sweep_d)
    sweep_d.add_argument('--masks', default=','.join(DEFAULT_MASKS),
                         help='mask names (default: {})'.format(','.join(DEFAULT_MASKS)))

    attn = verbs.add_parser('attn-demo', help='flow-guided attention map plus gradient check')
    _add_common(attn, 'spatial attention map (PGM)')
    attn.add_argument('--frames-out', type=Path, default=None,
                      help='directory for one attention map per frame pair of a clip')
    attn.add_argument('--channels', type=int, default=None, help=_default('attn_channels'))
    attn.add_argument('--size', type=int, default=None, help=_default('attn_size'))
    return parser


def load_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config is not None else PipelineConfig()
    overrides = {
        'n_workers': getattr(args, 'workers', None),
        'epochs': getattr(args, 'epochs', None),
        'n_imfs': getattr(args, 'n_imfs', None),
        'descriptor_mask': getattr(args, 'mask', None),
        'attn_channels': getattr(args, 'channels', None),
        'attn_size': getattr(args, 'size', None),
    }
    try:
        return cfg.override(**overrides).validate()
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


def _require(args: argparse.Namespace, *names: str) -> None:
    """Flags checked after the config loaded, so config problems surface first"""
    for name in names:
        if getattr(args, name, None) is None:
            raise UsageError("{}: --{} is required".format(args.verb, name.replace('_', '-')))


def _dataset(args: argparse.Namespace, cfg: PipelineConfig, records=None) -> TraceDataset:
    records = records if records is not None else load_manifest(args.manifest)
    return TraceDataset.from_records(records, cfg.n_frames, cfg.frame_size,
                                     cfg.flow_params(), cfg.direction_stats, cfg.n_workers)


def _prepare_out(path: Path) -> None:
    if path is not None and path.parent != Path(''):
        path.parent.mkdir(parents=True, exist_ok=True)


def cmd_synth(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    _require(args, 'out')
    n_frames = args.frames or cfg.n_frames
    write_synthetic_dataset(args.out, args.clips, args.seed, args.frame_size, n_frames, args.noise)
    (args.out / 'config.cfg').write_text(
        cfg.override(frame_size=args.frame_size, n_frames=n_frames).to_text(), encoding='utf-8')
    return 0


def cmd_flow(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    _require(args, 'out')
    prev = GrayFrame.from_array(read_image(args.prev, args.frame_size))
    nxt = GrayFrame.from_array(read_image(args.next, args.frame_size))
    field = estimate_flow(prev, nxt, cfg.flow_params())
    _prepare_out(args.out)
    write_flow(args.out, field.u, field.v)
    print('mean_u {:.6f} mean_v {:.6f} mean_magnitude {:.6f}'.format(
        field.u.mean(), field.v.mean(), magnitude(field).mean()))
    return 0


def cmd_trace(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    _require(args, 'out')
    frames = ingest_frames(args.frames, cfg.n_frames, cfg.frame_size)
    _prepare_out(args.out)
    write_trace_csv(clip_trace(frames, cfg.flow_params(), cfg.direction_stats), args.out)
    return 0


def cmd_emd(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    _require(args, 'out')
    decompositions = decompose_trace(read_trace_csv(args.trace), cfg.sift_config())
    _prepare_out(args.out)
    if args.series != 'all':
        write_imf_csv(decompositions[SERIES_NAMES.index(args.series)], args.out)
        return 0
    for name, decomposition in zip(SERIES_NAMES, decompositions):
        write_imf_csv(decomposition, args.out.with_name(
            '{}_{}{}'.format(args.out.stem, name, args.out.suffix)))
    return 0


def cmd_featurize(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    _require(args, 'manifest', 'out')
    records = load_manifest(args.manifest)
    dataset = _dataset(args, cfg, records)
    features = dataset.features(cfg.sift_config(), cfg.mask(), cfg.n_workers)
    table = pd.DataFrame(features, columns=feature_names(cfg.n_imfs))
    table.insert(0, 'split', [r.split for r in records])
    table.insert(0, 'label', [r.label for r in records])
    table.insert(0, 'clip_id', [r.clip_id for r in records])
    _prepare_out(args.out)
    table.to_csv(args.out, index=False, float_format='%.17g')
    return 0


def _model_meta(cfg: PipelineConfig, seed: int) -> dict:
    meta = {key: getattr(cfg, key) for key in MODEL_META_KEYS}
    meta['descriptor_mask'] = ','.join(cfg.mask())
    meta['seed'] = seed
    return meta


def cmd_train(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    _require(args, 'manifest', 'out')
    dataset = _dataset(args, cfg)
    model, log = train(dataset, cfg.model_config(), cfg.train_config(), args.seed,
                       cfg.sift_config(), cfg.mask(), cfg.n_workers)
    _prepare_out(args.out)
    model.save(args.out, _model_meta(cfg, args.seed))
    log.write_csv(args.log or args.out.with_name(args.out.name + '.log.csv'))
    logger.info("Final training loss {:.4f}".format(log.final_loss))
    return 0


def cmd_eval(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    _require(args, 'manifest', 'model')
    try:
        model, meta = CongestionClassifier.load(args.model, cfg.model_config())
    except (OSError, ValueError) as e:
        raise MotionEmdError("Cannot load model {}: {}".format(args.model, e)) from e
    stored = {key: meta[key] for key in MODEL_META_KEYS if key in meta}
    cfg = PipelineConfig.from_values(stored, cfg, str(args.model)) if stored else cfg
    dataset = _dataset(args, cfg)
    report = evaluate(model, dataset, args.split, cfg.sift_config(), cfg.mask(), cfg.n_workers)
    if args.out is None:
        print(report.to_json())
    else:
        _prepare_out(args.out)
        args.out.write_text(report.to_json() + '\n', encoding='utf-8')
    return 0


def cmd_sweep_imfs(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    _require(args, 'manifest', 'out')
    table = sweep_imfs(_dataset(args, cfg), args.n_list, cfg.model_config(), cfg.train_config(),
                       args.seed, cfg.sift_config(), cfg.mask(), cfg.n_workers)
    _prepare_out(args.out)
    write_sweep_csv(table, args.out)
    return 0


def cmd_sweep_desc(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    _require(args, 'manifest', 'out')
    masks = [mask.strip() for mask in args.masks.split(',') if mask.strip()]
    table = sweep_descriptors(_dataset(args, cfg), masks, cfg.model_config(),
                              cfg.train_config(), args.seed, cfg.sift_config(), cfg.n_workers)
    _prepare_out(args.out)
    write_sweep_csv(table, args.out)
    return 0


def cmd_attn_demo(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    _require(args, 'out')
    rng = np.random.default_rng(args.seed)
    model = FlowGuidedAttention.initialize(cfg.attn_channels, cfg.attn_channels,
                                           cfg.attn_reduction, cfg.attn_kernel, rng)
    n_frames = cfg.n_frames if args.frames_out is not None else 2
    frames, _ = generate_synthetic_clip(
        SyntheticSceneConfig.for_regime('medium', seed=args.seed, n_frames=n_frames))
    maps = attention_sequence(frames, model, cfg.attn_size, cfg.flow_params(), rng)
    _prepare_out(args.out)
    write_pgm(args.out, maps[0])
    if args.frames_out is not None:
        args.frames_out.mkdir(parents=True, exist_ok=True)
        for index, attention_map in enumerate(maps):
            write_pgm(args.frames_out / 'attn_{:03d}.pgm'.format(index), attention_map)

    errors = model.gradient_check(args.seed)
    for name, error in errors.items():
        print('{:8s} {:.3e}'.format(name, error))
    worst = max(errors.values())
    print('max relative error {:.3e} ({} < {:g})'.format(
        worst, 'PASS' if worst < GRADIENT_TOLERANCE else 'FAIL', GRADIENT_TOLERANCE))
    if worst >= GRADIENT_TOLERANCE:
        logger.error("Attention gradient check failed: {:.3e} >= {:g}".format(
            worst, GRADIENT_TOLERANCE))
        return 2
    return 0


COMMANDS = {
    'synth': cmd_synth,
    'flow': cmd_flow,
    'trace': cmd_trace,
    'emd': cmd_emd,
    'featurize': cmd_featurize,
    'train': cmd_train,
    'eval': cmd_eval,
    'sweep-imfs': cmd_sweep_imfs,
    'sweep-desc': cmd_sweep_desc,
    'attn-demo': cmd_attn_demo,
}


def run(argv: Sequence[str]) -> int:
    """
    Parse argv and dispatch to the named verb.
    :return: 0 on success, 1 on usage error, 2 on data or model error
    """
    try:
        args = build_parser().parse_args(list(argv))
    except UsageError as e:
        logger.error(str(e))
        return 1
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else 0
    root = logging.getLogger()
    root.setLevel(logging.DEBUG if args.verbose else logging.WARNING if args.quiet
                  else logging.INFO)
    try:
        cfg = load_config(args)
        return COMMANDS[args.verb](args, cfg)
    except UsageError as e:
        logger.error(str(e))
        return 1
    except (MotionEmdError, OSError) as e:
        logger.error(str(e))
        return 2


def main():
    """Console-script entry point."""
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
