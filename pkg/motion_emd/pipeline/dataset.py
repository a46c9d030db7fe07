"""
Clip manifests, frame ingestion and per-clip feature extraction.
"""

import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from motion_emd.emd_core import EmdFeatureVector, SiftConfig, featurize
from motion_emd.errors import DatasetError, MotionEmdError
from motion_emd.flow_core import FarnebackParams, FlowField, GrayFrame, estimate_flow
from motion_emd.helpers import list_frames, read_image
from motion_emd.motion_traces import SERIES_NAMES, MotionTrace, build_trace
from motion_emd.pipeline.synthetic import REGIMES, SyntheticSceneConfig, generate_synthetic_clip, \
    write_clip

logger = logging.getLogger(__name__)

SPLITS = ('train', 'val', 'test')
MANIFEST_COLUMNS = ('clip_id', 'frame_dir', 'label', 'split')
CLIPS_PER_SCENE = 6

DESCRIPTOR_MASKS: Dict[str, Tuple[str, ...]] = {
    'all': SERIES_NAMES,
    'no_mu_m': ('sigma_m', 'mu_d', 'sigma_d'),
    'no_sigma_m': ('mu_m', 'mu_d', 'sigma_d'),
    'no_mu_d': ('mu_m', 'sigma_m', 'sigma_d'),
    'no_sigma_d': ('mu_m', 'sigma_m', 'mu_d'),
    'magnitude': ('mu_m', 'sigma_m'),
    'direction': ('mu_d', 'sigma_d'),
}


@dataclass(frozen=True)
class ClipRecord:
    """One manifest row; the scene id is the clip_id prefix before the first '_'"""
    clip_id: str
    frame_dir: Path
    label: int
    split: str

    def __post_init__(self) -> None:
        if self.label not in range(len(REGIMES)):
            raise DatasetError("Clip {}: label {} is not one of 0, 1, 2".format(
                self.clip_id, self.label))
        if self.split not in SPLITS:
            raise DatasetError("Clip {}: split {!r} is not one of {}".format(
                self.clip_id, self.split, SPLITS))

    @property
    def scene_id(self) -> str:
        return self.clip_id.split('_', 1)[0]


def _parse_label(value: str, clip_id: str) -> int:
    value = str(value).strip().lower()
    if value in REGIMES:
        return REGIMES.index(value)
    try:
        return int(value)
    except ValueError:
        raise DatasetError("Clip {}: unreadable label {!r}".format(clip_id, value))


def check_scene_disjoint(records: Iterable[ClipRecord]) -> None:
    """Raise DatasetError when one scene contributes clips to several splits"""
    seen: Dict[str, str] = {}
    for record in records:
        split = seen.setdefault(record.scene_id, record.split)
        if split != record.split:
            raise DatasetError("Scene {} appears in both {} and {} splits".format(
                record.scene_id, split, record.split))


def load_manifest(path: Union[str, Path]) -> List[ClipRecord]:
    """
    Read a clip_id,frame_dir,label,split CSV.
    Relative frame directories resolve against the manifest's directory.
    :param path: manifest file
    :return: records in file order
    """
    path = Path(path)
    try:
        table = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetError("Cannot read manifest {}: {}".format(path, e)) from e
    missing = [column for column in MANIFEST_COLUMNS if column not in table.columns]
    if missing:
        raise DatasetError("Manifest {} lacks columns {}".format(path, missing))
    records = []
    for row in table.itertuples(index=False):
        frame_dir = Path(row.frame_dir)
        if not frame_dir.is_absolute():
            frame_dir = path.parent / frame_dir
        records.append(ClipRecord(row.clip_id, frame_dir, _parse_label(row.label, row.clip_id),
                                  row.split.strip()))
    if len({record.clip_id for record in records}) != len(records):
        raise DatasetError("Manifest {} repeats clip ids".format(path))
    check_scene_disjoint(records)
    logger.info("Loaded {} clips from {}".format(len(records), path))
    return records


def write_manifest(records: Sequence[ClipRecord], path: Union[str, Path]) -> None:
    path = Path(path)
    rows = []
    for record in records:
        frame_dir = record.frame_dir
        try:
            frame_dir = frame_dir.relative_to(path.parent)
        except ValueError:
            pass
        rows.append((record.clip_id, frame_dir.as_posix(), record.label, record.split))
    pd.DataFrame(rows, columns=list(MANIFEST_COLUMNS)).to_csv(path, index=False)


def sample_indices(n_available: int, n_frames: int) -> np.ndarray:
    """Uniform temporal sampling: floor(k * n_available / n_frames), k < n_frames"""
    return (np.arange(n_frames) * n_available) // n_frames


def ingest_frames(frame_dir: Union[str, Path], n_frames: int = 16, frame_size: int = 224,
                  name: str = None) -> List[GrayFrame]:
    """
    Decode, sample, resize and convert the frames of one directory.
    :param frame_dir: numbered PGM/PNG files, lexicographic order is temporal order
    :param n_frames: T
    :param frame_size: output side in pixels, None keeps the native size
    :param name: clip name used in error messages
    :return: T GrayFrames in temporal order
    """
    frame_dir = Path(frame_dir)
    name = name or frame_dir.name
    if not frame_dir.is_dir():
        raise DatasetError("Clip {}: frame directory {} does not exist".format(name, frame_dir))
    files = list_frames(frame_dir)
    if len(files) < n_frames:
        raise DatasetError("Clip {}: insufficient frames in {} ({} found, {} needed)".format(
            name, frame_dir, len(files), n_frames))
    frames = []
    for index in sample_indices(len(files), n_frames):
        try:
            frames.append(GrayFrame.from_array(read_image(files[index], frame_size)))
        except (OSError, MotionEmdError) as e:
            raise DatasetError("Clip {}: bad frame {}: {}".format(name, files[index], e)) from e
    return frames


def ingest_clip(record: ClipRecord, n_frames: int = 16, frame_size: int = 224) -> List[GrayFrame]:
    return ingest_frames(record.frame_dir, n_frames, frame_size, record.clip_id)


def clip_flows(frames: Sequence[GrayFrame], flow_params: FarnebackParams = FarnebackParams()
               ) -> List[FlowField]:
    return [estimate_flow(prev, nxt, flow_params) for prev, nxt in zip(frames[:-1], frames[1:])]


def clip_trace(frames: Sequence[GrayFrame], flow_params: FarnebackParams = FarnebackParams(),
               direction_stats: str = 'arithmetic') -> MotionTrace:
    return build_trace(clip_flows(frames, flow_params), direction_stats)


def parse_mask(text: Union[str, Sequence[str]]) -> Tuple[str, ...]:
    """A DESCRIPTOR_MASKS key or a comma separated list of series names"""
    if not isinstance(text, str):
        names = tuple(text)
    elif text in DESCRIPTOR_MASKS:
        return DESCRIPTOR_MASKS[text]
    else:
        names = tuple(name.strip() for name in text.split(',') if name.strip())
    unknown = [name for name in names if name not in SERIES_NAMES]
    if unknown or not names:
        raise ValueError("Descriptor mask {!r} must name some of {}".format(text, SERIES_NAMES))
    return tuple(name for name in SERIES_NAMES if name in names)


def mask_features(vector: EmdFeatureVector, mask: Sequence[str]) -> EmdFeatureVector:
    """Zero the feature blocks of the series not in mask; length is unchanged"""
    values = vector.values.copy()
    width = 2 * vector.n_modes
    for series, name in enumerate(SERIES_NAMES):
        if name not in mask:
            values[series * width:(series + 1) * width] = 0.0
    return EmdFeatureVector(values, vector.n_modes)


def trace_features(trace: MotionTrace, sift_cfg: SiftConfig = SiftConfig(),
                   descriptor_mask: Sequence[str] = SERIES_NAMES) -> EmdFeatureVector:
    return mask_features(featurize(trace, sift_cfg), descriptor_mask)


def extract_features(frames: Sequence[GrayFrame], flow_params: FarnebackParams = FarnebackParams(),
                     sift_cfg: SiftConfig = SiftConfig(),
                     descriptor_mask: Sequence[str] = SERIES_NAMES,
                     direction_stats: str = 'arithmetic') -> EmdFeatureVector:
    """Frames -> flow -> motion trace -> masked EMD statistics"""
    return trace_features(clip_trace(frames, flow_params, direction_stats), sift_cfg,
                          descriptor_mask)


def parallel_map(function: Callable, jobs: Sequence, n_workers: int = 1) -> list:
    """Order-preserving map, over a process pool when n_workers > 1"""
    if n_workers <= 1 or len(jobs) <= 1:
        return [function(job) for job in jobs]
    with Pool(processes=n_workers) as pool:
        return pool.map(function, jobs)


def _record_trace_job(job) -> MotionTrace:
    record, n_frames, frame_size, flow_params, direction_stats = job
    return clip_trace(ingest_clip(record, n_frames, frame_size), flow_params, direction_stats)


def _synthetic_trace_job(job) -> MotionTrace:
    scene_cfg, flow_params, direction_stats = job
    frames, _ = generate_synthetic_clip(scene_cfg)
    return clip_trace(frames, flow_params, direction_stats)


def _features_job(job) -> np.ndarray:
    trace, sift_cfg, mask = job
    return trace_features(trace, sift_cfg, mask).values


@dataclass
class TraceDataset:
    """
    Motion traces of every clip with labels and splits.
    Flow is computed once; features are derived from the cached traces.
    """
    clip_ids: List[str]
    traces: List[MotionTrace]
    labels: np.ndarray
    splits: List[str]
    _features: Dict[tuple, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if not len(self.clip_ids) == len(self.traces) == self.labels.size == len(self.splits):
            raise DatasetError("clip_ids, traces, labels and splits differ in length")

    def __len__(self) -> int:
        return len(self.clip_ids)

    def split_indices(self, split: str) -> np.ndarray:
        if split not in SPLITS:
            raise DatasetError("Unknown split {!r}".format(split))
        return np.array([k for k, s in enumerate(self.splits) if s == split], dtype=np.int64)

    def features(self, sift_cfg: SiftConfig = SiftConfig(),
                 descriptor_mask: Sequence[str] = SERIES_NAMES, n_workers: int = 1) -> np.ndarray:
        """Feature matrix (clips x 8N), cached per (sift settings, mask)"""
        key = (sift_cfg, tuple(descriptor_mask))
        if key not in self._features:
            jobs = [(trace, sift_cfg, tuple(descriptor_mask)) for trace in self.traces]
            self._features[key] = np.stack(parallel_map(_features_job, jobs, n_workers))
        return self._features[key]

    @classmethod
    def from_records(cls, records: Sequence[ClipRecord], n_frames: int = 16,
                     frame_size: int = 224, flow_params: FarnebackParams = FarnebackParams(),
                     direction_stats: str = 'arithmetic', n_workers: int = 1) -> 'TraceDataset':
        jobs = [(record, n_frames, frame_size, flow_params, direction_stats) for record in records]
        traces = parallel_map(_record_trace_job, jobs, n_workers)
        logger.info("Computed motion traces for {} clips".format(len(traces)))
        return cls([r.clip_id for r in records], traces, [r.label for r in records],
                   [r.split for r in records])


def _split_counts(n_scenes: int) -> Tuple[int, int, int]:
    if n_scenes < 3:
        raise DatasetError("A scene-disjoint split needs at least 3 scenes, got {}".format(
            n_scenes))
    n_test = max(1, int(np.floor(0.2 * n_scenes + 0.5)))
    n_val = max(1, int(np.floor(0.1 * n_scenes + 0.5)))
    return n_scenes - n_val - n_test, n_val, n_test


def plan_synthetic_clips(n_clips: int, seed: int = 0, frame_size: int = 64, n_frames: int = 16,
                         noise_std: float = 0.0
                         ) -> List[Tuple[str, str, SyntheticSceneConfig]]:
    """
    Lay out a synthetic dataset: scenes of CLIPS_PER_SCENE clips cycling
    through the regimes, scenes permuted and assigned 70/10/20 to
    train/val/test.
    :return: (clip_id, split, generator config) per clip
    """
    rng = np.random.default_rng(seed)
    n_scenes = -(-n_clips // CLIPS_PER_SCENE)
    n_train, n_val, _ = _split_counts(n_scenes)
    scene_order = rng.permutation(n_scenes)
    scene_split = {}
    for rank, scene in enumerate(scene_order):
        scene_split[int(scene)] = ('train' if rank < n_train
                                   else 'val' if rank < n_train + n_val else 'test')
    scene_seeds = rng.integers(0, 2 ** 31 - 1, size=n_scenes)
    clip_seeds = rng.integers(0, 2 ** 31 - 1, size=n_clips)
    plan = []
    for k in range(n_clips):
        scene, slot = divmod(k, CLIPS_PER_SCENE)
        cfg = SyntheticSceneConfig.for_regime(
            REGIMES[slot % len(REGIMES)], seed=int(clip_seeds[k]),
            scene_seed=int(scene_seeds[scene]), frame_size=frame_size, n_frames=n_frames,
            noise_std=noise_std)
        plan.append(('s{:03d}_c{:03d}'.format(scene, k), scene_split[scene], cfg))
    return plan


def build_synthetic_dataset(n_clips: int = 300, seed: int = 0, frame_size: int = 64,
                            n_frames: int = 16, flow_params: FarnebackParams = FarnebackParams(),
                            direction_stats: str = 'arithmetic', n_workers: int = 1,
                            noise_std: float = 0.0) -> TraceDataset:
    """Generate a scene-disjoint synthetic dataset in memory and trace every clip"""
    plan = plan_synthetic_clips(n_clips, seed, frame_size, n_frames, noise_std)
    jobs = [(cfg, flow_params, direction_stats) for _, _, cfg in plan]
    traces = parallel_map(_synthetic_trace_job, jobs, n_workers)
    logger.info("Built synthetic dataset of {} clips".format(n_clips))
    return TraceDataset([clip_id for clip_id, _, _ in plan], traces,
                        [cfg.label for _, _, cfg in plan], [split for _, split, _ in plan])


def write_synthetic_dataset(out_dir: Union[str, Path], n_clips: int = 300, seed: int = 0,
                            frame_size: int = 64, n_frames: int = 16,
                            noise_std: float = 0.0) -> List[ClipRecord]:
    """Render a synthetic dataset to out_dir/clips/<clip_id>/ plus out_dir/manifest.csv"""
    out_dir = Path(out_dir)
    records = []
    for clip_id, split, cfg in plan_synthetic_clips(n_clips, seed, frame_size, n_frames,
                                                    noise_std):
        frames, label = generate_synthetic_clip(cfg)
        frame_dir = out_dir / 'clips' / clip_id
        write_clip(frames, frame_dir)
        records.append(ClipRecord(clip_id, frame_dir, label, split))
    write_manifest(records, out_dir / 'manifest.csv')
    logger.info("Wrote {} synthetic clips to {}".format(n_clips, out_dir))
    return records
