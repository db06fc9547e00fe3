"""Python bindings for the trajguide library.

Latents are float64 numpy arrays shaped [C, T, H, W]; masks are boolean arrays
shaped [C or 1, T, H, W]. Poses are [N, 4, 4] camera-to-world matrices.
"""

import json

from . import _core
from ._core import (
    DenoiserOracle,
    NoiseSchedule,
    OutputConvention,
    ScheduleKind,
    TrajguideError,
    align_sim3,
    channel_scores,
    dsg_correct,
    estimate_flow,
    evaluate_trajectory,
    fl_all,
    flf_select,
    fuse_masked,
    irr_renoise,
    masked_ae,
    masked_epe,
    observed_adherence,
    read_pose_file,
    sample,
    set_warnings_enabled,
    similarity_score,
    warp,
)

__version__ = _core.__version__


def _dump(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def guided_sample(noise, oracle, z_traj, mask, schedule, guidance=None, seed=None):
    """Guided sampling; `guidance` takes the keys of a config's guidance block.

    Returns (sample, trace) where trace is a list of per-step dicts.
    """
    return _core.guided_sample(noise, oracle, z_traj, mask, schedule, "" if guidance is None else _dump(guidance), seed)


def config_hash(config):
    return _core.config_hash(_dump(config))


def normalize_config(config):
    return json.loads(_core.normalize_config(_dump(config)))


def run_experiment(config_path, output_dir=None, plots=False):
    """Runs a config file and returns the manifest as a dict."""
    return json.loads(_core.run_experiment(str(config_path), None if output_dir is None else str(output_dir), plots))
