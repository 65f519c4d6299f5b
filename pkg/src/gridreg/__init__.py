"""Grid-search rigid registration of 3-D point clouds.

The heavy submodules are loaded lazily so that importing the package (or its
CLI) stays cheap and so thread-count environment variables can still take
effect before the compiled kernels initialize.
"""

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    # geometry
    "EulerAngles": "geometry",
    "RigidTransform": "geometry",
    "RotationGrid": "geometry",
    "apply_transform": "geometry",
    "build_rotation_grid": "geometry",
    "compose": "geometry",
    "euler_from_rotation": "geometry",
    "random_rotation": "geometry",
    "rotation_from_euler": "geometry",
    "rotation_geodesic_angle": "geometry",
    "wrap_angle": "geometry",
    # io
    "read_point_cloud": "pcio",
    "read_ply": "pcio",
    "read_xyz": "pcio",
    "write_xyz": "pcio",
    # metrics
    "ErrorMetric": "metrics",
    "EvalReport": "metrics",
    "alignment_error": "metrics",
    "chamfer_distance": "metrics",
    "count_inliers": "metrics",
    "evaluate_pose": "metrics",
    "point_residual": "metrics",
    # mode search
    "ModeResult": "mode_search",
    "TranslationHistogram": "mode_search",
    "bin_center": "mode_search",
    "bin_index": "mode_search",
    "mode_translation": "mode_search",
    "translation_histogram": "mode_search",
    # engines
    "PoseCandidate": "engines",
    "RegistrationResult": "engines",
    "SearchConfig": "engines",
    "dses": "engines",
    "exhaustive_search": "engines",
    "refine_candidates": "engines",
    # benchmark generation
    "ScenarioConfig": "benchgen",
    "ScenarioInstance": "benchgen",
    "halfspace_crop": "benchgen",
    "jitter": "benchgen",
    "load_instance": "benchgen",
    "make_instance": "benchgen",
    "sample_shape": "benchgen",
    "sample_transform": "benchgen",
    "save_instance": "benchgen",
    # harness
    "BatchSummary": "harness",
    "FrameRotationStudy": "harness",
    "OracleReport": "harness",
    "TrialRecord": "harness",
    "register_files": "harness",
    "run_batch": "harness",
    "run_frame_rotation_study": "harness",
    "run_oracle_checks": "harness",
    "run_scaling_study": "harness",
    "search_from_json": "harness",
    # errors
    "GridregError": "errors",
    "InvalidInputError": "errors",
    "NoCandidateError": "errors",
    "PointCloudIOError": "errors",
    "SearchSpaceTooLargeError": "errors",
}

__all__ = ["__version__", *sorted(_EXPORTS)]


def __getattr__(name):
    modname = _EXPORTS.get(name)
    if modname is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    value = getattr(importlib.import_module(f".{modname}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(_EXPORTS))
