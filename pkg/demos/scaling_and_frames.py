"""Two quick studies on one synthetic scenario.

First, how the vote sweep's wall time reacts to widening the rotation grid
and to doubling the number of point pairs. Second, whether recall survives
spinning both clouds by a shared random rotation (it should: the method
has no preferred frame, unlike descriptors built on axis-aligned features).

Numbers are medians over a few repetitions on one instance, so treat them
as shape, not benchmarks.
"""

from dataclasses import replace

import numpy as np

from gridreg import ScenarioConfig, SearchConfig, run_frame_rotation_study, run_scaling_study

scenario = ScenarioConfig(
    shape="blob:2", points_pool=512, points_reference=256, points_source=256,
    rot_range_deg=4.0, trans_range=0.1, noise_sigma=0.005, noise_clip=0.025,
    keep_fraction=0.9, rng_seed=0,
)
search = SearchConfig(k_rot=5, rot_step=np.radians(3.0), k_trans=8,
                      trans_bin=0.025)

print("rotation-range scaling (same instance, 3 reps each):")
for row in run_scaling_study(scenario, search, rot_ranges_deg=[7.5, 15.0, 30.0]):
    print(f"  +-{row['range_value']:4.1f} deg -> {row['n_rotations']:6d} rotations, "
          f"vote sweep {row['median_phase1_ms']:8.1f} ms, "
          f"total {row['median_total_ms']:8.1f} ms")

print("\npair-count scaling at +-15 deg:")
for tag, scn in (("256 x 256", scenario),
                 ("512 x 256", replace(scenario, points_pool=1024,
                                       points_reference=512))):
    row = run_scaling_study(scn, search, rot_ranges_deg=[15.0])[0]
    print(f"  {tag} = {row['pair_count']:6d} pairs -> "
          f"vote sweep {row['median_phase1_ms']:8.1f} ms")

print("\nframe-rotation study (20 paired trials, 1 deg grid):")
fine = SearchConfig(k_rot=9, rot_step=np.radians(1.0), k_trans=8,
                    trans_bin=0.025)
study = run_frame_rotation_study(scenario, fine, 20, 0)
print(f"  recall as generated:   {study.base.recall:.2f}")
print(f"  recall in spun frames: {study.rotated.recall:.2f}")
print(f"  gap: {100 * study.recall_gap:.1f} percentage points")
