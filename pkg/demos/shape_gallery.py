"""Print a small gallery of the built-in benchmark surfaces.

Each shape is sampled, normalized to its bounding box, and summarized by
point count, centroid, extent, and mean nearest-neighbor spacing. Pass an
output directory to also dump one XYZ file per shape for a viewer.

    python3 demos/shape_gallery.py [outdir]
"""

import sys

import numpy as np

from gridreg import sample_shape, write_xyz

SHAPES = ["box", "cylinder", "torus", "l-bracket", "blob", "blob:1", "blob:7"]
N = 1500


def nn_spacing(pts):
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    np.fill_diagonal(d, np.inf)
    return float(d.min(axis=1).mean())


def main():
    outdir = sys.argv[1] if len(sys.argv) > 1 else None
    rng = np.random.default_rng(7)
    print(f"{'shape':>12}  {'n':>5}  {'centroid':>24}  {'extent':>24}  {'nn':>7}")
    for name in SHAPES:
        pts = sample_shape(name, N, rng)
        c = pts.mean(axis=0)
        ext = pts.max(axis=0) - pts.min(axis=0)
        print(f"{name:>12}  {len(pts):>5}  "
              f"[{c[0]:+.3f} {c[1]:+.3f} {c[2]:+.3f}]  "
              f"[{ext[0]:.3f} {ext[1]:.3f} {ext[2]:.3f}]  "
              f"{nn_spacing(pts):7.4f}")
        if outdir:
            path = f"{outdir}/{name.replace(':', '_')}.xyz"
            write_xyz(path, pts)
            print(f"{'':>12}  wrote {path}")


if __name__ == "__main__":
    main()
