"""The built-in block matcher and the .flo interchange format.

Dense correspondence comes from coarse-to-fine SSD block matching with
parabolic sub-pixel refinement.  Anything better (a variational flow, a
learned one) can be dropped in as Middlebury .flo files per view; the rest
of the pipeline does not care where flow comes from.
"""
from pathlib import Path

import numpy as np

from lfseg import FlowParams, compute_flow, load_flo, sample_flow, save_flo
from lfseg.synth import texture

out = Path("demo_out/flow")
out.mkdir(parents=True, exist_ok=True)

# a textured image and a copy shifted by exactly (3.0, 1.0) px
h, w = 64, 80
gy, gx = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
src = texture(gx, gy, seed=11)
dst = texture(gx - 3.0, gy - 1.0, seed=11)

params = FlowParams(levels=2, search_radius_px=6, patch_radius_px=3)
flow = compute_flow(src, dst, params)
inner = np.s_[10:-10, 10:-10]
print(f"known shift (3, 1): recovered du={np.median(flow.du[inner]):.3f} dv={np.median(flow.dv[inner]):.3f}")
print(f"max interior error: {max(np.abs(flow.du[inner] - 3).max(), np.abs(flow.dv[inner] - 1).max()):.3f} px")

# sub-pixel: shift by 2.5 px
dst25 = texture(gx - 2.5, gy, seed=11)
flow25 = compute_flow(src, dst25, params)
print(f"known shift 2.5: recovered du={np.median(flow25.du[inner]):.3f}")

# round-trip through the on-disk format (float32)
path = out / "demo.flo"
save_flo(flow, path)
back = load_flo(path)
print(f".flo round trip max error: {np.abs(back.du - flow.du).max():.2e}")

# flows are sampled bilinearly at real coordinates, clamped at borders
du, dv = sample_flow(back, 12.5, 20.25)
print(f"sample at (12.5, 20.25): du={du:.3f} dv={dv:.3f}")
