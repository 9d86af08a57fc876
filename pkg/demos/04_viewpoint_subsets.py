"""How much do 25 viewpoints buy over 9 or 5?

The same noisy scenes are segmented three times: with the full 5x5 grid,
with a uniform 3x3 subset, and with the center plus the four far corners.
Fewer viewpoints mean fewer samples in the hyperplane fit and coarser
occlusion templates, so quality decays as views are removed.  (With only
the four corners the even quadratic distortion is indistinguishable from a
plane, so the 5-view runs find almost nothing.)
"""
import dataclasses

import numpy as np

from lfseg import EnergyParams, PipelineConfig, example_scene_spec, generate, prf, segment_lightfield

config = PipelineConfig(energy=EnergyParams(tau=1.8))
subsets = ("all", "uniform9", "corners5")
scores = {name: [] for name in subsets}

for seed in range(5):
    spec = dataclasses.replace(
        example_scene_spec(width=128, height=128, seed=seed, kappa=4.0),
        noise_sigma=0.3)
    scene = generate(spec)
    for name in subsets:
        cfg = dataclasses.replace(config, subset=name)
        result = segment_lightfield(scene.lightfield, cfg, flows=scene.flows)
        scores[name].append(prf(result.mask, scene.gt_mask).f_measure)

print(f"{'views':<12}{'mean F':>8}   per-seed")
for name, label in (("all", "25"), ("uniform9", "9"), ("corners5", "5")):
    fs = scores[name]
    print(f"{label:<12}{np.mean(fs):>8.3f}   {[f'{f:.3f}' for f in fs]}")
