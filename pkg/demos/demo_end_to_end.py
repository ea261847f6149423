#!/usr/bin/env python3
"""Walkthrough: the full pipeline on a synthetic quadrat survey.

Generates a seeded world (taxonomy, quadrat feature grids, classifier
head registry), runs crop -> multi-scale tiling -> per-tile heads ->
taxonomy fusion -> candidate collection -> calibrated selection, and
scores the result with the transect-averaged F1. Run at two noise
levels to watch recovery degrade, and compare the fused channel
against the species-only channel on an imperfect species head.
"""

import numpy as np

import quadflora as qf


def build_world(noise_sigma):
    cfg = qf.SynthConfig(
        n_species=120,
        n_genera=24,
        n_families=6,
        n_quadrats=36,
        quadrats_per_transect=6,
        grid_cells=20,
        feature_dim=128,
        noise_sigma=noise_sigma,
        richness_min=4,
        richness_max=4,
        patch_align=4,  # patches align with the scale-5 tile grid
        orthogonal_prototypes=True,
        seed=11,
    )
    return qf.gen_world(cfg)


def evaluate(noise_sigma, species_head, channel):
    tax, quadrats, registry = build_world(noise_sigma)
    model = qf.compose_model(registry, qf.HeadSelection(species_head, "mlp2", "mlp2"))
    run_cfg = qf.RunConfig(
        scales=(4, 5),
        crop_fracs=(0.0,),
        selection=qf.SelectionConfig(target_mean_len=4.0, max_len=9, channel=channel),
    )
    preds = qf.run(quadrats, run_cfg, tax, models=[model])
    truth = qf.GroundTruthTable(
        quadrats={q.quadrat_id: (q.transect_id, q.truth) for q in quadrats}
    )
    return qf.score(preds, truth)


# ------------------------------------------------------------------
# Noiseless world, exact prototype head: the pipeline recovers the
# planted species perfectly because every patch owns a pure tile.
# ------------------------------------------------------------------
report = evaluate(0.0, "lin1", "fused")
print(f"noiseless recovery, exact head:      final = {report.final:.5f}")

# ------------------------------------------------------------------
# Add feature noise: scores degrade gracefully.
# ------------------------------------------------------------------
for sigma in (0.5, 1.0):
    report = evaluate(sigma, "lin1", "fused")
    print(f"noise sigma={sigma}: exact head:          final = {report.final:.5f}")

# ------------------------------------------------------------------
# Swap in the confusable species head (lin1c) and compare channels:
# the genus/family heads repair many of its pairwise mistakes, so the
# fused channel outscores the species-only channel.
# ------------------------------------------------------------------
fused = evaluate(0.5, "lin1c", "fused")
raw = evaluate(0.5, "lin1c", "raw")
print(f"confusable head at sigma=0.5: fused  final = {fused.final:.5f}")
print(f"confusable head at sigma=0.5: raw    final = {raw.final:.5f}")

print("\nper-transect breakdown of the last run (fused):")
for tid in sorted(fused.per_transect):
    print(f"  {tid}: {fused.per_transect[tid]:.5f}")
