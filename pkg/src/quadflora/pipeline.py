"""End-to-end inference: crop, tile, score, smooth, bag, fuse, select.

Stage order per quadrat is fixed: for every crop member and model,
compute per-tile head logits at every grid scale, kernel-smooth within
each scale if configured, then average logits across all members
(bagging), fuse per tile through the taxonomy, and max-merge per-tile
top-1 candidates across scales. Threshold calibration is corpus-global:
one threshold serves the whole test set.

All freshly computed logits are rounded to 9 significant digits (the
logit cache's text precision) before use, so runs that read a warm
cache are bit-identical to the runs that filled it.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ._util import canonical9, fmt9
from .ensemble import HeadSelection, ModelOutput, bag, compose_model, kernel_smooth, tile_key
from .errors import ConfigError, QuadfloraError
from .fusion import TileLogits, fuse
from .geometry import CropSpec, GridSpec, Rect, central_crop, tile_grid
from .selection import (
    CandidateSet,
    PredictionSet,
    SelectionConfig,
    apply_threshold,
    bisect_threshold,
    collect_candidates,
    mean_prediction_length,
    metadata_merge,
    zscore_normalize,
)
from .synthworld import Quadrat, ToyModel, head_logits, tile_features
from .taxonomy import TaxonomyTable

WORKERS_ENV = "QUADFLORA_WORKERS"


@dataclass(frozen=True)
class RunConfig:
    """Full inference configuration for one run.

    head_combos names registry variants to assemble into models; leave
    None when passing ready-made models to run(). seed is carried for
    provenance, the pipeline itself draws no random numbers.
    """

    scales: tuple
    crop_fracs: tuple = (0.0,)
    overlap_frac: float = 0.0
    head_combos: Optional[tuple] = None
    kernel_w: Optional[float] = None
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    bisect_iters: int = 64
    seed: int = 0

    def __post_init__(self):
        if not self.scales:
            raise ConfigError("at least one tiling scale is required")
        if not self.crop_fracs:
            raise ConfigError("at least one crop fraction is required")
        for s in self.scales:
            GridSpec(s, self.overlap_frac)  # validates both
        for f in self.crop_fracs:
            CropSpec(f)
        if self.kernel_w is not None and self.kernel_w < 0:
            raise ConfigError("kernel weight must be >= 0")
        if self.bisect_iters < 1:
            raise ConfigError("bisect_iters must be >= 1")


def _tile_logits(model, quadrat, crop_frac, tref, cache, feature_memo):
    """Per-tile logits for one model, cache-first, canonically rounded."""
    crop = fmt9(100.0 * crop_frac)
    levels = [
        lvl
        for lvl in ("species", "genus", "family")
        if model.head_for(lvl) is not None
    ]
    out = {}
    missing = []
    for lvl in levels:
        key = (model.model_id, quadrat.quadrat_id, crop, tref.scale, tref.row, tref.col, lvl)
        hit = cache.get(key) if cache is not None else None
        if hit is None:
            missing.append((lvl, key))
        else:
            out[lvl] = hit
    if missing:
        if quadrat.cells is None:
            raise QuadfloraError(
                f"quadrat {quadrat.quadrat_id} has no features and the cache "
                f"lacks {missing[0][1]}"
            )
        mkey = tile_key(tref)
        if mkey not in feature_memo:
            feature_memo[mkey] = tile_features(quadrat, tref)
        for lvl, key in missing:
            values = canonical9(head_logits(model, lvl, feature_memo[mkey]))
            if cache is not None:
                cache.put(key, values)
            out[lvl] = values
    return TileLogits(
        tile=tref,
        species=out["species"],
        genus=out.get("genus"),
        family=out.get("family"),
    )


def infer_quadrat(
    quadrat: Quadrat,
    cfg: RunConfig,
    tax: TaxonomyTable,
    models: Sequence[ToyModel],
    cache=None,
) -> CandidateSet:
    """Candidate species for one quadrat under the configured pipeline."""
    if not models:
        raise ConfigError("at least one model is required")
    image = Rect(0, 0, quadrat.grid_cells, quadrat.grid_cells)
    members = []
    for crop_frac in cfg.crop_fracs:
        region = central_crop(image, CropSpec(crop_frac))
        grids = {s: tile_grid(region, GridSpec(s, cfg.overlap_frac)) for s in cfg.scales}
        feature_memo: dict = {}
        for model in models:
            tiles = {}
            for scale in cfg.scales:
                for tref in grids[scale]:
                    tiles[tile_key(tref)] = _tile_logits(
                        model, quadrat, crop_frac, tref, cache, feature_memo
                    )
            if cfg.kernel_w is not None:
                smoothed = {}
                for scale in cfg.scales:
                    subgrid = {k: v for k, v in tiles.items() if k[0] == scale}
                    smoothed.update(
                        kernel_smooth(subgrid, cfg.kernel_w, GridSpec(scale, cfg.overlap_frac))
                    )
                tiles = smoothed
            members.append(
                ModelOutput(
                    model_id=f"{model.model_id}|crop={fmt9(100.0 * crop_frac)}",
                    tiles=tiles,
                )
            )
    bagged = bag(members)
    ordered = [bagged.tiles[k] for k in sorted(bagged.tiles)]
    if cfg.selection.channel == "fused":
        scored = [fuse(tl, tax) for tl in ordered]
    else:
        scored = ordered
    return collect_candidates(scored, cfg.selection, quadrat.quadrat_id)


def _worker_count(workers: Optional[int]) -> int:
    if workers is not None:
        return max(1, workers)
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        raise ConfigError(f"bad {WORKERS_ENV} value {raw!r}") from None


def infer_corpus(
    corpus: Sequence[Quadrat],
    cfg: RunConfig,
    tax: TaxonomyTable,
    models: Sequence[ToyModel],
    cache=None,
    workers: Optional[int] = None,
) -> list[CandidateSet]:
    """Candidate sets for every quadrat, in input order."""
    n = _worker_count(workers)
    if n == 1 or len(corpus) < 2:
        return [infer_quadrat(q, cfg, tax, models, cache) for q in corpus]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda q: infer_quadrat(q, cfg, tax, models, cache), corpus))


def select_predictions(
    candidates: Sequence[CandidateSet],
    cfg: RunConfig,
    groups=None,
) -> tuple[list[PredictionSet], float, float]:
    """Calibrate (if configured), threshold, and optionally merge.

    Returns (predictions, threshold, achieved mean prediction length).
    """
    sel = cfg.selection
    if sel.zscore:
        candidates = [zscore_normalize(c) for c in candidates]
    if sel.target_mean_len is not None:
        tau = bisect_threshold(candidates, sel.target_mean_len, sel, cfg.bisect_iters)
    elif sel.min_logit is not None:
        tau = sel.min_logit
    else:
        tau = float("-inf")
    preds = [apply_threshold(c, tau, sel) for c in candidates]
    achieved = mean_prediction_length(candidates, tau, sel)
    if sel.merge_k is not None:
        if groups is None:
            raise ConfigError("metadata merging needs a quadrat -> group mapping")
        preds = metadata_merge(preds, groups, sel.merge_k)
    return preds, tau, achieved


def run(
    corpus: Sequence[Quadrat],
    cfg: RunConfig,
    tax: TaxonomyTable,
    models: Optional[Sequence[ToyModel]] = None,
    registry=None,
    cache=None,
    workers: Optional[int] = None,
) -> list[PredictionSet]:
    """Full corpus inference; models come either ready-made or composed
    from a head registry via cfg.head_combos."""
    if models is None:
        if registry is None or cfg.head_combos is None:
            raise ConfigError("run() needs models, or a registry plus cfg.head_combos")
        models = [compose_model(registry, sel) for sel in cfg.head_combos]
    candidates = infer_corpus(corpus, cfg, tax, models, cache, workers)
    groups = {q.quadrat_id: q.transect_id for q in corpus}
    preds, _, _ = select_predictions(candidates, cfg, groups)
    return preds


__all__ = [
    "RunConfig",
    "infer_quadrat",
    "infer_corpus",
    "select_predictions",
    "run",
    "HeadSelection",
]
