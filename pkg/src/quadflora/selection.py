"""Turn per-tile candidates into final per-quadrat species sets.

Each tile contributes at most one species (its top-1); per quadrat the
candidates keep the maximum contributing score per species. Selection
then applies a score threshold (a static minimum, or one calibrated by
bisection against a target mean prediction length), a hard cap on
prediction count, a floor of at least min_len species per quadrat, and
optionally z-score normalization and cross-quadrat metadata merging.
"""

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    MissingGroupError,
    SelectionError,
    UnattainableTargetError,
)
from .fusion import FusedScores, TileLogits, tile_top1

CHANNELS = ("fused", "raw")


@dataclass(frozen=True)
class SelectionConfig:
    """Knobs for candidate scoring and final selection.

    channel picks which score feeds selection: "fused" uses the
    taxonomy-fused log-scores, "raw" the species head logits alone.
    Exactly one of min_logit / target_mean_len may be set; with neither,
    every candidate survives (subject to max_len).
    """

    channel: str = "fused"
    min_logit: Optional[float] = None
    target_mean_len: Optional[float] = None
    max_len: Optional[int] = None  # None = unbounded
    min_len: int = 1
    zscore: bool = False
    merge_k: Optional[int] = None

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ConfigError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        if self.min_logit is not None and self.target_mean_len is not None:
            raise ConfigError("set at most one of min_logit and target_mean_len")
        if self.min_len < 1:
            raise ConfigError("min_len must be >= 1")
        if self.max_len is not None and self.max_len < self.min_len:
            raise ConfigError(f"max_len {self.max_len} below min_len {self.min_len}")
        if self.target_mean_len is not None and self.target_mean_len < self.min_len:
            raise ConfigError(
                f"target mean length {self.target_mean_len} below min_len {self.min_len}"
            )
        if self.merge_k is not None and self.merge_k < 1:
            raise ConfigError("merge_k must be >= 1")


@dataclass(frozen=True)
class CandidateSet:
    """Per-quadrat species candidates with their best per-tile scores."""

    quadrat_id: str
    entries: dict  # species id -> score

    def scores(self) -> np.ndarray:
        return np.array([self.entries[s] for s in sorted(self.entries)], dtype=np.float64)


@dataclass(frozen=True)
class PredictionSet:
    """Final species set for one quadrat, ascending ids."""

    quadrat_id: str
    species: tuple

    def __post_init__(self):
        if not self.species:
            raise SelectionError(f"empty prediction for {self.quadrat_id}")
        if any(b <= a for a, b in zip(self.species, self.species[1:])):
            raise SelectionError(f"prediction ids not strictly ascending: {self.species}")


def collect_candidates(
    tiles: Sequence, cfg: SelectionConfig, quadrat_id: str = ""
) -> CandidateSet:
    """Max-merge the top-1 species of every tile into one candidate set.

    For the fused channel, tiles are FusedScores; for the raw channel,
    TileLogits (scored by their species head logits).
    """
    if not tiles:
        raise SelectionError("no tiles to collect candidates from")
    entries: dict[int, float] = {}
    for t in tiles:
        if cfg.channel == "fused":
            if not isinstance(t, FusedScores):
                raise SelectionError("fused channel expects FusedScores tiles")
            species, score = tile_top1(t)
        else:
            if not isinstance(t, TileLogits):
                raise SelectionError("raw channel expects TileLogits tiles")
            species = int(np.argmax(t.species))
            score = float(t.species[species])
        if species not in entries or score > entries[species]:
            entries[species] = score
    return CandidateSet(quadrat_id=quadrat_id, entries=dict(sorted(entries.items())))


def zscore_normalize(c: CandidateSet) -> CandidateSet:
    """Replace scores by (x - mean) / std (population std) per quadrat.

    Sets with fewer than two entries are returned unchanged; a zero-std
    set maps to all zeros.
    """
    if len(c.entries) < 2:
        return c
    ids = sorted(c.entries)
    x = np.array([c.entries[s] for s in ids], dtype=np.float64)
    std = float(x.std())
    z = np.zeros_like(x) if std == 0.0 else (x - x.mean()) / std
    return CandidateSet(quadrat_id=c.quadrat_id, entries=dict(zip(ids, z.tolist())))


def _ranked(items: Sequence[tuple[int, float]]) -> list[tuple[int, float]]:
    return sorted(items, key=lambda p: (-p[1], p[0]))


def apply_threshold(c: CandidateSet, tau: float, cfg: SelectionConfig) -> PredictionSet:
    """Keep species scoring strictly above tau, then enforce length bounds.

    Survivors are truncated to max_len by descending score (ties to the
    lower id); if fewer than min_len survive, the best-scoring excluded
    candidates are added back until the floor is met.
    """
    kept = _ranked([(s, sc) for s, sc in c.entries.items() if sc > tau])
    if cfg.max_len is not None:
        kept = kept[: cfg.max_len]
    if len(kept) < cfg.min_len:
        for s, sc in _ranked([(s, sc) for s, sc in c.entries.items() if sc <= tau]):
            if len(kept) >= cfg.min_len:
                break
            kept.append((s, sc))
    return PredictionSet(
        quadrat_id=c.quadrat_id, species=tuple(sorted(s for s, _ in kept))
    )


def mean_prediction_length(
    corpus: Sequence[CandidateSet], tau: float, cfg: SelectionConfig
) -> float:
    """Mean over quadrats of the selected species count at threshold tau."""
    if not corpus:
        raise SelectionError("empty corpus")
    return float(
        np.mean([len(apply_threshold(c, tau, cfg).species) for c in corpus])
    )


def bisect_threshold(
    corpus: Sequence[CandidateSet],
    target: float,
    cfg: SelectionConfig,
    iters: int = 64,
) -> float:
    """Find a threshold whose mean prediction length best meets target.

    The mean length is a non-increasing step function of the threshold,
    so an exact target is generally unattainable; the search brackets
    the jump and returns the lower endpoint, which achieves the closest
    step level at or above the target (more predictions rather than
    fewer). Raises if even keeping every candidate is too few.

    The halving phase cannot separate jump points closer than the
    bracket width times 2**-iters, so it is followed by a discrete
    bisection over the candidate scores left inside the bracket (the
    only possible jump points); the achieved level is therefore exactly
    the closest attainable one regardless of score spacing.
    """
    if not corpus:
        raise SelectionError("empty corpus")
    if target < cfg.min_len:
        raise ConfigError(f"target {target} below min_len {cfg.min_len}")
    all_scores = np.concatenate([c.scores() for c in corpus])
    lo = float(all_scores.min()) - 1.0
    hi = float(all_scores.max())
    if mean_prediction_length(corpus, lo, cfg) < target:
        raise UnattainableTargetError(
            f"target mean length {target} exceeds what keeping all candidates yields"
        )
    if mean_prediction_length(corpus, hi, cfg) >= target:
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # bracket exhausted float resolution
            break
        if mean_prediction_length(corpus, mid, cfg) >= target:
            lo = mid
        else:
            hi = mid
    inside = np.unique(all_scores[(all_scores >= lo) & (all_scores < hi)])
    lo_i, hi_i = 0, len(inside) - 1
    best = None
    while lo_i <= hi_i:
        mid_i = (lo_i + hi_i) // 2
        if mean_prediction_length(corpus, float(inside[mid_i]), cfg) >= target:
            best = float(inside[mid_i])
            lo_i = mid_i + 1
        else:
            hi_i = mid_i - 1
    return lo if best is None else best


def metadata_merge(
    preds: Sequence[PredictionSet],
    groups: Mapping[str, str],
    k: int,
) -> list[PredictionSet]:
    """Within each group, broadcast species predicted in more than k members.

    Counting uses the incoming predictions only (one pass), so applying
    the merge twice changes nothing. Length caps are not re-enforced.
    """
    counts: dict[str, dict[int, int]] = {}
    for p in preds:
        if p.quadrat_id not in groups:
            raise MissingGroupError(f"no group for quadrat {p.quadrat_id}")
        per_group = counts.setdefault(groups[p.quadrat_id], {})
        for s in p.species:
            per_group[s] = per_group.get(s, 0) + 1
    out = []
    for p in preds:
        shared = {s for s, n in counts[groups[p.quadrat_id]].items() if n > k}
        merged = tuple(sorted(set(p.species) | shared))
        out.append(PredictionSet(quadrat_id=p.quadrat_id, species=merged))
    return out
