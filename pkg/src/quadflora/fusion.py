"""Taxonomy-fused per-species scores from multi-head tile logits.

Each head's logits become log-probabilities via a stable log-softmax;
the fused score of a species is the sum of its own log-probability and
the log-probabilities of its genus and family, i.e. the log of the
product of the three head probabilities restricted to hierarchy-valid
(species, genus, family) triples. Invalid triples never score.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ShapeError
from .geometry import TileRef
from .taxonomy import TaxonomyTable


def log_softmax(v: np.ndarray) -> np.ndarray:
    """Numerically stable log-softmax of a 1-d logit vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ShapeError("log_softmax of an empty vector")
    m = v.max()
    return v - (m + np.log(np.exp(v - m).sum()))


@dataclass(frozen=True)
class TileLogits:
    """Raw head outputs for one tile; genus/family heads are optional."""

    tile: TileRef
    species: np.ndarray
    genus: Optional[np.ndarray] = None
    family: Optional[np.ndarray] = None

    def levels(self) -> tuple[str, ...]:
        present = ["species"]
        if self.genus is not None:
            present.append("genus")
        if self.family is not None:
            present.append("family")
        return tuple(present)


@dataclass(frozen=True)
class FusedScores:
    """Per-species fused log-probabilities for one tile (entries <= 0)."""

    tile: TileRef
    score: np.ndarray


def fuse(t: TileLogits, tax: TaxonomyTable) -> FusedScores:
    """Combine species/genus/family logits into per-species log-scores.

    An absent genus or family head contributes nothing (0 in log space).
    """
    if t.species.shape != (tax.n_species,):
        raise ShapeError(
            f"species logits have length {t.species.shape}, expected {tax.n_species}"
        )
    score = log_softmax(t.species)
    if t.genus is not None:
        if t.genus.shape != (tax.n_genera,):
            raise ShapeError(
                f"genus logits have length {t.genus.shape}, expected {tax.n_genera}"
            )
        score = score + log_softmax(t.genus)[tax.species_to_genus]
    if t.family is not None:
        if t.family.shape != (tax.n_families,):
            raise ShapeError(
                f"family logits have length {t.family.shape}, expected {tax.n_families}"
            )
        score = score + log_softmax(t.family)[tax.species_to_family]
    return FusedScores(tile=t.tile, score=score)


def tile_top1(f: FusedScores) -> tuple[int, float]:
    """Argmax species and its score; ties go to the lowest species id."""
    if f.score.size == 0:
        raise ShapeError("top-1 of an empty score vector")
    i = int(np.argmax(f.score))
    return i, float(f.score[i])
