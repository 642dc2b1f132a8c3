"""Image quality scorer clients."""

from flow_tailor.scorers.base import ScorerClient, SyntheticScorer

__all__ = ["ScorerClient", "SyntheticScorer"]
