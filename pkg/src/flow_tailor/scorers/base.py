"""Abstract scorer client and the hash-based synthetic scorer."""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod

from flow_tailor.exceptions import ScorerUnavailableError
from flow_tailor.models import ImageHandle

# Plausible output ranges of the reward models the ensemble is built from.
SCORER_RANGES: dict[str, tuple[float, float]] = {
    "aesthetic": (4.0, 7.0),
    "image_reward": (-2.0, 2.0),
    "hps": (0.20, 0.32),
    "pickscore": (18.0, 23.0),
}


class ScorerClient(ABC):
    """One quality prediction model."""

    name: str

    @abstractmethod
    def score(self, handle: ImageHandle, prompt_text: str) -> float:
        """Return a finite quality score for one image.

        Raises:
            ScorerUnavailableError: The scorer could not produce a value.
        """
        ...


class SyntheticScorer(ScorerClient):
    """Deterministic stand-in mapping (prompt, flow, name) into the scorer's range."""

    def __init__(self, name: str, offline: bool = False) -> None:
        self.name = name
        self.offline = offline

    def score(self, handle: ImageHandle, prompt_text: str) -> float:
        if self.offline:
            raise ScorerUnavailableError(self.name, "offline")
        material = f"{handle.prompt_id}\x00{handle.flow_id}\x00{self.name}".encode()
        digest = hashlib.blake2b(material, digest_size=8).digest()
        unit = int.from_bytes(digest, "big") / 2**64
        low, high = SCORER_RANGES.get(self.name, (0.0, 1.0))
        return low + unit * (high - low)
