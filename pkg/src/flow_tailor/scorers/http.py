"""Scorer client for a reward model served over HTTP."""

from __future__ import annotations

import base64
import math
from pathlib import Path

import httpx

from flow_tailor.exceptions import ScorerUnavailableError
from flow_tailor.models import ImageHandle
from flow_tailor.scorers.base import ScorerClient


class HttpScorerClient(ScorerClient):
    """POSTs ``{image, prompt}`` and reads ``{score}`` back."""

    def __init__(self, name: str, url: str, timeout: float = 60.0) -> None:
        self.name = name
        self.url = url
        self.timeout = timeout

    def score(self, handle: ImageHandle, prompt_text: str) -> float:
        try:
            image = Path(handle.location).read_bytes()
        except OSError as exc:
            raise ScorerUnavailableError(self.name, f"cannot read {handle.location}") from exc

        payload = {"image": base64.b64encode(image).decode("ascii"), "prompt": prompt_text}
        try:
            resp = httpx.post(self.url, json=payload, timeout=self.timeout)
            resp.raise_for_status()
        except httpx.TimeoutException as exc:
            raise ScorerUnavailableError(self.name, f"timed out ({self.url})") from exc
        except httpx.HTTPStatusError as exc:
            raise ScorerUnavailableError(
                self.name, f"HTTP {exc.response.status_code}: {exc.response.text[:200]}"
            ) from exc
        except httpx.HTTPError as exc:
            raise ScorerUnavailableError(self.name, f"request failed ({self.url}): {exc}") from exc

        try:
            value = float(resp.json()["score"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ScorerUnavailableError(
                self.name, f"unexpected response: {resp.text[:200]}"
            ) from exc
        if not math.isfinite(value):
            raise ScorerUnavailableError(self.name, f"non-finite score {value}")
        return value
