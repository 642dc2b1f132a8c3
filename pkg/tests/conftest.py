"""Shared fixtures for flow-tailor tests."""

import copy
from pathlib import Path

import pytest

import flow_tailor
from flow_tailor.graph import WorkflowGraph, graph_from_dict, load_flow_dir
from flow_tailor.models import EnsembleConfig, PromptRecord, ScoredTriplet, ScorerStats
from flow_tailor.registry import ComponentRegistry, register_defaults

TEMPLATES_DIR = Path(flow_tailor.__file__).parent / "data" / "templates"

# Minimal text-to-image flow: checkpoint, two encoders, sampler, decode, save.
SIMPLE_FLOW = {
    "3": {
        "class_type": "KSampler",
        "inputs": {
            "cfg": 7.0,
            "denoise": 1.0,
            "latent_image": ["5", 0],
            "model": ["4", 0],
            "negative": ["7", 0],
            "positive": ["6", 0],
            "sampler_name": "euler",
            "scheduler": "normal",
            "seed": 42,
            "steps": 20,
        },
    },
    "4": {"class_type": "CheckpointLoaderSimple", "inputs": {"ckpt_name": "SDXL Base 1.0"}},
    "5": {
        "class_type": "EmptyLatentImage",
        "inputs": {"batch_size": 1, "height": 1024, "width": 1024},
    },
    "6": {"class_type": "CLIPTextEncode", "inputs": {"clip": ["4", 1], "text": ""}},
    "7": {"class_type": "CLIPTextEncode", "inputs": {"clip": ["4", 1], "text": ""}},
    "8": {"class_type": "VAEDecode", "inputs": {"samples": ["3", 0], "vae": ["4", 2]}},
    "9": {"class_type": "SaveImage", "inputs": {"filename_prefix": "out", "images": ["8", 0]}},
}


@pytest.fixture()
def flow_dict() -> dict:
    """Return a fresh copy of the minimal API-format flow."""
    return copy.deepcopy(SIMPLE_FLOW)


@pytest.fixture()
def simple_graph(flow_dict) -> WorkflowGraph:
    return graph_from_dict(flow_dict)


@pytest.fixture()
def registry() -> ComponentRegistry:
    return register_defaults()


@pytest.fixture()
def templates() -> list[tuple[str, WorkflowGraph]]:
    """The bundled template flows, keyed by file stem."""
    return load_flow_dir(TEMPLATES_DIR)


@pytest.fixture()
def prompts() -> list[PromptRecord]:
    return [
        PromptRecord(prompt_id="p1", text="close-up photography of a grey tabby cat"),
        PromptRecord(prompt_id="p2", text="a neon cyberpunk city street at night"),
        PromptRecord(prompt_id="p3", text="anime girl riding a dragon"),
    ]


@pytest.fixture()
def two_scorer_config() -> EnsembleConfig:
    """Ensemble over scorers a and b with known standardization."""
    return EnsembleConfig(
        scorer_names=["a", "b"],
        weights={"a": 1.0, "b": 2.0},
        standardization_stats={
            "a": ScorerStats(mean=2.0, std=1.0),
            "b": ScorerStats(mean=4.0, std=2.0),
        },
        scale=0.1,
        offset=0.4,
    )


def make_triplet(prompt_id: str, flow_id: str, ensemble: float) -> ScoredTriplet:
    return ScoredTriplet(
        prompt_id=prompt_id,
        flow_id=flow_id,
        seed=0,
        raw={"a": 1.0},
        ensemble=ensemble,
        timestamp="2026-01-01T00:00:00+00:00",
    )
