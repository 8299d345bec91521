"""Tunable knobs for the whole pipeline, with file-based overrides.

Every default is chosen to reproduce the documented behaviour of the
extraction approach at desk scale; the shipped ``config.default.toml``
carries the same values with per-entry commentary. Configs are plain
frozen dataclasses so they can be shared across threads.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

# Tokens never usable as a landmark on their own: articles, pronouns,
# common prepositions/conjunctions, and bare punctuation.
DEFAULT_STOP_WORDS: tuple[str, ...] = (
    "a", "an", "the", "and", "or", "but", "nor", "so", "yet",
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them",
    "my", "your", "his", "its", "our", "their", "this", "that", "these", "those",
    "in", "on", "at", "to", "of", "for", "by", "with", "from", "as", "is", "are",
    "was", "were", "be", "been", "am", "do", "does", "did", "not", "no",
    ".", ",", ":", ";", "!", "?", "-", "--", "(", ")", "[", "]", "{", "}",
    "/", "\\", "|", "&", "*", "'", '"',
)


@dataclass(frozen=True)
class ScoringConfig:
    """Landmark-candidate scoring: score = 1 / (1 + wd*dist + ws*size)."""

    w_distance: float = 1.0
    w_region_size: float = 1.0
    max_n: int = 5          # longest candidate n-gram, in words
    top_k: int = 10         # candidates kept per cluster
    stop_words: tuple[str, ...] = DEFAULT_STOP_WORDS

    def __post_init__(self) -> None:
        if self.w_distance + self.w_region_size <= 0:
            raise ValueError("at least one scoring weight must be positive")


@dataclass(frozen=True)
class GeometryConfig:
    """Box-geometry thresholds for neighbor resolution.

    ``min_perpendicular_overlap`` applies to path-motion neighbors (strict
    axis direction); summaries instead use a 90-degree cone with any overlap
    and declare a side Absent beyond ``absent_distance_factor`` times the
    box's extent in that direction.
    """

    min_perpendicular_overlap: float = 0.25
    absent_distance_factor: float = 3.0
    row_tolerance_factor: float = 0.5   # x median box height, for document order


@dataclass(frozen=True)
class SynthesisConfig:
    """Bounds for the enumerative region/value searches."""

    max_motions: int = 4            # path programs: up to 4 expansion motions
    max_absolute_step: int = 4      # Absolute(dir, k) with k in 1..4
    max_subset_size: int = 3        # example subsets driving enumeration
    random_subsets: int = 20        # sampled 2..3-doc subsets per field
    max_selector_steps: int = 4     # node-selector chain length
    max_atoms_per_step: int = 2
    max_occurrence_index: int = 3   # |k| bound for text positions


@dataclass(frozen=True)
class RuntimeConfig:
    blueprint_threshold: float = 0.0   # t in the extraction gate; 0 = exact match
    merge_threshold: float = 0.0       # cluster-merge distance ceiling
    hierarchy_depth: int = 2           # max nesting of disambiguation guards
    enable_hierarchy: bool = True


@dataclass(frozen=True)
class Config:
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)
    seed: int = 0


def _merge_section(cls, defaults, data: dict):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ValueError(f"unknown config key: {cls.__name__}.{key}")
        if key == "stop_words":
            value = tuple(value)
        kwargs[key] = value
    return dataclasses.replace(defaults, **kwargs)


def load_config(path: str | Path) -> Config:
    """Read a TOML (or JSON) config file and overlay it on the defaults.

    Unknown keys are rejected loudly rather than silently ignored.
    """
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".json":
        data = json.loads(raw.decode("utf-8"))
    else:
        data = _toml.loads(raw.decode("utf-8"))
    base = Config()
    sections = {
        "scoring": (ScoringConfig, base.scoring),
        "geometry": (GeometryConfig, base.geometry),
        "synthesis": (SynthesisConfig, base.synthesis),
        "runtime": (RuntimeConfig, base.runtime),
    }
    kwargs = {}
    for name, section_data in data.items():
        if name == "seed":
            kwargs["seed"] = int(section_data)
            continue
        if name not in sections:
            raise ValueError(f"unknown config section: {name}")
        cls, defaults = sections[name]
        kwargs[name] = _merge_section(cls, defaults, section_data)
    return dataclasses.replace(base, **kwargs)
