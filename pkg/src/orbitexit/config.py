"""Flat sectioned key-value experiment configuration.

The file format is a hand-parsed INI/TOML-subset: ``[section]`` headers,
``key = value`` lines, ``#`` or ``;`` comments, numbers in plain decimal,
lists comma-separated, strings optionally quoted.  Example::

    [model]
    name = "benchmark-asym"

    [experiment]
    kind = "cycling"
    sigma = 0.15          # noise intensity (dimensionless)
    delta = 0.1           # level offset below the unstable orbit (r units)
    bin_width = 0.02      # histogram bin (periods)
    paths = 100000
    dt = 0.002            # time step (time units)
    seed = 42
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from typing import List, Optional

EXPERIMENT_KINDS = (
    "cycling", "sweep", "kernel", "kernel-trend", "ldp", "simulate",
    "validate-linear", "bernstein", "descent", "orbit", "theory-table",
)

MIN_PATHS = {
    "cycling": 1000,
    "sweep": 1000,
    "descent": 1000,
    "validate-linear": 1000,
    "bernstein": 1000,
    "simulate": 1,
}


def _parse_value(raw: str):
    raw = raw.strip()
    if "," in raw:
        return [_parse_value(p) for p in raw.split(",") if p.strip()]
    if raw.startswith(('"', "'")) and raw.endswith(('"', "'")) and len(raw) >= 2:
        return raw[1:-1]
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config_file(path: str) -> dict:
    sections: dict = {}
    current = None
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            stripped = line.split("#", 1)[0].split(";", 1)[0].strip()
            if not stripped:
                continue
            if stripped.startswith("[") and stripped.endswith("]"):
                current = stripped[1:-1].strip()
                sections.setdefault(current, {})
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, raw = stripped.partition("=")
            if current is None:
                raise ValueError(f"{path}:{lineno}: key outside any [section]")
            sections[current][key.strip()] = _parse_value(raw)
    return sections


@dataclass
class ExperimentConfig:
    kind: str = "cycling"
    model_name: str = "benchmark-asym"
    model_params: dict = field(default_factory=dict)
    sigmas: List[float] = field(default_factory=lambda: [0.15])
    delta: float = 0.1
    bin_width: float = 0.02
    paths: int = 10000
    dt: float = 2e-3
    seed: int = 0
    max_phase: float = 0.0            # 0 -> auto from pilot / eigenvalue scale
    r0: float = -1.0
    workers: int = 1
    out_dir: str = "out"
    grid_cells: int = 128
    samples_per_row: int = 1000
    s_star: Optional[float] = None    # user-supplied crossing phase override
    kernel_variant: str = "Ku"
    lin_sigma: float = 0.1
    lin_r0: float = 0.1
    lin_tmax: float = 2.0
    bernstein_levels: List[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    bernstein_t: float = 2.0

    @property
    def sigma(self) -> float:
        return self.sigmas[0]

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind '{self.kind}'")
        if not (0.0 < self.bin_width < 1.0):
            raise ValueError("bin_width must lie in (0, 1)")
        for s in self.sigmas:
            if not (0.0 < s < 1.0):
                raise ValueError("sigma values must lie in (0, 1)")
        need = MIN_PATHS.get(self.kind, 0)
        if self.paths < need:
            raise ValueError(f"{self.kind} needs at least {need} paths")

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_file(cls, path: str, **overrides) -> "ExperimentConfig":
        sections = parse_config_file(path)
        model = sections.get("model", {})
        exp = sections.get("experiment", {})
        kw = {}
        kw["model_name"] = model.pop("name", "benchmark-asym")
        kw["model_params"] = dict(model)
        if "kind" in exp:
            kw["kind"] = exp.pop("kind")
        if "sigma" in exp and "sigmas" not in exp:
            val = exp.pop("sigma")
            kw["sigmas"] = val if isinstance(val, list) else [val]
        if "sigmas" in exp:
            val = exp.pop("sigmas")
            kw["sigmas"] = val if isinstance(val, list) else [val]
        for key in ("delta", "bin_width", "paths", "dt", "seed", "max_phase",
                    "r0", "workers", "out_dir", "grid_cells", "samples_per_row",
                    "s_star", "kernel_variant", "lin_sigma", "lin_r0", "lin_tmax",
                    "bernstein_levels", "bernstein_t"):
            if key in exp:
                kw[key] = exp.pop(key)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(**kw)
        cfg.validate()
        return cfg
