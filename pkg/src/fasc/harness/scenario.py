"""Scenario files: a small YAML schema describing one simulation sweep.

Schema (every key except ``name`` and ``dims`` has a default; unknown keys
are rejected)::

    name: strong_d100
    dims: {n: 1000, d: 100, K: 5, r: 3}   # r is the true factor count
    loading: strong                      # strong | weak | toy
    sigma_grid: [0.01, 0.5]              # or {step: 0.01, count: 100} -> 0.01*t, t=1..100
    methods: [spectral, fasc(3)]         # kmeans_raw | spectral | crossfit | ideal | fasc(<r>)
    replicates: 20
    base_seed: 2024
    mode: full_sample                    # full_sample | half_split (FASC only)
    k: null                              # embedding dimension, null -> K
    restarts: 10                         # k-means restarts

For ``loading: toy`` the grid holds the correlation strength ``t`` of the
two-cluster model with covariance ``t B B^T + I`` and noise level 1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from ..errors import IngestError, ValidationError

LOADING_KINDS = ("strong", "weak", "toy")
MODES = ("full_sample", "half_split")
_SIMPLE_METHODS = ("kmeans_raw", "spectral", "crossfit", "ideal")
_FASC_RE = re.compile(r"^fasc\((\d+)\)$")
_KEYS = {"name", "dims", "loading", "sigma_grid", "methods", "replicates", "base_seed", "mode", "k", "restarts"}
_DIM_KEYS = ("n", "d", "K", "r")


def parse_method(m: str) -> tuple[str, int | None]:
    """``"fasc(3)" -> ("fasc", 3)``; other names map to ``(name, None)``."""
    m = m.strip()
    if m in _SIMPLE_METHODS:
        return m, None
    hit = _FASC_RE.match(m)
    if hit:
        return "fasc", int(hit.group(1))
    raise ValidationError(f"unknown method {m!r}; expected one of {_SIMPLE_METHODS} or fasc(<r>)")


@dataclass(frozen=True)
class Scenario:
    name: str
    dims: tuple[int, int, int, int]  # n, d, K, r_true
    loading: str = "strong"
    sigma_grid: tuple[float, ...] = (0.05,)
    methods: tuple[str, ...] = ("spectral", "fasc(3)")
    replicates: int = 20
    base_seed: int = 0
    mode: str = "full_sample"
    k: int | None = None
    restarts: int = 10

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(v) for v in self.dims))
        object.__setattr__(self, "sigma_grid", tuple(float(v) for v in self.sigma_grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        n, d, K, r = self.dims
        if min(n, d, K) < 1 or r < 0:
            raise ValidationError(f"dims must be positive, got {self.dims}")
        if self.loading not in LOADING_KINDS:
            raise ValidationError(f"loading must be one of {LOADING_KINDS}, got {self.loading!r}")
        if self.loading == "toy" and K != 2:
            raise ValidationError("toy scenarios have K=2")
        if not self.sigma_grid or any(v < 0 for v in self.sigma_grid):
            raise ValidationError("sigma_grid must be nonempty and nonnegative")
        if self.replicates < 1:
            raise ValidationError(f"replicates >= 1 required, got {self.replicates}")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.methods:
            raise ValidationError("at least one method is required")
        for m in self.methods:
            parse_method(m)
        if self.k is not None and not 1 <= self.k <= K:
            raise ValidationError(f"need 1 <= k <= K, got k={self.k}")
        if self.restarts < 1:
            raise ValidationError(f"restarts >= 1 required, got {self.restarts}")

    @property
    def embed_dim(self) -> int:
        return self.dims[2] if self.k is None else self.k

    def to_dict(self) -> dict:
        n, d, K, r = self.dims
        return {
            "name": self.name,
            "dims": {"n": n, "d": d, "K": K, "r": r},
            "loading": self.loading,
            "sigma_grid": list(self.sigma_grid),
            "methods": list(self.methods),
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "mode": self.mode,
            "k": self.k,
            "restarts": self.restarts,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        if not isinstance(raw, dict):
            raise ValidationError("scenario must be a mapping")
        unknown = set(raw) - _KEYS
        if unknown:
            raise ValidationError(f"unknown scenario keys: {sorted(unknown)}")
        for key in ("name", "dims"):
            if key not in raw:
                raise ValidationError(f"scenario is missing required key {key!r}")
        dims = raw["dims"]
        if not isinstance(dims, dict) or set(dims) != set(_DIM_KEYS):
            raise ValidationError(f"dims must be a mapping with keys {_DIM_KEYS}")
        kw = {k: v for k, v in raw.items() if k not in ("dims", "sigma_grid")}
        kw["dims"] = tuple(dims[k] for k in _DIM_KEYS)
        if "sigma_grid" in raw:
            kw["sigma_grid"] = expand_grid(raw["sigma_grid"])
        if "methods" in kw:
            kw["methods"] = tuple(kw["methods"])
        return cls(**kw)


def expand_grid(grid) -> tuple[float, ...]:
    """A list of values, or ``{step, count}`` meaning ``step * t`` for ``t = 1..count``."""
    if isinstance(grid, dict):
        if set(grid) != {"step", "count"}:
            raise ValidationError("a grid mapping needs exactly the keys 'step' and 'count'")
        step, count = float(grid["step"]), int(grid["count"])
        return tuple(round(step * t, 12) for t in range(1, count + 1))
    if isinstance(grid, (list, tuple)):
        return tuple(float(v) for v in grid)
    raise ValidationError("sigma_grid must be a list or a {step, count} mapping")


_REAL_KEYS = {"name", "dataset", "K", "methods", "r_grid", "seed", "restarts"}
REAL_METHODS = ("kmeans_raw", "spectral", "fasc")


@dataclass(frozen=True)
class RealDataScenario:
    """A real-data study: one fetched dataset, several methods, FASC over ``r_grid``."""

    name: str
    dataset: str
    K: int = 8
    methods: tuple[str, ...] = REAL_METHODS
    r_grid: tuple[int, ...] = (1, 2, 3, 4)
    seed: int = 0
    restarts: int = 10

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "r_grid", tuple(int(r) for r in self.r_grid))
        bad = set(self.methods) - set(REAL_METHODS)
        if bad:
            raise ValidationError(f"unknown real-data methods {sorted(bad)}; expected {REAL_METHODS}")
        if self.K < 1 or self.restarts < 1 or any(r < 0 for r in self.r_grid):
            raise ValidationError("K and restarts must be >= 1, r_grid entries >= 0")

    def to_dict(self) -> dict:
        return {
            "name": self.name, "dataset": self.dataset, "K": self.K, "methods": list(self.methods),
            "r_grid": list(self.r_grid), "seed": self.seed, "restarts": self.restarts,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RealDataScenario":
        unknown = set(raw) - _REAL_KEYS
        if unknown:
            raise ValidationError(f"unknown scenario keys: {sorted(unknown)}")
        for key in ("name", "dataset"):
            if key not in raw:
                raise ValidationError(f"scenario is missing required key {key!r}")
        return cls(**raw)


def parse_scenario(text: str) -> Scenario | RealDataScenario:
    """Parse YAML text; files with a ``dataset`` key describe real-data studies."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"scenario file is not valid YAML: {exc}") from exc
    if isinstance(raw, dict) and "dataset" in raw:
        return RealDataScenario.from_dict(raw)
    return Scenario.from_dict(raw)


def dump_scenario(sc: Scenario | RealDataScenario) -> str:
    return yaml.safe_dump(sc.to_dict(), sort_keys=False, default_flow_style=None)


def bundled_names() -> list[str]:
    files = resources.files("fasc.harness").joinpath("scenarios")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".yaml"))


def load_scenario(ref: str | Path) -> Scenario | RealDataScenario:
    """Load a scenario from a file path or by bundled name."""
    p = Path(ref)
    if p.suffix in (".yaml", ".yml") or p.exists():
        try:
            return parse_scenario(p.read_text())
        except OSError as exc:
            raise IngestError(f"cannot read scenario {ref}: {exc}") from exc
    res = resources.files("fasc.harness").joinpath("scenarios", f"{ref}.yaml")
    if not res.is_file():
        raise ValidationError(f"no bundled scenario named {ref!r}; available: {', '.join(bundled_names())}")
    return parse_scenario(res.read_text())
