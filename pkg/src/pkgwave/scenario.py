"""One complete scattering-matrix computation: model -> grid -> N runs -> S."""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .fdtd import RunSettings, SimulationRecord, SourceSpec, build_yee_grid, run_simulation
from .geometry import MaterialGrid, PackageModel, ResolutionPolicy, rasterize
from .sparams import SParameterSet, default_frequencies, extract_sparams


def config_hash(data) -> str:
    """Stable content hash of a JSON-serialisable configuration."""
    text = json.dumps(data, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if hasattr(obj, "__dataclass_fields__"):
        return {k: getattr(obj, k) for k in obj.__dataclass_fields__}
    return str(obj)


@dataclass
class ScenarioResult:
    sparams: SParameterSet
    records: list[SimulationRecord]
    grid: MaterialGrid
    warnings: list[str] = field(default_factory=list)

    @property
    def decayed(self) -> bool:
        return all(r.decayed for r in self.records)


def simulate_sparams(model: PackageModel, *, dim: int = 2, policy: ResolutionPolicy | None = None,
                     settings: RunSettings | None = None, frequencies: Sequence[float] | None = None,
                     source_band: tuple[float, float] = (55e9, 65e9), f0: float = 60e9,
                     edge_level: float = 0.5, threads: int = 1,
                     metadata: dict | None = None) -> ScenarioResult:
    """Drive each port in turn and assemble the scattering matrix.

    Runs are independent and share only read-only coefficient arrays, so
    they may execute concurrently (the compiled kernels release the GIL).
    """
    settings = settings or RunSettings()
    grid = rasterize(model, policy, dim=dim)
    yee = build_yee_grid(grid, cfl_safety=settings.cfl_safety, pml=settings.pml)
    port_ids = [p.port for p in grid.ports]
    if len(port_ids) < 1:
        raise ValueError("model has no ports")
    sources = [SourceSpec(port=p, f0=f0, band=source_band, edge_level=edge_level) for p in port_ids]

    def one(src: SourceSpec) -> SimulationRecord:
        run = settings
        if settings.snapshot_dir is not None:
            run = replace(settings, snapshot_dir=f"{settings.snapshot_dir}/port{src.port}")
        return run_simulation(yee, src, settings=run)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, sources))
    else:
        records = [one(s) for s in sources]
    freqs = default_frequencies() if frequencies is None else frequencies
    sset = extract_sparams(records, freqs, metadata=metadata)
    notes = [f"port {r.excited}: {w}" for r in records for w in r.warnings]
    return ScenarioResult(sset, records, grid, notes)
