"""Electromagnetic material definitions for the flip-chip package stack.

Dielectrics are described by relative permittivity and loss tangent. The
FDTD update needs a conductivity, so the loss tangent is converted at a
single pinned frequency (60 GHz unless told otherwise). Metals are treated
as perfect electric conductors.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from typing import Iterator, Mapping

from scipy.constants import epsilon_0

DEFAULT_PIN_FREQUENCY = 60e9


def loss_tangent_to_conductivity(rel_permittivity: float, loss_tangent: float,
                                 f_pin: float) -> float:
    """Equivalent conductivity sigma = 2*pi*f*eps0*eps_r*tan(delta) in S/m."""
    for name, value in (("rel_permittivity", rel_permittivity),
                        ("loss_tangent", loss_tangent), ("f_pin", f_pin)):
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")
    if rel_permittivity < 1.0:
        raise ValueError(f"rel_permittivity must be >= 1, got {rel_permittivity}")
    if loss_tangent < 0.0:
        raise ValueError(f"loss_tangent must be >= 0, got {loss_tangent}")
    if f_pin <= 0.0:
        raise ValueError(f"f_pin must be > 0, got {f_pin}")
    return 2.0 * math.pi * f_pin * epsilon_0 * rel_permittivity * loss_tangent


@dataclass(frozen=True)
class Material:
    name: str
    rel_permittivity: float = 1.0
    loss_tangent: float = 0.0
    is_conductor: bool = False
    description: str = ""

    def __post_init__(self):
        if not self.name:
            raise ValueError("material name must be non-empty")
        if self.is_conductor:
            return
        if not math.isfinite(self.rel_permittivity) or self.rel_permittivity < 1.0:
            raise ValueError(
                f"{self.name}: rel_permittivity must be >= 1, got {self.rel_permittivity}")
        if not math.isfinite(self.loss_tangent) or self.loss_tangent < 0.0:
            raise ValueError(
                f"{self.name}: loss_tangent must be >= 0, got {self.loss_tangent}")

    def conductivity(self, f_pin: float = DEFAULT_PIN_FREQUENCY) -> float:
        """Conductivity pinned at ``f_pin``. Conductors return ``inf``."""
        if self.is_conductor:
            return math.inf
        return _pinned_conductivity(self.rel_permittivity, self.loss_tangent, f_pin)


_sigma_cache: dict[tuple[float, float, float], float] = {}


def _pinned_conductivity(eps_r: float, tan_d: float, f_pin: float) -> float:
    key = (eps_r, tan_d, f_pin)
    if key not in _sigma_cache:
        _sigma_cache[key] = loss_tangent_to_conductivity(eps_r, tan_d, f_pin)
    return _sigma_cache[key]


class MaterialLibrary(Mapping[str, Material]):
    """Immutable name -> Material mapping."""

    def __init__(self, materials: Mapping[str, Material] | None = None):
        self._items: dict[str, Material] = {}
        for key, mat in (materials or {}).items():
            if key != mat.name:
                raise ValueError(f"library key {key!r} does not match material name {mat.name!r}")
            self._items[key] = mat

    def __getitem__(self, name: str) -> Material:
        try:
            return self._items[name]
        except KeyError:
            raise KeyError(f"unknown material {name!r}; known: {sorted(self._items)}") from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MaterialLibrary):
            return NotImplemented
        return self._items == other._items

    def __repr__(self) -> str:
        return f"MaterialLibrary({sorted(self._items)})"

    def lookup(self, name: str) -> Material:
        return self[name]

    def with_material(self, material: Material) -> "MaterialLibrary":
        items = dict(self._items)
        items[material.name] = material
        return MaterialLibrary(items)

    def with_overrides(self, overrides: Mapping[str, Mapping]) -> "MaterialLibrary":
        """Return a copy with fields of existing (or new) materials replaced.

        ``overrides`` maps a material name to a dict of Material fields.
        """
        items = dict(self._items)
        for name, fields in overrides.items():
            unknown = set(fields) - {"rel_permittivity", "loss_tangent", "is_conductor", "description"}
            if unknown:
                raise ValueError(f"unknown material field(s) for {name!r}: {sorted(unknown)}")
            base = items.get(name, Material(name))
            items[name] = replace(base, **fields)
        return MaterialLibrary(items)

    def to_dict(self) -> dict:
        return {name: asdict(mat) for name, mat in sorted(self._items.items())}

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping]) -> "MaterialLibrary":
        return cls({name: Material(**fields) for name, fields in data.items()})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MaterialLibrary":
        return cls.from_dict(json.loads(text))


# PCB loss tangent is not tabulated for the package; 0.02 is a typical epoxy value.
PCB_LOSS_TANGENT = 0.02


def builtin_library() -> MaterialLibrary:
    """Library preloaded with the package stack materials."""
    mats = [
        Material("vacuum", 1.0, 0.0, description="free space / air gaps"),
        Material("aluminum", is_conductor=True, description="heat sink"),
        Material("thermal_conductor", 8.6, 3e-4, description="heat spreader"),
        # Same constants as the spreader row; no separate AIN data is available.
        Material("aluminum_nitride", 8.6, 3e-4, description="AIN heat spreader"),
        Material("silicon", 11.9, 0.2517, description="bulk silicon die (10 ohm-cm)"),
        Material("sio2", 3.9, 0.03, description="interconnect insulator"),
        Material("copper", is_conductor=True, description="interconnect metal"),
        Material("solder", is_conductor=True, description="Cu/Sn flip-chip bumps"),
        Material("alumina", 9.4, 4e-4, description="ceramic carrier"),
        Material("lead", is_conductor=True, description="BGA solder balls"),
        Material("epoxy", 4.0, PCB_LOSS_TANGENT, description="PCB epoxy resin"),
    ]
    return MaterialLibrary({m.name: m for m in mats})
