"""Impact kernels: neighborhood effect matrices for each (NBS type, measure) pair.

A kernel is a small odd-sized matrix of nonnegative values. Its center entry
is the effect an installation has on its own cell; surrounding entries decay
linearly per Chebyshev ring out to the edge value. The bundled default catalog
covers four green-infrastructure NBS types (green wall, green roof, street
tree, urban park), four environmental measures (max/min ground temperature,
PM2.5, PM10) and one accessibility ("fairness") kernel per NBS type.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable

import numpy as np

if TYPE_CHECKING:
    from .instance import UcMeasure

TEMP_MAX = "TempMax"
TEMP_MIN = "TempMin"
PM25 = "PM2.5"
PM10 = "PM10"

DEFAULT_MEASURE_IDS = (TEMP_MAX, TEMP_MIN, PM25, PM10)

MEASURE_UNITS = {
    TEMP_MAX: "degC",
    TEMP_MIN: "degC",
    PM25: "ug/m3",
    PM10: "ug/m3",
}

# (id, display name, total annual cost in EUR per m^2: installation amortized
# over 7 years plus yearly maintenance)
NBS_CATALOG = (
    ("GW", "Green Wall", 78.9),
    ("GR", "Green Roof", 52.0),
    ("ST", "Street Tree", 21.0),
    ("UP", "Urban Park", 37.8),
)

DEFAULT_NBS_IDS = tuple(row[0] for row in NBS_CATALOG)

# (nbs id, measure id) -> (size, edge value, center value). Center values for
# the PM kernels come from absorption percentages applied to typical ambient
# concentrations; TempMin centers are roughly 70% of the TempMax ones.
KERNEL_TABLE = {
    ("GW", TEMP_MAX): (5, 0.10, 2.70),
    ("GW", TEMP_MIN): (3, 0.10, 1.90),
    ("GW", PM25): (5, 0.10, 5.03),
    ("GW", PM10): (5, 0.10, 12.90),
    ("GR", TEMP_MAX): (5, 0.10, 2.00),
    ("GR", TEMP_MIN): (3, 0.10, 1.40),
    ("GR", PM25): (5, 0.10, 2.51),
    ("GR", PM10): (5, 0.10, 6.45),
    ("ST", TEMP_MAX): (5, 0.10, 1.30),
    ("ST", TEMP_MIN): (3, 0.10, 0.70),
    ("ST", PM25): (3, 0.10, 4.02),
    ("ST", PM10): (3, 0.10, 10.32),
    ("UP", TEMP_MAX): (5, 0.10, 3.50),
    ("UP", TEMP_MIN): (3, 0.10, 2.50),
    ("UP", PM25): (7, 0.10, 5.03),
    ("UP", PM10): (7, 0.10, 12.90),
}

# nbs id -> (size, edge, center) for the accessibility kernel. The 1x1 green
# roof kernel keeps only its center value.
FAIRNESS_TABLE = {
    "GW": (5, 2.0, 6.0),
    "GR": (1, 0.1, 2.0),
    "ST": (3, 0.1, 4.0),
    "UP": (11, 4.0, 10.0),
}


class KernelError(ValueError):
    """Invalid kernel shape or entries."""


@dataclass(eq=False)
class Kernel:
    """Odd-sized nonnegative impact matrix whose center entry is its maximum."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.ndim != 2:
            raise KernelError("kernel must be a 2D matrix")
        w, h = self.entries.shape
        if w % 2 == 0 or h % 2 == 0:
            raise KernelError(f"kernel dimensions must be odd, got {w}x{h}")
        if not np.all(np.isfinite(self.entries)):
            raise KernelError("kernel entries must be finite")
        if np.any(self.entries < 0):
            raise KernelError("kernel entries must be nonnegative")
        if self.entries.max(initial=0.0) > self.center + 1e-12:
            raise KernelError("kernel center must be the maximum entry")

    @property
    def width(self) -> int:
        return self.entries.shape[0]

    @property
    def height(self) -> int:
        return self.entries.shape[1]

    @property
    def center(self) -> float:
        return float(self.entries[self.width // 2, self.height // 2])

    def sum(self) -> float:
        return float(self.entries.sum())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Kernel) and np.array_equal(self.entries, other.entries)


@dataclass(frozen=True)
class ImpactSpec:
    """Peak/edge impact values and the (odd, square) kernel size they span."""

    center: float
    edge: float
    size: int

    def __post_init__(self) -> None:
        if self.size < 1 or self.size % 2 == 0:
            raise KernelError(f"kernel size must be odd and positive, got {self.size}")
        if self.center <= 0:
            raise KernelError("center value must be positive")
        if not 0 <= self.edge <= self.center:
            raise KernelError("edge value must satisfy 0 <= edge <= center")


def build_kernel(spec: ImpactSpec) -> Kernel:
    """Build a square kernel decaying linearly from center to edge.

    Entries are constant on Chebyshev rings: ring d (0 at the center, D at the
    border, D = size // 2) holds (1 - d/D) * center + (d/D) * edge, so the
    center and edge values are reproduced exactly.
    """
    half = spec.size // 2
    if half == 0:
        return Kernel(np.array([[spec.center]]))
    axis = np.abs(np.arange(spec.size) - half)
    ring = np.maximum.outer(axis, axis)
    t = ring / half
    return Kernel((1.0 - t) * spec.center + t * spec.edge)


def default_kernel_set(
    nbs_ids: Iterable[str] = DEFAULT_NBS_IDS,
    measure_ids: Iterable[str] = DEFAULT_MEASURE_IDS,
) -> tuple[dict[tuple[str, str], Kernel], dict[str, Kernel]]:
    """Return ((measure id, nbs id) -> kernel, nbs id -> fairness kernel)."""
    kernels: dict[tuple[str, str], Kernel] = {}
    for u in measure_ids:
        for t in nbs_ids:
            try:
                size, edge, center = KERNEL_TABLE[(t, u)]
            except KeyError:
                raise KernelError(f"no default kernel for NBS {t!r} and measure {u!r}")
            kernels[(u, t)] = build_kernel(ImpactSpec(center=center, edge=edge, size=size))
    fairness: dict[str, Kernel] = {}
    for t in nbs_ids:
        size, edge, center = FAIRNESS_TABLE[t]
        fairness[t] = build_kernel(ImpactSpec(center=center, edge=edge, size=size))
    return kernels, fairness


def derive_delta(measure: "UcMeasure") -> float:
    """Default cap on the achievable reduction: 20% of the observed maximum."""
    return 0.2 * float(np.max(measure.field))


def compute_big_m(kernels: Iterable[Kernel]) -> float:
    """Upper bound on any cell's summed impact for one measure.

    Every window cell contributes at most its kernel entry and hosts at most
    one NBS, so the full sum of the strongest kernel bounds the impact value.
    """
    sums = [k.sum() for k in kernels]
    if not sums:
        raise KernelError("big-M needs at least one kernel")
    return max(sums)
