"""Connected-component clustering of contiguous candidate cells.

Contiguous eligible regions (4-connected) within a size band become clusters
that must be installed all-or-nothing; everything else stays individually
placeable. By default only urban parks are clustered, since they are the one
bundled type that needs contiguous ground.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .instance import Cell, Instance

DEFAULT_MIN_SIZE = 5
DEFAULT_MAX_SIZE = 50
DEFAULT_CLUSTERED_NBS = ("UP",)

# 4-connectivity: no diagonal adjacency.
_STRUCTURE = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass
class PartitionEntry:
    """Clusters and leftover individually-placeable cells for one NBS type."""

    nbs_id: str
    clusters: list[list[Cell]]
    free_cells: list[Cell]


@dataclass
class ClusterPartition:
    entries: dict[str, PartitionEntry]

    def as_instance_clusters(self) -> dict[str, list[list[Cell]]]:
        return {t: e.clusters for t, e in sorted(self.entries.items())}


def label_components(mask: np.ndarray) -> list[list[Cell]]:
    """Maximal 4-connected regions of True cells, as sorted coordinate lists.

    Components are ordered by their first cell in row-major order, which makes
    the output independent of any internal labeling order.
    """
    mask = np.asarray(mask, dtype=bool)
    labeled, n = ndimage.label(mask, structure=_STRUCTURE)
    components: list[list[Cell]] = []
    for lab in range(1, n + 1):
        ii, jj = np.nonzero(labeled == lab)
        components.append(sorted(zip(ii.tolist(), jj.tolist())))
    components.sort(key=lambda cells: cells[0])
    return components


def build_partition(
    inst: Instance,
    nbs_id: str,
    min_size: int = DEFAULT_MIN_SIZE,
    max_size: int = DEFAULT_MAX_SIZE,
) -> PartitionEntry:
    """Cluster one NBS type's eligible cells by connected component size.

    Components inside [min_size, max_size] become clusters. Smaller and larger
    components are not clustered; their cells remain individually placeable.
    """
    if min_size > max_size:
        raise ValueError(f"min_size {min_size} > max_size {max_size}")
    eligible = inst.eligible_mask(nbs_id)
    clusters: list[list[Cell]] = []
    free: list[Cell] = []
    for component in label_components(eligible):
        if min_size <= len(component) <= max_size:
            clusters.append(component)
        else:
            free.extend(component)
    return PartitionEntry(nbs_id=nbs_id, clusters=clusters, free_cells=sorted(free))


def partition_instance(
    inst: Instance,
    nbs_ids: list[str] | None = None,
    min_size: int = DEFAULT_MIN_SIZE,
    max_size: int = DEFAULT_MAX_SIZE,
) -> ClusterPartition:
    """Partition the given NBS types (default: urban parks, when present)."""
    if nbs_ids is None:
        nbs_ids = [t for t in DEFAULT_CLUSTERED_NBS if t in inst.nbs_ids]
    entries = {t: build_partition(inst, t, min_size, max_size) for t in nbs_ids}
    return ClusterPartition(entries=entries)


def with_clusters(inst: Instance, partition: ClusterPartition) -> Instance:
    """Copy of the instance annotated with the partition's clusters."""
    from dataclasses import replace

    return replace(inst, clusters=partition.as_instance_clusters())
