"""Multi-index bookkeeping for the auxiliary density operators."""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

#: neighbor-table entry for an index outside the truncated hierarchy
ABSENT = -1
DEFAULT_MAX_ADOS = 2_000_000


def _compositions(total, parts):
    """Compositions of ``total`` into ``parts`` parts, lexicographically descending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class HierarchyIndex:
    """Graded-lexicographic ADO ordering with O(1) neighbor lookup.

    ``plus[a, k]`` / ``minus[a, k]`` give the offset of the ADO with mode
    ``k`` raised / lowered by one, or ``ABSENT``.
    """

    n_cor: int
    level: int
    indices: np.ndarray
    plus: np.ndarray
    minus: np.ndarray

    @property
    def size(self):
        return len(self.indices)

    def offset(self, n):
        return self._lookup()[tuple(int(x) for x in n)]

    def _lookup(self):
        cache = self.__dict__.get("_map")
        if cache is None:
            cache = {tuple(int(x) for x in row): a for a, row in enumerate(self.indices)}
            object.__setattr__(self, "_map", cache)
        return cache

    def descriptor(self):
        return {"n_cor": self.n_cor, "level": self.level, "ordering": "graded-lex-desc", "size": self.size}


def hierarchy_size(n_cor, level):
    return comb(level + n_cor, n_cor)


def enumerate_hierarchy(n_cor, level, max_ados=DEFAULT_MAX_ADOS) -> HierarchyIndex:
    if n_cor < 0 or level < 0:
        raise ValueError(f"need n_cor >= 0 and level >= 0, got n_cor={n_cor}, level={level}")
    count = hierarchy_size(n_cor, level)
    if count > max_ados:
        raise MemoryError(
            f"hierarchy with n_cor={n_cor}, level={level} has {count} ADOs, above the budget of {max_ados}"
        )
    if n_cor == 0:
        rows = [()]
    else:
        rows = [c for total in range(level + 1) for c in _compositions(total, n_cor)]
    indices = np.array(rows, dtype=np.int64).reshape(len(rows), n_cor)
    lookup = {row: a for a, row in enumerate(rows)}

    plus = np.full((len(rows), n_cor), ABSENT, dtype=np.int64)
    minus = np.full((len(rows), n_cor), ABSENT, dtype=np.int64)
    for a, row in enumerate(rows):
        for k in range(n_cor):
            up = row[:k] + (row[k] + 1,) + row[k + 1:]
            plus[a, k] = lookup.get(up, ABSENT)
            if row[k] > 0:
                minus[a, k] = lookup[row[:k] + (row[k] - 1,) + row[k + 1:]]
    index = HierarchyIndex(n_cor, level, indices, plus, minus)
    object.__setattr__(index, "_map", lookup)
    return index
