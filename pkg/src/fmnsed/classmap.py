"""Class vocabulary: 447 training classes, 407 of them evaluated.

The vocabulary ships as a versioned CSV (`index,class_id,name,in_eval`)
bundled with the package. The bundled v1 file uses synthetic identifiers;
swap in a site-specific file with the same schema to evaluate against a
real label set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

NUM_TRAIN_CLASSES = 447
NUM_EVAL_CLASSES = 407

__all__ = ["ClassMap", "load_default_classmap", "NUM_TRAIN_CLASSES", "NUM_EVAL_CLASSES"]


@dataclass(frozen=True)
class ClassMap:
    ids: tuple[str, ...]
    names: tuple[str, ...]
    in_eval: tuple[bool, ...]

    def __post_init__(self):
        if not (len(self.ids) == len(self.names) == len(self.in_eval)):
            raise ValueError("classmap columns have mismatched lengths")
        if len(set(self.names)) != len(self.names):
            raise ValueError("classmap names must be unique")

    @property
    def num_classes(self) -> int:
        return len(self.ids)

    @property
    def eval_indices(self) -> tuple[int, ...]:
        return tuple(i for i, flag in enumerate(self.in_eval) if flag)

    def index_of(self, name: str) -> int:
        try:
            return self._name_index()[name]
        except KeyError:
            raise KeyError(f"class label {name!r} is not in the class map") from None

    def _name_index(self) -> dict[str, int]:
        cache = getattr(self, "_idx_cache", None)
        if cache is None:
            cache = {n: i for i, n in enumerate(self.names)}
            object.__setattr__(self, "_idx_cache", cache)
        return cache

    @classmethod
    def from_csv(cls, fp) -> "ClassMap":
        reader = csv.DictReader(fp)
        rows = sorted(reader, key=lambda r: int(r["index"]))
        if [int(r["index"]) for r in rows] != list(range(len(rows))):
            raise ValueError("classmap indices must be 0..N-1 without gaps")
        return cls(
            ids=tuple(r["class_id"] for r in rows),
            names=tuple(r["name"] for r in rows),
            in_eval=tuple(r["in_eval"].strip() == "1" for r in rows),
        )


def load_default_classmap() -> ClassMap:
    """Load the bundled v1 vocabulary (447 classes, 407 flagged for eval)."""
    ref = resources.files("fmnsed").joinpath("data/classmap_v1.csv")
    with ref.open("r", encoding="utf-8") as fp:
        cmap = ClassMap.from_csv(fp)
    if cmap.num_classes != NUM_TRAIN_CLASSES:
        raise ValueError(f"bundled classmap has {cmap.num_classes} classes")
    if len(cmap.eval_indices) != NUM_EVAL_CLASSES:
        raise ValueError(f"bundled classmap flags {len(cmap.eval_indices)} eval classes")
    return cmap
