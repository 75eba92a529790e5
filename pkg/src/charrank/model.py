"""Problem specifications, observation patterns and closed-form dimension counts.

Index tuples are 0-based everywhere (code and files). A matrix cell ``(i, j)``
linearizes to ``i*n2 + j``; a tensor cell ``(i, j, k)`` to ``(i*n2 + j)*n3 + k``.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import InvalidSpecError, MaskParseError, UnsupportedVariantError

Index = tuple[int, ...]


class Variant(str, enum.Enum):
    MATRIX_COMPLETION = "MatrixCompletion"
    CPD = "CpdDecomposition"
    TENSOR_COMPLETION = "TensorCompletion"


def _check_extents(shape: Sequence[int], allowed: tuple[int, ...] = (2, 3)) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if len(shape) not in allowed:
        raise InvalidSpecError(f"shape must have {' or '.join(map(str, allowed))} extents, got {len(shape)}")
    if any(s < 1 for s in shape):
        raise InvalidSpecError(f"extents must be positive, got {list(shape)}")
    return shape


@dataclass(frozen=True)
class ObservationPattern:
    """Set of observed cells over a matrix or 3-way tensor.

    ``indices`` is stored sorted lexicographically and free of duplicates.
    Build instances through :meth:`from_indices` (validating) rather than the
    raw constructor.
    """

    shape: tuple[int, ...]
    indices: tuple[Index, ...]

    @classmethod
    def from_indices(cls, shape: Sequence[int], indices: Iterable[Sequence[int]]) -> "ObservationPattern":
        shape = _check_extents(shape)
        seen: set[Index] = set()
        for raw in indices:
            t = tuple(int(c) for c in raw)
            if len(t) != len(shape):
                raise InvalidSpecError(f"index {t} has arity {len(t)}, expected {len(shape)}")
            for c, n in zip(t, shape):
                if not 0 <= c < n:
                    raise InvalidSpecError(f"index {t} out of range for shape {list(shape)}")
            if t in seen:
                raise InvalidSpecError(f"duplicate index {t}")
            seen.add(t)
        return cls(shape, tuple(sorted(seen)))

    @classmethod
    def from_linear(cls, shape: Sequence[int], linear: Iterable[int]) -> "ObservationPattern":
        shape = _check_extents(shape)
        lin = np.asarray(sorted(int(x) for x in linear), dtype=np.int64)
        if lin.size and (lin[0] < 0 or lin[-1] >= math.prod(shape)):
            raise InvalidSpecError("linear index out of range")
        tuples = zip(*np.unravel_index(lin, shape)) if lin.size else ()
        return cls.from_indices(shape, tuples)

    @classmethod
    def full(cls, shape: Sequence[int]) -> "ObservationPattern":
        shape = _check_extents(shape)
        return cls(shape, tuple(itertools.product(*(range(n) for n in shape))))

    @classmethod
    def empty(cls, shape: Sequence[int]) -> "ObservationPattern":
        return cls(_check_extents(shape), ())

    @property
    def order(self) -> int:
        return len(self.shape)

    @property
    def m(self) -> int:
        return len(self.indices)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, item) -> bool:
        return tuple(item) in self._index_set

    @property
    def _index_set(self) -> frozenset[Index]:
        # cached lazily; the dataclass is frozen so bypass __setattr__
        try:
            return self.__dict__["_set_cache"]
        except KeyError:
            s = frozenset(self.indices)
            object.__setattr__(self, "_set_cache", s)
            return s

    def linear_indices(self) -> np.ndarray:
        if not self.indices:
            return np.zeros(0, dtype=np.int64)
        return np.ravel_multi_index(tuple(np.array(self.indices).T), self.shape).astype(np.int64)

    def unobserved_linear(self) -> np.ndarray:
        """Linear indices of the complement, ascending (= lexicographic)."""
        mask = np.ones(self.size, dtype=bool)
        mask[self.linear_indices()] = False
        return np.flatnonzero(mask).astype(np.int64)

    def unobserved(self) -> list[Index]:
        return [tuple(int(c) for c in t) for t in zip(*np.unravel_index(self.unobserved_linear(), self.shape))]

    def with_removed(self, index: Sequence[int]) -> "ObservationPattern":
        t = tuple(index)
        return ObservationPattern(self.shape, tuple(x for x in self.indices if x != t))

    # -- mask file format --------------------------------------------------

    def to_text(self) -> str:
        return "".join(" ".join(str(c) for c in t) + "\n" for t in self.indices)

    @classmethod
    def parse_text(cls, text: str, shape: Sequence[int], path: str | None = None) -> "ObservationPattern":
        """Parse the plain-text mask format.

        One tuple per line, whitespace-separated 0-based integers. ``#`` starts a
        comment; blank lines are ignored. Errors carry the 1-based line number.
        """
        shape = _check_extents(shape)
        first_seen: dict[Index, int] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            try:
                t = tuple(int(tok) for tok in body.split())
            except ValueError:
                raise MaskParseError(f"non-integer token in {body!r}", lineno, path) from None
            if len(t) != len(shape):
                raise MaskParseError(f"arity mismatch: got {len(t)} coordinates, expected {len(shape)}", lineno, path)
            for c, n in zip(t, shape):
                if not 0 <= c < n:
                    raise MaskParseError(f"index {t} out of range for shape {list(shape)}", lineno, path)
            if t in first_seen:
                raise MaskParseError(f"duplicate index {t} (first seen on line {first_seen[t]})", lineno, path)
            first_seen[t] = lineno
        return cls(shape, tuple(sorted(first_seen)))


@dataclass(frozen=True)
class DimensionSummary:
    ambient_dim: int
    param_dim: int
    tangent_dim: int
    complement_dim: int
    wellposed_target: int


@dataclass(frozen=True)
class ProblemSpec:
    """One identifiability instance.

    ``dims`` holds ``(n1, n2)`` for matrix completion and ``(n1, n2, n3)`` for the
    tensor variants. ``pattern`` is None exactly for CPD.
    """

    variant: Variant
    dims: tuple[int, ...]
    rank: int
    pattern: ObservationPattern | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "rank", int(self.rank))
        if self.variant is Variant.MATRIX_COMPLETION:
            _check_extents(self.dims, (2,))
        else:
            _check_extents(self.dims, (3,))
        if self.rank < 1:
            raise InvalidSpecError(f"rank must be positive, got {self.rank}")
        if self.variant is Variant.MATRIX_COMPLETION and self.rank > min(self.dims):
            raise InvalidSpecError(f"rank {self.rank} exceeds min extent {min(self.dims)}")
        if self.variant is Variant.CPD:
            if self.pattern is not None:
                raise InvalidSpecError("CpdDecomposition takes no observation pattern")
        else:
            if self.pattern is None:
                raise InvalidSpecError(f"{self.variant.value} requires an observation pattern")
            if tuple(self.pattern.shape) != self.dims:
                raise InvalidSpecError(f"pattern shape {list(self.pattern.shape)} does not match extents {list(self.dims)}")

    @classmethod
    def matrix_completion(cls, n1: int, n2: int, r: int, indices: Iterable[Sequence[int]] | ObservationPattern) -> "ProblemSpec":
        pattern = indices if isinstance(indices, ObservationPattern) else ObservationPattern.from_indices((n1, n2), indices)
        return cls(Variant.MATRIX_COMPLETION, (n1, n2), r, pattern)

    @classmethod
    def cpd(cls, n1: int, n2: int, n3: int, r: int) -> "ProblemSpec":
        return cls(Variant.CPD, (n1, n2, n3), r, None)

    @classmethod
    def tensor_completion(cls, n1: int, n2: int, n3: int, r: int, indices: Iterable[Sequence[int]] | ObservationPattern) -> "ProblemSpec":
        pattern = indices if isinstance(indices, ObservationPattern) else ObservationPattern.from_indices((n1, n2, n3), indices)
        return cls(Variant.TENSOR_COMPLETION, (n1, n2, n3), r, pattern)

    @property
    def is_completion(self) -> bool:
        return self.variant is not Variant.CPD

    @property
    def m(self) -> int:
        """Number of observed cells; the whole tensor for CPD."""
        return self.pattern.m if self.pattern is not None else self.ambient_dim

    @property
    def ambient_dim(self) -> int:
        return math.prod(self.dims)

    @property
    def complement_dim(self) -> int:
        return self.ambient_dim - self.m

    @property
    def param_dim(self) -> int:
        return self.rank * sum(self.dims) + self.complement_dim

    def blocks(self) -> list[tuple[str, int]]:
        """Parameter blocks as ``(name, length)`` in storage order."""
        names = "VW" if self.variant is Variant.MATRIX_COMPLETION else "ABC"
        out = [(name, n * self.rank) for name, n in zip(names, self.dims)]
        if self.is_completion:
            out.append(("X", self.complement_dim))
        return out

    # -- serialization -------------------------------------------------------

    def to_dict(self, mask_path: str | None = None) -> dict[str, Any]:
        doc: dict[str, Any] = {"variant": self.variant.value, "dims": list(self.dims), "rank": self.rank}
        if self.pattern is not None:
            if mask_path is not None:
                doc["mask_path"] = mask_path
            else:
                doc["indices"] = [list(t) for t in self.pattern.indices]
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any], base_dir: str | Path | None = None) -> "ProblemSpec":
        try:
            variant = Variant(doc["variant"])
            dims = tuple(int(d) for d in doc["dims"])
            rank = int(doc["rank"])
        except (KeyError, ValueError, TypeError) as exc:
            raise InvalidSpecError(f"malformed spec document: {exc}") from None
        pattern = None
        if variant is not Variant.CPD:
            if "indices" in doc and "mask_path" in doc:
                raise InvalidSpecError("spec document gives both indices and mask_path")
            if "indices" in doc:
                pattern = ObservationPattern.from_indices(dims, doc["indices"])
            elif "mask_path" in doc:
                path = Path(doc["mask_path"])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                pattern = ObservationPattern.parse_text(path.read_text(), dims, path=str(path))
            else:
                raise InvalidSpecError(f"{variant.value} document needs 'indices' or 'mask_path'")
        return cls(variant, dims, rank, pattern)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ProblemSpec":
        return cls.from_dict(json.loads(text))


def manifold_dim(n1: int, n2: int, r: int) -> int:
    """Dimension r(n1 + n2 - r) of the manifold of n1 x n2 matrices of rank r."""
    if min(n1, n2) < 1 or r < 1:
        raise InvalidSpecError("extents and rank must be positive")
    if r > min(n1, n2):
        raise InvalidSpecError(f"rank {r} exceeds min extent {min(n1, n2)}")
    return r * (n1 + n2 - r)


def cpd_tangent_dim(n1: int, n2: int, n3: int, r: int) -> int:
    """Parameter count of a rank-r CPD after removing the two scalings per component."""
    if min(n1, n2, n3, r) < 1:
        raise InvalidSpecError("extents and rank must be positive")
    return r * (n1 + n2 + n3 - 2)


def dimension_summary(spec: ProblemSpec) -> DimensionSummary:
    if spec.variant is Variant.MATRIX_COMPLETION:
        tangent = manifold_dim(*spec.dims, spec.rank)
    else:
        tangent = cpd_tangent_dim(*spec.dims, spec.rank)
    complement = spec.complement_dim
    return DimensionSummary(
        ambient_dim=spec.ambient_dim,
        param_dim=spec.param_dim,
        tangent_dim=tangent,
        complement_dim=complement,
        wellposed_target=tangent + complement,
    )


def necessary_sample_bound(spec: ProblemSpec) -> int:
    """Smallest m for which the well-posedness target does not exceed the ambient dimension."""
    if not spec.is_completion:
        raise UnsupportedVariantError("necessary_sample_bound applies to completion problems only")
    return dimension_summary(spec).tangent_dim
