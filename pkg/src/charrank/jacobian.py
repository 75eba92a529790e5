"""Parametrization maps and their hand-coded Jacobians.

Parameters are stored flat, block after block (V|W|X or A|B|C[|X]). Factor
blocks are column-major: all rows of factor column 0, then column 1, and so
on. The X block lists the unobserved cells in lexicographic order.

Every routine accepts an optional prime ``modulus``; when given, values are
residues in ``[0, modulus)`` and all arithmetic is carried out mod p in int64.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ProblemSpec, Variant

# residue products are formed in int64, so each factor must stay below 2**31
MAX_INT64_MODULUS = 2**31


@dataclass(frozen=True)
class ParameterPoint:
    spec: ProblemSpec
    values: np.ndarray
    modulus: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if self.modulus is None:
            values = values.astype(np.float64)
        else:
            if self.modulus > MAX_INT64_MODULUS:
                raise ValueError(f"modulus {self.modulus} too large for int64 residue arithmetic")
            values = np.mod(values.astype(np.int64), self.modulus)
        if values.shape != (self.spec.param_dim,):
            raise ValueError(f"expected {self.spec.param_dim} parameters, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def block(self, name: str) -> np.ndarray:
        start = 0
        for bname, size in self.spec.blocks():
            if bname == name:
                return self.values[start:start + size]
            start += size
        raise KeyError(name)

    def factors(self) -> list[np.ndarray]:
        """Factor matrices (n_d x r), one per mode."""
        r = self.spec.rank
        out, start = [], 0
        for n in self.spec.dims:
            out.append(self.values[start:start + n * r].reshape((n, r), order="F"))
            start += n * r
        return out

    def complement_values(self) -> np.ndarray:
        if not self.spec.is_completion:
            return self.values[:0]
        return self.block("X")

    @classmethod
    def from_blocks(cls, spec: ProblemSpec, factors: Sequence[np.ndarray], x: Sequence | None = None,
                    modulus: int | None = None) -> "ParameterPoint":
        parts = [np.asarray(f).reshape((n, spec.rank)).ravel(order="F") for f, n in zip(factors, spec.dims)]
        if spec.is_completion:
            parts.append(np.zeros(spec.complement_dim) if x is None else np.asarray(x).ravel())
        return cls(spec, np.concatenate(parts), modulus)


def random_point(spec: ProblemSpec, rng: np.random.Generator, modulus: int | None = None) -> ParameterPoint:
    """Standard normal entries, or uniform residues when ``modulus`` is given."""
    if modulus is None:
        return ParameterPoint(spec, rng.standard_normal(spec.param_dim))
    return ParameterPoint(spec, rng.integers(0, modulus, size=spec.param_dim, dtype=np.int64), modulus)


def _mulmod(a: np.ndarray, b: np.ndarray, p: int | None) -> np.ndarray:
    if p is None:
        return a * b
    return (a * b) % p


def apply_map(point: ParameterPoint) -> np.ndarray:
    """Linearized image VW^T + X, [[A,B,C]], or [[A,B,C]] + X."""
    spec, p = point.spec, point.modulus
    factors = point.factors()
    if p is None:
        if len(factors) == 2:
            image = factors[0] @ factors[1].T
        else:
            image = np.einsum("il,jl,kl->ijk", *factors)
        image = image.ravel()
    else:
        image = np.zeros(spec.ambient_dim, dtype=np.int64)
        for l in range(spec.rank):
            term = factors[0][:, l]
            for f in factors[1:]:
                term = _mulmod(term[:, None], f[None, :, l], p).ravel()
            image = (image + term) % p
    if spec.is_completion:
        image = image.copy()
        free = spec.pattern.unobserved_linear()
        image[free] = image[free] + point.complement_values()
        if p is not None:
            image %= p
    return image


@dataclass(frozen=True)
class JacobianMatrix:
    """Dense Jacobian with labels.

    Rows are ambient cells in lexicographic order, columns are parameters in
    storage order.
    """

    spec: ProblemSpec
    data: np.ndarray
    column_labels: tuple[str, ...]
    row_labels: tuple[str, ...]
    modulus: int | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["block"] + [label[0] for label in self.column_labels])
        writer.writerow(["row"] + list(self.column_labels))
        fmt = str if self.modulus is not None else repr
        for label, row in zip(self.row_labels, self.data.tolist()):
            writer.writerow([label] + [fmt(v) for v in row])
        return buf.getvalue()


def _cell_label(t) -> str:
    return "(" + ",".join(str(int(c)) for c in t) + ")"


def column_labels(spec: ProblemSpec) -> tuple[str, ...]:
    """``V[i,l]`` names factor-column ``l``, row ``i``; ``X(i,j)`` names a free cell."""
    labels = []
    names = "VW" if spec.variant is Variant.MATRIX_COMPLETION else "ABC"
    for name, n in zip(names, spec.dims):
        for l in range(spec.rank):
            labels.extend(f"{name}[{i},{l}]" for i in range(n))
    if spec.is_completion:
        labels.extend("X" + _cell_label(t) for t in spec.pattern.unobserved())
    return tuple(labels)


def row_labels(spec: ProblemSpec) -> tuple[str, ...]:
    return tuple(_cell_label(t) for t in np.ndindex(*spec.dims))


def _assemble(point: ParameterPoint) -> JacobianMatrix:
    spec, p = point.spec, point.modulus
    factors = point.factors()
    dims, r = spec.dims, spec.rank
    dtype = np.float64 if p is None else np.int64
    data = np.zeros((spec.ambient_dim, spec.param_dim), dtype=dtype)

    grids = np.indices(dims).reshape(len(dims), -1)  # coordinates of each row
    rows = np.arange(spec.ambient_dim)
    offset = 0
    for d, n in enumerate(dims):
        for l in range(r):
            # derivative of the l-th rank-one term w.r.t. factor d, entry (t_d, l)
            val = None
            for e, f in enumerate(factors):
                if e == d:
                    continue
                col = f[grids[e], l]
                val = col if val is None else _mulmod(val, col, p)
            data[rows, offset + l * n + grids[d]] = val
        offset += n * r
    if spec.is_completion:
        free = spec.pattern.unobserved_linear()
        data[free, offset + np.arange(free.size)] = 1
    return JacobianMatrix(spec, data, column_labels(spec), row_labels(spec), p)


def assemble_matrix_completion(point: ParameterPoint) -> JacobianMatrix:
    if point.spec.variant is not Variant.MATRIX_COMPLETION:
        raise ValueError(f"expected MatrixCompletion, got {point.spec.variant.value}")
    return _assemble(point)


def assemble_cpd(point: ParameterPoint) -> JacobianMatrix:
    if point.spec.variant is not Variant.CPD:
        raise ValueError(f"expected CpdDecomposition, got {point.spec.variant.value}")
    return _assemble(point)


def assemble_tensor_completion(point: ParameterPoint) -> JacobianMatrix:
    if point.spec.variant is not Variant.TENSOR_COMPLETION:
        raise ValueError(f"expected TensorCompletion, got {point.spec.variant.value}")
    return _assemble(point)


def assemble(point: ParameterPoint) -> JacobianMatrix:
    """Dispatch on the spec variant."""
    return _assemble(point)
