"""
Exact finite-field arithmetic for every code in the package.

Scalars are `FieldElement` values tied to a `FieldSpec`; vectors and matrices
are `galois.FieldArray` instances of a FieldSpec's field class, so numpy
indexing and `@` work unchanged and every reduction stays exact.
"""

from enum import Enum
from functools import lru_cache
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple, Type, Union

import galois
import numpy as np
import networkx as nx

from cmr.errors import (
    DivisionByZeroError,
    FieldMismatchError,
    InconsistentSystemError,
    InterpolationError,
    ParameterError,
    SingularSystemError,
)

DEFAULT_BINARY_POLYS = {8: 0x11D, 16: 0x1100B}


class FieldKind(str, Enum):
    PRIME = "prime"
    BINARY = "binary"


class ArithOp(str, Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"


@lru_cache(maxsize=None)
def _field_class(kind: FieldKind, modulus: int, order: int) -> Type[galois.FieldArray]:
    if kind is FieldKind.PRIME:
        return galois.GF(modulus)
    return galois.GF(order, irreducible_poly=modulus)


@dataclass(frozen=True)
class FieldSpec:
    kind: FieldKind
    modulus: int
    order: int

    def __post_init__(self):
        if self.kind is FieldKind.PRIME:
            if not galois.is_prime(self.modulus) or self.order != self.modulus:
                raise ParameterError(f"GF({self.modulus}) is not a prime field")
            return
        poly = galois.Poly.Int(self.modulus)
        if poly.degree < 2 or self.order != 2**poly.degree:
            raise ParameterError(f"polynomial {self.modulus:#x} does not define GF({self.order})")
        if not poly.is_irreducible():
            raise ParameterError(f"polynomial {self.modulus:#x} is reducible over GF(2)")

    @classmethod
    def prime(cls, p: int) -> "FieldSpec":
        return cls(FieldKind.PRIME, p, p)

    @classmethod
    def binary(cls, w: int, poly: Optional[int] = None) -> "FieldSpec":
        if poly is None:
            if w not in DEFAULT_BINARY_POLYS:
                raise ParameterError(f"no default polynomial for GF(2^{w}); pass one explicitly")
            poly = DEFAULT_BINARY_POLYS[w]
        return cls(FieldKind.BINARY, poly, 2**w)

    @classmethod
    def parse(cls, text: str) -> "FieldSpec":
        """
        Parses `gf256`, `gf65536`, `gf256:0x11b`, `prime:P` or `gfP` for a prime P
        """
        label = text.strip().lower()
        try:
            if label.startswith("prime:"):
                return cls.prime(int(label.split(":", 1)[1]))
            if label.startswith("gf"):
                body, _, poly = label[2:].partition(":")
                order = int(body)
                if order & (order - 1) == 0 and order > 2:
                    return cls.binary(order.bit_length() - 1, int(poly, 16) if poly else None)
                return cls.prime(order)
        except ValueError as e:
            if isinstance(e, ParameterError):
                raise
            raise ParameterError(f"unreadable field spec {text!r}") from e
        raise ParameterError(f"unreadable field spec {text!r}")

    @property
    def gf(self) -> Type[galois.FieldArray]:
        return _field_class(self.kind, self.modulus, self.order)

    @property
    def label(self) -> str:
        if self.kind is FieldKind.PRIME:
            return f"prime:{self.modulus}"
        w = self.order.bit_length() - 1
        if DEFAULT_BINARY_POLYS.get(w) == self.modulus:
            return f"gf{self.order}"
        return f"gf{self.order}:{self.modulus:#x}"

    @property
    def width(self) -> int:
        """Bytes per stored element"""
        return max(1, ((self.order - 1).bit_length() + 7) // 8)

    @property
    def data_bits(self) -> int:
        """Payload bits that always fit in one element"""
        return self.order.bit_length() - 1

    def element(self, value: int) -> "FieldElement":
        return FieldElement(int(value), self)

    def array(self, values) -> galois.FieldArray:
        return self.gf(np.asarray(values, dtype=np.int64))

    def zeros(self, shape) -> galois.FieldArray:
        return self.gf.Zeros(shape)

    def random(self, shape, rng: np.random.Generator, nonzero: bool = False) -> galois.FieldArray:
        return self.gf.Random(shape, low=1 if nonzero else 0, seed=rng)


@dataclass(frozen=True)
class FieldElement:
    value: int
    spec: FieldSpec

    def __post_init__(self):
        if not 0 <= self.value < self.spec.order:
            raise ParameterError(f"{self.value} is not an element of {self.spec.label}")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        return field_arith(self, other, ArithOp.ADD)

    def __sub__(self, other: "FieldElement") -> "FieldElement":
        return field_arith(self, other, ArithOp.SUB)

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        return field_arith(self, other, ArithOp.MUL)

    def __truediv__(self, other: "FieldElement") -> "FieldElement":
        return field_arith(self, other, ArithOp.DIV)

    def inverse(self) -> "FieldElement":
        return field_arith(self.spec.element(1), self, ArithOp.DIV)


def field_arith(a: FieldElement, b: FieldElement, op: ArithOp) -> FieldElement:
    if a.spec != b.spec:
        raise FieldMismatchError(f"{a.spec.label} and {b.spec.label} do not mix")
    gf = a.spec.gf
    x, y = gf(a.value), gf(b.value)
    if op is ArithOp.ADD:
        result = x + y
    elif op is ArithOp.SUB:
        result = x - y
    elif op is ArithOp.MUL:
        result = x * y
    else:
        if b.value == 0:
            raise DivisionByZeroError(f"division by zero in {a.spec.label}")
        result = x / y
    return FieldElement(int(result), a.spec)


def field_of(array: galois.FieldArray) -> Type[galois.FieldArray]:
    return type(array)


def plain(array: galois.FieldArray) -> np.ndarray:
    return array.view(np.ndarray)


def vstack(gf: Type[galois.FieldArray], blocks: Sequence[galois.FieldArray]) -> galois.FieldArray:
    return gf(np.concatenate([plain(b) for b in blocks], axis=0))


def hstack(gf: Type[galois.FieldArray], blocks: Sequence[galois.FieldArray]) -> galois.FieldArray:
    return gf(np.concatenate([plain(b) for b in blocks], axis=1))


def mat_rank(m: galois.FieldArray) -> int:
    if m.size == 0:
        return 0
    return int(np.linalg.matrix_rank(m))


def pivot_columns(reduced: galois.FieldArray) -> List[int]:
    """Leading column of each nonzero row of a row-reduced matrix"""
    values = plain(reduced)
    return [int(np.argmax(values[i] != 0)) for i in np.flatnonzero(values.any(axis=1))]


def components(m: galois.FieldArray) -> Iterator[Tuple[List[int], List[int]]]:
    """
    Splits a sparse matrix into independent blocks

    Rows and columns are vertices of a bipartite graph with an edge per nonzero
    entry; each connected component is a block of a block-diagonal permutation
    of `m`. Zero rows and zero columns belong to no block.
    """
    rows, cols = np.nonzero(plain(m))
    n_rows = m.shape[0]
    graph = nx.Graph()
    graph.add_edges_from(zip(rows.tolist(), (cols + n_rows).tolist()))
    for component in nx.connected_components(graph):
        block_rows = sorted(v for v in component if v < n_rows)
        block_cols = sorted(v - n_rows for v in component if v >= n_rows)
        yield block_rows, block_cols


def block_rank(m: galois.FieldArray) -> int:
    return sum(mat_rank(m[np.ix_(rows, cols)]) for rows, cols in components(m))


def mat_solve(a: galois.FieldArray, b: galois.FieldArray) -> galois.FieldArray:
    """
    Solves a·x = b for a square or overdetermined consistent system

    Args:
        a (FieldArray): coefficient matrix, rows ≥ cols
        b (FieldArray): right-hand side vector or matrix with a's row count

    Returns:
        FieldArray: the unique solution, shaped like b's columns
    """
    if field_of(a) is not field_of(b):
        raise FieldMismatchError("coefficient matrix and right-hand side live in different fields")
    vector = b.ndim == 1
    rhs = b.reshape(-1, 1) if vector else b
    if a.shape[0] != rhs.shape[0]:
        raise ParameterError(f"{a.shape[0]} equations but {rhs.shape[0]} right-hand rows")
    n_unknowns = a.shape[1]
    if a.shape[0] < n_unknowns:
        raise SingularSystemError(
            f"{a.shape[0]} equations cannot determine {n_unknowns} unknowns",
            rank=mat_rank(a),
            expected=n_unknowns,
        )
    reduced = hstack(field_of(a), [a, rhs]).row_reduce()
    pivots = pivot_columns(reduced)
    if any(p >= n_unknowns for p in pivots):
        raise InconsistentSystemError("right-hand side lies outside the column space")
    if len(pivots) < n_unknowns:
        raise SingularSystemError(
            f"rank {len(pivots)} short of {n_unknowns} by {n_unknowns - len(pivots)}",
            rank=len(pivots),
            expected=n_unknowns,
        )
    x = reduced[:n_unknowns, n_unknowns:]
    return x.reshape(-1) if vector else x


def block_solve(a: galois.FieldArray, b: galois.FieldArray) -> galois.FieldArray:
    """mat_solve for a 1-D right-hand side, one connected block at a time"""
    gf = field_of(a)
    x = gf.Zeros(a.shape[1])
    covered, used = set(), set()
    for rows, cols in components(a):
        x[cols] = mat_solve(a[np.ix_(rows, cols)], b[rows])
        covered.update(cols)
        used.update(rows)
    if len(covered) < a.shape[1]:
        rank = block_rank(a)
        raise SingularSystemError(
            f"{a.shape[1] - len(covered)} unknowns appear in no equation", rank=rank, expected=a.shape[1]
        )
    idle = [i for i in range(a.shape[0]) if i not in used]
    if idle and np.any(plain(b[idle]) != 0):
        raise InconsistentSystemError("an empty equation has a nonzero right-hand side")
    return x


def interpolate(xs: galois.FieldArray, ys: galois.FieldArray, degree_bound: int) -> galois.FieldArray:
    """
    Coefficients (lowest degree first) of the unique polynomial of degree < degree_bound
    through (xs, ys); extra points are checked for consistency
    """
    if degree_bound < 1:
        raise ParameterError("degree bound must be positive")
    if len(xs) != len(ys):
        raise ParameterError(f"{len(xs)} abscissas but {len(ys)} values")
    if len(np.unique(plain(xs))) != len(xs):
        raise InterpolationError("duplicate x values")
    if len(xs) < degree_bound:
        raise InterpolationError(f"{len(xs)} points cannot fix a polynomial with {degree_bound} coefficients")
    gf = field_of(xs)
    poly = galois.lagrange_poly(xs[:degree_bound], ys[:degree_bound])
    if len(xs) > degree_bound and not np.array_equal(poly(xs[degree_bound:]), ys[degree_bound:]):
        raise InterpolationError(f"points exceed degree bound {degree_bound}")
    coeffs = gf.Zeros(degree_bound)
    ascending = poly.coeffs[::-1]
    coeffs[: len(ascending)] = ascending
    return coeffs


def evaluate(coeffs: galois.FieldArray, xs: galois.FieldArray) -> galois.FieldArray:
    """Evaluates a lowest-degree-first coefficient vector at xs"""
    return galois.Poly(coeffs, order="asc")(xs)


def lagrange_interpolate(
    points: Sequence[Tuple[Union[FieldElement, int], Union[FieldElement, int]]],
    degree_bound: int,
    spec: Optional[FieldSpec] = None,
) -> List[FieldElement]:
    """Scalar front end to `interpolate`"""
    if not points:
        raise InterpolationError("no points given")
    if spec is None:
        first = points[0][0]
        if not isinstance(first, FieldElement):
            raise ParameterError("field spec required for integer points")
        spec = first.spec
    for x, y in points:
        for value in (x, y):
            if isinstance(value, FieldElement) and value.spec != spec:
                raise FieldMismatchError(f"point in {value.spec.label}, expected {spec.label}")

    def raw(value):
        return value.value if isinstance(value, FieldElement) else int(value)

    xs = spec.array([raw(x) for x, _ in points])
    ys = spec.array([raw(y) for _, y in points])
    return [spec.element(int(c)) for c in interpolate(xs, ys, degree_bound)]


class EliminationBasis:
    """
    Incrementally grown row-reduced basis over a fixed set of columns

    The basis rows always carry an identity on `pivots`; residuals of new rows
    are taken against it, so rank gains cost one matrix product.
    """

    def __init__(self, gf: Type[galois.FieldArray], width: int):
        self.gf = gf
        self.width = width
        self.rows = gf.Zeros((0, width))
        self.pivots: List[int] = []

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def residual(self, rows: galois.FieldArray) -> galois.FieldArray:
        if not self.pivots:
            return rows
        return rows - rows[:, self.pivots] @ self.rows

    def gain(self, rows: galois.FieldArray) -> int:
        return block_rank(self.residual(rows))

    def add(self, rows: galois.FieldArray) -> int:
        residual = self.residual(rows)
        reduced_rows, new_pivots = [], []
        for block_rows, block_cols in components(residual):
            reduced = residual[np.ix_(block_rows, block_cols)].row_reduce()
            for local_row, local_pivot in zip(range(reduced.shape[0]), pivot_columns(reduced)):
                full = self.gf.Zeros(self.width)
                full[block_cols] = reduced[local_row]
                reduced_rows.append(full)
                new_pivots.append(block_cols[local_pivot])
        if not new_pivots:
            return 0
        fresh = vstack(self.gf, [row.reshape(1, -1) for row in reduced_rows])
        if self.pivots:
            self.rows = self.rows - self.rows[:, new_pivots] @ fresh
        self.rows = vstack(self.gf, [self.rows, fresh])
        self.pivots.extend(new_pivots)
        return len(new_pivots)
