"""Reduction of polynomial operator norms to linear-pencil norms.

A matrix-coefficient polynomial over the free group is normed in three
moves: a self-adjoint doubling that preserves the norm, a square-root
pencil turning a shifted polynomial into ``P* P`` with ``P`` of half the
degree, and a recovery of the extreme eigenvalues from two shifted
norms.  The terminal linear pencils go to a tree-based norm oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .freegroup import MatrixPencil, ReducedWord, astar_norm_lower, enumerate_ball, star

#: Weyl power handed to the default linear-pencil norm oracle.
DEFAULT_ORACLE_POWER = 256
#: Eigenvalues of the shifted root matrix below this abort the square root.
POSITIVITY_FLOOR = -1e-10
#: Slack allowed when checking shift data for 1-Lipschitz consistency.
LIPSCHITZ_SLACK = 1e-6

PencilNormOracle = Callable[[MatrixPencil], float]


def word_inverse(word: ReducedWord) -> ReducedWord:
    letters = tuple(star(c, word.d) for c in reversed(word.letters))
    return ReducedWord(word.d, letters)


def word_concat(left: ReducedWord, right: ReducedWord) -> ReducedWord:
    """Product of two reduced words, cancelling at the seam."""
    result = right
    for color in reversed(left.letters):
        result = result.extend_front(color)
    return result


@dataclass(frozen=True)
class GroupPolynomial:
    """Finitely supported map from reduced words to matrix coefficients.

    Coefficients share one (possibly rectangular) shape; the polynomial
    reads ``sum_g a_g (x) lambda(g)``.
    """

    d: int
    coefficients: Mapping[ReducedWord, np.ndarray]

    def __post_init__(self) -> None:
        normalized = {}
        shape = None
        for word, coeff in self.coefficients.items():
            if word.d != self.d:
                raise ValueError("word generator count differs from polynomial")
            matrix = np.asarray(coeff, dtype=complex)
            if matrix.ndim != 2:
                raise ValueError("coefficients must be matrices")
            if shape is None:
                shape = matrix.shape
            elif matrix.shape != shape:
                raise ValueError("coefficients must share one shape")
            normalized[word] = matrix
        object.__setattr__(self, "coefficients", normalized)

    @property
    def support(self) -> tuple[ReducedWord, ...]:
        return tuple(
            sorted(
                (w for w, a in self.coefficients.items() if np.any(a)),
                key=lambda w: (len(w.letters), w.letters),
            )
        )

    @property
    def coeff_shape(self) -> tuple[int, int]:
        for coeff in self.coefficients.values():
            return coeff.shape
        return (0, 0)

    @property
    def degree(self) -> int:
        lengths = [len(w.letters) for w in self.support]
        return max(lengths, default=0)

    @property
    def is_selfadjoint(self) -> bool:
        rows, cols = self.coeff_shape
        if rows != cols:
            return False
        for word in self.support:
            mirror = self.coefficient(word_inverse(word))
            own = self.coefficient(word)
            if not np.allclose(mirror, own.conj().T, rtol=0, atol=1e-12):
                return False
        return True

    def coefficient(self, word: ReducedWord) -> np.ndarray:
        found = self.coefficients.get(word)
        if found is not None:
            return found
        return np.zeros(self.coeff_shape, dtype=complex)

    def scaled(self, factor: complex) -> "GroupPolynomial":
        return GroupPolynomial(
            self.d, {w: factor * a for w, a in self.coefficients.items()}
        )


@dataclass(frozen=True)
class SymmetricSupport:
    """A finite inverse-closed set of reduced words."""

    words: tuple[ReducedWord, ...]

    def __post_init__(self) -> None:
        if len(set(self.words)) != len(self.words):
            raise ValueError("support words must be distinct")
        present = set(self.words)
        for word in self.words:
            if word_inverse(word) not in present:
                raise ValueError("support is not closed under inverses")

    def __len__(self) -> int:
        return len(self.words)


def symmetric_ball(d: int, radius: int) -> SymmetricSupport:
    return SymmetricSupport(tuple(enumerate_ball(d, radius)))


def evaluate_with_unitaries(
    poly: GroupPolynomial, unitaries: Sequence[np.ndarray]
) -> np.ndarray:
    """Substitute concrete unitaries for the generators."""
    if len(unitaries) != poly.d:
        raise ValueError("need one unitary per generator")
    n = unitaries[0].shape[0]
    rows, cols = poly.coeff_shape
    result = np.zeros((rows * n, cols * n), dtype=complex)
    for word, coeff in poly.coefficients.items():
        image = np.eye(n, dtype=complex)
        for color in word.letters:
            factor = unitaries[color] if color < poly.d else unitaries[color - poly.d].conj().T
            image = image @ factor
        result += np.kron(coeff, image)
    return result


def selfadjoint_embed(poly: GroupPolynomial) -> GroupPolynomial:
    """Self-adjoint doubling with the same norm in every evaluation.

    The coefficient of ``g`` becomes ``[[0, a_g], [a_{g^-1}^dagger, 0]]``,
    so the doubled polynomial evaluates to ``[[0, M], [M*, 0]]``.
    """
    rows, cols = poly.coeff_shape
    words = set(poly.coefficients)
    words.update(word_inverse(w) for w in poly.coefficients)
    doubled = {}
    for word in words:
        block = np.zeros((rows + cols, rows + cols), dtype=complex)
        block[:rows, rows:] = poly.coefficient(word)
        block[rows:, :rows] = poly.coefficient(word_inverse(word)).conj().T
        doubled[word] = block
    return GroupPolynomial(poly.d, doubled)


def norm_from_shifts(shift_norms: Mapping[float, float]) -> float:
    """Extreme-eigenvalue magnitude recovered from shifted norms.

    Expects a dominating pair ``+x0, -x0`` among the shifts; rejects
    data that fails the 1-Lipschitz dependence of ``|x.1 + P|`` on x.
    """
    if not shift_norms:
        raise ValueError("no shift data")
    items = sorted(shift_norms.items())
    for (x1, n1), (x2, n2) in zip(items, items[1:]):
        if abs(n2 - n1) > abs(x2 - x1) + LIPSCHITZ_SLACK:
            raise ValueError(
                f"shift data is not 1-Lipschitz between x={x1} and x={x2}"
            )
    paired = [x for x in shift_norms if x > 0 and -x in shift_norms]
    if not paired:
        raise ValueError("need a symmetric pair of shifts +x0, -x0")
    x0 = max(paired)
    lam_max = shift_norms[x0] - x0
    lam_min = x0 - shift_norms[-x0]
    return max(abs(lam_max), abs(lam_min))


class SqrtPencilResult(NamedTuple):
    pencil: GroupPolynomial
    shift: float
    effective_shift: float


def _pair_products(
    support: SymmetricSupport,
) -> tuple[dict[ReducedWord, int], list[tuple[int, int, ReducedWord]]]:
    multiplicity: dict[ReducedWord, int] = {}
    pairs = []
    for i, g in enumerate(support.words):
        g_inv = word_inverse(g)
        for j, h in enumerate(support.words):
            word = word_concat(g_inv, h)
            multiplicity[word] = multiplicity.get(word, 0) + 1
            pairs.append((i, j, word))
    return multiplicity, pairs


def sqrt_pencil(
    poly: GroupPolynomial,
    support: SymmetricSupport,
    shift: Optional[float] = None,
) -> SqrtPencilResult:
    """Half-degree root: ``P* P = Q + c.|G|.1`` coefficient by coefficient.

    The divided coefficient matrix over ``G x G`` is shifted into strict
    positivity (``c = 1.1 |Q~| + 1`` unless a shift is imposed) and its
    Hermitian square root is cut into the columns of ``P``.
    """
    if not poly.is_selfadjoint:
        raise ValueError("square-root pencil needs a self-adjoint polynomial")
    multiplicity, pairs = _pair_products(support)
    for word in poly.support:
        if word not in multiplicity:
            raise ValueError("polynomial support reaches outside the product set")
    r = poly.coeff_shape[0]
    size = len(support)
    divided = np.zeros((size * r, size * r), dtype=complex)
    for i, j, word in pairs:
        coeff = poly.coefficients.get(word)
        if coeff is not None and np.any(coeff):
            block = coeff / multiplicity[word]
            divided[i * r:(i + 1) * r, j * r:(j + 1) * r] += block
    if shift is None:
        shift = 1.1 * float(np.linalg.norm(divided, 2)) + 1.0
    shifted = divided + shift * np.eye(size * r)
    eigenvalues, vectors = np.linalg.eigh((shifted + shifted.conj().T) / 2)
    if eigenvalues.min() < POSITIVITY_FLOOR:
        raise ValueError(
            f"shifted coefficient matrix is not positive "
            f"(eigenvalue {eigenvalues.min():.3e})"
        )
    root = (vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ vectors.conj().T
    coefficients = {
        word: root[:, i * r:(i + 1) * r] for i, word in enumerate(support.words)
    }
    return SqrtPencilResult(
        pencil=GroupPolynomial(poly.d, coefficients),
        shift=shift,
        effective_shift=shift * size,
    )


def adjoint_product(poly: GroupPolynomial) -> GroupPolynomial:
    """Expand ``P* P`` over reduced word products."""
    products: dict[ReducedWord, np.ndarray] = {}
    cols = poly.coeff_shape[1]
    for g, a in poly.coefficients.items():
        g_inv = word_inverse(g)
        for h, b in poly.coefficients.items():
            word = word_concat(g_inv, h)
            term = a.conj().T @ b
            if word in products:
                products[word] = products[word] + term
            else:
                products[word] = term
    if not products:
        products[ReducedWord.identity(poly.d)] = np.zeros(
            (cols, cols), dtype=complex
        )
    return GroupPolynomial(poly.d, products)


def sqrt_identity_residual(
    result: SqrtPencilResult, poly: GroupPolynomial
) -> float:
    """Largest coefficient deviation of ``P* P`` from the shifted target."""
    expansion = adjoint_product(result.pencil)
    identity = ReducedWord.identity(poly.d)
    words = set(expansion.support) | set(poly.support) | {identity}
    residual = 0.0
    for word in words:
        target = poly.coefficient(word).astype(complex)
        if word == identity:
            target = target + result.effective_shift * np.eye(poly.coeff_shape[0])
        gap = np.abs(expansion.coefficient(word) - target)
        if gap.size:
            residual = max(residual, float(gap.max()))
    return residual


def as_matrix_pencil(poly: GroupPolynomial) -> MatrixPencil:
    """View a degree-one self-adjoint polynomial as a linear pencil."""
    if poly.degree > 1:
        raise ValueError("polynomial has degree above one")
    rows, cols = poly.coeff_shape
    if rows != cols:
        raise ValueError("linear pencil needs square coefficients")
    a0 = poly.coefficient(ReducedWord.identity(poly.d))
    a = tuple(
        poly.coefficient(ReducedWord(poly.d, (color,)))
        for color in range(2 * poly.d)
    )
    return MatrixPencil(d=poly.d, coeff_dim=rows, a0=a0, a=a)


def default_pencil_oracle(pencil: MatrixPencil) -> float:
    return astar_norm_lower(pencil, DEFAULT_ORACLE_POWER)


def poly_norm(
    poly: GroupPolynomial, oracle: PencilNormOracle = default_pencil_oracle
) -> float:
    """Free operator norm of a polynomial, by degree-halving recursion.

    Degree zero is normed exactly and degree one is handed to the
    oracle; higher degrees are shifted into a square of half degree,
    whose norm is taken recursively, and the shift is removed through
    the two-sided norm recovery.
    """
    support = poly.support
    if not support:
        return 0.0
    degree = poly.degree
    if degree == 0:
        return float(np.linalg.norm(poly.coefficient(support[0]), 2))
    working = poly if poly.is_selfadjoint else selfadjoint_embed(poly)
    if degree <= 1:
        return oracle(as_matrix_pencil(working))
    ball = symmetric_ball(poly.d, math.ceil(degree / 2))
    plus = sqrt_pencil(working, ball)
    minus = sqrt_pencil(working.scaled(-1.0), ball, shift=plus.shift)
    x0 = plus.effective_shift
    norm_plus = poly_norm(plus.pencil, oracle) ** 2
    norm_minus = poly_norm(minus.pencil, oracle) ** 2
    return norm_from_shifts({x0: norm_plus, -x0: norm_minus})
