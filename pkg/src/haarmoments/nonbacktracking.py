"""Finite non-backtracking operators and their companion characterization.

For an even family of weights ``b_0..b_{l-1}`` with color involution
``i <-> i*``, the non-backtracking operator places a weight block at
color position ``(i, j)`` whenever ``j != i*``: the right variant uses
the column weight ``b_j``, the left variant the row weight ``b_i``.  A
complex number lies in the spectrum exactly when the companion operator
``A(lambda)`` is singular; this module assembles both, estimates spectral
radii, and verifies the mapping numerically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .freegroup import MatrixPencil, hat_weights
from .symcore import CapacityError

#: Dense eigensolve cap for the spectral mapping verification.
MAX_MAPPING_DIM = 3000
#: Default dense eigensolve cap for spectral radius computations.
DENSE_RADIUS_CAP = 2000
#: Near-singularity threshold for the companion's inverted blocks.
COMPANION_SINGULAR_TOL = 1e-9


def _color_star(color: int, ell: int) -> int:
    return (color + ell // 2) % ell


def _coerce_weights(weights: Sequence) -> tuple[np.ndarray, ...]:
    family = []
    for i, weight in enumerate(weights):
        matrix = np.atleast_2d(np.asarray(weight, dtype=complex))
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"weight {i} is not square: shape {matrix.shape}")
        family.append(matrix)
    if len(family) < 2 or len(family) % 2 != 0:
        raise ValueError("need an even number of at least two weights")
    dim = family[0].shape[0]
    for i, matrix in enumerate(family):
        if matrix.shape[0] != dim:
            raise ValueError(
                f"weight {i} has dimension {matrix.shape[0]}, expected {dim}"
            )
    return tuple(family)


@dataclass(frozen=True, eq=False)
class NBOperator:
    """A realized non-backtracking operator with its weight family."""

    ell: int
    weights: tuple[np.ndarray, ...]
    side: str
    matrix: np.ndarray

    @property
    def hilbert_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class CompanionOperator:
    """The operator ``A(lambda)`` whose kernel detects ``lambda`` in sigma(B)."""

    lam: complex
    matrix: np.ndarray

    @property
    def min_singular_value(self) -> float:
        return float(np.linalg.svd(self.matrix, compute_uv=False)[-1])


def build_nb(weights: Sequence, side: str = "right") -> NBOperator:
    """Assemble the color-major non-backtracking matrix.

    Block ``(i, j)`` holds ``b_j`` (right) or ``b_i`` (left) whenever
    ``j != i*``, giving ``l(l-1)`` nonzero blocks for nonzero weights.
    """
    if side not in ("right", "left"):
        raise ValueError(f"side must be 'right' or 'left', got {side!r}")
    family = _coerce_weights(weights)
    ell = len(family)
    dim = family[0].shape[0]
    matrix = np.zeros((ell * dim, ell * dim), dtype=complex)
    for i in range(ell):
        for j in range(ell):
            if j == _color_star(i, ell):
                continue
            block = family[j] if side == "right" else family[i]
            matrix[i * dim : (i + 1) * dim, j * dim : (j + 1) * dim] = block
    return NBOperator(ell=ell, weights=family, side=side, matrix=matrix)


def build_companion(
    weights: Sequence, lam: complex, tol: float = COMPANION_SINGULAR_TOL
) -> CompanionOperator:
    """Assemble ``A(lambda)`` from the displayed rational formulas.

    ``b_i(lambda) = lambda b_i (lambda^2 - b_{i*} b_i)^{-1}`` and
    ``b_0(lambda) = -1 - sum_i b_i (lambda^2 - b_{i*} b_i)^{-1} b_{i*}``;
    the companion is their sum.
    """
    family = _coerce_weights(weights)
    ell = len(family)
    dim = family[0].shape[0]
    eye = np.eye(dim)
    total = -eye.astype(complex)
    for i in range(ell):
        pivot = lam**2 * eye - family[_color_star(i, ell)] @ family[i]
        smallest = float(np.linalg.svd(pivot, compute_uv=False)[-1])
        if smallest <= tol:
            raise ValueError(
                f"lambda^2 - b_(i*) b_i is near-singular at color {i} "
                f"(min singular value {smallest:.3e})"
            )
        inverse = np.linalg.inv(pivot)
        total = total - family[i] @ inverse @ family[_color_star(i, ell)]
        total = total + lam * family[i] @ inverse
    return CompanionOperator(lam=lam, matrix=total)


def power_norm(op: NBOperator, ell: int) -> float:
    """``||B^ell||^(1/ell)``, computed on a norm-rescaled power."""
    if ell < 1:
        raise ValueError("power must be positive")
    scale = float(np.linalg.norm(op.matrix, 2))
    if scale == 0.0:
        return 0.0
    powered = np.linalg.matrix_power(op.matrix / scale, ell)
    return scale * float(np.linalg.norm(powered, 2)) ** (1 / ell)


def spectral_radius(op: NBOperator, dense_cap: int = DENSE_RADIUS_CAP) -> float:
    """Spectral radius by dense eigensolve, or norm-power doubling beyond the cap.

    The fallback doubles the power until ``||B^l||^(1/l)`` moves by less
    than a relative ``10^-3``.
    """
    if op.dimension <= dense_cap:
        eigenvalues = np.linalg.eigvals(op.matrix)
        return float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    scale = float(np.linalg.norm(op.matrix, 2))
    if scale == 0.0:
        return 0.0
    normalized = op.matrix / scale
    power = normalized
    exponent = 1
    log_norm = 0.0
    previous = scale
    while exponent < 2**20:
        power = power @ power
        exponent *= 2
        step = float(np.linalg.norm(power, 2))
        if step == 0.0:
            return 0.0
        log_norm = 2 * log_norm + np.log(step)
        power = power / step
        current = scale * float(np.exp(log_norm / exponent))
        if abs(current - previous) <= 1e-3 * max(previous, 1e-30):
            return current
        previous = current
    return previous


@dataclass(frozen=True)
class SpectralMappingReport:
    """Outcome of the eigenvalue-kernel correspondence check."""

    dimension: int
    side: str
    eigenvalues_checked: int
    eigenvalues_skipped: int
    forward_failures: tuple[complex, ...]
    grid_points: int
    converse_failures: tuple[complex, ...]

    @property
    def all_pass(self) -> bool:
        return not self.forward_failures and not self.converse_failures


def _excluded_margin(family: tuple[np.ndarray, ...], lam: complex) -> float:
    """Distance from ``lambda^2`` to the spectra of the products ``b_{i*} b_i``."""
    ell = len(family)
    margin = np.inf
    for i in range(ell):
        product = family[_color_star(i, ell)] @ family[i]
        for nu in np.linalg.eigvals(product):
            margin = min(margin, abs(lam**2 - nu))
    return float(margin)


def verify_spectral_mapping(
    weights: Sequence,
    side: str = "right",
    tol_map: float = 1e-6,
    tol_sep: float = 1e-2,
    exclusion_margin: float = 1e-3,
) -> SpectralMappingReport:
    """Check both directions of the spectral mapping on one weight family.

    Every eigenvalue of B far enough from the excluded set must make the
    companion nearly singular; grid points separated from sigma(B) must
    keep it well conditioned.
    """
    op = build_nb(weights, side=side)
    if op.dimension > MAX_MAPPING_DIM:
        raise CapacityError(
            f"mapping verification capped at dimension {MAX_MAPPING_DIM}"
        )
    spectrum = np.linalg.eigvals(op.matrix)
    forward_failures = []
    checked = 0
    skipped = 0
    for lam in spectrum:
        if _excluded_margin(op.weights, lam) <= exclusion_margin:
            skipped += 1
            continue
        checked += 1
        companion = build_companion(op.weights, lam, tol=0.0)
        if companion.min_singular_value >= tol_map:
            forward_failures.append(complex(lam))
    radius = max(1.0, float(np.max(np.abs(spectrum))) if spectrum.size else 1.0)
    axis = np.linspace(-1.5 * radius, 1.5 * radius, 7)
    converse_failures = []
    grid_points = 0
    for re in axis:
        for im in axis:
            lam = complex(re, im)
            if spectrum.size and np.min(np.abs(spectrum - lam)) <= tol_sep:
                continue
            if _excluded_margin(op.weights, lam) <= exclusion_margin:
                continue
            grid_points += 1
            companion = build_companion(op.weights, lam, tol=0.0)
            if companion.min_singular_value <= tol_map:
                converse_failures.append(lam)
    return SpectralMappingReport(
        dimension=op.dimension,
        side=side,
        eigenvalues_checked=checked,
        eigenvalues_skipped=skipped,
        forward_failures=tuple(forward_failures),
        grid_points=grid_points,
        converse_failures=tuple(converse_failures),
    )


def build_b_mu(
    pencil: MatrixPencil,
    mu: float,
    reps: Sequence[np.ndarray],
    hat: Optional[Sequence[np.ndarray]] = None,
) -> NBOperator:
    """The shifted non-backtracking operator detecting ``mu`` in sigma(A).

    Weights are ``hat a_j(mu) (x) V_j`` over the ``2d`` colors, with the
    hat family computed from the pencil's tree resolvent unless supplied.
    ``mu`` lies outside the spectrum of the realized model exactly when 1
    avoids the spectrum of the result.
    """
    colors = 2 * pencil.d
    if len(reps) != colors:
        raise ValueError(f"need {colors} representation images, got {len(reps)}")
    if hat is None:
        hat = hat_weights(pencil, mu)
    if len(hat) != colors:
        raise ValueError(f"need {colors} hat weights, got {len(hat)}")
    weights = [
        np.kron(np.asarray(hat[j], dtype=complex), np.asarray(reps[j], dtype=complex))
        for j in range(colors)
    ]
    return build_nb(weights, side="right")
