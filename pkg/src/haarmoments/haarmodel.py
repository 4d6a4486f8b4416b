"""Random tensor models built from Haar unitaries, and their experiments.

Each of ``d`` independent Haar unitaries acts through
``V_i = conj(U_i)^(x q_minus) (x) U_i^(x q_plus)`` on ``C^(n^q)``; the
model operator couples pencil coefficients to these images.  The mean of
``V_i`` is the orthogonal projector onto the invariant subspace, computed
from exact Weingarten values rather than sampling.  Experiments compare
restricted operator norms with the free limit and non-backtracking power
norms with the tree growth rate.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import reduce
from statistics import median
from typing import Callable, Optional, Sequence

import numpy as np

from .centered_wg import matching_weingarten
from .freegroup import MatrixPencil, ball_spectrum_bounds, rho_k, star
from .nonbacktracking import NBOperator, build_nb, power_norm
from .symcore import (
    BAR,
    DOT,
    CapacityError,
    EpsilonSequence,
    epsilon_matchings,
)
from .weingarten import UnsupportedRegimeError

#: Tensor operators are materialized densely up to this total dimension.
MAX_TENSOR_DENSE_DIM = 4096
#: Hard cap on the total model dimension (matrix-free included).
MAX_MODEL_DIM = 1_000_000
#: Cap on the realized non-backtracking dimension in ``nb_norm_check``.
MAX_NB_DENSE_DIM = 4096
#: Power iteration defaults for restricted norms.
POWER_TOL = 1e-8
POWER_MAX_ITER = 5000

_NORM_SEED_SALT = 0x5EED_0F_0E


class PowerIterationError(RuntimeError):
    """Raised when the norm iteration fails to stabilize; carries the gap."""

    def __init__(self, message: str, gap: float) -> None:
        super().__init__(message)
        self.gap = gap


def model_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & (2**64 - 1)))


def sample_haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """One Haar-distributed unitary.

    Ginibre matrix, QR factorization, then the phase-of-diagonal
    correction that removes the orientation bias of plain QR.
    """
    if n < 1:
        raise ValueError("dimension must be positive")
    ginibre = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    q, r = np.linalg.qr(ginibre / np.sqrt(2))
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


def _projector_factors(
    n: int, q_minus: int, q_plus: int
) -> tuple[list[np.ndarray], np.ndarray]:
    """Indicator vectors and Weingarten weights of the mean tensor operator.

    The mean factors through pairings of conjugate and plain legs:
    ``E V = sum_{p,q} w(p, q) v_p v_q^T`` with 0/1 vectors ``v_p``.
    """
    q = q_minus + q_plus
    eps = EpsilonSequence(tuple([BAR] * q_minus + [DOT] * q_plus))
    matchings = epsilon_matchings(eps)
    dim = n**q
    digits = [(np.arange(dim) // n ** (q - p)) % n for p in range(1, q + 1)]
    vectors = []
    for matching in matchings:
        indicator = np.ones(dim, dtype=float)
        for a, b in matching.pairing.pairs:
            indicator = indicator * (digits[a - 1] == digits[b - 1])
        vectors.append(indicator)
    weights = np.array(
        [
            [float(matching_weingarten(p, q_m, n)) for q_m in matchings]
            for p in matchings
        ]
    )
    return vectors, weights


def build_projector(n: int, q_minus: int, q_plus: int) -> np.ndarray:
    """The mean of ``V_i`` as a dense matrix: a projector, or zero.

    Entries are exact signed Haar moments cast to floats; an unbalanced
    leg count gives the zero matrix.
    """
    q = q_minus + q_plus
    if q < 1:
        raise ValueError("need at least one tensor leg")
    if n**q > MAX_TENSOR_DENSE_DIM:
        raise CapacityError(
            f"dense projector capped at dimension {MAX_TENSOR_DENSE_DIM}"
        )
    dim = n**q
    if q_minus != q_plus:
        return np.zeros((dim, dim))
    if q_minus > n:
        raise UnsupportedRegimeError(
            f"projector needs q/2 = {q_minus} <= n = {n}"
        )
    vectors, weights = _projector_factors(n, q_minus, q_plus)
    projector = np.zeros((dim, dim))
    for i, left in enumerate(vectors):
        for j, right in enumerate(vectors):
            projector += weights[i, j] * np.outer(left, right)
    return projector


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions, pencil, and seed describing one tensor model."""

    n: int
    d: int
    q_minus: int
    q_plus: int
    coeff_dim: int
    pencil: MatrixPencil
    seed: int

    def __post_init__(self) -> None:
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if self.q_minus < 0 or self.q_plus < 0 or self.q < 1:
            raise ValueError("need q_minus + q_plus >= 1")
        if self.pencil.d != self.d:
            raise ValueError("pencil generator count differs from d")
        if self.pencil.coeff_dim != self.coeff_dim:
            raise ValueError("pencil coefficient dimension differs")
        if self.total_dimension > MAX_MODEL_DIM:
            raise CapacityError(
                f"model dimension {self.total_dimension} exceeds {MAX_MODEL_DIM}"
            )

    @property
    def q(self) -> int:
        return self.q_minus + self.q_plus

    @property
    def tensor_dimension(self) -> int:
        return self.n**self.q

    @property
    def total_dimension(self) -> int:
        return self.coeff_dim * self.tensor_dimension


@dataclass(frozen=True, eq=False)
class TensorModelInstance:
    """One sampled model: unitaries, tensor images, projector, operators.

    Dense fields are populated below the dense cap; the apply methods
    work in both modes and act on vectors of the total dimension.
    """

    config: ModelConfig
    unitaries: tuple[np.ndarray, ...]
    projector_vectors: tuple[np.ndarray, ...]
    projector_weights: np.ndarray
    images: Optional[tuple[np.ndarray, ...]]
    projector: Optional[np.ndarray]
    brackets: Optional[tuple[np.ndarray, ...]]
    matrix: Optional[np.ndarray]
    restricted_matrix: Optional[np.ndarray]

    @property
    def is_dense(self) -> bool:
        return self.matrix is not None

    def _apply_image(self, color: int, block: np.ndarray) -> np.ndarray:
        """Apply ``V_color`` to the tensor axis of a (coeff, tensor) block."""
        cfg = self.config
        n, q = cfg.n, cfg.q
        unitary = self.unitaries[color % cfg.d]
        if color >= cfg.d:
            unitary = unitary.conj().T
        shaped = block.reshape((block.shape[0],) + (n,) * q)
        for leg in range(q):
            factor = unitary.conj() if leg < cfg.q_minus else unitary
            shaped = np.moveaxis(
                np.tensordot(factor, shaped, axes=([1], [leg + 1])), 0, leg + 1
            )
        return shaped.reshape(block.shape)

    def _apply_projector(self, block: np.ndarray) -> np.ndarray:
        if self.config.q_minus != self.config.q_plus:
            return np.zeros_like(block)
        overlaps = np.array([block @ right for right in self.projector_vectors]).T
        mixed = overlaps @ self.projector_weights.T
        result = np.zeros_like(block)
        for j, left in enumerate(self.projector_vectors):
            result += np.outer(mixed[:, j], left)
        return result

    def _apply_pencil(self, vector: np.ndarray, adjoint: bool) -> np.ndarray:
        cfg = self.config
        block = vector.reshape(cfg.coeff_dim, cfg.tensor_dimension)
        a0 = cfg.pencil.a0.conj().T if adjoint else cfg.pencil.a0
        result = a0 @ block
        for color in range(2 * cfg.d):
            if adjoint:
                coeff = cfg.pencil.a[star(color, cfg.d)].conj().T
            else:
                coeff = cfg.pencil.a[color]
            if not np.any(coeff):
                continue
            result += coeff @ self._apply_image(color, block)
        return result.reshape(vector.shape)

    def apply_a(self, vector: np.ndarray) -> np.ndarray:
        return self._apply_pencil(vector, adjoint=False)

    def apply_a_adjoint(self, vector: np.ndarray) -> np.ndarray:
        """Adjoint via conjugated coefficients paired with inverse colors."""
        return self._apply_pencil(vector, adjoint=True)

    def _project_out(self, vector: np.ndarray) -> np.ndarray:
        cfg = self.config
        block = vector.reshape(cfg.coeff_dim, cfg.tensor_dimension)
        return (block - self._apply_projector(block)).reshape(vector.shape)

    def apply_restricted(self, vector: np.ndarray) -> np.ndarray:
        return self._project_out(self.apply_a(self._project_out(vector)))

    def apply_restricted_adjoint(self, vector: np.ndarray) -> np.ndarray:
        return self._project_out(self.apply_a_adjoint(self._project_out(vector)))


def build_instance(
    cfg: ModelConfig, dense_cap: int = MAX_TENSOR_DENSE_DIM
) -> TensorModelInstance:
    """Sample the unitaries and realize the model operators."""
    rng = model_rng(cfg.seed)
    unitaries = tuple(sample_haar_unitary(cfg.n, rng) for _ in range(cfg.d))
    if cfg.q_minus == cfg.q_plus:
        if cfg.q_minus > cfg.n:
            raise UnsupportedRegimeError(
                f"projector needs q/2 = {cfg.q_minus} <= n = {cfg.n}"
            )
        vectors, weights = _projector_factors(cfg.n, cfg.q_minus, cfg.q_plus)
    else:
        vectors, weights = [], np.zeros((0, 0))
    dense = cfg.total_dimension <= dense_cap
    images = projector = brackets = matrix = restricted = None
    if dense:
        images = []
        for i in range(cfg.d):
            factors = [unitaries[i].conj()] * cfg.q_minus + [unitaries[i]] * cfg.q_plus
            images.append(reduce(np.kron, factors))
        images = images + [image.conj().T for image in images]
        images = tuple(images)
        projector = build_projector(cfg.n, cfg.q_minus, cfg.q_plus)
        brackets = tuple(image - projector for image in images)
        matrix = np.kron(cfg.pencil.a0, np.eye(cfg.tensor_dimension))
        for color in range(2 * cfg.d):
            matrix = matrix + np.kron(cfg.pencil.a[color], images[color])
        complement = np.eye(cfg.total_dimension) - np.kron(
            np.eye(cfg.coeff_dim), projector
        )
        restricted = complement @ matrix @ complement
    return TensorModelInstance(
        config=cfg,
        unitaries=unitaries,
        projector_vectors=tuple(vectors),
        projector_weights=weights,
        images=images,
        projector=projector,
        brackets=brackets,
        matrix=matrix,
        restricted_matrix=restricted,
    )


def _power_norm_of(
    apply_op: Callable[[np.ndarray], np.ndarray],
    apply_adjoint: Callable[[np.ndarray], np.ndarray],
    dimension: int,
    rng: np.random.Generator,
    tol: float,
    max_iter: int,
) -> tuple[Optional[float], float]:
    vector = rng.standard_normal(dimension) + 1j * rng.standard_normal(dimension)
    vector /= np.linalg.norm(vector)
    previous = 0.0
    gap = np.inf
    for _ in range(max_iter):
        forward = apply_op(vector)
        sigma = float(np.linalg.norm(forward))
        if sigma == 0.0:
            return 0.0, 0.0
        backward = apply_adjoint(forward)
        scale = float(np.linalg.norm(backward))
        if scale == 0.0:
            return sigma, 0.0
        vector = backward / scale
        gap = abs(sigma - previous)
        if gap <= tol * max(1.0, sigma):
            return sigma, gap
        previous = sigma
    return None, gap


def restricted_norm(
    inst: TensorModelInstance,
    tol: float = POWER_TOL,
    max_iter: int = POWER_MAX_ITER,
) -> float:
    """Norm of the model compressed to the complement of the invariant part.

    Power iteration on ``M* M`` with a seeded random start and a single
    restart; failure to stabilize raises an error carrying the last gap.
    """
    rng = model_rng(inst.config.seed ^ _NORM_SEED_SALT)
    dimension = inst.config.total_dimension
    last_gap = np.inf
    for _ in range(2):
        value, gap = _power_norm_of(
            inst.apply_restricted,
            inst.apply_restricted_adjoint,
            dimension,
            rng,
            tol,
            max_iter,
        )
        if value is not None:
            return value
        last_gap = gap
    raise PowerIterationError(
        f"restricted norm did not stabilize to {tol} within {max_iter} "
        f"iterations (last gap {last_gap:.3e})",
        gap=last_gap,
    )


def astar_norm_estimate(pencil: MatrixPencil, radius: int = 200) -> float:
    """Norm of the free limit, estimated from ball compression edges.

    The level-by-level shift test makes large radii cheap, so the
    default radius puts the estimate within about 1e-3 of the limit
    for the small pencils used in experiments.  A pencil without
    generator terms is its own limit and is evaluated exactly.
    """
    if not any(np.any(coeff) for coeff in pencil.a):
        return float(np.linalg.norm(pencil.a0, 2))
    low, high = ball_spectrum_bounds(pencil, radius)
    return max(abs(low), abs(high))


@dataclass(frozen=True)
class FreenessRow:
    n: int
    trial: int
    seed: int
    restricted_norm: float
    astar_estimate: float
    deviation: float
    wall_time_ms: float


@dataclass(frozen=True)
class FreenessTable:
    rows: tuple[FreenessRow, ...]

    def median_deviation_by_n(self) -> dict[int, float]:
        grouped: dict[int, list[float]] = {}
        for row in self.rows:
            grouped.setdefault(row.n, []).append(row.deviation)
        return {n: median(values) for n, values in sorted(grouped.items())}


def _freeness_row(cfg: ModelConfig, trial: int, estimate: float) -> FreenessRow:
    trial_seed = cfg.seed ^ trial
    started = time.perf_counter()
    inst = build_instance(replace(cfg, seed=trial_seed))
    value = restricted_norm(inst)
    elapsed = (time.perf_counter() - started) * 1000
    return FreenessRow(
        n=cfg.n,
        trial=trial,
        seed=trial_seed,
        restricted_norm=value,
        astar_estimate=estimate,
        deviation=abs(value - estimate),
        wall_time_ms=elapsed,
    )


def freeness_experiment(
    configs: Sequence[ModelConfig], trials: int, threads: int = 1
) -> FreenessTable:
    """Restricted norms against the free-limit estimate, over seeded trials.

    Each trial re-keys the counter-based generator with ``seed XOR trial``
    so trials are independent and bit-reproducible.  ``threads`` sizes a
    worker pool over the (config, trial) grid; it changes wall times only,
    never the numeric columns.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    estimates: dict[int, float] = {}
    jobs = []
    for cfg in configs:
        key = id(cfg.pencil)
        if key not in estimates:
            estimates[key] = astar_norm_estimate(cfg.pencil)
        jobs.extend((cfg, trial, estimates[key]) for trial in range(trials))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda job: _freeness_row(*job), jobs))
    else:
        rows = [_freeness_row(*job) for job in jobs]
    rows.sort(key=lambda row: (row.n, row.trial))
    return FreenessTable(rows=tuple(rows))


@dataclass(frozen=True)
class NBNormRow:
    trial: int
    seed: int
    ell: int
    power_norm: float


@dataclass(frozen=True)
class NBNormTable:
    rows: tuple[NBNormRow, ...]
    rho_star: float
    epsilon: float

    def exceedance_by_ell(self) -> dict[int, float]:
        grouped: dict[int, list[float]] = {}
        for row in self.rows:
            grouped.setdefault(row.ell, []).append(row.power_norm)
        bound = self.rho_star + self.epsilon
        return {
            ell: sum(1 for value in values if value > bound) / len(values)
            for ell, values in sorted(grouped.items())
        }


def bracket_nb_operator(inst: TensorModelInstance) -> NBOperator:
    """The non-backtracking operator with weights ``a_i (x) [V_i]``."""
    if not inst.is_dense:
        raise CapacityError("bracket non-backtracking operator needs dense mode")
    cfg = inst.config
    if 2 * cfg.d * cfg.total_dimension > MAX_NB_DENSE_DIM:
        raise CapacityError(
            f"non-backtracking dimension {2 * cfg.d * cfg.total_dimension} "
            f"exceeds {MAX_NB_DENSE_DIM}"
        )
    weights = [
        np.kron(cfg.pencil.a[color], inst.brackets[color])
        for color in range(2 * cfg.d)
    ]
    return build_nb(weights, side="right")


def nb_norm_check(
    cfg: ModelConfig,
    ell_values: Sequence[int],
    trials: int,
    epsilon: float = 0.25,
    rho_order: int = 10,
) -> NBNormTable:
    """Power norms of the bracket non-backtracking operator per trial.

    Values are compared against the tree growth rate plus ``epsilon``;
    the table reports the empirical exceedance frequency.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rho_star = rho_k(cfg.pencil, rho_order)
    rows = []
    for trial in range(trials):
        trial_seed = cfg.seed ^ trial
        inst = build_instance(replace(cfg, seed=trial_seed))
        op = bracket_nb_operator(inst)
        for ell in ell_values:
            rows.append(
                NBNormRow(
                    trial=trial,
                    seed=trial_seed,
                    ell=ell,
                    power_norm=power_norm(op, ell),
                )
            )
    return NBNormTable(rows=tuple(rows), rho_star=rho_star, epsilon=epsilon)
