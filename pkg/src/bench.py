"""
Noiseless BBOB-style benchmark functions with seeded instances.

Implemented ids follow the BBOB numbering, two functions per group:
    1  sphere                     2  separable ellipsoid
    6  attractive sector          9  rotated Rosenbrock
    10 rotated ellipsoid          11 discus
    15 rotated Rastrigin          16 Weierstrass
    17 Schaffers F7               22 Gallagher, 21 peaks

Search-space points are transformed as z = R (x - x_opt) followed by the
function's own oscillation, asymmetry and conditioning maps. No boundary
penalty is added.
"""
import logging
from typing import Callable, Dict, Tuple

import numpy as np

from errors import SpecError
from models import Problem

logger = logging.getLogger(__name__)

CONDITION = 1e6
WEIERSTRASS_TERMS = 12
GALLAGHER_PEAKS = 21


# ===========================
# Transformations
# ===========================

def t_osz(values: np.ndarray) -> np.ndarray:
    """Oscillation map: sign(x) exp(x_hat + 0.049 (sin(c1 x_hat) + sin(c2 x_hat)))"""
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros_like(values)
    nonzero = values != 0
    x_hat = np.log(np.abs(values[nonzero]))
    positive = values[nonzero] > 0
    c1 = np.where(positive, 10.0, 5.5)
    c2 = np.where(positive, 7.9, 3.1)
    out[nonzero] = np.sign(values[nonzero]) * np.exp(
        x_hat + 0.049 * (np.sin(c1 * x_hat) + np.sin(c2 * x_hat))
    )
    return out


def t_asy(Z: np.ndarray, beta: float) -> np.ndarray:
    """Asymmetry map on rows: positive z_i becomes z_i^(1 + beta * i/(d-1) * sqrt(z_i))"""
    d = Z.shape[-1]
    exponents = beta * np.linspace(0.0, 1.0, d)
    out = Z.copy()
    positive = Z > 0
    base = np.where(positive, Z, 1.0)
    powered = base ** (1.0 + exponents * np.sqrt(base))
    out[positive] = powered[positive]
    return out


def lambda_diag(alpha: float, d: int) -> np.ndarray:
    """Diagonal of the conditioning matrix: alpha^(0.5 * i/(d-1))"""
    return alpha ** (0.5 * np.linspace(0.0, 1.0, d))


def _ellipsoid_weights(d: int) -> np.ndarray:
    return CONDITION ** np.linspace(0.0, 1.0, d)


def random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix from the QR factorization of a Gaussian matrix"""
    A = rng.standard_normal((d, d))
    Q, R = np.linalg.qr(A)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


# ===========================
# Raw functions (rows of X are points; returns g >= 0 with g(x_opt) = 0)
# ===========================

def _shift(problem: Problem, X: np.ndarray) -> np.ndarray:
    return X - problem.x_opt


def _rotated(problem: Problem, X: np.ndarray) -> np.ndarray:
    return _shift(problem, X) @ problem.R.T


def _sphere(problem: Problem, X: np.ndarray) -> np.ndarray:
    Z = _shift(problem, X)
    return np.sum(Z ** 2, axis=1)


def _separable_ellipsoid(problem: Problem, X: np.ndarray) -> np.ndarray:
    Z = t_osz(_shift(problem, X))
    return Z ** 2 @ problem.params["weights"]


def _attractive_sector(problem: Problem, X: np.ndarray) -> np.ndarray:
    Z = _rotated(problem, X) @ problem.params["linear"].T
    scale = np.where(Z * problem.x_opt > 0, 100.0, 1.0)
    return t_osz(np.sum((scale * Z) ** 2, axis=1)) ** 0.9


def _rosenbrock(problem: Problem, X: np.ndarray) -> np.ndarray:
    Z = problem.params["scale"] * _rotated(problem, X) + 1.0
    head, tail = Z[:, :-1], Z[:, 1:]
    return np.sum(100.0 * (head ** 2 - tail) ** 2 + (head - 1.0) ** 2, axis=1)


def _rotated_ellipsoid(problem: Problem, X: np.ndarray) -> np.ndarray:
    Z = t_osz(_rotated(problem, X))
    return Z ** 2 @ problem.params["weights"]


def _discus(problem: Problem, X: np.ndarray) -> np.ndarray:
    Z = t_osz(_rotated(problem, X))
    return CONDITION * Z[:, 0] ** 2 + np.sum(Z[:, 1:] ** 2, axis=1)


def _rastrigin(problem: Problem, X: np.ndarray) -> np.ndarray:
    d = problem.dim
    Z = t_asy(t_osz(_rotated(problem, X)), 0.2) @ problem.params["linear"].T
    return 10.0 * (d - np.sum(np.cos(2.0 * np.pi * Z), axis=1)) + np.sum(Z ** 2, axis=1)


def _weierstrass(problem: Problem, X: np.ndarray) -> np.ndarray:
    d = problem.dim
    a_k = problem.params["a_k"]
    b_k = problem.params["b_k"]
    Z = t_osz(_rotated(problem, X)) @ problem.params["linear"].T
    terms = np.cos(2.0 * np.pi * b_k[None, None, :] * (Z[:, :, None] + 0.5)) @ a_k
    return 10.0 * (np.sum(terms, axis=1) / d - problem.params["f0"]) ** 3


def _schaffers(problem: Problem, X: np.ndarray) -> np.ndarray:
    Z = t_asy(_rotated(problem, X), 0.5) @ problem.params["linear"].T
    s = np.sqrt(Z[:, :-1] ** 2 + Z[:, 1:] ** 2)
    inner = np.sqrt(s) * (1.0 + np.sin(50.0 * s ** 0.2) ** 2)
    return np.mean(inner, axis=1) ** 2


def _gallagher(problem: Problem, X: np.ndarray) -> np.ndarray:
    d = problem.dim
    Z = _rotated(problem, X)
    peaks = problem.params["peaks"]
    scales = problem.params["scales"]
    heights = problem.params["heights"]
    diff = Z[:, None, :] - peaks[None, :, :]
    values = heights * np.exp(-0.5 / d * np.sum(scales[None, :, :] * diff ** 2, axis=2))
    return t_osz(10.0 - np.max(values, axis=1)) ** 2


RawFunction = Callable[[Problem, np.ndarray], np.ndarray]

FUNCTIONS: Dict[int, Tuple[str, RawFunction]] = {
    1: ("sphere", _sphere),
    2: ("separable ellipsoid", _separable_ellipsoid),
    6: ("attractive sector", _attractive_sector),
    9: ("rotated Rosenbrock", _rosenbrock),
    10: ("rotated ellipsoid", _rotated_ellipsoid),
    11: ("discus", _discus),
    15: ("rotated Rastrigin", _rastrigin),
    16: ("Weierstrass", _weierstrass),
    17: ("Schaffers F7", _schaffers),
    22: ("Gallagher 21 peaks", _gallagher),
}

ROTATION_FREE = (1, 2)


def function_name(function_id: int) -> str:
    if function_id not in FUNCTIONS:
        raise SpecError(f"unknown function id {function_id}")
    return FUNCTIONS[function_id][0]


# ===========================
# Instances
# ===========================

def _function_params(function_id: int, dim: int, Q: np.ndarray, rng: np.random.Generator,
                     x_opt: np.ndarray, R: np.ndarray) -> dict:
    if function_id in (2, 10):
        return {"weights": _ellipsoid_weights(dim)}
    if function_id == 6:
        return {"linear": Q * lambda_diag(10.0, dim)}
    if function_id == 9:
        return {"scale": max(1.0, np.sqrt(dim) / 8.0)}
    if function_id == 15:
        return {"linear": R @ (lambda_diag(10.0, dim)[:, None] * Q)}
    if function_id == 16:
        a_k = 0.5 ** np.arange(WEIERSTRASS_TERMS)
        b_k = 3.0 ** np.arange(WEIERSTRASS_TERMS)
        return {
            "linear": R @ (lambda_diag(0.01, dim)[:, None] * Q),
            "a_k": a_k,
            "b_k": b_k,
            "f0": float(np.sum(a_k * np.cos(np.pi * b_k))),
        }
    if function_id == 17:
        return {"linear": lambda_diag(10.0, dim)[:, None] * Q}
    if function_id == 22:
        conditions = 1000.0 ** np.linspace(0.0, 1.0, GALLAGHER_PEAKS - 1)
        conditions = np.concatenate(([1000.0 ** 2], rng.permutation(conditions)))
        scales = np.vstack([
            rng.permutation(c ** np.linspace(-0.5, 0.5, dim)) for c in conditions
        ])
        local = rng.uniform(-4.9, 4.9, size=(GALLAGHER_PEAKS, dim))
        peaks = (local - x_opt) @ R.T
        peaks[0] = 0.0
        heights = np.concatenate(([10.0], np.linspace(1.1, 9.1, GALLAGHER_PEAKS - 1)))
        return {"peaks": peaks, "scales": scales, "heights": heights}
    return {}


def make_problem(function_id: int, instance_id: int, dim: int) -> Problem:
    """
    Build a benchmark instance; all randomness comes from (function_id, instance_id, dim).

    Args:
        function_id: One of the ids in FUNCTIONS
        instance_id: Positive instance number
        dim: Dimension (>= 2)

    Returns:
        Problem with hidden x_opt in [-4, 4]^dim and f_opt in [-1000, 1000]
    """
    if function_id not in FUNCTIONS:
        raise SpecError(f"unknown function id {function_id} (implemented: {sorted(FUNCTIONS)})")
    if dim < 2:
        raise SpecError("dim must be at least 2")
    if instance_id < 1:
        raise SpecError("instance_id must be positive")

    rng = np.random.default_rng([function_id, instance_id, dim])
    x_opt = rng.uniform(-4.0, 4.0, size=dim)
    f_opt = float(np.clip(np.round(100.0 * rng.standard_cauchy(), 2), -1000.0, 1000.0))
    if function_id in ROTATION_FREE:
        R, Q = np.eye(dim), np.eye(dim)
    else:
        R, Q = random_rotation(rng, dim), random_rotation(rng, dim)
    params = _function_params(function_id, dim, Q, rng, x_opt, R)

    return Problem(
        function_id=function_id,
        instance_id=instance_id,
        dim=dim,
        x_opt=x_opt,
        f_opt=f_opt,
        R=R,
        Q=Q,
        params=params,
    )


def evaluate_batch(problem: Problem, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Evaluate rows of X.

    Returns:
        (f, precision) arrays; precision = max(g, 0) computed from the raw value g
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != problem.dim:
        raise SpecError(f"expected {problem.dim} coordinates, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise SpecError("evaluation point must be finite")
    g = FUNCTIONS[problem.function_id][1](problem, X)
    problem.evaluations += X.shape[0]
    precision = np.maximum(g, 0.0)
    return g + problem.f_opt, precision


def evaluate(problem: Problem, x: np.ndarray) -> Tuple[float, float]:
    """Evaluate one point; returns (f, precision) and increments the counter"""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise SpecError("evaluate expects a single vector")
    f, precision = evaluate_batch(problem, x[None, :])
    return float(f[0]), float(precision[0])
