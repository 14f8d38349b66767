"""
Unit-cube point generators: uniform, scrambled Halton, Sobol, cached and endless sources.
"""
import logging
from functools import lru_cache
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from errors import SpecError, PointSetParseError, DimensionMismatchError, OutOfRangeError
from models import PointSet, GeneratorKind, SourceKind

logger = logging.getLogger(__name__)

FIRST_64_PRIMES = (
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
    59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131,
    137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
    227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307, 311,
)

MAX_DIM = 64
SCRAMBLE_DIGITS = 32
SOBOL_BITS = 32
SOBOL_TABLE = Path(__file__).parent / "data" / "sobol_directions.txt"

_LARGEST_BELOW_ONE = np.nextafter(1.0, 0.0)


def _check_dim(dim: int, what: str) -> None:
    if dim < 1:
        raise SpecError("dim must be positive")
    if dim > MAX_DIM:
        raise SpecError(f"{what} supports at most {MAX_DIM} dimensions, got {dim}")


def _check_size(n: int) -> None:
    if n < 1:
        raise SpecError("n must be positive")


# ===========================
# Halton
# ===========================

def radical_inverse(index: int, base: int) -> float:
    """
    Digit reversal of `index` in `base`, placed after the radix point.

    Args:
        index: Non-negative integer
        base: Integer base >= 2

    Returns:
        Value in [0, 1)
    """
    if base < 2:
        raise SpecError(f"base must be >= 2, got {base}")
    if index < 0:
        raise SpecError("index must be non-negative")
    result = 0.0
    factor = 1.0 / base
    while index > 0:
        index, digit = divmod(index, base)
        result += digit * factor
        factor /= base
    return result


def halton_permutations(dim: int, seed: int) -> List[np.ndarray]:
    """One digit permutation per prime base with pi(0) = 0, drawn from `seed`"""
    rng = np.random.default_rng(seed)
    return [
        np.concatenate(([0], 1 + rng.permutation(base - 1)))
        for base in FIRST_64_PRIMES[:dim]
    ]


def _radical_inverse_array(
    indices: np.ndarray,
    base: int,
    perm: Optional[np.ndarray] = None
) -> np.ndarray:
    remaining = indices.astype(np.int64).copy()
    result = np.zeros(len(remaining), dtype=np.float64)
    factor = 1.0 / base
    for _ in range(SCRAMBLE_DIGITS if perm is not None else 64):
        if not remaining.any():
            break
        digit = remaining % base
        if perm is not None:
            digit = perm[digit]
        result += digit * factor
        remaining //= base
        factor /= base
    if perm is not None and remaining.any():
        # digits beyond the scrambled range stay unpermuted
        while remaining.any():
            result += (remaining % base) * factor
            remaining //= base
            factor /= base
    return np.minimum(result, _LARGEST_BELOW_ONE)


def _halton_points(indices: np.ndarray, dim: int, perms: Optional[List[np.ndarray]]) -> np.ndarray:
    columns = [
        _radical_inverse_array(indices, FIRST_64_PRIMES[k], perms[k] if perms else None)
        for k in range(dim)
    ]
    return np.column_stack(columns)


def halton_set(
    n: int,
    dim: int,
    seed: int = 0,
    scrambled: bool = True,
    start_index: int = 1
) -> PointSet:
    """
    Halton point set over sequence indices start_index .. start_index + n - 1.

    Args:
        n: Number of points
        dim: Dimension (<= 64)
        seed: Seed for the per-base digit permutations
        scrambled: Apply digit scrambling
        start_index: First sequence index; the default 1 skips the origin

    Returns:
        PointSet tagged HALTON
    """
    _check_size(n)
    _check_dim(dim, "Halton")
    if start_index < 0:
        raise SpecError("start_index must be non-negative")
    perms = halton_permutations(dim, seed) if scrambled else None
    indices = np.arange(start_index, start_index + n, dtype=np.int64)
    return PointSet(dim, _halton_points(indices, dim, perms), GeneratorKind.HALTON, seed)


# ===========================
# Sobol
# ===========================

@lru_cache(maxsize=1)
def _load_direction_table() -> tuple:
    rows = []
    with open(SOBOL_TABLE, 'r', encoding='utf-8') as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            values = [int(v) for v in line.split()]
            d, s, a = values[:3]
            rows.append((d, s, a, tuple(values[3:])))
    return tuple(rows)


def direction_table() -> List[tuple]:
    """Rows (dimension, degree, packed coefficients, initial m values) for dims 2..64"""
    return list(_load_direction_table())


def _direction_vector(s: int, a: int, m: tuple) -> np.ndarray:
    V = np.zeros(SOBOL_BITS + 1, dtype=np.uint64)
    for i in range(1, min(s, SOBOL_BITS) + 1):
        V[i] = np.uint64(m[i - 1] << (SOBOL_BITS - i))
    for i in range(s + 1, SOBOL_BITS + 1):
        v = int(V[i - s]) ^ (int(V[i - s]) >> s)
        for k in range(1, s):
            if (a >> (s - 1 - k)) & 1:
                v ^= int(V[i - k])
        V[i] = np.uint64(v)
    return V[1:]


@lru_cache(maxsize=8)
def sobol_directions(dim: int) -> np.ndarray:
    """(dim, 32) array of direction integers; column j belongs to bit j"""
    _check_dim(dim, "Sobol")
    table = _load_direction_table()
    vectors = [np.array([1 << (SOBOL_BITS - i) for i in range(1, SOBOL_BITS + 1)], dtype=np.uint64)]
    for d, s, a, m in table[:dim - 1]:
        vectors.append(_direction_vector(s, a, m))
    return np.vstack(vectors)


def _sobol_points(indices: np.ndarray, dim: int) -> np.ndarray:
    V = sobol_directions(dim)
    gray = indices.astype(np.uint64)
    gray = gray ^ (gray >> np.uint64(1))
    X = np.zeros((len(indices), dim), dtype=np.uint64)
    for j in range(SOBOL_BITS):
        bit = ((gray >> np.uint64(j)) & np.uint64(1)).astype(bool)
        if bit.any():
            X[bit] ^= V[:, j]
    return X.astype(np.float64) / float(1 << SOBOL_BITS)


def sobol_set(n: int, dim: int) -> PointSet:
    """
    Sobol points for indices 1 .. 2^m with 2^m the smallest power of two >= n.

    The returned set may be larger than n.
    """
    _check_size(n)
    _check_dim(dim, "Sobol")
    size = 1 << (n - 1).bit_length()
    indices = np.arange(1, size + 1, dtype=np.int64)
    return PointSet(dim, _sobol_points(indices, dim), GeneratorKind.SOBOL, 0)


# ===========================
# Uniform
# ===========================

def uniform_set(n: int, dim: int, seed: int = 0) -> PointSet:
    """i.i.d. uniform points from a seeded PCG64 generator"""
    _check_size(n)
    if dim < 1:
        raise SpecError("dim must be positive")
    rng = np.random.default_rng(seed)
    return PointSet(dim, rng.random((n, dim)), GeneratorKind.UNIFORM, seed)


# ===========================
# Sampler sources
# ===========================

class SamplerSource:
    """Stream of unit-cube points consumed by the optimizer. Single consumer."""
    kind: SourceKind
    generator: GeneratorKind
    dim: int

    @property
    def cache_size(self) -> Optional[int]:
        return None

    def draw(self, count: int) -> np.ndarray:
        raise NotImplementedError


class CachedSource(SamplerSource):
    """Fixed point set, permuted once, replayed cyclically"""
    kind = SourceKind.CACHED

    def __init__(self, point_set: PointSet, seed: int):
        self.point_set = point_set
        self.generator = point_set.generator
        self.dim = point_set.dim
        self.permutation = np.random.default_rng(seed).permutation(point_set.n)
        self.cursor = 0

    @property
    def cache_size(self) -> int:
        return self.point_set.n

    def draw(self, count: int) -> np.ndarray:
        k = self.point_set.n
        order = self.permutation[(self.cursor + np.arange(count)) % k]
        self.cursor = (self.cursor + count) % k
        return self.point_set.points[order]


class UniformStream(SamplerSource):
    kind = SourceKind.ENDLESS
    generator = GeneratorKind.UNIFORM

    def __init__(self, dim: int, seed: int):
        self.dim = dim
        self.rng = np.random.default_rng(seed)

    def draw(self, count: int) -> np.ndarray:
        return self.rng.random((count, self.dim))


class HaltonStream(SamplerSource):
    """Endless Halton sequence starting at index 1"""
    kind = SourceKind.ENDLESS
    generator = GeneratorKind.HALTON

    def __init__(self, dim: int, seed: int, scrambled: bool = True):
        _check_dim(dim, "Halton")
        self.dim = dim
        self.perms = halton_permutations(dim, seed) if scrambled else None
        self.index = 1

    def draw(self, count: int) -> np.ndarray:
        indices = np.arange(self.index, self.index + count, dtype=np.int64)
        self.index += count
        return _halton_points(indices, self.dim, self.perms)


class SobolStream(SamplerSource):
    """Endless Sobol sequence starting at index 1"""
    kind = SourceKind.ENDLESS
    generator = GeneratorKind.SOBOL

    def __init__(self, dim: int):
        _check_dim(dim, "Sobol")
        self.dim = dim
        self.index = 1

    def draw(self, count: int) -> np.ndarray:
        if self.index + count > (1 << SOBOL_BITS):
            raise SpecError("Sobol stream exhausted its 32-bit index range")
        indices = np.arange(self.index, self.index + count, dtype=np.int64)
        self.index += count
        return _sobol_points(indices, self.dim)


def make_cached_source(ps: PointSet, seed: int) -> CachedSource:
    return CachedSource(ps, seed)


def make_endless_source(
    kind: Union[GeneratorKind, str],
    dim: int,
    seed: int = 0,
    scrambled: bool = True
) -> SamplerSource:
    """
    Endless source for UNIFORM, HALTON or SOBOL.

    Args:
        kind: Generator kind
        dim: Dimension
        seed: PRNG seed (UNIFORM) or scrambling seed (HALTON); ignored for SOBOL
        scrambled: Scramble Halton digits
    """
    if isinstance(kind, str):
        kind = GeneratorKind.parse(kind)
    if kind is GeneratorKind.UNIFORM:
        return UniformStream(dim, seed)
    if kind is GeneratorKind.HALTON:
        return HaltonStream(dim, seed, scrambled)
    if kind is GeneratorKind.SOBOL:
        return SobolStream(dim)
    raise SpecError(f"no endless variant for {kind.value} points")


# ===========================
# File format
# ===========================

def save_point_set(ps: PointSet, path: Union[str, Path]) -> None:
    """Write one point per line with round-trip precision and a metadata header"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f"# dim={ps.dim} n={ps.n} generator={ps.generator.value} seed={ps.seed}\n")
        for row in ps.points:
            f.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    logger.debug("saved %s to %s", ps.set_id, path)


def load_point_set(path: Union[str, Path]) -> PointSet:
    """Read a point-set file; the result is tagged IMPORTED with seed 0"""
    rows = []
    width = None
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, 1):
            text = line.strip()
            if not text or text.startswith('#'):
                continue
            try:
                row = [float(v) for v in text.split()]
            except ValueError:
                raise PointSetParseError(f"cannot parse coordinates '{text}'", line=line_no)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DimensionMismatchError(
                    f"row has {len(row)} coordinates, expected {width}", line=line_no
                )
            if any(not (0.0 <= v < 1.0) for v in row):
                raise OutOfRangeError(f"coordinate outside [0, 1) in '{text}'", line=line_no)
            rows.append(row)
    if not rows:
        raise PointSetParseError(f"no points found in {path}")
    return PointSet(width, np.array(rows, dtype=np.float64), GeneratorKind.IMPORTED, 0)
