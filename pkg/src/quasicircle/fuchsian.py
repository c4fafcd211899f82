"""Genus-two surface group acting on the Poincare disk.

The group is generated by the side pairings of the regular hyperbolic octagon
with interior angles pi/4, glued by the pattern a1 b1 a1^-1 b1^-1 a2 b2 a2^-1
b2^-1. Elements are stored as real SL(2, R) matrices; their action on the
disk goes through the Cayley transform, so internally every element is also
available as an SU(1, 1) pair ``(alpha, beta)`` for the matrix
``[[alpha, beta], [conj(beta), conj(alpha)]]``.

Curvature enters only through lengths: the matrices are the same for every
``curvature < 0`` and distances are divided by ``sqrt(-curvature)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    BudgetExceededError,
    DomainError,
    InvalidCurvatureError,
    NotFoundError,
)

GENUS = 2
N_SIDES = 8
# side j is glued to PARTNER[j]; letter j carries the octagon across side j
PARTNER = (2, 3, 0, 1, 6, 7, 4, 5)
LETTER_NAMES = ("a1", "B1", "A1", "b1", "a2", "B2", "A2", "b2")
GENERATOR_LETTERS = (0, 3, 4, 7)  # a1, b1, a2, b2
RELATOR = (0, 3, 2, 1, 4, 7, 6, 5)  # [a1, b1][a2, b2]

_COT8 = 1.0 / np.tan(np.pi / 8)
#: unit-curvature distance from the octagon centre to a side midpoint
INRADIUS_UNIT = float(np.arccosh(_COT8))
#: unit-curvature distance from the octagon centre to a vertex
CIRCUMRADIUS_UNIT = float(np.arccosh(_COT8**2))


# --- SU(1,1) arithmetic on (alpha, beta) pairs, broadcasting over arrays ---

def su_mul(a1, b1, a2, b2):
    return a1 * a2 + b1 * np.conj(b2), a1 * b2 + b1 * np.conj(a2)


def su_inv(a, b):
    return np.conj(a), -b


def su_act(a, b, z):
    return (a * z + b) / (np.conj(b) * z + np.conj(a))


def su_translate_to_origin(p):
    """SU(1,1) pair of the isometry taking ``p`` to 0."""
    s = 1.0 / np.sqrt(1.0 - np.abs(p) ** 2)
    return s + 0j * p, -p * s


def su_rotation(angle):
    h = np.exp(0.5j * np.asarray(angle))
    return h, 0j * h


def su_frame(p, q):
    """Isometry sending ``p`` to 0 and ``q`` to the positive real axis."""
    a, b = su_translate_to_origin(p)
    image = su_act(a, b, q)
    ra, rb = su_rotation(-np.angle(image))
    return su_mul(ra, rb, a, b)


def unit_distance(z, w):
    """Hyperbolic distance in the curvature -1 disk."""
    z = np.asarray(z)
    w = np.asarray(w)
    num = np.abs(z - w)
    den = np.abs(1.0 - np.conj(w) * z)
    return 2.0 * np.arctanh(np.minimum(num / den, 1.0))


def unit_distance_from_origin(alpha):
    """Distance from 0 to gamma(0) given the SU(1,1) entry ``alpha``."""
    return 2.0 * np.arccosh(np.maximum(np.abs(alpha), 1.0))


def hyperboloid(alpha, beta):
    """Hyperboloid-model coordinates of gamma(0)."""
    x0 = np.abs(alpha) ** 2 + np.abs(beta) ** 2
    xy = 2.0 * alpha * beta
    return np.stack([x0, xy.real, xy.imag], axis=-1)


def check_disk(z, what="point"):
    z = np.asarray(z, dtype=complex)
    if np.any(~np.isfinite(z)) or np.any(np.abs(z) >= 1.0):
        raise DomainError(f"{what} must lie in the open unit disk")
    return z


@dataclass(frozen=True)
class MobiusTransform:
    """Real unit-determinant matrix acting on the disk through the Cayley map."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        scale = max(1.0, self.a**2 + self.b**2 + self.c**2 + self.d**2)
        if abs(det - 1.0) > 1e-12 * scale:
            raise ValueError(f"determinant {det!r} is not 1")

    @classmethod
    def from_su11(cls, alpha, beta):
        alpha = complex(alpha)
        beta = complex(beta)
        n = np.sqrt(abs(alpha) ** 2 - abs(beta) ** 2)
        alpha, beta = alpha / n, beta / n
        return cls(
            alpha.real + beta.real,
            alpha.imag - beta.imag,
            -alpha.imag - beta.imag,
            alpha.real - beta.real,
        )

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def su11(self):
        alpha = complex(self.a + self.d, self.b - self.c) / 2
        beta = complex(self.a - self.d, -(self.b + self.c)) / 2
        return alpha, beta

    def __call__(self, z):
        return su_act(*self.su11, np.asarray(z, dtype=complex))

    def __matmul__(self, other):
        return MobiusTransform.from_su11(*su_mul(*self.su11, *other.su11))

    def inverse(self):
        return MobiusTransform(self.d, -self.b, -self.c, self.a)

    def as_list(self):
        return [self.a, self.b, self.c, self.d]

    def projectively_close(self, other, tol=1e-8):
        m = np.array(self.as_list())
        n = np.array(other.as_list())
        return bool(min(np.abs(m - n).max(), np.abs(m + n).max()) <= tol)


def _pairing(p1, p2, q1, q2):
    """Orientation-preserving isometry with p1 -> q1 and p2 -> q2."""
    fa, fb = su_frame(p1, p2)
    ga, gb = su_frame(q1, q2)
    return su_mul(*su_inv(ga, gb), fa, fb)


@dataclass(frozen=True)
class FundamentalDomain:
    """Regular octagon centred at the origin (the Dirichlet domain of 0)."""

    vertices: tuple
    side_pairing: dict
    curvature: float
    tolerance: float = 1e-9
    # images of the origin across each side, used for the Dirichlet test
    neighbour_centres: tuple = field(default=(), repr=False)

    @property
    def scale(self):
        return 1.0 / np.sqrt(-self.curvature)

    def violations(self, z):
        """Positive entries mark sides across which ``z`` lies."""
        z = np.asarray(z, dtype=complex)
        c = np.asarray(self.neighbour_centres)
        stretch = np.cosh(INRADIUS_UNIT) ** 2
        return np.abs(z[..., None]) ** 2 - np.abs(z[..., None] - c) ** 2 * stretch

    def contains(self, z, tol=None):
        tol = self.tolerance if tol is None else tol
        return np.all(self.violations(z) <= tol, axis=-1)

    def interior_angles(self):
        v = np.asarray(self.vertices)
        angles = []
        for k in range(len(v)):
            a, b = su_translate_to_origin(v[k])
            prev = su_act(a, b, v[k - 1])
            nxt = su_act(a, b, v[(k + 1) % len(v)])
            angles.append(abs(np.angle(nxt / prev)))
        return np.array(angles)

    @cached_property
    def area(self):
        """Gauss-Bonnet area from the measured interior angles."""
        n = len(self.vertices)
        return float(((n - 2) * np.pi - self.interior_angles().sum()) / -self.curvature)

    @cached_property
    def diameter(self):
        v = np.asarray(self.vertices)
        return float(unit_distance(v[:, None], v[None, :]).max() * self.scale)

    @property
    def inradius(self):
        return INRADIUS_UNIT * self.scale

    @property
    def circumradius(self):
        return CIRCUMRADIUS_UNIT * self.scale


@dataclass(frozen=True, eq=False)
class FuchsianGroup:
    curvature: float
    letters: tuple  # MobiusTransform per side, letter j crosses side j
    domain: FundamentalDomain
    basepoint: complex = 0j

    @property
    def scale(self):
        """Length factor converting unit-curvature distances to this curvature."""
        return 1.0 / np.sqrt(-self.curvature)

    @property
    def generators(self):
        return tuple(self.letters[j] for j in GENERATOR_LETTERS)

    @property
    def inverse_letter(self):
        return PARTNER

    @cached_property
    def letter_su11(self):
        pairs = [m.su11 for m in self.letters]
        return (np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))

    def word_matrix(self, word):
        a, b = 1.0 + 0j, 0j
        la, lb = self.letter_su11
        for j in word:
            a, b = su_mul(a, b, la[j], lb[j])
        return MobiusTransform.from_su11(a, b)

    def relator_matrix(self):
        return self.word_matrix(RELATOR)

    def distance(self, z, w):
        return unit_distance(z, w) * self.scale

    def to_json(self):
        gens = ", ".join(
            "[" + ", ".join(f"{x:.17g}" for x in g.as_list()) + "]" for g in self.generators
        )
        return f'{{"curvature": {self.curvature:.17g}, "generators": [{gens}]}}'

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        group = standard_genus2_group(float(data["curvature"]))
        given = [MobiusTransform(*map(float, g)) for g in data["generators"]]
        if len(given) != 4 or not all(
            g.projectively_close(h, 1e-12) for g, h in zip(given, group.generators)
        ):
            raise ValueError("only the standard regular-octagon group is supported")
        return group


def standard_genus2_group(curvature=-1.0):
    """Regular-octagon genus-two group with ambient curvature ``curvature``."""
    curvature = float(curvature)
    if not curvature < 0:
        raise InvalidCurvatureError(f"curvature must be negative, got {curvature}")
    rv = np.tanh(CIRCUMRADIUS_UNIT / 2)
    vertices = rv * np.exp(1j * (np.arange(N_SIDES) * np.pi / 4 - np.pi / 8))

    letters = []
    for j in range(N_SIDES):
        js = PARTNER[j]
        # the partner side is glued on with reversed orientation
        a, b = _pairing(vertices[(js + 1) % 8], vertices[js], vertices[j], vertices[(j + 1) % 8])
        letters.append(MobiusTransform.from_su11(a, b))
    centres = tuple(complex(m(0j)) for m in letters)
    domain = FundamentalDomain(
        vertices=tuple(complex(v) for v in vertices),
        side_pairing={j: j for j in range(N_SIDES)},
        curvature=curvature,
        neighbour_centres=centres,
    )
    return FuchsianGroup(curvature=curvature, letters=tuple(letters), domain=domain)


def reduce_word(word):
    out = []
    for j in word:
        if out and PARTNER[out[-1]] == j:
            out.pop()
        else:
            out.append(j)
    return tuple(out)


@dataclass(frozen=True)
class ReducedWord:
    letters: tuple
    matrix: MobiusTransform
    orbit_point: complex

    def __post_init__(self):
        for x, y in zip(self.letters, self.letters[1:]):
            if PARTNER[x] == y:
                raise ValueError("word is not freely reduced")

    def __len__(self):
        return len(self.letters)

    def names(self):
        return " ".join(LETTER_NAMES[j] for j in self.letters)


# --- orbit enumeration ---

_HASH_CELL = 0.5


def _keys(alpha, beta):
    q = np.floor(hyperboloid(alpha, beta) / _HASH_CELL).astype(np.int64).view(np.uint64)
    h = q[..., 0] * np.uint64(0x9E3779B97F4A7C15)
    h ^= q[..., 1] + np.uint64(0x632BE59BD9B4E019) + (h << np.uint64(6)) + (h >> np.uint64(2))
    h ^= q[..., 2] + np.uint64(0x94D049BB133111EB) + (h << np.uint64(6)) + (h >> np.uint64(2))
    return h


@dataclass(frozen=True, eq=False)
class Orbit:
    """Group elements gamma with their orbit points gamma(w) and distances.

    The breadth-first tree (including elements beyond ``radius`` that were
    only visited on the way) is kept so that words can be reconstructed.
    """

    group: FuchsianGroup
    tree_alpha: np.ndarray
    tree_beta: np.ndarray
    tree_parent: np.ndarray
    tree_letter: np.ndarray
    radius: float

    @cached_property
    def tree_distances(self):
        return unit_distance_from_origin(self.tree_alpha) * self.group.scale

    @cached_property
    def index(self):
        return np.flatnonzero(self.tree_distances <= self.radius + 1e-12)

    def __len__(self):
        return len(self.index)

    @property
    def alpha(self):
        return self.tree_alpha[self.index]

    @property
    def beta(self):
        return self.tree_beta[self.index]

    @property
    def distances(self):
        return self.tree_distances[self.index]

    @property
    def points(self):
        return self.beta / np.conj(self.alpha)

    def word(self, i):
        k = int(self.index[i])
        letters = []
        while self.tree_parent[k] >= 0:
            letters.append(int(self.tree_letter[k]))
            k = int(self.tree_parent[k])
        return tuple(reversed(letters))

    def element(self, i):
        return ReducedWord(
            letters=self.word(i),
            matrix=MobiusTransform.from_su11(self.alpha[i], self.beta[i]),
            orbit_point=complex(self.points[i]),
        )

    def count(self, radius):
        return int(np.count_nonzero(self.distances <= radius))


def enumerate_orbit(group, radius, budget=5_000_000, letter_order=None):
    """All elements gamma with d(w, gamma w) <= radius, one per element.

    Breadth-first search over the Cayley graph. Every element within
    ``radius`` is joined to the identity by a chain of side-adjacent tiles
    met by the geodesic to it, and those tiles have centres within
    ``radius + circumradius``; candidates farther than that are pruned.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    order = list(range(N_SIDES)) if letter_order is None else list(letter_order)
    if sorted(order) != list(range(N_SIDES)):
        raise ValueError("letter_order must be a permutation of the 8 letters")
    la, lb = group.letter_su11
    la, lb = la[order], lb[order]
    letters_idx = np.array(order, dtype=np.int8)
    prune = radius / group.scale + CIRCUMRADIUS_UNIT + 1e-9

    A = [np.array([1.0 + 0j])]
    B = [np.array([0j])]
    P = [np.array([-1])]
    L = [np.array([-1], dtype=np.int8)]
    visited = _keys(A[0], B[0])
    fa, fb, start = A[0], B[0], 0
    total = 1
    while len(fa):
        na, nb = su_mul(fa[:, None], fb[:, None], la[None, :], lb[None, :])
        na, nb = na.ravel(), nb.ravel()
        parent = np.repeat(np.arange(start, start + len(fa)), N_SIDES)
        letter = np.tile(letters_idx, len(fa))
        keep = unit_distance_from_origin(na) <= prune
        na, nb, parent, letter = na[keep], nb[keep], parent[keep], letter[keep]
        keys = _keys(na, nb)
        _, first = np.unique(keys, return_index=True)
        first.sort()
        fresh = first[~np.isin(keys[first], visited)]
        na, nb, parent, letter = na[fresh], nb[fresh], parent[fresh], letter[fresh]
        start += len(fa)
        total += len(na)
        if len(na):
            A.append(na)
            B.append(nb)
            P.append(parent)
            L.append(letter)
            visited = np.union1d(visited, keys[fresh])
        if total > budget:
            raise BudgetExceededError(
                f"orbit enumeration exceeded budget of {budget} elements",
                partial=_assemble(group, A, B, P, L, radius),
                enumerated=total,
            )
        fa, fb = na, nb
    return _assemble(group, A, B, P, L, radius)


def _assemble(group, A, B, P, L, radius):
    alpha, beta, parent, letter = _merge_straddlers(
        np.concatenate(A), np.concatenate(B), np.concatenate(P), np.concatenate(L)
    )
    return Orbit(group, alpha, beta, parent, letter, float(radius))


def _merge_straddlers(alpha, beta, parent, letter):
    """Drop duplicates whose hash cells differed because of rounding.

    Distinct orbit points are at least 4 apart in hyperboloid coordinates,
    while two representations of one element agree to ~1e-6.
    """
    if len(alpha) < 2:
        return alpha, beta, parent, letter
    pairs = cKDTree(hyperboloid(alpha, beta)).query_pairs(0.1, output_type="ndarray")
    if len(pairs) == 0:
        return alpha, beta, parent, letter
    twin = np.arange(len(alpha))
    lo, hi = pairs.min(axis=1), pairs.max(axis=1)
    twin[hi] = lo
    parent = np.where(parent >= 0, twin[np.maximum(parent, 0)], -1)
    keep = twin == np.arange(len(alpha))
    new_index = np.cumsum(keep) - 1
    parent = np.where(parent >= 0, new_index[np.maximum(parent, 0)], -1)
    return alpha[keep], beta[keep], parent[keep], letter[keep]


# --- reduction into the fundamental domain ---

def reduce_to_domain(group, z, max_steps=400, tol=1e-12):
    """Vectorised Dirichlet reduction.

    Returns ``(y, alpha, beta, steps)`` with ``y = gamma(z)`` inside the
    closed octagon, gamma given as an SU(1,1) pair.
    """
    z = check_disk(z)
    shape = z.shape
    z = z.ravel().copy()
    a = np.ones_like(z)
    b = np.zeros_like(z)
    la, lb = group.letter_su11
    inv = np.array(PARTNER)
    active = np.arange(len(z))
    steps = 0
    while len(active):
        v = group.domain.violations(z[active])
        j = np.argmax(v, axis=1)
        out = v[np.arange(len(active)), j] > tol
        active = active[out]
        if not len(active):
            break
        if steps >= max_steps:
            raise NotFoundError(
                "domain reduction exceeded its step budget", unresolved=len(active)
            )
        k = inv[j[out]]
        z[active] = su_act(la[k], lb[k], z[active])
        a[active], b[active] = su_mul(la[k], lb[k], a[active], b[active])
        steps += 1
    return z.reshape(shape), a.reshape(shape), b.reshape(shape), steps


def locate_in_domain(group, p, max_word_length=400):
    """Element gamma with gamma(p) in the closed octagon.

    Boundary ties are broken by the shortest reduced word, then
    lexicographically by letter index.
    """
    p = complex(check_disk(p))
    z = p
    word = []
    la, lb = group.letter_su11
    dom = group.domain
    while True:
        v = dom.violations(z)
        j = int(np.argmax(v))
        if v[j] <= dom.tolerance:
            break
        if len(word) >= max_word_length:
            raise NotFoundError("point too deep for the word-length budget", word_length=len(word))
        k = PARTNER[j]
        z = complex(su_act(la[k], lb[k], z))
        word.insert(0, k)
    best = reduce_word(word)
    ties = np.flatnonzero(np.abs(dom.violations(z)) <= dom.tolerance)
    candidates = [best] + [reduce_word((PARTNER[j],) + best) for j in ties]
    best = min(candidates, key=lambda w: (len(w), w))
    gamma = group.word_matrix(best)
    return gamma, complex(gamma(p))
