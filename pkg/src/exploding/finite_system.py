"""Finite probability spaces with a measure-preserving self-map.

A surjective self-map of a finite set is a bijection, so every valid system is
invertible: fibers of ``T^k`` are singletons, the disintegrations are point
masses and the tail relation is trivial.  Noninvertible behavior lives in
:mod:`exploding.shift_system`.  The fiber and disintegration code below is
nevertheless written for arbitrary maps so it can be exercised on unvalidated
inputs.
"""

import math
from collections import defaultdict
from dataclasses import dataclass

from exploding import numbers
from exploding.errors import ValidationError


@dataclass(frozen=True)
class FiniteSystem:
    mu: tuple
    t: tuple

    @property
    def n(self):
        return len(self.mu)

    def iterate_map(self, x, k):
        for _ in range(k):
            x = self.t[x]
        return x

    def mass(self, points):
        return sum((self.mu[x] for x in points), self.mu[0] * 0)

    def to_dict(self):
        return {
            "backend": "finite",
            "mu": [numbers.dump(m) for m in self.mu],
            "map": list(self.t),
        }


@dataclass(frozen=True)
class FiberPartition:
    k: int
    classes: tuple
    class_of: tuple
    quotient_weights: tuple


def finite_system(mu, t):
    """Build a system with exact rational weights.  Does not validate."""
    return FiniteSystem(numbers.convert(mu, numbers.RATIONAL), tuple(int(x) for x in t))


def validate(sys):
    """Return ``sys`` unchanged if it is a valid system, else raise with every problem found."""
    problems = []
    n = len(sys.mu)
    if n == 0:
        raise ValidationError.single("empty", "system has no points")
    if len(sys.t) != n:
        raise ValidationError.single(
            "length_mismatch", f"map has {len(sys.t)} entries for {n} points")
    for x, m in enumerate(sys.mu):
        if m <= 0:
            problems.append({"code": "nonpositive_mass", "message": f"mu[{x}] = {m} is not positive", "index": x})
    total = sum(sys.mu)
    if total != 1:
        problems.append({"code": "bad_normalization", "message": f"mu sums to {total}, not 1", "index": None})
    seen = {}
    for x, y in enumerate(sys.t):
        if not 0 <= y < n:
            problems.append({"code": "map_out_of_range", "message": f"t[{x}] = {y} is not a point", "index": x})
            continue
        if y in seen:
            problems.append({
                "code": "not_injective",
                "message": f"t[{seen[y]}] = t[{x}] = {y}",
                "index": x,
            })
        else:
            seen[y] = x
    if problems:
        raise ValidationError(problems)
    # a bijection preserves mu iff it preserves every point mass
    for x, y in enumerate(sys.t):
        if sys.mu[y] != sys.mu[x]:
            problems.append({
                "code": "measure_not_preserved",
                "message": f"mu[t[{x}]] = {sys.mu[y]} differs from mu[{x}] = {sys.mu[x]}",
                "index": x,
            })
    if problems:
        raise ValidationError(problems)
    return sys


def is_surjective(t):
    return set(t) == set(range(len(t)))


def is_injective(t):
    return len(set(t)) == len(t)


def fiber_partition(sys, k):
    """Group points by their image under ``T^k``."""
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValidationError.single("order_out_of_range", f"fiber order must be >= 1, got {k!r}")
    groups = defaultdict(list)
    for x in range(sys.n):
        groups[sys.iterate_map(x, k)].append(x)
    classes = sorted((tuple(g) for g in groups.values()), key=lambda c: c[0])
    class_of = [0] * sys.n
    for i, c in enumerate(classes):
        for x in c:
            class_of[x] = i
    return FiberPartition(k, tuple(classes), tuple(class_of), tuple(sys.mass(c) for c in classes))


def disintegration(sys, part, x):
    """Conditional law of ``mu`` on the fiber containing ``x``, as a point-indexed tuple."""
    if not 0 <= x < sys.n:
        raise ValidationError.single("point_out_of_range", f"point {x} is not in 0..{sys.n - 1}", x)
    c = part.class_of[x]
    w = part.quotient_weights[c]
    zero = sys.mu[0] * 0
    out = [zero] * sys.n
    for y in part.classes[c]:
        out[y] = sys.mu[y] / w
    return tuple(out)


def conditional_operator_ek(sys, k, f, part=None):
    """E_k f(x): average of ``f o T`` over the fiber of ``x`` under its conditional law."""
    if len(f) != sys.n:
        raise ValidationError.single(
            "length_mismatch", f"function has {len(f)} values for {sys.n} points")
    if part is None:
        part = fiber_partition(sys, k)
    per_class = []
    for c, w in zip(part.classes, part.quotient_weights):
        per_class.append(sum(sys.mu[y] * f[sys.t[y]] for y in c) / w)
    return tuple(per_class[part.class_of[x]] for x in range(sys.n))


def equivalence_classes(sys):
    """Classes of x ~ x' (some iterate of T identifies them).

    Both orbits enter their eventual cycles within ``n`` steps, and ``T`` is
    injective on the union of cycles, so collisions happen within ``n`` steps.
    """
    return fiber_partition(sys, max(sys.n, 1)).classes


def cycles(sys):
    seen = [False] * sys.n
    out = []
    for start in range(sys.n):
        if seen[start]:
            continue
        cyc = []
        x = start
        while not seen[x]:
            seen[x] = True
            cyc.append(x)
            x = sys.t[x]
        out.append(tuple(cyc))
    return out


def is_ergodic_map(sys):
    """(ergodic, cycle decomposition).  Ergodic iff the bijection is one cycle."""
    cyc = cycles(sys)
    return len(cyc) == 1, cyc


def invariant_set(sys, points):
    """True iff T^{-1}A = A."""
    a = set(points)
    return all((sys.t[x] in a) == (x in a) for x in range(sys.n))


def _check_partition(sys, partition):
    label = [None] * sys.n
    for i, block in enumerate(partition):
        for x in block:
            if not 0 <= x < sys.n:
                raise ValidationError.single("point_out_of_range", f"point {x} is not in the space", x)
            if label[x] is not None:
                raise ValidationError.single("overlapping_partition", f"point {x} lies in two blocks", x)
            label[x] = i
    missing = [x for x in range(sys.n) if label[x] is None]
    if missing:
        raise ValidationError.single(
            "incomplete_partition", f"points {missing} are not covered", missing[0])
    return label


def entropy_of_masses(masses):
    return -math.fsum(float(m) * math.log(float(m)) for m in masses if m > 0)


def join_masses(sys, label, N):
    """Masses of the atoms of the join of T^{-j} xi for j < N."""
    atoms = defaultdict(lambda: sys.mu[0] * 0)
    for x in range(sys.n):
        name = []
        y = x
        for _ in range(N):
            name.append(label[y])
            y = sys.t[y]
        atoms[tuple(name)] += sys.mu[x]
    return list(atoms.values())


def ks_entropy(sys, partition, horizon):
    """[H(xi^N) / N for N = 1..horizon], natural logarithm."""
    label = _check_partition(sys, partition)
    return [entropy_of_masses(join_masses(sys, label, N)) / N for N in range(1, horizon + 1)]
