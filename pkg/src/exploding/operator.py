"""The exploding operator on X x {1..K}.

Above level 1 a point is transported by T while its counter drops by one.  At
level 1 it explodes: with probability ``b_k`` the counter resets to ``k`` and
the point is redrawn from its fiber under ``T^k`` before being moved by T.
"""

import bisect
import csv
import dataclasses
import math
import os
from dataclasses import dataclass

import numpy as np

from exploding import finite_system as fs
from exploding import numbers
from exploding import shift_system as ss
from exploding import weights as wts
from exploding.errors import DepthBudgetError, UnsupportedModeError, ValidationError

DEFAULT_DEPTH_BUDGET = 22
FINITE = "finite-kernel"
SHIFT = "shift-functional"
KERNEL_CSV_HEADER = ["from_x", "from_k", "to_x", "to_k", "prob"]


def default_depth_budget():
    raw = os.environ.get("EXPLODE_DEPTH_BUDGET")
    return int(raw) if raw else DEFAULT_DEPTH_BUDGET


@dataclass(frozen=True)
class LevelFunction:
    """f(x, k) = components[k - 1](x)."""

    components: tuple

    @property
    def cap(self):
        return len(self.components)

    def level(self, k):
        return self.components[k - 1]


@dataclass(frozen=True)
class KernelRow:
    source: tuple
    targets: tuple

    def total(self):
        return sum(p for _, p in self.targets)


class _Categorical:
    """Draws an index with the given probabilities.

    Rational laws are sampled exactly with one uniform integer draw over the
    common denominator.
    """

    def __init__(self, probs):
        probs = list(probs)
        den = 1
        if all(numbers.is_exact(p) for p in probs):
            for p in probs:
                den = math.lcm(den, int(p.denominator))
        if den < 2 ** 62 and all(numbers.is_exact(p) for p in probs):
            cum, acc = [], 0
            for p in probs:
                acc += int(p.numerator) * (den // int(p.denominator))
                cum.append(acc)
            self._int = True
            self._den = den
        else:
            cum, acc = [], 0.0
            for p in probs:
                acc += float(p)
                cum.append(acc)
            self._int = False
            self._den = acc
        self._cum = cum

    def draw(self, rng):
        if self._int:
            u = int(rng.integers(self._den))
        else:
            u = rng.random() * self._den
        return min(bisect.bisect_right(self._cum, u), len(self._cum) - 1)


class ExplodingOperator:
    """Exploding operator over a finite system or a Bernoulli shift."""

    def __init__(self, backend, weights, depth_budget=None):
        self.backend = backend
        self.depth_budget = default_depth_budget() if depth_budget is None else depth_budget
        if isinstance(backend, fs.FiniteSystem):
            self.mode = FINITE
            self.exact = weights.exact
            self._mu = backend.mu if self.exact else tuple(float(m) for m in backend.mu)
            self.system = fs.FiniteSystem(self._mu, backend.t)
            self.fibers = tuple(fs.fiber_partition(self.system, k) for k in range(1, weights.cap + 1))
            self._invertible = all(len(c) == 1 for c in self.fibers[-1].classes)
        elif isinstance(backend, ss.BernoulliShift):
            self.mode = SHIFT
            self.exact = weights.exact and backend.exact
            self.system = backend if self.exact else ss.BernoulliShift(tuple(float(p) for p in backend.p), False)
        else:
            raise TypeError(f"unsupported backend {type(backend).__name__}")
        if not self.exact and weights.exact:
            weights = dataclasses.replace(
                weights,
                a=tuple(float(x) for x in weights.a),
                b=tuple(float(x) for x in weights.b),
                exact=False,
                ratio=None if weights.ratio is None else float(weights.ratio),
            )
        self.weights = weights
        self.a, self.b = weights.a, weights.b

    @property
    def cap(self):
        return self.weights.cap

    @property
    def zero(self):
        return self.b[0] * 0

    # -- level functions -------------------------------------------------

    def level_function(self, components):
        """Convert raw per-level values (point lists, or cylinder functions) to a LevelFunction."""
        components = list(components)
        if len(components) != self.cap:
            raise ValidationError.single(
                "cap_mismatch", f"{len(components)} level components for cap {self.cap}")
        if self.mode == FINITE:
            mode = numbers.RATIONAL if self.exact else numbers.FLOAT
            out = []
            for comp in components:
                if len(comp) != self.system.n:
                    raise ValidationError.single(
                        "length_mismatch", f"component has {len(comp)} values for {self.system.n} points")
                out.append(numbers.convert(comp, mode))
            return LevelFunction(tuple(out))
        out = []
        for comp in components:
            if not isinstance(comp, ss.CylinderFunction):
                comp = ss.function(self.system, comp)
            elif not self.exact and comp.table.dtype == object:
                comp = ss.function(self.system, comp.flat(), comp.depth)
            out.append(comp)
        return LevelFunction(tuple(out))

    def constant(self, c):
        if self.mode == FINITE:
            return self.level_function([[c] * self.system.n] * self.cap)
        return LevelFunction(tuple(ss.constant(self.system, c) for _ in range(self.cap)))

    def integral(self, f):
        """Integral of f against mu x m."""
        total = self.zero
        for a, comp in zip(self.a, f.components):
            if self.mode == FINITE:
                total += a * sum(m * v for m, v in zip(self._mu, comp))
            else:
                total += a * ss.integral(self.system, comp)
        return total

    # -- action ------------------------------------------------------------

    def _check_cap(self, f):
        if f.cap != self.cap:
            raise ValidationError.single("cap_mismatch", f"level function has cap {f.cap}, operator {self.cap}")

    def result_depth(self, f):
        """Table depth that one application produces (shift backend)."""
        d = [c.depth for c in f.components]
        level1 = max(max(dk + 1, k) for k, dk in enumerate(d, start=1))
        return max([level1] + [dk + 1 for dk in d[:-1]])

    def apply(self, f):
        self._check_cap(f)
        if self.mode == FINITE:
            return self._apply_finite(f)
        depth = self.result_depth(f)
        if depth > self.depth_budget:
            raise DepthBudgetError(depth, self.depth_budget)
        sh = self.system
        level1 = ss.definition_level1(sh, f.components, self.b)
        rest = [ss.koopman(sh, c) for c in f.components[:-1]]
        return LevelFunction((level1, *rest))

    def _apply_finite(self, f):
        sysm = self.system
        t = sysm.t
        comps = f.components
        if self._invertible:
            level1 = tuple(
                sum((b * comp[t[x]] for b, comp in zip(self.b, comps)), self.zero)
                for x in range(sysm.n))
        else:
            eks = [fs.conditional_operator_ek(sysm, k, comp, part)
                   for k, (comp, part) in enumerate(zip(comps, self.fibers), start=1)]
            level1 = tuple(
                sum((b * e[x] for b, e in zip(self.b, eks)), self.zero) for x in range(sysm.n))
        rest = [tuple(comp[t[x]] for x in range(sysm.n)) for comp in comps[:-1]]
        return LevelFunction((level1, *rest))

    def iterate(self, f, n):
        """Ex^n f.  On the shift backend fails before exceeding the depth budget."""
        if n < 0:
            raise ValueError("iteration count must be nonnegative")
        for step in range(1, n + 1):
            if self.mode == SHIFT:
                depth = self.result_depth(f)
                if depth > self.depth_budget:
                    raise DepthBudgetError(depth, self.depth_budget, step)
            f = self.apply(f)
        return f

    # -- finite kernel -----------------------------------------------------

    def _require_finite(self):
        if self.mode != FINITE:
            raise UnsupportedModeError("kernel export needs the finite backend")

    def states(self):
        self._require_finite()
        return [(x, k) for x in range(self.system.n) for k in range(1, self.cap + 1)]

    def state_index(self, x, k):
        return x * self.cap + (k - 1)

    def nu(self):
        """mu x m over states, in state order."""
        self._require_finite()
        return [self._mu[x] * self.a[k - 1] for x, k in self.states()]

    def to_matrix(self):
        self._require_finite()
        sysm = self.system
        rows = []
        for x in range(sysm.n):
            acc = {}
            for k, part in enumerate(self.fibers, start=1):
                c = part.class_of[x]
                w = part.quotient_weights[c]
                for y in part.classes[c]:
                    key = (sysm.t[y], k)
                    acc[key] = acc.get(key, self.zero) + self.b[k - 1] * sysm.mu[y] / w
            rows.append(KernelRow((x, 1), tuple(sorted(acc.items()))))
            for k in range(2, self.cap + 1):
                rows.append(KernelRow((x, k), (((sysm.t[x], k - 1), self.zero + 1),)))
        return rows

    def dense_matrix(self, rows=None):
        rows = self.to_matrix() if rows is None else rows
        size = len(rows)
        mat = [[self.zero] * size for _ in range(size)]
        for i, row in enumerate(rows):
            for (z, j), p in row.targets:
                mat[i][self.state_index(z, j)] += p
        return mat

    def stack(self, f):
        """Level function as a vector over states (x major, level minor)."""
        return [f.components[k - 1][x] for x, k in self.states()]

    def unstack(self, vec):
        n, K = self.system.n, self.cap
        return LevelFunction(tuple(tuple(vec[x * K + k] for x in range(n)) for k in range(K)))

    # -- sampling ----------------------------------------------------------

    def sample_path(self, steps, seed, start=None, window=0):
        """Trajectory of ``steps`` transitions (``steps + 1`` states).

        Finite backend states are ``(x, k)``.  Shift backend states are
        ``(first window coordinates, k)``; only coordinates that are observed or
        carried past an explosion are ever drawn.
        """
        rng = np.random.default_rng(seed)
        if self.mode == FINITE:
            return self._sample_finite(steps, rng, start)
        return self._sample_shift(steps, rng, start, window)

    def _sample_finite(self, steps, rng, start):
        n, K = self.system.n, self.cap
        if start is None:
            states = self.states()
            x, k = states[_Categorical(self.nu()).draw(rng)]
        else:
            x, k = start
            if not (0 <= x < n and 1 <= k <= K):
                raise ValidationError.single("invalid_start", f"start state {start!r} is not in the state space")
        rows = self.to_matrix()
        samplers = [None] * len(rows)
        path = [(x, k)]
        t = self.system.t
        for _ in range(steps):
            if k >= 2:
                x, k = t[x], k - 1
            else:
                i = self.state_index(x, 1)
                if samplers[i] is None:
                    targets = rows[i].targets
                    samplers[i] = ([s for s, _ in targets], _Categorical(p for _, p in targets))
                outcomes, cat = samplers[i]
                x, k = outcomes[cat.draw(rng)]
            path.append((x, k))
        return path

    def _sample_shift(self, steps, rng, start, window):
        letters = _Categorical(self.system.p)
        resets = _Categorical(self.b)
        if start is None:
            prefix, k = [], _Categorical(self.a).draw(rng) + 1
        else:
            word, k = start
            if not 1 <= k <= self.cap:
                raise ValidationError.single("invalid_start", f"start level {k} is not in 1..{self.cap}")
            prefix = list(ss._check_word(self.system, word))

        def observe():
            while len(prefix) < window:
                prefix.append(letters.draw(rng))
            return (tuple(prefix[:window]), k)

        path = [observe()]
        for _ in range(steps):
            if k >= 2:
                if prefix:
                    prefix.pop(0)
                k -= 1
            else:
                j = resets.draw(rng) + 1
                # fiber point: fresh first j coordinates, then T drops one
                if len(prefix) > j:
                    prefix[:] = [letters.draw(rng) for _ in range(j - 1)] + prefix[j:]
                else:
                    prefix.clear()
                k = j
            path.append(observe())
        return path


def build(backend, weights, depth_budget=None):
    """Validate both inputs and construct the operator."""
    if isinstance(backend, fs.FiniteSystem):
        fs.validate(backend)
    elif isinstance(backend, ss.BernoulliShift):
        ss.bernoulli_shift(backend.p, backend.mode)
    else:
        raise TypeError(f"unsupported backend {type(backend).__name__}")
    checked = wts.custom_weights(weights.a, weights.cap, weights.mode)
    if checked.b != tuple(weights.b):
        raise ValidationError.single("inconsistent_reset_law", "b does not follow from a")
    return ExplodingOperator(backend, weights, depth_budget)


def write_kernel_csv(rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(KERNEL_CSV_HEADER)
    for row in rows:
        x, k = row.source
        for (z, j), p in row.targets:
            writer.writerow([x, k, z, j, numbers.dump(p)])


def level_function_to_json(f):
    out = []
    for comp in f.components:
        if isinstance(comp, ss.CylinderFunction):
            out.append(comp.to_dict())
        else:
            out.append([numbers.dump(v) for v in comp])
    return out
