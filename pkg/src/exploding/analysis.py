"""Verifiers for the structural properties of exploding operators.

Every check returns a report; a failing check is a report entry with a
witness, never an exception.  Exceptions are reserved for bad inputs.
"""

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

from exploding import finite_system as fs
from exploding import numbers
from exploding import shift_system as ss
from exploding import weights as wts
from exploding.errors import DepthBudgetError, UnsupportedModeError, ValidationError
from exploding.operator import FINITE, SHIFT, LevelFunction

FLOAT_TOL = 1e-9
LEMMA_CSV_HEADER = ["i", "n", "lhs", "bound", "margin"]


def _is_zero(x, exact):
    return x == 0 if exact else abs(x) <= FLOAT_TOL


def _dump_state(s):
    return list(s)


# -- Markov axioms --------------------------------------------------------


def check_doubly_stochastic(op, kernel=None, samples=20, seed=0):
    """Positivity, P1 = 1 and preservation of mu x m.

    On the finite backend the three axioms are read off the kernel rows
    (``kernel`` defaults to ``op.to_matrix()``), which settles them for every
    function at once.  On the shift backend they are checked on the constant
    function, on every cylinder indicator of depth <= 2 at every level, and on
    ``samples`` random nonnegative level functions.
    """
    if op.mode == FINITE:
        report = _check_kernel(op, op.to_matrix() if kernel is None else kernel)
    else:
        report = _check_functional(op, samples, seed)
    report["exact"] = op.exact
    report["passed"] = all(report[k]["passed"] for k in ("positivity", "unit", "nu_preservation"))
    return report


def _check_kernel(op, rows):
    exact = op.exact
    positivity = {"passed": True, "witness": None}
    unit = {"passed": True, "witness": None}
    for row in rows:
        for target, p in row.targets:
            if p < 0 and positivity["passed"]:
                positivity = {"passed": False, "witness": {
                    "from": _dump_state(row.source), "to": _dump_state(target), "prob": numbers.dump(p)}}
        excess = row.total() - 1
        if not _is_zero(excess, exact) and unit["passed"]:
            unit = {"passed": False, "witness": {
                "state": _dump_state(row.source), "row_sum": numbers.dump(row.total())}}
    nu = op.nu()
    pushed = [op.zero] * len(nu)
    for i, row in enumerate(rows):
        for (z, j), p in row.targets:
            pushed[op.state_index(z, j)] += nu[i] * p
    nu_pres = {"passed": True, "witness": None}
    for (x, k), before, after in zip(op.states(), nu, pushed):
        if not _is_zero(after - before, exact):
            nu_pres = {"passed": False, "witness": {
                "state": [x, k], "nu": numbers.dump(before), "nu_P": numbers.dump(after)}}
            break
    return {"positivity": positivity, "unit": unit, "nu_preservation": nu_pres}


def _random_cylinder(sh, rng, depth, nonneg=True):
    vals = rng.integers(0 if nonneg else -4, 5, size=sh.s ** depth)
    return ss.function(sh, [numbers.to_rational(f"{int(v)}/4") if sh.exact else v / 4 for v in vals], depth)


def _check_functional(op, samples, seed):
    sh = op.system
    exact = op.exact
    rng = np.random.default_rng(seed)
    one = op.constant(1)
    image = op.apply(one)
    unit = {"passed": True, "witness": None}
    for k, comp in enumerate(image.components, start=1):
        if not all(_is_zero(v - 1, exact) for v in comp.flat()):
            unit = {"passed": False, "witness": {"level": k}}
            break

    probes = []
    zero = ss.constant(sh, 0)
    for level in range(op.cap):
        for depth in (1, 2):
            for word in itertools.product(range(sh.s), repeat=depth):
                comps = [zero] * op.cap
                comps[level] = ss.cylinder_indicator(sh, word)
                probes.append((f"indicator {''.join(map(str, word))} at level {level + 1}", LevelFunction(tuple(comps))))
    for i in range(samples):
        comps = tuple(_random_cylinder(sh, rng, int(rng.integers(0, 4))) for _ in range(op.cap))
        probes.append((f"random nonnegative function #{i}", LevelFunction(comps)))

    positivity = {"passed": True, "witness": None}
    nu_pres = {"passed": True, "witness": None}
    for name, f in probes:
        g = op.apply(f)
        if positivity["passed"]:
            for k, comp in enumerate(g.components, start=1):
                if any(v < (0 if exact else -FLOAT_TOL) for v in comp.flat()):
                    positivity = {"passed": False, "witness": {"function": name, "level": k}}
                    break
        before, after = op.integral(f), op.integral(g)
        if nu_pres["passed"] and not _is_zero(after - before, exact):
            nu_pres = {"passed": False, "witness": {
                "function": name, "integral": numbers.dump(before), "integral_after": numbers.dump(after)}}
    return {"positivity": positivity, "unit": unit, "nu_preservation": nu_pres}


# -- ergodicity -------------------------------------------------------------


def rank(rows, exact=True):
    """Rank of a matrix given as a list of {column: value} dicts.

    Incremental row echelon form; with exact entries no tolerance is used.
    """
    pivots = {}
    for row in rows:
        row = {j: v for j, v in row.items() if not _is_zero(v, exact)}
        while row:
            c = min(row)
            prow = pivots.get(c)
            if prow is None:
                inv = row[c]
                pivots[c] = {j: v / inv for j, v in row.items()}
                break
            factor = row[c]
            for j, v in prow.items():
                nv = row.get(j, 0) - factor * v
                if _is_zero(nv, exact) or j == c:
                    row.pop(j, None)
                else:
                    row[j] = nv
    return len(pivots)


def fixed_space_dimension(op, rows=None):
    """dim ker(P - I) acting on functions over the states."""
    rows = op.to_matrix() if rows is None else rows
    mats = []
    for i, row in enumerate(rows):
        d = {i: op.zero - 1}
        for (z, j), p in row.targets:
            col = op.state_index(z, j)
            d[col] = d.get(col, op.zero) + p
        mats.append(d)
    return len(rows) - rank(mats, op.exact)


def strongly_connected_components(succ):
    """Tarjan's algorithm, iterative.  ``succ[v]`` lists the successors of v."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    comps = []
    counter = 0
    for root in range(len(succ)):
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


def sum_positivity(op, rows=None):
    """Whether sum_{m=1}^{N} P^m delta_y > 0 everywhere for every state y (N = state count).

    Every term is nonnegative, so positivity of the sum is positivity of some
    term; each power is rescaled to unit maximum to rule out underflow.
    """
    rows = op.to_matrix() if rows is None else rows
    size = len(rows)
    P = np.zeros((size, size))
    for i, row in enumerate(rows):
        for (z, j), p in row.targets:
            P[i, op.state_index(z, j)] += float(p)
    V = np.eye(size)
    reached = np.zeros((size, size), dtype=bool)
    for _ in range(size):
        V = P @ V
        peak = V.max(axis=0)
        peak[peak == 0] = 1.0
        V = V / peak
        reached |= V > 0
    ok = bool(reached.all())
    witness = None
    if not ok:
        x, y = map(int, np.argwhere(~reached)[0])
        witness = {"state": list(op.states()[x]), "indicator_of": list(op.states()[y])}
    return ok, witness


@dataclass
class ErgodicityReport:
    eig_multiplicity: int
    scc_irreducible: bool
    scc_count: int
    sum_positivity: bool
    map_ergodic: bool
    cycles: list
    agree: bool
    sum_positivity_witness: dict = None

    def to_dict(self):
        return asdict(self)


def ergodicity_report(op):
    if op.mode != FINITE:
        raise UnsupportedModeError("ergodicity report needs the finite backend")
    rows = op.to_matrix()
    mult = fixed_space_dimension(op, rows)
    succ = [sorted({op.state_index(z, j) for (z, j), p in row.targets if p > 0}) for row in rows]
    comps = strongly_connected_components(succ)
    positive, witness = sum_positivity(op, rows)
    erg, cyc = fs.is_ergodic_map(op.system)
    verdicts = [mult == 1, len(comps) == 1, positive, erg]
    return ErgodicityReport(
        eig_multiplicity=mult,
        scc_irreducible=len(comps) == 1,
        scc_count=len(comps),
        sum_positivity=positive,
        map_ergodic=erg,
        cycles=[list(c) for c in cyc],
        agree=all(verdicts) or not any(verdicts),
        sum_positivity_witness=witness,
    )


def set_indicator(op, points):
    """1_{A x levels} on the finite backend."""
    a = set(points)
    one, zero = op.zero + 1, op.zero
    comp = tuple(one if x in a else zero for x in range(op.system.n))
    return LevelFunction((comp,) * op.cap)


def invariant_indicator_witness(op, points):
    """The Ex-invariant nonconstant function 1_{A x levels} for a T-invariant A."""
    if op.mode != FINITE:
        raise UnsupportedModeError("invariant set witness needs the finite backend")
    sysm = op.system
    a = set(points)
    for x in range(sysm.n):
        if (sysm.t[x] in a) != (x in a):
            raise ValidationError.single(
                "not_invariant", f"point {x} and its image disagree on membership", x)
    mass = sysm.mass(a)
    if mass == 0 or mass == 1:
        raise ValidationError.single("trivial_set", f"set has measure {mass}; need 0 < mu(A) < 1")
    f = set_indicator(op, a)
    if op.apply(f) != f:
        raise AssertionError("indicator of an invariant set is not fixed by the operator")
    return f


# -- pointwise factors ------------------------------------------------------


def pointwise_factor_report(op, cylinder_sets=None, seed=0):
    """Whether the tail-relation quotient is trivial, with witnesses.

    Finite backend: the quotient classes and, when some class has mass in
    (0, 1), a verification that the operator maps 1_{W x levels} to
    1_{T^{-1}W x levels} for that class W, i.e. acts as a Koopman operator on
    the quotient.  Shift backend: the quotient is trivial, and each supplied
    nonconstant cylinder set is shown not to be a union of classes.
    """
    if op.mode == FINITE:
        sysm = op.system
        classes = fs.equivalence_classes(sysm)
        masses = [sysm.mass(c) for c in classes]
        trivial = any(m == 1 for m in masses)
        report = {
            "backend": "finite",
            "classes": [list(c) for c in classes],
            "trivial_quotient": trivial,
            "witness": None,
        }
        if not trivial:
            w = set(classes[0])
            pre = {x for x in range(sysm.n) if sysm.t[x] in w}
            verified = op.apply(set_indicator(op, w)) == set_indicator(op, pre)
            report["witness"] = {
                "set": sorted(w),
                "mass": numbers.dump(masses[0]),
                "preimage": sorted(pre),
                "koopman_on_quotient": verified,
            }
        return report

    sh = op.system
    rng = np.random.default_rng(seed)
    sets = [ss.cylinder_indicator(sh, "1")] if cylinder_sets is None else [
        ss.cylinder_indicator(sh, c) if isinstance(c, (str, tuple, list)) else c for c in cylinder_sets]
    witnesses = []
    for bset in sets:
        wit = ss.tail_class_witness(sh, bset)
        tail = tuple(int(c) for c in rng.integers(0, sh.s, size=8))
        witnesses.append({
            "depth": bset.depth,
            "inside": list(wit.inside),
            "outside": list(wit.outside),
            "tail_checked": list(tail),
            "verified": ss.verify_tail_witness(sh, bset, wit, tail),
        })
    return {"backend": "shift", "trivial_quotient": True, "witnesses": witnesses}


# -- transport lemma --------------------------------------------------------


@dataclass
class LemmaBoundRow:
    i: int
    n: int
    lhs: object
    bound: object
    margin: object

    def to_dict(self):
        return {"i": self.i, "n": self.n, "lhs": numbers.dump(self.lhs),
                "bound": numbers.dump(self.bound), "margin": numbers.dump(self.margin)}


def lemma_bound_table(op, word, i_max, n_max, i_min=1):
    """sup-norm distance between Ex^n 1_{T^{-i}A x levels} and 1_{T^{-(i+n)}A x levels}.

    The bound is sum_{k >= i} R(k) for the capped reset law.
    """
    if op.mode != SHIFT:
        raise UnsupportedModeError("lemma table needs the shift backend")
    sh = op.system
    word = ss._check_word(sh, word)
    if not word:
        raise ValidationError.single("empty_word", "cylinder word must be nonempty")
    need = max(i_max + len(word) + n_max, op.cap + n_max - 1)
    if need > op.depth_budget:
        raise DepthBudgetError(need, op.depth_budget)
    rows = []
    for i in range(i_min, i_max + 1):
        bound = wts.tail_of_tails(op.weights, min(i, op.cap))
        if not op.exact:
            bound = float(bound)
        start = ss.cylinder_indicator(sh, word, offset=i)
        f = LevelFunction((start,) * op.cap)
        for n in range(1, n_max + 1):
            f = op.apply(f)
            target = ss.cylinder_indicator(sh, word, offset=i + n)
            lhs = max(ss.max_abs_diff(comp, target) for comp in f.components)
            rows.append(LemmaBoundRow(i, n, lhs, bound, bound - lhs))
    return rows


def lemma_summary(rows, cap, exact=True):
    lhs = {(r.i, r.n): r.lhs for r in rows}
    margins_ok = all(r.margin >= (0 if exact else -FLOAT_TOL) for r in rows)
    monotone = all(lhs[(i + 1, n)] <= lhs[(i, n)] + (0 if exact else FLOAT_TOL)
                   for (i, n) in lhs if (i + 1, n) in lhs)
    beyond_cap = all(r.lhs == 0 for r in rows if r.i >= cap)
    return {
        "rows": len(rows),
        "margins_nonnegative": margins_ok,
        "lhs_nonincreasing_in_i": monotone,
        "zero_beyond_cap": beyond_cap,
        "min_margin": numbers.dump(min(r.margin for r in rows)) if rows else None,
        "passed": margins_ok and monotone and beyond_cap,
    }


# -- entropy ----------------------------------------------------------------


def r_summability_report(w):
    r = [wts.tail(w, i) for i in range(1, w.cap + 1)]
    report = {
        "R": [numbers.dump(x) for x in r],
        "sum": numbers.dump(sum(r, w.b[0] * 0)),
        "R_at_cap": numbers.dump(r[-1]),
        "geometric": None,
    }
    if w.kind == "geometric":
        # capped geometric tails coincide with the uncapped ones below the cap
        closed = [w.ratio ** i for i in range(1, w.cap)]
        if w.exact:
            matches = all(x == y for x, y in zip(r, closed))
        else:
            matches = all(abs(x - y) <= FLOAT_TOL for x, y in zip(r, closed))
        report["geometric"] = {
            "ratio": numbers.dump(w.ratio),
            "uncapped_R": "ratio**i",
            "matches_below_cap": matches,
            "uncapped_sum": numbers.dump(w.ratio / (1 - w.ratio)),
        }
    return report


def ks_entropy_report(op, n_max, partition=None):
    """H(xi^N)/N for N = 1..n_max, for the map T only.

    Shift backend: xi is the partition by the first coordinate.  Finite
    backend: ``partition`` defaults to the partition into points.
    """
    if op.mode == SHIFT:
        if n_max > op.depth_budget:
            raise DepthBudgetError(n_max, op.depth_budget)
        sh = op.system
        seq = [ss.coordinate_entropy(sh, n) / n for n in range(1, n_max + 1)]
        return {
            "backend": "shift",
            "h_over_n": seq,
            "reference": fs.entropy_of_masses(sh.p),
        }
    sysm = op.system
    if partition is None:
        partition = [[x] for x in range(sysm.n)]
    seq = fs.ks_entropy(sysm, partition, n_max)
    return {
        "backend": "finite",
        "h_over_n": seq,
        "log_n_over_N": [math.log(sysm.n) / N for N in range(1, n_max + 1)],
    }


# -- sampling statistics ----------------------------------------------------


def stationarity_and_birkhoff(op, f, steps, seed, start=None):
    """Empirical occupancy vs mu x m, and the time average of ``f`` along one path."""
    if op.mode != FINITE:
        raise UnsupportedModeError("occupancy statistics need the finite backend")
    if not isinstance(f, LevelFunction) or f.cap != op.cap or any(len(c) != op.system.n for c in f.components):
        raise ValidationError.single("invalid_observable", "observable must be a level function on this operator")
    path = op.sample_path(steps, seed, start=start)
    counts = {}
    total = op.zero
    for x, k in path:
        counts[(x, k)] = counts.get((x, k), 0) + 1
        total += f.components[k - 1][x]
    n = len(path)
    nu = op.nu()
    occupancy = [counts.get(s, 0) / n for s in op.states()]
    tv = 0.5 * math.fsum(abs(o - float(v)) for o, v in zip(occupancy, nu))
    return {
        "steps": steps,
        "seed": seed,
        "start": None if start is None else list(start),
        "tv_distance": tv,
        "birkhoff_average": total / n,
        "integral": op.integral(f),
        "occupancy": occupancy,
        "nu": nu,
    }


# -- fiber average vs. block substitution ----------------------------------


def definition_at(sh, components, b, x, reset_shift=0):
    """Level-1 value at the sequence prefix ``x`` by enumerating every fiber prefix."""
    total = sh.zero
    for k, f in enumerate(components, start=1):
        r = k + reset_shift
        for c in itertools.product(range(sh.s), repeat=r):
            y = c + tuple(x[r:])
            total = total + b[k - 1] * sh.word_probability(c) * f(y[1:])
    return total


def example_at(sh, components, b, x):
    """sum_k b_k sum_B p(B) f_k(sigma_B x) at the prefix ``x``, by enumeration."""
    total = sh.zero
    for k, f in enumerate(components, start=1):
        for blk in itertools.product(range(sh.s), repeat=k):
            total = total + b[k - 1] * sh.word_probability(blk) * f(blk + tuple(x[k + 1:]))
    return total


def _random_level_function(sh, rng, cap, max_depth):
    return tuple(_random_cylinder(sh, rng, int(rng.integers(0, max_depth + 1))) for _ in range(cap))


def _first_difference(f, g):
    a, b = ss.aligned([f, g])
    for word in itertools.product(range(f.alphabet), repeat=a.ndim):
        if a[word] != b[word]:
            return word, a[word], b[word]
    return None


def compare_definition_example(op, n_functions=50, max_depth=3, seed=0):
    """Compare the level-1 fiber-average formula with the block-substitution
    formula sum_k b_k sum_B p(B) f_k(sigma_B x) on random level functions.

    Nothing is assumed about their relationship: the report says whether they
    coincide, whether block substitution matches the fiber average with reset ``k``
    read through the fiber of ``T^{k+1}``, and gives a smallest disagreeing
    input, re-evaluated pointwise by enumeration.
    """
    if op.mode != SHIFT:
        raise UnsupportedModeError("comparison needs the shift backend")
    sh, w = op.system, op.weights
    rng = np.random.default_rng(seed)
    b = op.b
    n_same = n_reindexed = 0
    for _ in range(n_functions):
        comps = _random_level_function(sh, rng, op.cap, max_depth)
        d = ss.definition_level1(sh, comps, b)
        e = ss.example_operator_level1(sh, comps, w)
        r = ss.definition_level1(sh, comps, b, reset_shift=1)
        n_same += ss.equal(d, e) if op.exact else ss.max_abs_diff(d, e) <= FLOAT_TOL
        n_reindexed += ss.equal(e, r) if op.exact else ss.max_abs_diff(e, r) <= FLOAT_TOL

    witness = None
    zero = ss.constant(sh, 0)
    for level in range(op.cap):
        for letter in range(sh.s):
            comps = [zero] * op.cap
            comps[level] = ss.cylinder_indicator(sh, (letter,))
            d = ss.definition_level1(sh, comps, b)
            e = ss.example_operator_level1(sh, comps, w)
            diff = _first_difference(d, e)
            if diff is None:
                continue
            word, dv, ev = diff
            x = word + (0,) * (op.cap + 2)
            d_re = definition_at(sh, comps, b, x)
            e_re = example_at(sh, comps, b, x)
            witness = {
                "level": level + 1,
                "component": {"depth": 1, "table": [numbers.dump(v) for v in comps[level].flat()]},
                "other_levels": "zero",
                "point": list(word),
                "definition_value": numbers.dump(dv),
                "example_value": numbers.dump(ev),
                "reevaluated": {"definition": numbers.dump(d_re), "example": numbers.dump(e_re)},
                "verified": bool(d_re == dv and e_re == ev and d_re != e_re),
            }
            break
        if witness:
            break
    return {
        "n_functions": n_functions,
        "seed": seed,
        "coincide": n_same == n_functions,
        "n_coincide": int(n_same),
        "matches_reindexed": n_reindexed == n_functions,
        "n_matches_reindexed": int(n_reindexed),
        "reindexing": "example reset k averages over the fiber of T^(k+1)",
        "witness": witness,
        "consistent": witness is None if n_same == n_functions else bool(witness and witness["verified"]),
    }

