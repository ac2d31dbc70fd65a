"""End-to-end acceptance checks, one test per criterion.

Each test records a pass/fail line that is printed in the terminal summary
under "acceptance criteria".
"""

import itertools
import math
import random
import time
from fractions import Fraction

from exploding import analysis, build, bernoulli_shift, custom_weights
from exploding import finite_system as fs
from exploding import shift_system as ss
from exploding.cli import bundled_definitions, load_definition
from exploding.operator import DEFAULT_DEPTH_BUDGET

import oracles
from conftest import make_op


def random_weights(rnd, cap):
    raw = sorted(rnd.sample(range(1, 200), cap), reverse=True)
    return custom_weights([Fraction(r, sum(raw)) for r in raw])


def random_bijection(rnd, n):
    perm = list(range(n))
    rnd.shuffle(perm)
    cyc = fs.cycles(fs.finite_system([1] * n, perm))
    raw = [rnd.randint(1, 5) for _ in cyc]
    total = sum(r * len(c) for r, c in zip(raw, cyc))
    mu = [0] * n
    for r, c in zip(raw, cyc):
        for x in c:
            mu[x] = Fraction(r, total)
    return fs.validate(fs.finite_system(mu, perm))


def random_suite(n_systems=100, seed=2024):
    rnd = random.Random(seed)
    for _ in range(n_systems):
        sysm = random_bijection(rnd, rnd.randint(2, 10))
        yield sysm, random_weights(rnd, rnd.randint(2, 6))


def test_markov_axioms_exact(acceptance):
    failures = []
    for name in ("eight_cycle", "two_two_cycles", "identity", "fair_coin"):
        op = make_op(name)
        rep = analysis.check_doubly_stochastic(op)
        if not (rep["passed"] and rep["exact"]):
            failures.append(name)
    detail = f"{4 - len(failures)}/4 fixtures pass" + (f", failing {failures}" if failures else "")
    ok = acceptance("1 Markov axioms exact on bundled fixtures", not failures, detail)
    assert ok


def test_ergodicity_equivalence(acceptance):
    disagreements = []
    ergodic = 0
    for idx, (sysm, w) in enumerate(random_suite()):
        op = build(sysm, w)
        rep = analysis.ergodicity_report(op)
        verdicts = [rep.eig_multiplicity == 1, rep.map_ergodic, rep.scc_irreducible, rep.sum_positivity]
        if len(set(verdicts)) != 1 or not rep.agree:
            disagreements.append((idx, verdicts))
        ergodic += verdicts[0]
        # the fixed space is spanned by the cycle indicators
        if rep.eig_multiplicity != len(rep.cycles):
            disagreements.append((idx, "multiplicity", rep.eig_multiplicity, len(rep.cycles)))

    op = make_op("two_two_cycles")
    f = analysis.invariant_indicator_witness(op, [0, 1])
    values = {v for comp in f.components for v in comp}
    witness_ok = op.apply(f) == f and values == {0, 1}

    ok = acceptance(
        "2 ergodicity tests agree on 100 random systems; invariant witness",
        not disagreements and witness_ok,
        f"{ergodic} ergodic / 100, disagreements {disagreements[:3]}, witness {witness_ok}")
    assert ok


def test_kernel_oracle_equivalence(acceptance):
    rnd = random.Random(7)
    mismatches = 0
    checked = 0
    for name in ("eight_cycle", "two_two_cycles", "identity"):
        op = make_op(name)
        mat = op.dense_matrix()
        for _ in range(50):
            f = op.level_function([[Fraction(rnd.randint(-9, 9), rnd.randint(1, 4)) for _ in range(op.system.n)]
                                   for _ in range(op.cap)])
            v = op.stack(f)
            g = f
            for n in range(1, 21):
                v = oracles.matmul_vec(mat, v)
                g = op.apply(g)
                checked += 1
                if op.stack(g) != v:
                    mismatches += 1
            if op.stack(op.iterate(f, 20)) != v:
                mismatches += 1
    ok = acceptance("3 apply/iterate equal matrix powers (n <= 20)", mismatches == 0,
                    f"{checked} comparisons, {mismatches} mismatches")
    assert ok


def test_conditional_operator_oracle(acceptance):
    rnd = random.Random(11)
    bad = []
    for p in (("1/2", "1/2"), ("1/4", "3/4")):
        for mode in ("rational", "float"):
            sh = bernoulli_shift(p, mode)
            for k in range(1, 6):
                for depth in range(0, 5):
                    for _ in range(3):
                        vals = [Fraction(rnd.randint(-6, 6), rnd.randint(1, 3)) for _ in range(2 ** depth)]
                        f = ss.function(sh, [v if mode == "rational" else float(v) for v in vals], depth)
                        exact_f = ss.function(bernoulli_shift(p), vals, depth)
                        e = ss.ek(sh, f, k)
                        for x in itertools.product(range(2), repeat=e.depth):
                            want = oracles.ek_at(p, exact_f, k, x)
                            got = e(x)
                            if mode == "rational" and got != want:
                                bad.append((p, mode, k, depth, x))
                            if mode == "float" and abs(got - float(want)) > 1e-9:
                                bad.append((p, mode, k, depth, x))
    for p in (("1/2", "1/2"), ("1/4", "3/4")):
        sh = bernoulli_shift(p)
        one = ss.cylinder_indicator(sh, "1")
        e1, e2 = ss.ek(sh, one, 1), ss.ek(sh, one, 2)
        if any(e1(x) != x[1] for x in itertools.product(range(2), repeat=e1.depth)):
            bad.append((p, "E_1 of [1]"))
        if not (ss.is_constant(e2) and e2((0,) * e2.depth) == Fraction(p[1])):
            bad.append((p, "E_2 of [1]"))
    ok = acceptance("4 E_k matches brute-force fiber enumeration", not bad, f"{len(bad)} mismatches")
    assert ok


def test_lemma_bound(acceptance):
    op = make_op("fair_coin_cap10")
    assert op.depth_budget == DEFAULT_DEPTH_BUDGET == 22
    t0 = time.perf_counter()
    rows = analysis.lemma_bound_table(op, "1", 6, 6)
    elapsed = time.perf_counter() - t0
    summary = analysis.lemma_summary(rows, op.cap, op.exact)
    ok = acceptance(
        "5 lemma sup-norm bound, fair coin cap 10, i,n <= 6",
        summary["passed"] and summary["rows"] == 36 and elapsed <= 60,
        f"min margin {summary['min_margin']}, {elapsed:.1f} s")
    assert ok


def test_lemma_zero_at_and_beyond_cap(acceptance):
    # the i >= K clause is vacuous at cap 10 with i <= 6; exercise it on a small cap
    op = make_op("fair_coin")
    rows = analysis.lemma_bound_table(op, "1", 6, 6)
    summary = analysis.lemma_summary(rows, op.cap, op.exact)
    beyond = [r for r in rows if r.i >= op.cap]
    ok = acceptance("5b lemma lhs vanishes for i >= cap (cap 4)",
                    summary["passed"] and beyond and all(r.lhs == 0 for r in beyond),
                    f"{len(beyond)} rows with i >= cap")
    assert ok


def check_witness(sh, bset, rnd):
    wit = ss.tail_class_witness(sh, bset)
    d = bset.depth
    if len(wit.inside) != d or len(wit.outside) != d:
        return False
    for _ in range(3):
        tail = tuple(rnd.randint(0, 1) for _ in range(6))
        x, y = wit.sequences(tail)
        # T^d x = T^d y, so x ~ y; the set separates them
        if x[d:] != y[d:] or bset(x) != 1 or bset(y) != 0:
            return False
        if not ss.verify_tail_witness(sh, bset, wit, tail):
            return False
    return True


def test_strict_non_pointwise(acceptance):
    sh = bernoulli_shift(["1/2", "1/2"])
    rnd = random.Random(5)
    checked = failed = 0
    for depth in (1, 2, 3):
        for bits in itertools.product((0, 1), repeat=2 ** depth):
            if len(set(bits)) == 1:
                continue
            checked += 1
            failed += not check_witness(sh, ss.function(sh, list(bits), depth), rnd)
    for _ in range(200):
        depth = rnd.choice((4, 5))
        bits = [rnd.randint(0, 1) for _ in range(2 ** depth)]
        if len(set(bits)) == 1:
            bits[rnd.randrange(len(bits))] ^= 1
        checked += 1
        failed += not check_witness(sh, ss.function(sh, bits, depth), rnd)
    ok = acceptance("6 every nonconstant cylinder set splits a tail class", failed == 0,
                    f"{checked} sets, {failed} failures")
    assert ok


def test_ks_entropy(acceptance):
    problems = []
    for mode in ("rational", "float"):
        op = make_op("fair_coin", mode)
        seq = analysis.ks_entropy_report(op, 12)["h_over_n"]
        if any(abs(v - math.log(2)) > 1e-12 for v in seq):
            problems.append(f"fair coin {mode}")
    h = -(0.25 * math.log(0.25) + 0.75 * math.log(0.75))
    seq = analysis.ks_entropy_report(make_op("biased_coin"), 12)["h_over_n"]
    if any(abs(v - h) > 1e-12 for v in seq):
        problems.append("biased coin")
    for idx, (sysm, w) in enumerate(random_suite()):
        seq = fs.ks_entropy(sysm, [[x] for x in range(sysm.n)], 12)
        if any(v > math.log(sysm.n) / N + 1e-12 for N, v in enumerate(seq, start=1)):
            problems.append(f"bijection {idx}")
    ok = acceptance("7 entropy of joins: log 2, H(1/4,3/4), log(n)/N decay", not problems,
                    "fair coin n <= 12 (both modes), biased coin, 100 bijections"
                    + (f", failing {problems[:3]}" if problems else ""))
    assert ok


def test_sampler_statistics(acceptance):
    d = load_definition("eight_cycle")
    op = build(d.backend, d.weights)
    rep = analysis.stationarity_and_birkhoff(op, op.constant(1), 100_000, d.seed)
    tv = rep["tv_distance"]

    d2 = load_definition("two_two_cycles")
    op2 = build(d2.backend, d2.weights)
    f = analysis.set_indicator(op2, [0, 1])
    rep2 = analysis.stationarity_and_birkhoff(op2, f, 100_000, d2.seed, start=(0, 1))
    birk, integ = rep2["birkhoff_average"], rep2["integral"]
    ok = acceptance("8 sampler occupancy and non-ergodic Birkhoff average",
                    tv <= 0.02 and birk == 1 and integ < 1,
                    f"TV {tv:.4f}; Birkhoff {birk} vs integral {integ}")
    assert ok


def test_definition_vs_example(acceptance):
    d = load_definition("fair_coin")
    op = build(d.backend, d.weights)
    rep = analysis.compare_definition_example(op, 50, 3, d.seed)
    consistent = rep["consistent"] and rep["n_functions"] == 50
    if not rep["coincide"]:
        wit = rep["witness"]
        sh = op.system
        comps = [ss.constant(sh, 0)] * op.cap
        comps[wit["level"] - 1] = ss.function(sh, wit["component"]["table"], 1)
        x = tuple(wit["point"]) + (0,) * (op.cap + 2)
        consistent = consistent and (
            analysis.definition_at(sh, comps, op.b, x) == Fraction(wit["definition_value"])
            and analysis.example_at(sh, comps, op.b, x) == Fraction(wit["example_value"]))
    ok = acceptance(
        "9 level-1 fiber average vs block substitution: report produced and consistent", consistent,
        f"coincide {rep['coincide']} ({rep['n_coincide']}/50), "
        f"reindexed match {rep['matches_reindexed']} ({rep['n_matches_reindexed']}/50)")
    assert ok


def constructed_prefix_weights(rnd, cap, m):
    """a_k = c (1 - c)^(k-1) for k <= m, the remaining mass spread over the tail."""
    while True:
        c = Fraction(rnd.randint(1, 99), 100)
        head = [c * (1 - c) ** (k - 1) for k in range(1, m + 1)]
        rest = 1 - sum(head)
        raw = sorted(rnd.sample(range(1, 1000), cap - m), reverse=True)
        tail = [rest * Fraction(r, sum(raw)) for r in raw]
        a = head + tail
        if all(x > y for x, y in zip(a, a[1:])):
            return custom_weights(a)


def test_weights_algebra(acceptance):
    rnd = random.Random(3)
    violations = []
    premises = 0
    for trial in range(300):
        cap = rnd.randint(2, 8)
        if trial % 2:
            w = random_weights(rnd, cap)
        else:
            w = constructed_prefix_weights(rnd, cap, rnd.randint(1, cap - 1))
        for k in range(cap - 1):
            if w.a[k] == w.b[k]:
                premises += 1
                if w.a[k + 1] != (1 - w.a[0]) * w.a[k]:
                    violations.append((trial, k))
    telescoping = []
    for name in bundled_definitions():
        w = load_definition(name).weights
        for k in range(w.cap - 1):
            if w.a[0] * w.b[k] + w.a[k + 1] != w.a[k]:
                telescoping.append((name, k))
        if w.a[0] * w.b[-1] != w.a[-1]:
            telescoping.append((name, "cap"))
    ok = acceptance("10 geometric characterization and exact telescoping",
                    not violations and not telescoping and premises > 0,
                    f"{premises} indices with a_k = b_k, violations {violations[:3]}, telescoping {telescoping}")
    assert ok
