"""Level weights: the level measure ``a`` and the explosion reset law ``b``.

The infinite sequences are truncated at a cap ``K``.  The reset law keeps
``b_k = (a_k - a_{k+1}) / a_1`` below the cap and closes with
``b_K = a_K / a_1``, so that ``a_1 * b_k + a_{k+1} = a_k`` holds at every index
(with ``a_{K+1} = 0``).  That identity is exactly what makes the truncated
operator preserve ``mu x m``.
"""

from dataclasses import dataclass

from exploding import numbers
from exploding.errors import ValidationError

FLOAT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class CappedWeights:
    a: tuple
    b: tuple
    exact: bool
    kind: str = "custom"
    ratio: object = None

    @property
    def cap(self):
        return len(self.a)

    @property
    def mode(self):
        return numbers.RATIONAL if self.exact else numbers.FLOAT

    def to_dict(self):
        if self.kind == "geometric":
            return {"kind": "geometric", "ratio": numbers.dump(self.ratio), "cap": self.cap}
        return {"kind": "custom", "a": [numbers.dump(x) for x in self.a], "cap": self.cap}


def _reset_law(a):
    a1 = a[0]
    b = [(a[k] - a[k + 1]) / a1 for k in range(len(a) - 1)]
    b.append(a[-1] / a1)
    return tuple(b)


def _check(a, exact):
    problems = []
    for k, x in enumerate(a):
        if x <= 0:
            problems.append({
                "code": "nonpositive_weight",
                "message": f"a_{k + 1} = {x} is not positive",
                "index": k + 1,
            })
    for k in range(len(a) - 1):
        if not a[k] > a[k + 1]:
            problems.append({
                "code": "not_strictly_decreasing",
                "message": f"a_{k + 1} = {a[k]} does not exceed a_{k + 2} = {a[k + 1]}",
                "index": k + 1,
            })
    total = sum(a)
    off = total != 1 if exact else abs(total - 1.0) > FLOAT_SUM_TOL
    if off:
        problems.append({
            "code": "bad_normalization",
            "message": f"weights sum to {total}, not 1",
            "index": None,
        })
    if problems:
        raise ValidationError(problems)


def geometric_weights(ratio, cap, mode=None):
    """Weights with ``a_k`` proportional to ``ratio**(k-1)``, renormalized at the cap.

    >>> w = geometric_weights("1/2", 3)
    >>> [str(x) for x in w.a], [str(x) for x in w.b]
    (['4/7', '2/7', '1/7'], ['1/2', '1/4', '1/4'])
    """
    mode = mode or numbers.infer_mode([ratio])
    (r,) = numbers.convert([ratio], mode)
    if not 0 < r < 1:
        raise ValidationError.single("ratio_out_of_range", f"ratio must lie in (0, 1), got {ratio}")
    if isinstance(cap, bool) or not isinstance(cap, int) or cap < 2:
        raise ValidationError.single("cap_too_small", f"cap must be an integer >= 2, got {cap!r}")
    raw = [r ** k for k in range(cap)]
    total = sum(raw)
    a = tuple(x / total for x in raw)
    _check(a, mode == numbers.RATIONAL)
    return CappedWeights(a, _reset_law(a), mode == numbers.RATIONAL, "geometric", r)


def custom_weights(a, cap=None, mode=None):
    """Validate a user-supplied level measure.  Never renormalizes."""
    a = list(a)
    if cap is None:
        cap = len(a)
    if isinstance(cap, bool) or not isinstance(cap, int) or cap < 1:
        raise ValidationError.single("cap_too_small", f"cap must be a positive integer, got {cap!r}")
    if len(a) != cap:
        raise ValidationError.single(
            "length_mismatch", f"expected {cap} weights, got {len(a)}")
    mode = mode or numbers.infer_mode(a)
    a = numbers.convert(a, mode)
    _check(a, mode == numbers.RATIONAL)
    return CappedWeights(a, _reset_law(a), mode == numbers.RATIONAL)


def weights_from_dict(spec, mode=None):
    kind = spec.get("kind")
    if kind == "geometric":
        return geometric_weights(spec["ratio"], spec["cap"], mode)
    if kind == "custom":
        return custom_weights(spec["a"], spec.get("cap"), mode)
    raise ValidationError.single("unknown_levels_kind", f"unknown levels kind {kind!r}")


def _check_index(w, i):
    if isinstance(i, bool) or not isinstance(i, int) or not 0 <= i <= w.cap:
        raise ValidationError.single(
            "index_out_of_range", f"index must lie in 0..{w.cap}, got {i!r}", i)


def partial_sum(w, i):
    """S(i): total reset probability of the first ``i`` levels."""
    _check_index(w, i)
    return sum(w.b[:i], w.b[0] * 0)


def tail(w, i):
    """R(i): reset probability beyond level ``i``; zero at the cap."""
    _check_index(w, i)
    return sum(w.b[i:], w.b[0] * 0)


def tails(w):
    """(R(1), ..., R(K))."""
    out = []
    acc = w.b[0] * 0
    for x in reversed(w.b[1:]):
        acc = acc + x
        out.append(acc)
    out.reverse()
    out.append(w.b[0] * 0)
    return tuple(out)


def tail_of_tails(w, i):
    """Sum of R(k) over k >= i, the right-hand side of the transport lemma."""
    _check_index(w, i)
    return sum((tail(w, k) for k in range(i, w.cap + 1)), w.b[0] * 0)
