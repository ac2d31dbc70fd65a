"""One-sided Bernoulli shifts and functions of finitely many coordinates.

A :class:`CylinderFunction` of depth ``d`` is a dense array of shape
``(s,) * d``: axis ``j`` holds coordinate ``x_{j+1}``, so the row-major
flattening indexes words lexicographically with the first coordinate most
significant.  Rational shifts store ``mpq`` objects; float shifts store
float64.

Tables produced by composition with the shift are broadcast views (stride 0
along the leading axes).  Averaging over such an axis is skipped, which keeps
long operator iterations cheap without changing any value.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from exploding import numbers
from exploding.errors import ValidationError

FLOAT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class BernoulliShift:
    p: tuple
    exact: bool

    @property
    def s(self):
        return len(self.p)

    @property
    def mode(self):
        return numbers.RATIONAL if self.exact else numbers.FLOAT

    @property
    def zero(self):
        return self.p[0] * 0

    @property
    def one(self):
        return self.zero + 1

    def word_probability(self, word):
        out = self.one
        for c in word:
            out = out * self.p[c]
        return out

    def to_dict(self):
        return {"backend": "shift", "alphabet": self.s, "p": [numbers.dump(x) for x in self.p]}


def bernoulli_shift(p, mode=None):
    p = list(p)
    if len(p) < 2:
        raise ValidationError.single("alphabet_too_small", f"alphabet needs >= 2 letters, got {len(p)}")
    mode = mode or numbers.infer_mode(p)
    p = numbers.convert(p, mode)
    problems = [
        {"code": "nonpositive_probability", "message": f"p[{i}] = {x} is not positive", "index": i}
        for i, x in enumerate(p) if x <= 0
    ]
    total = sum(p)
    if (total != 1) if mode == numbers.RATIONAL else abs(total - 1) > FLOAT_SUM_TOL:
        problems.append({"code": "bad_normalization", "message": f"p sums to {total}, not 1", "index": None})
    if problems:
        raise ValidationError(problems)
    return BernoulliShift(p, mode == numbers.RATIONAL)


class CylinderFunction:
    """f(x) = table[x_1, ..., x_d]."""

    __slots__ = ("table", "alphabet")

    def __init__(self, table, alphabet):
        table = np.asarray(table)
        if any(n != alphabet for n in table.shape):
            raise ValidationError.single(
                "bad_table_shape", f"table shape {table.shape} does not match alphabet {alphabet}")
        if table.flags.writeable:
            table.flags.writeable = False
        self.table = table
        self.alphabet = alphabet

    @property
    def depth(self):
        return self.table.ndim

    def __call__(self, x):
        x = tuple(x)
        if len(x) < self.depth:
            raise ValueError(f"need {self.depth} coordinates, got {len(x)}")
        return self.table[x[:self.depth]] if self.depth else self.table[()]

    def flat(self):
        return list(self.table.reshape(-1))

    def to_dict(self):
        return {"depth": self.depth, "table": [numbers.dump(v) for v in self.flat()]}

    def __repr__(self):
        return f"CylinderFunction(depth={self.depth}, alphabet={self.alphabet})"


def _dtype(sh):
    return object if sh.exact else np.float64


def function(sh, values, depth=None):
    """Cylinder function from a flat lexicographic table (or a nested array)."""
    arr = np.asarray(values, dtype=object)
    if depth is None:
        depth = 0
        while sh.s ** depth < arr.size:
            depth += 1
    if arr.size != sh.s ** depth:
        raise ValidationError.single(
            "bad_table_length", f"table of depth {depth} needs {sh.s ** depth} entries, got {arr.size}")
    conv = numbers.convert(arr.reshape(-1).tolist(), sh.mode)
    out = np.empty(len(conv), dtype=_dtype(sh))
    out[:] = conv
    return CylinderFunction(out.reshape((sh.s,) * depth), sh.s)


def from_dict(sh, d):
    return function(sh, d["table"], d["depth"])


def constant(sh, c, depth=0):
    (c,) = numbers.convert([c], sh.mode)
    return CylinderFunction(_full(sh, c, depth), sh.s)


def _full(sh, c, depth):
    arr = np.empty((), dtype=_dtype(sh))
    arr[()] = c
    return np.broadcast_to(arr, (sh.s,) * depth)


def cylinder_indicator(sh, word, offset=0):
    """Indicator of {x : x_{offset+1} ... x_{offset+len(word)} = word}."""
    word = _check_word(sh, word)
    base = np.empty((sh.s,) * len(word), dtype=_dtype(sh))
    base[...] = sh.zero
    base[tuple(word)] = sh.one
    return CylinderFunction(_embed(base, offset, offset + len(word), sh.s), sh.s)


def _check_word(sh, word):
    if isinstance(word, str):
        word = [int(c) for c in word]
    word = tuple(word)
    for c in word:
        if not 0 <= c < sh.s:
            raise ValidationError.single("letter_out_of_alphabet", f"letter {c} is not in 0..{sh.s - 1}")
    return word


def _embed(reduced, lead, depth, s):
    """View ``reduced`` as a function of coordinates lead+1.. inside a depth-``depth`` table."""
    trail = depth - lead - reduced.ndim
    assert trail >= 0, (lead, reduced.ndim, depth)
    arr = reduced.reshape((1,) * lead + reduced.shape + (1,) * trail)
    return np.broadcast_to(arr, (s,) * depth)


def _marginal(sh, table, m):
    """Average out the first ``m`` coordinates against ``p``."""
    for _ in range(min(m, table.ndim)):
        if table.strides[0] == 0:
            table = np.asarray(table[0], dtype=table.dtype)
            continue
        acc = table[0] * sh.p[0]
        for c in range(1, sh.s):
            acc = acc + table[c] * sh.p[c]
        table = np.asarray(acc, dtype=table.dtype)
    return table


def extend(f, depth):
    """The same function as a table of larger depth."""
    if depth < f.depth:
        raise ValueError(f"cannot shrink depth {f.depth} to {depth}")
    return CylinderFunction(_embed(f.table, 0, depth, f.alphabet), f.alphabet)


def aligned(fs):
    depth = max(f.depth for f in fs)
    return [extend(f, depth).table for f in fs]


def equal(f, g):
    a, b = aligned([f, g])
    return bool(np.all(a == b))


def max_abs_diff(f, g):
    a, b = aligned([f, g])
    if a.size == 0:
        return 0
    return max(abs(v) for v in (a - b).reshape(-1))


def is_constant(f):
    vals = f.table.reshape(-1)
    return bool(np.all(vals == vals[0]))


def integral(sh, f):
    """Integral against the product measure."""
    return _marginal(sh, f.table, f.depth)[()]


def koopman(sh, f):
    """f o T: the shift drops the first coordinate."""
    return CylinderFunction(_embed(f.table, 1, f.depth + 1, sh.s), sh.s)


def ek_reduced(sh, f, k):
    """E_k f as (table over coordinates k+1.., depth of the full function).

    The fiber of x under T^k is every sequence agreeing with x beyond
    coordinate k, with product law on the first k coordinates; composing with T
    leaves ``f`` reading coordinates 2..k of the fiber point, then x_{k+1}...
    """
    if k < 1:
        raise ValidationError.single("order_out_of_range", f"fiber order must be >= 1, got {k}")
    m = _marginal(sh, f.table, k - 1)
    return m, max(f.depth + 1, k)


def ek(sh, f, k):
    m, depth = ek_reduced(sh, f, k)
    lead = k if m.ndim else 0
    return CylinderFunction(_embed(m, lead, depth, sh.s), sh.s)


def definition_level1(sh, components, b, reset_shift=0):
    """sum_k b_k E_{k + reset_shift} f_k, summed over nested coordinate windows."""
    terms = [ek_reduced(sh, f, k + 1 + reset_shift) for k, f in enumerate(components)]
    depth = max(d for _, d in terms)
    K = len(components)
    acc = None
    # acc is a table over coordinates k+1..depth
    for k in range(K + reset_shift, 0, -1):
        j = k - 1 - reset_shift
        width = depth - k
        if acc is not None:
            acc = _embed(acc, 1, width, sh.s)
        if j >= 0:
            m, _ = terms[j]
            term = _embed(m, 0, width, sh.s) * b[j]
            acc = np.asarray(term if acc is None else acc + term, dtype=_dtype(sh))
    acc = _embed(acc, 1, depth, sh.s)
    return CylinderFunction(acc, sh.s)


def sigma_b(sh, word, f):
    """f o sigma_B, where sigma_B writes B over the first k coordinates and
    shifts the rest: (sigma_B x)_n = x_{n+1} for n > k."""
    word = _check_word(sh, word)
    k = len(word)
    sub = f.table[word[:min(k, f.depth)]]
    sub = np.asarray(sub, dtype=f.table.dtype)
    depth = f.depth + 1
    lead = k + 1 if sub.ndim else 0
    return CylinderFunction(_embed(sub, lead, depth, sh.s), sh.s)


def example_operator_level1(sh, components, w):
    """sum_k b_k sum_{B in A^k} p(B) (f_k o sigma_B), by enumerating every block."""
    if len(components) != w.cap:
        raise ValidationError.single(
            "cap_mismatch", f"{len(components)} level components for cap {w.cap}")
    depth = max(f.depth for f in components) + 1
    total = _full(sh, sh.zero, depth)
    for k, f in enumerate(components, start=1):
        for word in itertools.product(range(sh.s), repeat=k):
            g = sigma_b(sh, word, f)
            total = total + extend(g, depth).table * (w.b[k - 1] * sh.word_probability(word))
    return CylinderFunction(np.asarray(total, dtype=_dtype(sh)), sh.s)


@dataclass(frozen=True)
class TailWitness:
    """Prefixes u, v of equal length with u.z ~ v.z for every tail z."""

    inside: tuple
    outside: tuple

    def sequences(self, tail):
        tail = tuple(tail)
        return self.inside + tail, self.outside + tail


def tail_class_witness(sh, bset):
    vals = bset.table.reshape(-1)
    if not all(v == 0 or v == 1 for v in vals):
        raise ValidationError.single("not_indicator", "cylinder set table must be 0/1 valued")
    inside = outside = None
    for word in itertools.product(range(sh.s), repeat=bset.depth):
        v = bset.table[word]
        if v == 1 and inside is None:
            inside = word
        elif v == 0 and outside is None:
            outside = word
        if inside is not None and outside is not None:
            return TailWitness(inside, outside)
    raise ValidationError.single(
        "no_witness", "cylinder set is constant; every set of measure 0 or 1 is a union of classes")


def verify_tail_witness(sh, bset, witness, tail):
    """The two sequences share a T^d image, yet bset separates them."""
    d = len(witness.inside)
    x, y = witness.sequences(tail)
    if len(witness.outside) != d or x[d:] != y[d:]:
        return False
    return bset(x) == 1 and bset(y) == 0


def coordinate_entropy(sh, n):
    """H of the partition into length-n cylinders, by enumerating all words."""
    from exploding.finite_system import entropy_of_masses

    return entropy_of_masses(
        sh.word_probability(w) for w in itertools.product(range(sh.s), repeat=n))
