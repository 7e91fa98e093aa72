"""Dense-matrix reverse-mode automatic differentiation on a recording tape.

Every value is a 2-D row-major float64 numpy array. Applying a primitive to
traced variables computes the forward value eagerly and appends a record to
the owning :class:`Tape`; :func:`gradient` then walks the records in strict
reverse order to accumulate exact gradients for every traced input. Plain
numpy arrays (or variables without a tape) act as constants and receive no
gradient.

Subgradient conventions at kinks: relu'(0) = 0, abs'(0) = 0, elu uses
alpha = 1. Safe reciprocals return exactly 0 at or below ``SAFE_EPS`` so
that zero degrees in downstream code stay finite.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DimensionError, TapeError

SAFE_EPS = 1e-8


def as_matrix(x) -> np.ndarray:
    """Coerce a scalar, 1-D, or 2-D input to a 2-D float64 array.

    Scalars become 1x1; 1-D arrays become a single row.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 2:
        return a
    if a.ndim == 0:
        return a.reshape(1, 1)
    if a.ndim == 1:
        return a.reshape(1, -1)
    raise DimensionError(f"expected at most 2 dimensions, got {a.ndim}")


class Var:
    """A (possibly traced) matrix value; ``grad`` is filled by gradient()."""

    __slots__ = ("value", "tape", "grad")

    def __init__(self, value, tape: "Tape | None" = None):
        self.value = as_matrix(value)
        self.tape = tape
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def __repr__(self) -> str:
        traced = "traced" if self.tape is not None else "constant"
        return f"Var(shape={self.value.shape}, {traced})"


class _Record:
    __slots__ = ("name", "inputs", "out", "fwd", "bwd")

    def __init__(self, name, inputs, out, fwd, bwd):
        self.name = name
        self.inputs = inputs
        self.out = out
        self.fwd = fwd
        self.bwd = bwd


class Tape:
    """Ordered log of primitive applications over traced variables."""

    def __init__(self):
        self.records: list[_Record] = []
        self.consumed = False

    def var(self, value) -> Var:
        """Create a traced leaf variable on this tape."""
        return Var(value, self)

    def replay(self) -> None:
        """Recompute every recorded value, in order, from current leaf values.

        Replaying immediately after the forward pass reproduces all recorded
        values bit-exactly (the primitives are deterministic numpy calls).
        """
        for r in self.records:
            r.out.value = r.fwd(*[v.value for v in r.inputs])

    def __len__(self) -> int:
        return len(self.records)


def _as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _tape_of(name: str, *vs: Var) -> "Tape | None":
    tape = None
    for v in vs:
        if v.tape is None:
            continue
        if tape is None:
            tape = v.tape
        elif tape is not v.tape:
            raise TapeError(f"{name}: operands recorded on different tapes")
    return tape


def _emit(name, inputs, out_value, fwd, bwd) -> Var:
    tape = _tape_of(name, *inputs)
    out = Var(out_value, tape)
    if tape is not None:
        tape.records.append(_Record(name, inputs, out, fwd, bwd))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _check_broadcast(name: str, a: np.ndarray, b: np.ndarray) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(
            f"{name}: shapes {a.shape} and {b.shape} do not broadcast"
        ) from None


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def matmul(a, b, transpose_a: bool = False, transpose_b: bool = False) -> Var:
    """Matrix product with optional operand transposes (GEMM-style)."""
    a, b = _as_var(a), _as_var(b)
    av, bv = a.value, b.value
    lhs = av.T if transpose_a else av
    rhs = bv.T if transpose_b else bv
    if lhs.shape[1] != rhs.shape[0]:
        raise DimensionError(
            f"matmul: inner dimensions differ, {lhs.shape} x {rhs.shape}"
            f" (transpose_a={transpose_a}, transpose_b={transpose_b})"
        )

    def fwd(av, bv):
        return (av.T if transpose_a else av) @ (bv.T if transpose_b else bv)

    def bwd(g, av, bv):
        rhs = bv.T if transpose_b else bv
        lhs = av.T if transpose_a else av
        ga = g @ rhs.T
        if transpose_a:
            ga = ga.T
        gb = lhs.T @ g
        if transpose_b:
            gb = gb.T
        return ga, gb

    return _emit("matmul", (a, b), lhs @ rhs, fwd, bwd)


def add(a, b) -> Var:
    """Elementwise sum with numpy broadcasting over size-1 axes."""
    a, b = _as_var(a), _as_var(b)
    _check_broadcast("add", a.value, b.value)

    def fwd(av, bv):
        return av + bv

    def bwd(g, av, bv):
        return _unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)

    return _emit("add", (a, b), a.value + b.value, fwd, bwd)


def mul(a, b) -> Var:
    """Elementwise product with numpy broadcasting over size-1 axes."""
    a, b = _as_var(a), _as_var(b)
    _check_broadcast("mul", a.value, b.value)

    def fwd(av, bv):
        return av * bv

    def bwd(g, av, bv):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return _emit("mul", (a, b), a.value * b.value, fwd, bwd)


def sub(a, b) -> Var:
    """Elementwise difference (composite of add and a constant scale)."""
    return add(a, mul(b, np.array([[-1.0]])))


def relu(x) -> Var:
    x = _as_var(x)

    def fwd(xv):
        return np.maximum(xv, 0.0)

    def bwd(g, xv):
        return (g * (xv > 0.0),)

    return _emit("relu", (x,), np.maximum(x.value, 0.0), fwd, bwd)


def elu(x) -> Var:
    """Exponential linear unit with alpha = 1."""
    x = _as_var(x)

    def fwd(xv):
        return np.where(xv > 0.0, xv, np.expm1(np.minimum(xv, 0.0)))

    def bwd(g, xv):
        return (g * np.where(xv > 0.0, 1.0, np.exp(np.minimum(xv, 0.0))),)

    return _emit("elu", (x,), fwd(x.value), fwd, bwd)


def absval(x) -> Var:
    x = _as_var(x)

    def fwd(xv):
        return np.abs(xv)

    def bwd(g, xv):
        return (g * np.sign(xv),)

    return _emit("abs", (x,), np.abs(x.value), fwd, bwd)


def safe_rsqrt(x) -> Var:
    """1/sqrt(x) where x > SAFE_EPS, exactly 0 elsewhere (diagonal pseudo-inverse)."""
    x = _as_var(x)

    def fwd(xv):
        mask = xv > SAFE_EPS
        safe = np.where(mask, xv, 1.0)
        return np.where(mask, 1.0 / np.sqrt(safe), 0.0)

    def bwd(g, xv):
        mask = xv > SAFE_EPS
        safe = np.where(mask, xv, 1.0)
        d = np.where(mask, -0.5 / (np.sqrt(safe) * safe), 0.0)
        return (g * d,)

    return _emit("safe_rsqrt", (x,), fwd(x.value), fwd, bwd)


def safe_recip(x) -> Var:
    """1/x where x > SAFE_EPS, exactly 0 elsewhere (diagonal pseudo-inverse)."""
    x = _as_var(x)

    def fwd(xv):
        mask = xv > SAFE_EPS
        safe = np.where(mask, xv, 1.0)
        return np.where(mask, 1.0 / safe, 0.0)

    def bwd(g, xv):
        mask = xv > SAFE_EPS
        safe = np.where(mask, xv, 1.0)
        d = np.where(mask, -1.0 / (safe * safe), 0.0)
        return (g * d,)

    return _emit("safe_recip", (x,), fwd(x.value), fwd, bwd)


def reduce_sum(x) -> Var:
    """Sum of all entries, as a 1x1 matrix."""
    x = _as_var(x)

    def fwd(xv):
        return np.array([[xv.sum()]])

    def bwd(g, xv):
        return (np.full(xv.shape, g[0, 0]),)

    return _emit("sum", (x,), fwd(x.value), fwd, bwd)


def reduce_mean(x) -> Var:
    """Mean of all entries, as a 1x1 matrix."""
    x = _as_var(x)

    def fwd(xv):
        return np.array([[xv.mean()]])

    def bwd(g, xv):
        return (np.full(xv.shape, g[0, 0] / xv.size),)

    return _emit("mean", (x,), fwd(x.value), fwd, bwd)


def concat_cols(*xs) -> Var:
    """Concatenate matrices along columns; all must share the row count."""
    vs = tuple(_as_var(x) for x in xs)
    if not vs:
        raise DimensionError("concat_cols: needs at least one operand")
    rows = vs[0].value.shape[0]
    for v in vs:
        if v.value.shape[0] != rows:
            raise DimensionError(
                f"concat_cols: row counts differ, {v.value.shape[0]} != {rows}"
            )
    widths = [v.value.shape[1] for v in vs]
    bounds = np.cumsum([0] + widths)

    def fwd(*values):
        return np.concatenate(values, axis=1)

    def bwd(g, *values):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(values)))

    return _emit("concat_cols", vs, fwd(*[v.value for v in vs]), fwd, bwd)


def select_rows(x, rows) -> Var:
    """Gather rows by (constant) integer index; duplicates accumulate in backward."""
    x = _as_var(x)
    idx = np.asarray(rows, dtype=np.intp).ravel()
    n = x.value.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise DimensionError(f"select_rows: index out of range for {n} rows")
    unique = idx.size == np.unique(idx).size

    def fwd(xv):
        return xv[idx]

    def bwd(g, xv):
        out = np.zeros_like(xv)
        if unique:
            out[idx] = g
        else:
            np.add.at(out, idx, g)
        return (out,)

    return _emit("select_rows", (x,), x.value[idx], fwd, bwd)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # stable for large |x|: exp of a nonpositive argument only
    t = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + t), t / (1.0 + t))


def gru_cell(x, h, w_ih, w_hh, b_ih, b_hh) -> Var:
    """Fused GRU cell update over a row batch.

    Gate layout is (reset, update, candidate) stacked along columns:
    ``w_ih`` is (in, 3H), ``w_hh`` is (H, 3H), biases are (1, 3H). The update
    is the standard sigmoid/tanh recurrence h' = (1 - z) * c + z * h.
    """
    x, h = _as_var(x), _as_var(h)
    w_ih, w_hh, b_ih, b_hh = map(_as_var, (w_ih, w_hh, b_ih, b_hh))
    big = x.value.shape[0]
    hid = h.value.shape[1]
    if h.value.shape[0] != big:
        raise DimensionError(
            f"gru_cell: batch rows differ, x {x.value.shape} vs h {h.value.shape}"
        )
    if w_ih.value.shape != (x.value.shape[1], 3 * hid):
        raise DimensionError(
            f"gru_cell: w_ih shape {w_ih.value.shape}, expected"
            f" {(x.value.shape[1], 3 * hid)}"
        )
    if w_hh.value.shape != (hid, 3 * hid):
        raise DimensionError(
            f"gru_cell: w_hh shape {w_hh.value.shape}, expected {(hid, 3 * hid)}"
        )
    if b_ih.value.shape != (1, 3 * hid) or b_hh.value.shape != (1, 3 * hid):
        raise DimensionError("gru_cell: bias rows must have shape (1, 3H)")

    saved: dict[str, np.ndarray] = {}

    def fwd(xv, hv, wiv, whv, biv, bhv):
        gi = xv @ wiv + biv
        gh = hv @ whv + bhv
        r = _sigmoid(gi[:, :hid] + gh[:, :hid])
        z = _sigmoid(gi[:, hid:2 * hid] + gh[:, hid:2 * hid])
        hn = gh[:, 2 * hid:]
        c = np.tanh(gi[:, 2 * hid:] + r * hn)
        saved.update(r=r, z=z, c=c, hn=hn)
        return (1.0 - z) * c + z * hv

    def bwd(g, xv, hv, wiv, whv, biv, bhv):
        r, z, c, hn = saved["r"], saved["z"], saved["c"], saved["hn"]
        dc = g * (1.0 - z)
        dz = g * (hv - c)
        dpre_c = dc * (1.0 - c * c)
        dr = dpre_c * hn
        dhn = dpre_c * r
        dpre_r = dr * r * (1.0 - r)
        dpre_z = dz * z * (1.0 - z)
        dgi = np.concatenate([dpre_r, dpre_z, dpre_c], axis=1)
        dgh = np.concatenate([dpre_r, dpre_z, dhn], axis=1)
        dx = dgi @ wiv.T
        dh = dgh @ whv.T + g * z
        dwi = xv.T @ dgi
        dwh = hv.T @ dgh
        dbi = dgi.sum(axis=0, keepdims=True)
        dbh = dgh.sum(axis=0, keepdims=True)
        return dx, dh, dwi, dwh, dbi, dbh

    inputs = (x, h, w_ih, w_hh, b_ih, b_hh)
    return _emit("gru_cell", inputs,
                 fwd(*[v.value for v in inputs]), fwd, bwd)


# ---------------------------------------------------------------------------
# driver-level operations
# ---------------------------------------------------------------------------

def evaluate(fn: Callable, *inputs) -> tuple:
    """Trace ``fn`` over fresh leaf variables on a new tape.

    Returns ``(output, tape, leaves)`` where ``output`` is whatever ``fn``
    returned (a Var or a structure of Vars) and ``leaves`` are the traced
    input variables in argument order.
    """
    tape = Tape()
    leaves = [tape.var(x) for x in inputs]
    out = fn(*leaves)
    return out, tape, leaves


def gradient(tape: Tape, seeds) -> dict:
    """Reverse sweep over a tape; returns leaf-variable gradients.

    ``seeds`` is either a single output Var (seeded with ones) or a mapping
    from output Var to its seed matrix. Every variable reached by the sweep
    gets its ``grad`` attribute set; the returned dict maps the remaining
    leaf variables (inputs and parameters) to their accumulated gradients.
    Variables that do not influence any seeded output keep ``grad = None``
    (a zero gradient).
    """
    if tape.consumed:
        raise TapeError("gradient: tape already consumed by a previous backward pass")
    tape.consumed = True
    if isinstance(seeds, Var):
        seeds = {seeds: np.ones_like(seeds.value)}
    acc: dict[Var, np.ndarray] = {}
    for v, s in seeds.items():
        s = as_matrix(s)
        if s.shape != v.value.shape:
            raise DimensionError(
                f"gradient: seed shape {s.shape} != output shape {v.value.shape}"
            )
        acc[v] = acc[v] + s if v in acc else s
    for rec in reversed(tape.records):
        g = acc.pop(rec.out, None)
        if g is None:
            continue
        rec.out.grad = g
        grads = rec.bwd(g, *[u.value for u in rec.inputs])
        for v, gi in zip(rec.inputs, grads):
            if gi is None or v.tape is not tape:
                continue
            prev = acc.get(v)
            acc[v] = gi if prev is None else prev + gi
    for v, g in acc.items():
        v.grad = g
    return acc


def finite_diff(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient estimate of a scalar function, per coordinate."""
    if h <= 0:
        raise ValueError("finite_diff: h must be positive")
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat_x = x.ravel()
    flat_g = g.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        fp = f(x)
        flat_x[i] = orig - h
        fm = f(x)
        flat_x[i] = orig
        flat_g[i] = (fp - fm) / (2.0 * h)
    return g
