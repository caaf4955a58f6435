"""Solver-neutral MILP instances and CPLEX LP-format I/O.

Variables and rows are created in named blocks.  A block keeps its numpy index
array so model code can address ``pv[n, h]`` directly, and each row block
carries a constraint family (``voltage``, ``balance``, ``topology`` ...) used to
name the culprit when an instance turns out infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

INF = np.inf


@dataclass(frozen=True)
class VarBlock:
    name: str
    shape: tuple[int, ...]
    start: int
    family: str | None = None

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=int))

    @property
    def index(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.size).reshape(self.shape)


@dataclass(frozen=True)
class RowBlock:
    name: str
    family: str
    start: int
    size: int


@dataclass(eq=False)
class MILPInstance:
    """Minimise ``obj @ x + obj_const`` subject to ``row_lo <= A x <= row_hi``."""

    var_names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    obj: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    row_names: list[str]
    var_blocks: dict[str, VarBlock] = field(default_factory=dict)
    row_blocks: dict[str, RowBlock] = field(default_factory=dict)
    obj_const: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_rows(self) -> int:
        return len(self.row_names)

    @property
    def num_binaries(self) -> int:
        return int(np.count_nonzero(self.integer & (self.lb >= 0) & (self.ub <= 1)))

    def var(self, block: str) -> np.ndarray:
        return self.var_blocks[block].index

    def row_family(self) -> np.ndarray:
        fam = np.empty(self.num_rows, dtype=object)
        for rb in self.row_blocks.values():
            fam[rb.start:rb.start + rb.size] = rb.family
        return fam

    def families(self) -> set[str]:
        return {rb.family for rb in self.row_blocks.values()} | {
            vb.family for vb in self.var_blocks.values() if vb.family}

    def values(self, x: np.ndarray, block: str) -> np.ndarray:
        return np.asarray(x)[self.var(block)]

    def relaxed(self, family: str) -> "MILPInstance":
        """Copy with the rows of ``family`` dropped and its variable bounds freed."""
        keep = self.row_family() != family
        lb, ub = self.lb.copy(), self.ub.copy()
        for vb in self.var_blocks.values():
            if vb.family == family:
                idx = vb.index.reshape(-1)
                lb[idx], ub[idx] = -INF, INF
        blocks, start = {}, 0
        for name, rb in self.row_blocks.items():
            if rb.family != family:
                blocks[name] = replace(rb, start=start)
                start += rb.size
        return replace(self, lb=lb, ub=ub, A=self.A[keep], row_lo=self.row_lo[keep],
                       row_hi=self.row_hi[keep],
                       row_names=[n for n, k in zip(self.row_names, keep) if k],
                       row_blocks=blocks)

    def with_fixed(self, idx, values) -> "MILPInstance":
        lb, ub = self.lb.copy(), self.ub.copy()
        lb[idx] = values
        ub[idx] = values
        return replace(self, lb=lb, ub=ub)

    def check(self) -> None:
        """Raise if any row references a variable outside the declared set."""
        if self.A.shape != (self.num_rows, self.num_vars):
            raise ValueError(f"constraint matrix shape {self.A.shape} does not match "
                             f"{self.num_rows} rows x {self.num_vars} variables")
        for arr, what in ((self.lb, "lb"), (self.ub, "ub"), (self.obj, "obj"),
                          (self.integer, "integer")):
            if arr.shape != (self.num_vars,):
                raise ValueError(f"{what} has shape {arr.shape}")
        if np.any(self.lb > self.ub):
            raise ValueError("variable with lb > ub")


def _block_names(name: str, shape: tuple[int, ...]) -> list[str]:
    if not shape:
        return [name]
    return [name + "_" + "_".join(map(str, ix)) for ix in np.ndindex(*shape)]


class ModelBuilder:
    def __init__(self):
        self._names: list[str] = []
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._int: list[np.ndarray] = []
        self._obj: list[np.ndarray] = []
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._lo: list[np.ndarray] = []
        self._hi: list[np.ndarray] = []
        self._row_names: list[str] = []
        self.var_blocks: dict[str, VarBlock] = {}
        self.row_blocks: dict[str, RowBlock] = {}
        self.obj_const = 0.0
        self.meta: dict = {}

    @property
    def num_vars(self) -> int:
        return len(self._names)

    @property
    def num_rows(self) -> int:
        return len(self._row_names)

    def add_vars(self, name: str, shape=(), lb=0.0, ub=INF, integer=False,
                 family: str | None = None) -> np.ndarray:
        if name in self.var_blocks:
            raise ValueError(f"duplicate variable block {name!r}")
        shape = tuple(int(s) for s in np.atleast_1d(shape)) if shape != () else ()
        block = VarBlock(name, shape, self.num_vars, family)
        n = block.size
        self._names.extend(_block_names(name, shape))
        self._lb.append(np.broadcast_to(np.asarray(lb, float), shape).reshape(n))
        self._ub.append(np.broadcast_to(np.asarray(ub, float), shape).reshape(n))
        self._int.append(np.full(n, bool(integer)))
        self._obj.append(np.zeros(n))
        self.var_blocks[name] = block
        return block.index

    def add_binaries(self, name: str, shape=(), family: str | None = None) -> np.ndarray:
        return self.add_vars(name, shape, 0.0, 1.0, integer=True, family=family)

    def add_objective(self, idx, coef) -> None:
        idx = np.asarray(idx)
        coef = np.broadcast_to(np.asarray(coef, float), idx.shape).reshape(-1)
        idx = idx.reshape(-1)
        obj = np.concatenate(self._obj) if self._obj else np.zeros(0)
        np.add.at(obj, idx, coef)
        self._obj = [obj]

    def add_rows(self, name: str, family: str, terms, lo=-INF, hi=INF) -> np.ndarray:
        """Add rows ``lo <= sum(coef * var) <= hi``.

        ``terms`` is a list of ``(var_index, coef)``.  ``var_index`` has shape
        ``(R,)`` or ``(R, k)``; row ``r`` sums ``coef[r, :] * x[var_index[r, :]]``
        over every term.  Rows must be equalities or one-sided.
        """
        if name in self.row_blocks:
            raise ValueError(f"duplicate row block {name!r}")
        idx0 = np.asarray(terms[0][0])
        R = idx0.shape[0] if idx0.ndim else 1
        lo = np.broadcast_to(np.asarray(lo, float), (R,)).copy()
        hi = np.broadcast_to(np.asarray(hi, float), (R,)).copy()
        ranged = np.isfinite(lo) & np.isfinite(hi) & (lo != hi)
        if np.any(ranged):
            raise ValueError(f"row block {name!r}: ranged rows are not supported")
        start = self.num_rows
        for var_idx, coef in terms:
            var_idx = np.asarray(var_idx)
            if var_idx.ndim == 0:
                var_idx = np.broadcast_to(var_idx, (R,))
            if var_idx.shape[0] != R:
                raise ValueError(f"row block {name!r}: term has {var_idx.shape[0]} rows, expected {R}")
            coef = np.broadcast_to(np.asarray(coef, float), var_idx.shape).reshape(R, -1)
            var_idx = var_idx.reshape(R, -1)
            if np.any(var_idx >= self.num_vars) or np.any(var_idx < 0):
                raise ValueError(f"row block {name!r} references an undeclared variable")
            rows = np.broadcast_to(np.arange(start, start + R)[:, None], var_idx.shape)
            self._rows.append(rows.reshape(-1))
            self._cols.append(var_idx.reshape(-1))
            self._vals.append(coef.reshape(-1))
        self._lo.append(lo)
        self._hi.append(hi)
        self._row_names.extend(f"{name}_{r}" for r in range(R))
        self.row_blocks[name] = RowBlock(name, family, start, R)
        return np.arange(start, start + R)

    def build(self) -> MILPInstance:
        nv, nr = self.num_vars, self.num_rows
        cat = lambda parts, dt=float: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt)
        obj = cat(self._obj)
        if obj.size < nv:
            obj = np.concatenate([obj, np.zeros(nv - obj.size)])
        A = sp.coo_matrix((cat(self._vals), (cat(self._rows, int), cat(self._cols, int))),
                          shape=(nr, nv)).tocsr()
        A.sum_duplicates()
        A.eliminate_zeros()
        inst = MILPInstance(list(self._names), cat(self._lb), cat(self._ub), cat(self._int, bool),
                            obj, A, cat(self._lo), cat(self._hi), list(self._row_names),
                            dict(self.var_blocks), dict(self.row_blocks), self.obj_const,
                            dict(self.meta))
        inst.check()
        return inst


# --- LP format -------------------------------------------------------------

def _num(v: float) -> str:
    return repr(float(v))


def _expr(coefs, names, width: int = 200) -> list[str]:
    lines, cur = [], ""
    for k, (c, n) in enumerate(zip(coefs, names)):
        sign = "-" if c < 0 else "+"
        tok = f"{sign} {_num(abs(c))} {n}"
        if k == 0 and c >= 0:
            tok = f"{_num(c)} {n}"
        if len(cur) + len(tok) > width:
            lines.append(cur)
            cur = ""
        cur = f"{cur} {tok}" if cur else tok
    lines.append(cur)
    return lines


def write_lp(instance: MILPInstance, path: str | Path | None = None) -> str:
    """Serialise to CPLEX LP text; write to ``path`` when given."""
    inst = instance
    out = ["\\ minigrid MILP instance"]
    out.append(f"\\ obj_const {_num(inst.obj_const)}")
    for vb in inst.var_blocks.values():
        out.append(f"\\ varblock {vb.name} {vb.start} {','.join(map(str, vb.shape)) or '-'} "
                   f"{vb.family or '-'}")
    for rb in inst.row_blocks.values():
        out.append(f"\\ rowblock {rb.name} {rb.start} {rb.size} {rb.family}")
    out.append("Minimize")
    nz = np.flatnonzero(inst.obj)
    if nz.size:
        body = _expr(inst.obj[nz], [inst.var_names[i] for i in nz])
    else:
        body = [f"0 {inst.var_names[0]}"] if inst.num_vars else ["0"]
    out.append(" obj: " + body[0])
    out.extend("   " + b for b in body[1:])
    out.append("Subject To")
    A = inst.A.tocsr()
    for r, name in enumerate(inst.row_names):
        cols = A.indices[A.indptr[r]:A.indptr[r + 1]]
        vals = A.data[A.indptr[r]:A.indptr[r + 1]]
        lo, hi = inst.row_lo[r], inst.row_hi[r]
        if lo == hi:
            op, rhs = "=", lo
        elif np.isfinite(hi):
            op, rhs = "<=", hi
        else:
            op, rhs = ">=", lo
        if cols.size == 0:
            body = [f"0 {inst.var_names[0]}"]
        else:
            body = _expr(vals, [inst.var_names[c] for c in cols])
        body[-1] = f"{body[-1]} {op} {_num(rhs)}"
        out.append(f" {name}: " + body[0])
        out.extend("   " + b for b in body[1:])
    out.append("Bounds")
    for i, name in enumerate(inst.var_names):
        lb, ub = inst.lb[i], inst.ub[i]
        if inst.integer[i] and lb == 0 and ub == 1:
            continue
        if lb == -INF and ub == INF:
            out.append(f" {name} free")
        elif lb == ub:
            out.append(f" {name} = {_num(lb)}")
        else:
            lo_s = "-inf" if lb == -INF else _num(lb)
            hi_s = "+inf" if ub == INF else _num(ub)
            out.append(f" {lo_s} <= {name} <= {hi_s}")
    bins = [n for i, n in enumerate(inst.var_names)
            if inst.integer[i] and inst.lb[i] == 0 and inst.ub[i] == 1]
    gens = [n for i, n in enumerate(inst.var_names)
            if inst.integer[i] and not (inst.lb[i] == 0 and inst.ub[i] == 1)]
    if bins:
        out.append("Binaries")
        out.extend(" " + n for n in bins)
    if gens:
        out.append("Generals")
        out.extend(" " + n for n in gens)
    out.append("End")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


_SECTIONS = {
    "minimize": "obj", "minimise": "obj", "min": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "generals": "gen", "general": "gen", "gen": "gen",
    "end": "end",
}
_OPS = {"<=": "<=", "=<": "<=", "<": "<=", ">=": ">=", "=>": ">=", ">": ">=", "=": "="}


def _parse_terms(tokens: list[str]) -> list[tuple[float, str]]:
    terms, sign, coef = [], 1.0, None
    for tok in tokens:
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        terms.append((sign * (1.0 if coef is None else coef), tok))
        sign, coef = 1.0, None
    return terms


def read_lp(source: str | Path) -> MILPInstance:
    """Parse LP text (as produced by :func:`write_lp`) back into an instance."""
    text = source if isinstance(source, str) and "\n" in source else \
        Path(source).read_text(encoding="utf-8")
    obj_const = 0.0
    var_meta, row_meta = [], []
    section = None
    chunks: dict[str, list[str]] = {"obj": [], "st": [], "bounds": [], "bin": [], "gen": []}
    for raw in text.splitlines():
        if raw.startswith("\\"):
            parts = raw[1:].split()
            if parts[:1] == ["obj_const"]:
                obj_const = float(parts[1])
            elif parts[:1] == ["varblock"]:
                var_meta.append(parts[1:])
            elif parts[:1] == ["rowblock"]:
                row_meta.append(parts[1:])
            continue
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "end":
                break
            continue
        if section is None:
            raise ValueError(f"LP text outside any section: {line!r}")
        chunks[section].append(line)

    names: list[str] = []
    pos: dict[str, int] = {}

    def col(n: str) -> int:
        if n not in pos:
            pos[n] = len(names)
            names.append(n)
        return pos[n]

    # Objective
    obj_tokens = " ".join(chunks["obj"]).split()
    if obj_tokens and obj_tokens[0].endswith(":"):
        obj_tokens = obj_tokens[1:]
    obj_terms = [(c, col(n)) for c, n in _parse_terms(obj_tokens)]

    # Constraints: a row ends at "<op> <rhs>"
    row_names, rows, lo, hi = [], [], [], []
    tokens = " ".join(chunks["st"]).split()
    k, cur_name, cur = 0, None, []
    while k < len(tokens):
        tok = tokens[k]
        if tok.endswith(":") and cur_name is None and not cur:
            cur_name = tok[:-1]
        elif tok in _OPS:
            rhs = float(tokens[k + 1])
            k += 1
            op = _OPS[tok]
            row_names.append(cur_name if cur_name is not None else f"R{len(row_names)}")
            rows.append([(c, col(n)) for c, n in _parse_terms(cur)])
            lo.append(rhs if op in (">=", "=") else -INF)
            hi.append(rhs if op in ("<=", "=") else INF)
            cur_name, cur = None, []
        else:
            cur.append(tok)
        k += 1

    bounds: dict[str, list[float]] = {}
    for line in chunks["bounds"]:
        t = line.split()
        if len(t) == 2 and t[1].lower() == "free":
            bounds[t[0]] = [-INF, INF]
        elif len(t) == 5:
            bounds[t[2]] = [float(t[0]), float(t[4])]
        elif len(t) == 3 and t[1] == "=":
            bounds[t[0]] = [float(t[2])] * 2
        elif len(t) == 3 and t[1] in (">=", "<="):
            b = bounds.setdefault(t[0], [0.0, INF])
            b[0 if t[1] == ">=" else 1] = float(t[2])
        else:
            raise ValueError(f"unsupported bound line {line!r}")
        col(t[0] if len(t) != 5 else t[2])
    binaries = [n for line in chunks["bin"] for n in line.split()]
    generals = [n for line in chunks["gen"] for n in line.split()]
    for n in binaries + generals:
        col(n)

    nv = len(names)
    lb, ub = np.zeros(nv), np.full(nv, INF)
    integer = np.zeros(nv, dtype=bool)
    for n, (l, u) in bounds.items():
        lb[pos[n]], ub[pos[n]] = l, u
    for n in binaries:
        integer[pos[n]] = True
        lb[pos[n]], ub[pos[n]] = 0.0, 1.0
    for n in generals:
        integer[pos[n]] = True

    # Restore declaration order from the block comments, if present.
    order = np.arange(nv)
    var_blocks: dict[str, VarBlock] = {}
    if var_meta:
        declared = []
        for name, start, shape, fam in var_meta:
            shp = () if shape == "-" else tuple(int(s) for s in shape.split(","))
            vb = VarBlock(name, shp, int(start), None if fam == "-" else fam)
            var_blocks[name] = vb
            declared.extend(_block_names(name, shp))
        if sorted(declared) == sorted(names):
            order = np.array([pos[n] for n in declared])
    inv = np.empty(nv, dtype=int)
    inv[order] = np.arange(nv)

    obj = np.zeros(nv)
    for c, j in obj_terms:
        obj[inv[j]] += c
    r_idx, c_idx, vals = [], [], []
    for r, terms in enumerate(rows):
        for c, j in terms:
            r_idx.append(r)
            c_idx.append(inv[j])
            vals.append(c)
    A = sp.coo_matrix((vals, (r_idx, c_idx)), shape=(len(rows), nv)).tocsr()
    A.sum_duplicates()
    row_blocks = {name: RowBlock(name, fam, int(start), int(size))
                  for name, start, size, fam in row_meta}
    inst = MILPInstance([names[i] for i in order], lb[order], ub[order], integer[order], obj, A,
                        np.array(lo), np.array(hi), row_names, var_blocks, row_blocks, obj_const)
    inst.check()
    return inst
