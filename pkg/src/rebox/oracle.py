"""Independent oracles: exhaustive model enumeration, a concrete
interpreter with alias tracking, theorem checks over traces, and seeded
random generators for programs, constraint systems and 3-clause
formulas.

The enumeration oracle never touches the SAT path: it represents each
variable as a bitmask over all 2^n assignments and evaluates
constraints with big-integer bit algebra, so agreement tests compare
two genuinely different decision procedures.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import lru_cache

from .constraints import (
    Add3, ConstraintSystem, Eq0, Eq1, EqVar, Geq, OwnershipVar, generate,
)
from .ir import (
    Assign, BinOp, CallStmt, Calloc, FreeStmt, If, InArg, IndexSel, IntExpr,
    IntLit, LocalDecl, Malloc, NonNullTest, NullRv, NullTest, OutArg, Place,
    PlaceExpr, PlaceRv, Program, PtrType, Realloc, Return, While, is_pointer,
)
from .paths import AccessPath
from .sat import OwnershipScheme, X3SatFormula


class TooLarge(Exception):
    pass


class RuntimeFault(Exception):
    """The source program itself faulted: null dereference,
    use-after-free, double free, or an out-of-bounds index."""


class OracleError(Exception):
    pass


# ---------------------------------------------------------------------------
# Exhaustive model enumeration
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _var_mask(n: int, i: int) -> int:
    """Bit j is set iff assignment j gives variable i the value 1."""
    window = 1 << (i + 1)
    chunk = ((1 << (1 << i)) - 1) << (1 << i)
    repeats = (1 << n) // window
    repunit = ((1 << (window * repeats)) - 1) // ((1 << window) - 1)
    return chunk * repunit


class ModelSet:
    """The set of all satisfying assignments of a system, as one bitmask
    over 2^n candidate assignments."""

    def __init__(self, var_order: list, mask: int):
        self.var_order = var_order
        self.mask = mask
        self.n = len(var_order)

    @property
    def satisfiable(self) -> bool:
        return self.mask != 0

    def __len__(self) -> int:
        return self.mask.bit_count()

    def _index_of(self, assignment: dict) -> int:
        j = 0
        for i, v in enumerate(self.var_order):
            if assignment[v]:
                j |= 1 << i
        return j

    def __contains__(self, assignment: dict) -> bool:
        return (self.mask >> self._index_of(assignment)) & 1 == 1

    def __iter__(self):
        mask = self.mask
        while mask:
            low = mask & -mask
            j = low.bit_length() - 1
            yield {v: (j >> i) & 1 for i, v in enumerate(self.var_order)}
            mask ^= low

    def project_true(self, var) -> "int":
        """Mask of models where `var` is 1 (for bit-algebra checks)."""
        i = self.var_order.index(var)
        return self.mask & _var_mask(self.n, i)


def enumerate_models(system: ConstraintSystem, max_vars: int = 20) -> ModelSet:
    """Exhaustive 2^n sweep filtered by direct constraint evaluation."""
    n = len(system.vars)
    if n > max_vars:
        raise TooLarge(f"{n} variables exceeds the enumeration bound {max_vars}")
    order = list(system.vars)
    idx = {v: i for i, v in enumerate(order)}
    full = (1 << (1 << n)) - 1 if n else 1

    def m(v):
        return _var_mask(n, idx[v]) if n else 0

    mask = full
    for c in system.constraints:
        if isinstance(c, Add3):
            a, b, s = m(c.a), m(c.b), m(c.c)
            ok = ((full ^ a) & (full ^ b) & (full ^ s)) | (a & (full ^ b) & s) \
                | ((full ^ a) & b & s)
        elif isinstance(c, Eq1):
            ok = m(c.a)
        elif isinstance(c, Eq0):
            ok = full ^ m(c.a)
        elif isinstance(c, EqVar):
            ok = full ^ (m(c.a) ^ m(c.b))
        elif isinstance(c, Geq):
            ok = m(c.a) | (full ^ m(c.b))
        else:
            raise TypeError(f"unknown constraint {c!r}")
        mask &= ok
        if not mask:
            break
    return ModelSet(order, mask)


def transfer_violation_mask(system: ConstraintSystem, models: ModelSet) -> int:
    """Models where some transfer site moves the base but not all
    matched extension pairs. Zero means uniform transfer in every model."""
    n = models.n
    idx = {v: i for i, v in enumerate(models.var_order)}
    full = (1 << (1 << n)) - 1 if n else 1

    def m(v):
        return _var_mask(n, idx[v])

    bad = 0
    for site in system.transfer_sites:
        if site.kind != "assign" or not site.pairs:
            continue
        base = site.pairs[0]
        moved = m(base.lhs_new) & m(base.rhs_old) & (full ^ m(base.rhs_new))
        for pair in site.pairs[1:]:
            uniform = (full ^ (m(pair.lhs_new) ^ m(pair.rhs_old))) \
                & (full ^ m(pair.rhs_new))
            bad |= models.mask & moved & (full ^ uniform)
    return bad


def x3sat_brute_force(formula: X3SatFormula) -> bool:
    """Exactly-one evaluation by exhaustive sweep (bitmask algebra)."""
    n = formula.nvars
    full = (1 << (1 << n)) - 1 if n else 1

    def lit_mask(lit: int) -> int:
        m = _var_mask(n, abs(lit) - 1)
        return m if lit > 0 else full ^ m

    mask = full
    for (l1, l2, l3) in formula.clauses:
        m1, m2, m3 = lit_mask(l1), lit_mask(l2), lit_mask(l3)
        exactly_one = (m1 & (full ^ m2) & (full ^ m3)) \
            | ((full ^ m1) & m2 & (full ^ m3)) \
            | ((full ^ m1) & (full ^ m2) & m3)
        mask &= exactly_one
        if not mask:
            return False
    return mask != 0


# ---------------------------------------------------------------------------
# Concrete interpreter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ref:
    alloc: int


@dataclass
class HeapObj:
    struct: str | None  # struct name, or None for cell arrays
    fields: dict = field(default_factory=dict)
    cells: list = field(default_factory=list)
    live: bool = True


@dataclass
class TraceStep:
    index: int
    function: str
    uid: int
    line: int
    kind: str
    live: list          # live allocation ids, sorted
    points_to: dict     # path text -> allocation id (only resolvable paths)
    owners: dict        # path text -> scheme value at this point


@dataclass
class HeapTrace:
    steps: list
    alloc_count: int
    final_live: list  # allocation ids never freed (leaks)

    def to_json_lines(self) -> str:
        import json
        rows = []
        for s in self.steps:
            rows.append(json.dumps({
                "step": s.index, "function": s.function, "uid": s.uid,
                "line": s.line, "kind": s.kind, "live": s.live,
                "points_to": s.points_to, "owners": s.owners,
            }))
        return "\n".join(rows) + ("\n" if rows else "")


def naive_scheme(system: ConstraintSystem, value: int = 1) -> OwnershipScheme:
    """A deliberately unchecked total assignment (for what-if runs)."""
    assignment = {v: value for v in system.vars}
    return OwnershipScheme(assignment=assignment, var_order=list(system.vars),
                           system=system)


class _Interp:
    def __init__(self, program: Program, system: ConstraintSystem,
                 scheme: OwnershipScheme, max_steps: int = 10000):
        self.program = program
        self.system = system
        self.scheme = scheme
        self.heap: dict = {}
        self.next_alloc = 0
        self.steps: list = []
        self.max_steps = max_steps

    def fault(self, st, why: str):
        raise RuntimeFault(f"line {st.line}: {why}")

    def alloc(self, struct_name, cells_len=None) -> Ref:
        aid = self.next_alloc
        self.next_alloc += 1
        if struct_name is not None:
            sdef = self.program.struct(struct_name)
            fields = {n: (0 if not is_pointer(t) else None) for n, t in sdef.fields}
            self.heap[aid] = HeapObj(struct=struct_name, fields=fields)
        else:
            self.heap[aid] = HeapObj(struct=None, cells=[0] * max(1, cells_len or 1))
        return Ref(aid)

    def obj(self, ref: Ref, st) -> HeapObj:
        o = self.heap.get(ref.alloc)
        if o is None or not o.live:
            self.fault(st, "use after free")
        return o

    # -- reading and writing places -----------------------------------------

    def read_place(self, place: Place, frame: dict, st):
        val = frame[place.base]
        for sel in place.selectors:
            if val is None:
                self.fault(st, f"null dereference in '{place}'")
            if not isinstance(val, Ref):
                self.fault(st, f"dereference of non-pointer in '{place}'")
            o = self.obj(val, st)
            if isinstance(sel, IndexSel):
                i = self.eval_expr(sel.index, frame, st)
                if not 0 <= i < len(o.cells):
                    self.fault(st, f"index {i} out of bounds in '{place}'")
                val = o.cells[i]
            elif sel.__class__.__name__ == "FieldSel":
                val = o.fields[sel.name]
            else:  # DerefSel
                val = o.cells[0]
        return val

    def write_place(self, place: Place, value, frame: dict, st):
        if not place.selectors:
            frame[place.base] = value
            return
        val = frame[place.base]
        for sel in place.selectors[:-1]:
            if val is None:
                self.fault(st, f"null dereference in '{place}'")
            o = self.obj(val, st)
            if isinstance(sel, IndexSel):
                i = self.eval_expr(sel.index, frame, st)
                val = o.cells[i]
            elif sel.__class__.__name__ == "FieldSel":
                val = o.fields[sel.name]
            else:
                val = o.cells[0]
        if val is None:
            self.fault(st, f"null dereference in '{place}'")
        o = self.obj(val, st)
        last = place.selectors[-1]
        if isinstance(last, IndexSel):
            i = self.eval_expr(last.index, frame, st)
            if not 0 <= i < len(o.cells):
                self.fault(st, f"index {i} out of bounds in '{place}'")
            o.cells[i] = value
        elif last.__class__.__name__ == "FieldSel":
            o.fields[last.name] = value
        else:
            o.cells[0] = value

    def eval_expr(self, e, frame, st) -> int:
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, PlaceExpr):
            v = self.read_place(e.place, frame, st)
            if isinstance(v, Ref) or v is None:
                return 0 if v is None else 1
            return v
        if isinstance(e, BinOp):
            a, b = self.eval_expr(e.left, frame, st), self.eval_expr(e.right, frame, st)
            ops = {"+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
                   "/": lambda: a // b if b else 0, "%": lambda: a % b if b else 0,
                   "==": lambda: int(a == b), "!=": lambda: int(a != b),
                   "<": lambda: int(a < b), "<=": lambda: int(a <= b),
                   ">": lambda: int(a > b), ">=": lambda: int(a >= b)}
            return ops[e.op]()
        raise OracleError(f"cannot evaluate {e!r}")

    def eval_rvalue(self, rv, frame, st):
        if isinstance(rv, NullRv):
            return None
        if isinstance(rv, IntExpr):
            return self.eval_expr(rv.expr, frame, st)
        if isinstance(rv, PlaceRv):
            return self.read_place(rv.place, frame, st)
        if isinstance(rv, (Malloc, Calloc)):
            elem = rv.elem
            count = None
            if isinstance(rv, Calloc) or rv.count is not None:
                count = self.eval_expr(rv.count, frame, st)
            if elem.__class__.__name__ == "StructType":
                return self.alloc(elem.name)
            return self.alloc(None, cells_len=count or 1)
        if isinstance(rv, Realloc):
            old = self.read_place(rv.src, frame, st)
            count = self.eval_expr(rv.count, frame, st) if rv.count is not None else 1
            if old is None:
                return self.eval_rvalue(Malloc(rv.elem, rv.count), frame, st)
            o = self.obj(old, st)
            new = self.alloc(None, cells_len=count)
            keep = min(len(o.cells), count)
            self.heap[new.alloc].cells[:keep] = o.cells[:keep]
            o.live = False
            return new
        raise OracleError(f"cannot evaluate {rv!r}")

    # -- execution -----------------------------------------------------------

    def record(self, st, fn_name: str, frame: dict):
        points_to, owners = {}, {}
        _, post = self.system.point_states.get((fn_name, st.uid), (None, None))
        for (f, var), fam in self.system.families.items():
            if f != fn_name or var not in frame:
                continue
            for path in fam:
                val = self._resolve_path(path, frame)
                if isinstance(val, Ref) and self.heap.get(val.alloc) is not None \
                        and self.heap[val.alloc].live:
                    points_to[path.text()] = val.alloc
                if post is not None and path in post:
                    owners[path.text()] = self.scheme.assignment.get(post[path])
        live = sorted(a for a, o in self.heap.items() if o.live)
        self.steps.append(TraceStep(
            index=len(self.steps), function=fn_name, uid=st.uid, line=st.line,
            kind=type(st).__name__, live=live, points_to=points_to, owners=owners))
        if len(self.steps) > self.max_steps:
            raise OracleError("step budget exhausted (non-terminating program?)")

    def _resolve_path(self, path: AccessPath, frame):
        val = frame.get(path.base)
        for sel in path.selectors:
            if not isinstance(val, Ref):
                return None
            o = self.heap.get(val.alloc)
            if o is None or not o.live:
                return None
            val = o.fields[sel] if sel is not None else o.cells[0]
        return val

    def run_function(self, fn, args: list):
        frame = {}
        for (pname, pty), val in zip(fn.params, args):
            frame[pname] = val
        from .ir import local_decls
        for decl in local_decls(fn.body):
            frame[decl.name] = None if is_pointer(decl.ty) else 0
        result = self.exec_body(fn.body, fn, frame)
        return result if result is not None else ("fall", None)

    def exec_body(self, body, fn, frame):
        """Returns ("ret", value) when the body returned, else None."""
        for st in body:
            result = self.exec_stmt(st, fn, frame)
            if result is not None:
                return result
        return None

    def exec_stmt(self, st, fn, frame):
        if isinstance(st, LocalDecl):
            if st.init is not None:
                frame[st.name] = self.eval_rvalue(st.init, frame, st)
            self.record(st, fn.name, frame)
            return None
        if isinstance(st, Assign):
            value = self.eval_rvalue(st.rhs, frame, st)
            self.write_place(st.lhs, value, frame, st)
            self.record(st, fn.name, frame)
            return None
        if isinstance(st, FreeStmt):
            val = self.read_place(st.place, frame, st)
            if val is not None:
                o = self.heap.get(val.alloc)
                if o is None or not o.live:
                    self.fault(st, f"double free of '{st.place}'")
                o.live = False
            self.record(st, fn.name, frame)
            return None
        if isinstance(st, If):
            taken = st.then if self.eval_cond(st.cond, frame, st) else st.els
            self.record(st, fn.name, frame)
            return self.exec_body(taken, fn, frame) if taken else None
        if isinstance(st, While):
            self.record(st, fn.name, frame)
            while self.eval_cond(st.cond, frame, st):
                result = self.exec_body(st.body, fn, frame)
                if result is not None:
                    return result
                self.record(st, fn.name, frame)
            return None
        if isinstance(st, Return):
            value = None
            if st.value is not None:
                value = self.eval_rvalue(st.value, frame, st)
            self.record(st, fn.name, frame)
            return ("ret", value)
        if isinstance(st, CallStmt):
            callee = self.program.function(st.callee)
            if callee is None:
                self.exec_intrinsic(st, frame)
                self.record(st, fn.name, frame)
                return None
            args = []
            for arg in st.args:
                if isinstance(arg, OutArg):
                    args.append(self.read_place(arg.place, frame, st))
                else:
                    args.append(self.eval_rvalue(arg.value, frame, st))
            kind, value = self.run_function(callee, args)
            if st.result is not None:
                frame[st.result] = value if kind == "ret" else None
            self.record(st, fn.name, frame)
            return None
        raise OracleError(f"cannot execute {st!r}")

    def eval_cond(self, cond, frame, st) -> bool:
        if isinstance(cond, NonNullTest):
            return self.read_place(cond.place, frame, st) is not None
        if isinstance(cond, NullTest):
            return self.read_place(cond.place, frame, st) is None
        return self.eval_expr(cond.expr, frame, st) != 0

    def exec_intrinsic(self, st: CallStmt, frame):
        if st.callee == "memset":
            place = st.args[0].value.place if isinstance(st.args[0], InArg) else st.args[0].place
            ref = self.read_place(place, frame, st)
            if ref is None:
                self.fault(st, "memset of null")
            o = self.obj(ref, st)
            c = self.eval_expr(st.args[1].value.expr, frame, st) \
                if isinstance(st.args[1].value, IntExpr) else 0
            o.cells = [c] * len(o.cells)
        elif st.callee == "strcmp":
            vals = []
            for arg in st.args[:2]:
                ref = self.read_place(arg.value.place, frame, st)
                if ref is None:
                    self.fault(st, "strcmp of null")
                vals.append(tuple(self.obj(ref, st).cells))
            if st.result is not None:
                frame[st.result] = int(vals[0] != vals[1])
        else:
            raise OracleError(f"cannot execute extern function '{st.callee}'")


def run_concrete(program: Program, scheme: OwnershipScheme,
                 system: ConstraintSystem | None = None,
                 entry: str = "main", max_steps: int = 10000) -> HeapTrace:
    """Interpret a deterministic program with a concrete heap, annotating
    each step with the scheme's values for the executing frame's paths.

    Paths are enumerated per executing frame only: a borrowed object is
    observed through the callee's paths while the callee runs, and
    through the caller's paths before and after the call.
    """
    if system is None:
        system = scheme.system
    if system is None:
        raise OracleError("run_concrete needs the constraint system of the scheme")
    fn = program.function(entry)
    if fn is None:
        raise OracleError(f"no entry function '{entry}'")
    if fn.params:
        raise OracleError(f"entry function '{entry}' must take no parameters")
    interp = _Interp(program, system, scheme, max_steps=max_steps)
    interp.run_function(fn, [])
    final_live = sorted(a for a, o in interp.heap.items() if o.live)
    return HeapTrace(steps=interp.steps, alloc_count=interp.next_alloc,
                     final_live=final_live)


# ---------------------------------------------------------------------------
# Theorem checks over traces
# ---------------------------------------------------------------------------

@dataclass
class Violation:
    step: int
    alloc: int | None
    detail: str


@dataclass
class TheoremReport:
    violations: list
    steps_checked: int
    transfers_checked: int

    @property
    def ok(self) -> bool:
        return not self.violations


def check_theorems(trace: HeapTrace, system: ConstraintSystem,
                   scheme: OwnershipScheme) -> TheoremReport:
    """Check, at every step, that each live allocation has at most one
    scheme-owning path among the paths that reference it, and that every
    base transfer in the scheme also transfers uniformly along matched
    extension pairs."""
    violations = []
    for step in trace.steps:
        owners_per_alloc: dict = {}
        for path_text, alloc in step.points_to.items():
            if step.owners.get(path_text) == 1:
                owners_per_alloc.setdefault(alloc, []).append(path_text)
        for alloc, paths in sorted(owners_per_alloc.items()):
            if len(paths) > 1:
                violations.append(Violation(
                    step=step.index, alloc=alloc,
                    detail=f"allocation {alloc} owned by {len(paths)} paths: "
                           + ", ".join(sorted(paths))))

    transfers = 0
    seen_uids = {s.uid for s in trace.steps}
    for site in system.transfer_sites:
        if site.kind != "assign" or site.uid not in seen_uids or not site.pairs:
            continue
        transfers += 1
        base = site.pairs[0]
        val = scheme.assignment
        if val[base.lhs_new] == 1 and val[base.rhs_old] == 1 and val[base.rhs_new] == 0:
            for pair in site.pairs[1:]:
                if val[pair.lhs_new] != val[pair.rhs_old] or val[pair.rhs_new] != 0:
                    violations.append(Violation(
                        step=-1, alloc=None,
                        detail=f"non-uniform transfer at line {site.line}: "
                               f"{pair.lhs_new} vs {pair.rhs_old}"))
    return TheoremReport(violations=violations, steps_checked=len(trace.steps),
                         transfers_checked=transfers)


# ---------------------------------------------------------------------------
# Random generators
# ---------------------------------------------------------------------------

def random_system(rng: random.Random, max_vars: int = 20) -> ConstraintSystem:
    """A random small constraint system (not necessarily satisfiable)."""
    n = rng.randint(3, min(14, max_vars))
    system = ConstraintSystem(k=1, source_name="random")
    vs = []
    for i in range(n):
        v = OwnershipVar(path=AccessPath(f"v{i}"), version=0, point=-1,
                         function="random")
        system.vars.append(v)
        vs.append(v)
    for _ in range(rng.randint(1, n + 4)):
        kind = rng.choice(["add3", "add3", "eq0", "eq1", "geq", "eqvar"])
        if kind == "add3":
            a, b, c = rng.choice(vs), rng.choice(vs), rng.choice(vs)
            system.constraints.append(Add3(a, b, c, origin="random"))
        elif kind == "eq0":
            system.constraints.append(Eq0(rng.choice(vs), origin="random"))
        elif kind == "eq1":
            system.constraints.append(Eq1(rng.choice(vs), origin="random"))
        elif kind == "geq":
            system.constraints.append(Geq(rng.choice(vs), rng.choice(vs), origin="random"))
        else:
            system.constraints.append(EqVar(rng.choice(vs), rng.choice(vs), origin="random"))
    return system


def random_x3sat(rng: random.Random, max_vars: int = 12) -> X3SatFormula:
    n = rng.randint(3, max_vars)
    clauses = []
    for _ in range(rng.randint(1, 8)):
        vars_ = rng.sample(range(1, n + 1), 3)
        clauses.append(tuple(v if rng.random() < 0.5 else -v for v in vars_))
    return X3SatFormula(nvars=n, clauses=clauses)


class _ProgramBuilder:
    """Guided random MiniC source generator.

    Tracks a shadow heap so that emitted statements are usually
    feasible (no leaks, no double frees) and runtime-clean; with
    `buggy=True` the cleanup is skipped or corrupted to produce
    infeasible inputs for verdict-agreement tests.
    """

    def __init__(self, rng: random.Random, buggy: bool = False):
        self.rng = rng
        self.buggy = buggy
        self.lines: list = []
        # var -> "null" | "owns" | "stale"
        self.state: dict = {}
        # var -> {field: "null" | "owns"} for vars currently owning a struct
        self.fields: dict = {}
        self.nvars = 0

    def build(self) -> str:
        rng = self.rng
        n_ptrs = rng.randint(2, 4)
        names = [f"p{i}" for i in range(n_ptrs)]
        out = ["struct Node {", "    int v;", "    struct Node * f;", "};", ""]
        out.append("void main() {")
        for name in names:
            out.append(f"    struct Node * {name};")
            self.state[name] = "null"
            self.fields[name] = {}
        budget = rng.randint(4, 12)
        for _ in range(budget):
            stmt = self.random_stmt(names)
            if stmt:
                out.extend(stmt)
        if not self.buggy:
            out.extend(self.cleanup(names))
        elif rng.random() < 0.5 and any(self.state[n] == "owns" for n in names):
            # deliberate double free
            victim = next(n for n in names if self.state[n] == "owns")
            out.append(f"    free({victim});")
            out.append(f"    free({victim});")
        out.append("}")
        return "\n".join(out) + "\n"

    def random_stmt(self, names):
        rng = self.rng
        owners = [n for n in names if self.state[n] == "owns"]
        empty = [n for n in names if self.state[n] != "owns"]
        choices = []
        if empty:
            choices.append("alloc")
        if owners and empty:
            choices.append("move")
        if owners:
            choices.extend(["free_guarded", "scalar", "field_store"])
        if len(owners) >= 2:
            choices.append("field_move")
        if not choices:
            return None
        kind = rng.choice(choices)
        if kind == "alloc":
            v = rng.choice(empty)
            self.state[v] = "owns"
            self.fields[v] = {}
            return [f"    {v} = malloc(sizeof(struct Node));"]
        if kind == "move":
            src = rng.choice(owners)
            dst = rng.choice(empty)
            self.state[dst] = "owns"
            self.fields[dst] = self.fields.pop(src, {})
            self.state[src] = "stale"
            return [f"    {dst} = {src};"]
        if kind == "free_guarded":
            v = rng.choice(owners)
            inner = self.fields.get(v, {})
            lines = []
            if inner.get("f") == "owns":
                lines.append(f"    free((*{v}).f);")
                lines.append(f"    (*{v}).f = NULL;")
                inner["f"] = "null"
            if rng.random() < 0.5:
                lines.append(f"    if ({v} != NULL) {{")
                lines.append(f"        free({v});")
                lines.append("    }")
            else:
                lines.append(f"    free({v});")
                lines.append(f"    {v} = NULL;")
            self.state[v] = "null" if lines[-1].strip().startswith(v) else "stale"
            self.fields[v] = {}
            return lines
        if kind == "scalar":
            v = rng.choice(owners)
            return [f"    (*{v}).v = {rng.randint(0, 9)};"]
        if kind == "field_store":
            v = rng.choice(owners)
            if self.fields.get(v, {}).get("f") == "owns":
                return None
            self.fields.setdefault(v, {})["f"] = "null"
            return [f"    (*{v}).f = NULL;"]
        if kind == "field_move":
            holder, src = self.rng.sample(owners, 2)
            if self.fields.get(holder, {}).get("f") == "owns":
                return None
            if self.fields.get(src, {}).get("f") == "owns":
                return None
            self.fields.setdefault(holder, {})["f"] = "owns"
            self.state[src] = "stale"
            return [f"    (*{holder}).f = {src};"]
        return None

    def cleanup(self, names):
        lines = []
        for v in names:
            if self.state[v] == "owns":
                if self.fields.get(v, {}).get("f") == "owns":
                    lines.append(f"    free((*{v}).f);")
                    lines.append(f"    (*{v}).f = NULL;")
                lines.append(f"    free({v});")
                self.state[v] = "stale"
        return lines


def random_program_source(seed: int, buggy: bool = False) -> str:
    return _ProgramBuilder(random.Random(seed), buggy=buggy).build()
