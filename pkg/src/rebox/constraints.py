"""Ownership constraint generation.

Every access path carries a 0/1 ownership unknown per SSA-style
version.  Walking each normalized function body emits:

* transfer equations `lhs' + rhs' = rhs` at pointer assignments, with a
  leak guard `lhs = 0` on the overwritten value;
* `= 1` / `= 0` at allocation and free sites;
* prefix inequalities (ownership never increases along a path) for
  every freshly created version family;
* phi equalities at branch joins and entry/exit equalities around loop
  bodies;
* borrow (entry/exit) equalities for output parameters and optional
  transfer equations for normal arguments at call sites.

The result is a ConstraintSystem: variables, constraints, per-function
signatures, and enough per-statement metadata (states and transfer
sites) for the concrete-execution oracle and for diagnostics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .cfg import build_cfg
from .ir import (
    Assign, CallStmt, Calloc, FreeStmt, FunctionDef, If, InArg, IntExpr,
    LocalDecl, Malloc, NonNullTest, NullRv, NullTest, OutArg, Place, PlaceRv,
    Program, Realloc, Return, StructType, PtrType, TypeMismatch, While,
    function_env, is_pointer, local_decls, INTRINSICS,
)
from .paths import AccessPath, PathBound, compute_k, enumerate_ap, is_prefix, path_of_place


# ---------------------------------------------------------------------------
# Variables and constraints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OwnershipVar:
    path: AccessPath
    version: int
    point: int  # program point (statement uid) where this version was created
    function: str

    def __str__(self) -> str:
        return f"{self.function}:{self.path.text()}#{self.version}"


@dataclass(frozen=True)
class Add3:
    """O_a + O_b = O_c (transfer shape: lhs' + rhs' = rhs)."""
    a: OwnershipVar
    b: OwnershipVar
    c: OwnershipVar
    origin: str = field(default="", compare=False)


@dataclass(frozen=True)
class Eq1:
    a: OwnershipVar
    origin: str = field(default="", compare=False)


@dataclass(frozen=True)
class Eq0:
    a: OwnershipVar
    origin: str = field(default="", compare=False)


@dataclass(frozen=True)
class EqVar:
    a: OwnershipVar
    b: OwnershipVar
    origin: str = field(default="", compare=False)


@dataclass(frozen=True)
class Geq:
    """O_a >= O_b (a is a prefix of b)."""
    a: OwnershipVar
    b: OwnershipVar
    origin: str = field(default="", compare=False)


Constraint = (Add3, Eq1, Eq0, EqVar, Geq)


def eval_constraint(c, value) -> bool:
    if isinstance(c, Add3):
        return value(c.a) + value(c.b) == value(c.c)
    if isinstance(c, Eq1):
        return value(c.a) == 1
    if isinstance(c, Eq0):
        return value(c.a) == 0
    if isinstance(c, EqVar):
        return value(c.a) == value(c.b)
    if isinstance(c, Geq):
        return value(c.a) >= value(c.b)
    raise TypeError(f"not a constraint: {c!r}")


@dataclass
class FunctionSignature:
    function: str
    output_entry: dict  # param -> {AccessPath: OwnershipVar}
    output_exit: dict   # param -> {AccessPath: OwnershipVar}
    normal: dict        # param -> {AccessPath: OwnershipVar}
    ret: dict | None    # {AccessPath: OwnershipVar} rooted at $return


@dataclass
class TransferPair:
    lhs_new: OwnershipVar
    rhs_new: OwnershipVar
    rhs_old: OwnershipVar


@dataclass
class TransferSite:
    """One possible-transfer site; pairs[0] is the base pair."""
    function: str
    uid: int
    line: int
    kind: str  # assign | call-arg | return
    rhs_base: str
    lhs_desc: str
    pairs: list
    rhs_is_base: bool = False  # the moved place is the bare variable


@dataclass
class ConstraintSystem:
    k: int
    source_name: str = "<input>"
    vars: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    signatures: dict = field(default_factory=dict)
    transfer_sites: list = field(default_factory=list)
    # (function, uid) -> (pre_state, post_state); uid -1 is function entry
    point_states: dict = field(default_factory=dict)
    decl_of: dict = field(default_factory=dict)  # OwnershipVar -> decl key
    families: dict = field(default_factory=dict)  # (function, var) -> [AccessPath]
    warnings: list = field(default_factory=list)

    def var_index(self) -> dict:
        return {v: i for i, v in enumerate(self.vars)}

    def evaluate(self, assignment: dict) -> bool:
        return all(eval_constraint(c, assignment.__getitem__) for c in self.constraints)

    def violated(self, assignment: dict) -> list:
        return [c for c in self.constraints
                if not eval_constraint(c, assignment.__getitem__)]

    def unit_constraints(self) -> list:
        return [c for c in self.constraints if isinstance(c, (Eq0, Eq1))]

    def to_json(self) -> str:
        idx = self.var_index()
        vars_out = [{"function": v.function, "path": v.path.text(), "version": v.version}
                    for v in self.vars]
        cons_out = []
        for c in self.constraints:
            if isinstance(c, Add3):
                row = {"kind": "add3", "a": idx[c.a], "b": idx[c.b], "c": idx[c.c]}
            elif isinstance(c, Eq1):
                row = {"kind": "eq1", "a": idx[c.a]}
            elif isinstance(c, Eq0):
                row = {"kind": "eq0", "a": idx[c.a]}
            elif isinstance(c, EqVar):
                row = {"kind": "eqvar", "a": idx[c.a], "b": idx[c.b]}
            else:
                row = {"kind": "geq", "a": idx[c.a], "b": idx[c.b]}
            if c.origin:
                row["origin"] = c.origin
            cons_out.append(row)
        return json.dumps({"k": self.k, "vars": vars_out, "constraints": cons_out},
                          indent=2)


RETURN_BASE = "$return"


# ---------------------------------------------------------------------------
# Per-function generation
# ---------------------------------------------------------------------------

class _FnGen:
    def __init__(self, program: Program, fn: FunctionDef, system: ConstraintSystem):
        self.program = program
        self.fn = fn
        self.sys = system
        self.env = function_env(fn)
        self.k = system.k
        self.versions: dict = {}  # AccessPath -> next version
        self._family_cache: dict = {}
        self._decl_cache: dict = {}

    # -- families -----------------------------------------------------------

    def family(self, var: str) -> list:
        if var in self._family_cache:
            return self._family_cache[var]
        if var == RETURN_BASE:
            ty = self.fn.return_type
        else:
            ty = self.env[var]
        fam = enumerate_ap(var, 1, self.k, ty, self.program)
        self._family_cache[var] = fam
        self.sys.families[(self.fn.name, var)] = fam
        self._cache_decls(var, ty, fam)
        return fam

    def _cache_decls(self, var, ty, fam) -> None:
        # map each family path to the declaration its last step names
        types = {AccessPath(var): ty}
        for path in fam:
            if not path.selectors:
                if var == RETURN_BASE:
                    self._decl_cache[path] = ("ret", self.fn.name)
                else:
                    self._decl_cache[path] = ("var", self.fn.name, var)
                continue
            prefix = AccessPath(var, path.selectors[:-1])
            pty = types[prefix]
            sel = path.selectors[-1]
            if sel is None:
                types[path] = pty.pointee
                self._decl_cache[path] = self._decl_cache[prefix]
            else:
                sname = pty.pointee.name
                sdef = self.program.struct(sname)
                types[path] = sdef.field_type(sel)
                self._decl_cache[path] = ("field", sname, sel)

    # -- variable versions ----------------------------------------------------

    def _make_var(self, path: AccessPath, point: int) -> OwnershipVar:
        ver = self.versions.get(path, 0)
        self.versions[path] = ver + 1
        v = OwnershipVar(path=path, version=ver, point=point, function=self.fn.name)
        self.sys.vars.append(v)
        self.sys.decl_of[v] = self._decl_cache[path]
        return v

    def new_generation(self, var: str, point: int, origin: str) -> dict:
        """Fresh versions for every path based at `var`, with the prefix
        inequalities that keep ownership non-increasing along paths."""
        fam = self.family(var)
        gen = {p: self._make_var(p, point) for p in fam}
        for i, p in enumerate(fam):
            for q in fam[i + 1:]:
                if is_prefix(p, q):
                    self.emit(Geq(gen[p], gen[q], origin=origin))
        return gen

    def emit(self, c) -> None:
        self.sys.constraints.append(c)

    def origin(self, st, what: str) -> str:
        return f"{self.sys.source_name}:{st.line} {self.fn.name}: {what}"

    # -- statement walk -------------------------------------------------------

    def run(self) -> None:
        state: dict = {}
        sig = self.sys.signatures[self.fn.name]
        for pname, pty in self.fn.output_params:
            if is_pointer(pty):
                state.update(sig.output_entry[pname])
        for pname, pty in self.fn.normal_params:
            if is_pointer(pty):
                state.update(sig.normal[pname])
        origin = f"{self.sys.source_name}:{self.fn.line} {self.fn.name}: uninitialized local"
        for decl in local_decls(self.fn.body):
            if not is_pointer(decl.ty):
                continue
            gen = self.new_generation(decl.name, -1, origin)
            for p, v in gen.items():
                self.emit(Eq0(v, origin=origin))
            state.update(gen)
        self.sys.point_states[(self.fn.name, -1)] = (dict(state), dict(state))

        final = self.walk_body(self.fn.body, state)
        if final is not None:
            self.exit_constraints(final, self.fn.body[-1] if self.fn.body else self.fn)

    def walk_body(self, body, state):
        for st in body:
            if state is None:
                return None
            pre = dict(state)
            state = self.step(st, state)
            self.sys.point_states[(self.fn.name, st.uid)] = (
                pre, dict(state) if state is not None else pre)
        return state

    def step(self, st, state):
        if isinstance(st, LocalDecl):
            if st.init is not None:
                return self.gen_assign_stmt(Place(st.name), st.init, st, state)
            return state
        if isinstance(st, Assign):
            return self.gen_assign_stmt(st.lhs, st.rhs, st, state)
        if isinstance(st, FreeStmt):
            return self.gen_free(st, state)
        if isinstance(st, If):
            return self.gen_if(st, state)
        if isinstance(st, While):
            return self.gen_loop(st, state)
        if isinstance(st, CallStmt):
            return self.gen_fn_call(st, state)
        if isinstance(st, Return):
            self.gen_return(st, state)
            return None
        raise TypeError(f"unknown statement {st!r}")

    # -- assignments ----------------------------------------------------------

    def gen_assign_stmt(self, lhs: Place, rhs, st, state):
        lty = self._place_type(lhs)
        if isinstance(rhs, IntExpr) or not is_pointer(lty) or lhs.has_index:
            if isinstance(rhs, PlaceRv) and is_pointer(lty) and lhs.has_index \
                    and not rhs.place.has_index:
                # a pointer stored into an array element: its ownership is
                # no longer tracked
                state = self._unconstrained_refresh(rhs.place.base, st, state)
            return state
        if isinstance(rhs, NullRv):
            return self.gen_null(lhs, st, state)
        if isinstance(rhs, (Malloc, Calloc)):
            return self.gen_alloc(lhs, st, state)
        if isinstance(rhs, Realloc):
            return self.gen_realloc(lhs, rhs.src, st, state)
        assert isinstance(rhs, PlaceRv)
        if rhs.place.has_index:
            # pointer loaded from an array element: unknown ownership
            return self._unconstrained_refresh(lhs.base, st, state)
        return self.gen_assign(lhs, rhs.place, st, state, head_only=rhs.cast is not None)

    def _place_type(self, place: Place):
        from .ir import place_type
        return place_type(place, self.env, self.program)

    def _suffix_pairs(self, lp: AccessPath, rp: AccessPath, head_only: bool):
        """Matched extension pairs (lhs path, rhs path), base pair first.

        A pair exists for each selector suffix sigma with both lp.sigma
        and rp.sigma inside the k bound; deeper counterparts are simply
        not representable and generate nothing.
        """
        if head_only:
            return [(lp, rp)]
        lfam = self.family(lp.base)
        rset = set(self.family(rp.base))
        pairs = []
        for p in lfam:
            if is_prefix(lp, p):
                sigma = p.selectors[len(lp.selectors):]
                q = AccessPath(rp.base, rp.selectors + sigma)
                if q in rset:
                    pairs.append((p, q))
        return pairs

    def gen_assign(self, lhs: Place, rhs: Place, st, state, head_only=False):
        """Possible ownership transfer for `lhs = rhs` over matched paths."""
        lp, rp = path_of_place(lhs), path_of_place(rhs)
        if self._place_type(lhs) != self._place_type(rhs) and not head_only:
            raise TypeMismatch(f"pointer depth mismatch in '{lhs} = {rhs}'",
                               st.line, st.col)
        origin = self.origin(st, f"{lhs} = {rhs}")
        same = lp.base == rp.base
        old = dict(state)
        rgen = self.new_generation(rp.base, st.uid, origin)
        lgen = self.new_generation(lp.base, st.uid, origin)
        pre_l = rgen if same else old

        for path in self.family(lp.base):
            if not is_prefix(lp, path):
                self.emit(EqVar(lgen[path], pre_l[path], origin=origin))
        for path in self.family(rp.base):
            if not is_prefix(rp, path):
                self.emit(EqVar(rgen[path], old[path], origin=origin))

        pairs = self._suffix_pairs(lp, rp, head_only)
        site = TransferSite(function=self.fn.name, uid=st.uid, line=st.line,
                            kind="assign", rhs_base=rp.base, lhs_desc=str(lhs),
                            pairs=[], rhs_is_base=not rp.selectors)
        for p, q in pairs:
            self.emit(Eq0(old[p], origin=self.origin(
                st, f"'{p}' must not own memory when overwritten by '{lhs} = {rhs}'")))
            self.emit(Add3(lgen[p], rgen[q], old[q], origin=origin))
            site.pairs.append(TransferPair(lgen[p], rgen[q], old[q]))
        self.sys.transfer_sites.append(site)

        state = dict(state)
        state.update(rgen)
        state.update(lgen)
        return state

    def gen_null(self, lhs: Place, st, state):
        """`lhs = NULL`: null is both owning and non-owning, so the new
        version is unconstrained and no leak guard is emitted; the value
        is pinned by whatever joins with it."""
        return self._null_kill(lhs, st, state, f"{lhs} = NULL")

    def gen_alloc(self, lhs: Place, st, state):
        lp = path_of_place(lhs)
        origin = self.origin(st, f"{lhs} = <allocation>")
        gen = self.new_generation(lp.base, st.uid, origin)
        for path in self.family(lp.base):
            if not is_prefix(lp, path):
                self.emit(EqVar(gen[path], state[path], origin=origin))
        self.emit(Eq0(state[lp], origin=self.origin(
            st, f"'{lhs}' must not own memory when overwritten by an allocation")))
        self.emit(Eq1(gen[lp], origin=self.origin(st, f"allocation makes '{lhs}' owning")))
        for path in self.family(lp.base):
            if is_prefix(lp, path) and path != lp:
                self.emit(Eq0(gen[path], origin=self.origin(
                    st, "fresh allocation owns nothing")))
        state = dict(state)
        state.update(gen)
        return state

    def gen_realloc(self, lhs: Place, src: Place, st, state):
        lp, sp = path_of_place(lhs), path_of_place(src)
        origin = self.origin(st, f"{lhs} = realloc({src}, ...)")
        old = dict(state)
        sgen = self.new_generation(sp.base, st.uid, origin)
        for path in self.family(sp.base):
            if not is_prefix(sp, path):
                self.emit(EqVar(sgen[path], old[path], origin=origin))
            elif path != sp:
                self.emit(Eq0(sgen[path], origin=origin))
        self.emit(Eq1(old[sp], origin=self.origin(st, f"realloc consumes '{src}'")))
        self.emit(Eq0(sgen[sp], origin=origin))

        same = lp.base == sp.base
        lgen = self.new_generation(lp.base, st.uid, origin)
        pre_l = sgen if same else old
        for path in self.family(lp.base):
            if not is_prefix(lp, path):
                self.emit(EqVar(lgen[path], pre_l[path], origin=origin))
        if lp != sp:
            self.emit(Eq0(pre_l[lp] if same else old[lp], origin=self.origin(
                st, f"'{lhs}' must not own memory when overwritten by realloc")))
        self.emit(Eq1(lgen[lp], origin=self.origin(st, f"realloc result owned by '{lhs}'")))
        for p, q in self._suffix_pairs(lp, sp, head_only=False):
            if p != lp:
                self.emit(EqVar(lgen[p], old[q], origin=origin))
        state = dict(state)
        state.update(sgen)
        state.update(lgen)
        return state

    def _unconstrained_refresh(self, var: str, st, state):
        origin = self.origin(st, f"untracked use of '{var}'")
        gen = self.new_generation(var, st.uid, origin)
        state = dict(state)
        state.update(gen)
        return state

    def _read_refresh(self, var: str, st, state, what: str):
        origin = self.origin(st, what)
        gen = self.new_generation(var, st.uid, origin)
        for path in self.family(var):
            self.emit(EqVar(gen[path], state[path], origin=origin))
        state = dict(state)
        state.update(gen)
        return state

    # -- free -----------------------------------------------------------------

    def gen_free(self, st: FreeStmt, state):
        ap = path_of_place(st.place)
        origin = self.origin(st, f"free({st.place})")
        old = dict(state)
        gen = self.new_generation(ap.base, st.uid, origin)
        for path in self.family(ap.base):
            if not is_prefix(ap, path):
                self.emit(EqVar(gen[path], old[path], origin=origin))
        self.emit(Eq1(old[ap], origin=self.origin(
            st, f"free({st.place}) requires '{st.place}' to own its memory")))
        self.emit(Eq0(gen[ap], origin=self.origin(
            st, f"'{st.place}' is non-owning after free")))
        for path in self.family(ap.base):
            if is_prefix(ap, path) and path != ap:
                self.emit(Eq0(gen[path], origin=self.origin(st, "freed memory owns nothing")))
        state = dict(state)
        state.update(gen)
        return state

    # -- control flow -----------------------------------------------------------

    def _cond_refresh(self, cond, st, state):
        if isinstance(cond, (NullTest, NonNullTest)) and not cond.place.has_index:
            return self._read_refresh(cond.place.base, st, state,
                                      f"null test on {cond.place}")
        return state

    def gen_if(self, st: If, state):
        state = self._cond_refresh(st.cond, st, state)
        s_then = self.walk_body(st.then, dict(state))
        s_else = self.walk_body(st.els, dict(state))
        return self.gen_join([s_then, s_else], st)

    def gen_join(self, states, st):
        live = [s for s in states if s is not None]
        if not live:
            return None
        if len(live) == 1:
            return dict(live[0])
        origin = self.origin(st, "control-flow join")
        joined = dict(live[0])
        changed_bases = []
        seen = set()
        for path in live[0]:
            if any(s[path] != live[0][path] for s in live[1:]):
                if path.base not in seen:
                    seen.add(path.base)
                    changed_bases.append(path.base)
        for base in changed_bases:
            gen = self.new_generation(base, st.uid, origin)
            for path in self.family(base):
                incoming = []
                for s in live:
                    if s[path] not in incoming:
                        incoming.append(s[path])
                for v in incoming:
                    self.emit(EqVar(v, gen[path], origin=origin))
            joined.update(gen)
        return joined

    def gen_loop(self, st: While, state):
        """Analyze the body once; ownership of every tracked path must
        agree at loop entry and exit.  Leaving a non-null-test loop
        implies the tested place is null, so its family gets a fresh
        unconstrained version on the exit edge (null pointers are both
        owning and non-owning)."""
        state = self._cond_refresh(st.cond, st, state)
        entry = dict(state)
        exit_state = self.walk_body(st.body, dict(state))
        if exit_state is not None:
            origin = self.origin(st, f"loop {st.loop_id} entry/exit ownership must agree")
            for path in entry:
                if exit_state[path] != entry[path]:
                    self.emit(EqVar(entry[path], exit_state[path], origin=origin))
        after = entry
        if isinstance(st.cond, NonNullTest) and not st.cond.place.has_index:
            after = self._null_kill(st.cond.place, st, entry,
                                    f"{st.cond.place} is null after the loop")
        return after

    def _null_kill(self, place: Place, st, state, what: str):
        ap = path_of_place(place)
        origin = self.origin(st, what)
        gen = self.new_generation(ap.base, st.uid, origin)
        state = dict(state)
        for path in self.family(ap.base):
            if not is_prefix(ap, path):
                self.emit(EqVar(gen[path], state[path], origin=origin))
        state.update(gen)
        return state

    # -- calls and returns ----------------------------------------------------

    def gen_fn_call(self, st: CallStmt, state):
        callee = self.program.function(st.callee)
        if callee is None:
            if st.callee in INTRINSICS:
                for arg in st.args:
                    pl = arg.place if isinstance(arg, OutArg) else (
                        arg.value.place if isinstance(arg.value, PlaceRv) else None)
                    if pl is not None and not pl.has_index \
                            and is_pointer(self._place_type(pl)):
                        state = self._read_refresh(pl.base, st, state,
                                                   f"{st.callee} reads {pl}")
                return state
            self.sys.warnings.append(
                f"{self.sys.source_name}:{st.line}: call to unknown function "
                f"'{st.callee}' generates no ownership constraints")
            for arg in st.args:
                pl = arg.place if isinstance(arg, OutArg) else (
                    arg.value.place if isinstance(arg.value, PlaceRv) else None)
                if pl is not None and not pl.has_index and is_pointer(self._place_type(pl)):
                    state = self._unconstrained_refresh(pl.base, st, state)
            if st.result is not None and is_pointer(self.env.get(st.result)):
                state = self._unconstrained_refresh(st.result, st, state)
            return state

        sig = self.sys.signatures[st.callee]
        origin = self.origin(st, f"call {st.callee}")
        for arg, (pname, _) in zip(st.args, callee.params):
            if isinstance(arg, OutArg):
                state = self._bind_output(arg.place, sig, pname, st, state)
            elif isinstance(arg.value, PlaceRv) and not arg.value.place.has_index \
                    and is_pointer(self._place_type(arg.value.place)):
                state = self._bind_normal(arg.value.place, sig, pname, st, state,
                                          head_only=arg.value.cast is not None)
        if st.result is not None and is_pointer(self.env.get(st.result)) \
                and sig.ret is not None:
            state = self._bind_result(st.result, sig, st, state)
        return state

    def _bind_output(self, place: Place, sig, pname: str, st, state):
        """Output argument `&mut place`: the borrowed paths' pre/post
        states are equated with the parameter's entry/exit states at
        matching depths."""
        ap = path_of_place(place)
        origin = self.origin(st, f"&mut {place} borrowed by {st.callee}")
        old = dict(state)
        gen = self.new_generation(ap.base, st.uid, origin)
        entry, exit_ = sig.output_entry[pname], sig.output_exit[pname]
        for path in self.family(ap.base):
            if not is_prefix(ap, path):
                self.emit(EqVar(gen[path], old[path], origin=origin))
                continue
            sigma = path.selectors[len(ap.selectors):]
            ppath = AccessPath(pname, sigma)
            if ppath in entry:
                self.emit(EqVar(old[path], entry[ppath], origin=origin))
                self.emit(EqVar(gen[path], exit_[ppath], origin=origin))
        state = dict(state)
        state.update(gen)
        return state

    def _bind_normal(self, place: Place, sig, pname: str, st, state, head_only=False):
        ap = path_of_place(place)
        origin = self.origin(st, f"{place} passed to {st.callee}")
        old = dict(state)
        gen = self.new_generation(ap.base, st.uid, origin)
        pfam = sig.normal[pname]
        site = TransferSite(function=self.fn.name, uid=st.uid, line=st.line,
                            kind="call-arg", rhs_base=ap.base,
                            lhs_desc=f"{st.callee}({pname})", pairs=[],
                            rhs_is_base=not ap.selectors)
        for path in self.family(ap.base):
            if not is_prefix(ap, path):
                self.emit(EqVar(gen[path], old[path], origin=origin))
                continue
            sigma = path.selectors[len(ap.selectors):]
            if head_only and sigma:
                continue
            ppath = AccessPath(pname, sigma)
            if ppath in pfam:
                self.emit(Add3(gen[path], pfam[ppath], old[path], origin=origin))
                site.pairs.append(TransferPair(pfam[ppath], gen[path], old[path]))
        self.sys.transfer_sites.append(site)
        state = dict(state)
        state.update(gen)
        return state

    def _bind_result(self, result: str, sig, st, state):
        origin = self.origin(st, f"{result} = {st.callee}(...)")
        old = dict(state)
        gen = self.new_generation(result, st.uid, origin)
        rp = AccessPath(result)
        for path in self.family(result):
            sigma = path.selectors
            zpath = AccessPath(RETURN_BASE, sigma)
            if zpath in sig.ret:
                self.emit(Eq0(old[path], origin=self.origin(
                    st, f"'{path}' must not own memory when overwritten by a call result")))
                self.emit(EqVar(gen[path], sig.ret[zpath], origin=origin))
        state = dict(state)
        state.update(gen)
        return state

    def gen_return(self, st: Return, state):
        if st.value is not None and isinstance(st.value, PlaceRv) \
                and not st.value.place.has_index \
                and is_pointer(self._place_type(st.value.place)):
            state = self._move_to_return(st.value.place, st, state,
                                         head_only=st.value.cast is not None)
        self.exit_constraints(state, st)

    def _move_to_return(self, place: Place, st, state, head_only=False):
        sig = self.sys.signatures[self.fn.name]
        ap = path_of_place(place)
        origin = self.origin(st, f"return {place}")
        old = dict(state)
        gen = self.new_generation(ap.base, st.uid, origin)
        site = TransferSite(function=self.fn.name, uid=st.uid, line=st.line,
                            kind="return", rhs_base=ap.base, lhs_desc="$return",
                            pairs=[], rhs_is_base=not ap.selectors)
        for path in self.family(ap.base):
            if not is_prefix(ap, path):
                self.emit(EqVar(gen[path], old[path], origin=origin))
                continue
            sigma = path.selectors[len(ap.selectors):]
            if head_only and sigma:
                continue
            zpath = AccessPath(RETURN_BASE, sigma)
            if sig.ret is not None and zpath in sig.ret:
                self.emit(Add3(sig.ret[zpath], gen[path], old[path], origin=origin))
                site.pairs.append(TransferPair(sig.ret[zpath], gen[path], old[path]))
        self.sys.transfer_sites.append(site)
        state = dict(state)
        state.update(gen)
        return state

    def exit_constraints(self, state, st) -> None:
        sig = self.sys.signatures[self.fn.name]
        for pname, _ in self.fn.output_params:
            exit_ = sig.output_exit[pname]
            for path in self.family(pname):
                self.emit(EqVar(state[path], exit_[path], origin=self.origin(
                    st, f"output parameter {pname} state at exit")))
        local_names = {d.name for d in local_decls(self.fn.body) if is_pointer(d.ty)}
        for name in local_names:
            for path in self.family(name):
                self.emit(Eq0(state[path], origin=self.origin(
                    st, f"local '{path}' must not own memory at function exit")))


# ---------------------------------------------------------------------------
# Whole-program generation
# ---------------------------------------------------------------------------

def register_signature(program: Program, fn: FunctionDef, system: ConstraintSystem) -> _FnGen:
    """FN-DECL: create entry/exit variable families for the signature and
    pin output parameters owning at both ends (borrowed in, returned)."""
    gen = _FnGen(program, fn, system)
    origin = f"{system.source_name}:{fn.line} {fn.name}: signature"
    output_entry, output_exit, normal = {}, {}, {}
    for pname, pty in fn.params:
        if not is_pointer(pty):
            continue
        if pname in fn.output_names:
            entry = gen.new_generation(pname, -1, origin)
            exit_ = gen.new_generation(pname, -1, origin)
            base = AccessPath(pname)
            gen.emit(Eq1(entry[base], origin=f"{origin}: output parameter "
                                             f"{pname} owns its borrow on entry"))
            gen.emit(Eq1(exit_[base], origin=f"{origin}: output parameter "
                                             f"{pname} must own its borrow on exit"))
            output_entry[pname] = entry
            output_exit[pname] = exit_
        else:
            normal[pname] = gen.new_generation(pname, -1, origin)
    ret = None
    if is_pointer(fn.return_type):
        ret = gen.new_generation(RETURN_BASE, -1, origin)
    system.signatures[fn.name] = FunctionSignature(
        function=fn.name, output_entry=output_entry, output_exit=output_exit,
        normal=normal, ret=ret)
    return gen


def generate(program: Program, k: int | None = None) -> ConstraintSystem:
    """Generate the ownership constraint system for a normalized program.

    Two phases: all signatures are registered first so call sites
    (including recursive ones) can reference callee variables, then all
    bodies are processed.  Deterministic for a given input.
    """
    bound = compute_k(program)
    if k is None:
        k = bound.k
    elif k < bound.k:
        raise ValueError(f"k override {k} is below the computed minimum {bound.k}")
    system = ConstraintSystem(k=k, source_name=program.source_name)
    gens = [register_signature(program, fn, system) for fn in program.functions]
    for g in gens:
        g.run()
    return system
