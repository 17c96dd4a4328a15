"""Translation of MiniC into Rust-syntax source text.

Per-point ownership is globalized into one plan per pointer
declaration, declarations are retyped (owning non-array pointers become
Option<Box<T>>, output parameters Option<&mut T>, array pointers stay
raw), and every pointer use is rewritten according to its plan and the
context that expects it:

                 Option<Box<T>>        Option<&mut T>     *mut T
    box ctx      p.take() / move       (unreachable)      Some(Box::from_raw(p))
    mut ctx      p.as_deref_mut()      p.as_deref_mut()   p.as_mut()
    const ctx    p.as_deref()          p.as_deref()       p.as_ref()
    raw ctx      to_raw(&mut p)        to_raw(&mut p)     p

Dereferences inside larger expressions get an additional unwrap().
Box-typed declarations that are still used after losing ownership are
reverted to raw pointers before emission.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .constraints import ConstraintSystem
from .ir import (
    Assign, BinOp, CallStmt, Calloc, DerefSel, FieldSel, FreeStmt, FunctionDef,
    If, InArg, IndexSel, IntExpr, IntLit, IntType, LocalDecl, Malloc,
    NonNullTest, NullRv, NullTest, OutArg, Place, PlaceExpr, PlaceRv, Program,
    PtrType, Realloc, Return, StructType, While, function_env, is_pointer,
    local_decls, stmts_iter, INTRINSICS,
)
from .qualifiers import QualifierMap, _decl_steps, pointer_decls
from .sat import OwnershipScheme

BOX, MUTREF, RAW = "box", "mutref", "raw"
BOX_CTX, MUT_CTX, CONST_CTX, RAW_CTX = "box_ctx", "mut_ctx", "const_ctx", "raw_ctx"


@dataclass
class PointerPlan:
    target: str  # BOX | MUTREF | RAW
    owning_anywhere: bool = False
    output_param: bool = False
    fat: bool = False
    owning_comment: bool = False  # fat pointer that owns: annotate, keep raw


def detect_output_params(fn: FunctionDef) -> set:
    """Output parameters as recorded on the normalized function."""
    return set(fn.output_names)


def globalize_ownership(scheme: OwnershipScheme,
                        system: ConstraintSystem | None = None) -> dict:
    """Per-declaration owning flag: OR over every version of every path
    whose last step names the declaration (fields aggregate across all
    base variables in scope)."""
    if system is None:
        system = scheme.system
    owning: dict = {}
    for var, value in scheme.assignment.items():
        decl = system.decl_of.get(var)
        if decl is None:
            continue
        owning[decl] = owning.get(decl, False) or bool(value)
    return owning


def make_plans(program: Program, scheme: OwnershipScheme,
               qualifiers: QualifierMap,
               system: ConstraintSystem | None = None) -> dict:
    if system is None:
        system = scheme.system
    owning = globalize_ownership(scheme, system)
    plans: dict = {}
    for decl in pointer_decls(program):
        owns = owning.get(decl, False)
        fat = qualifiers.fat(decl)
        is_out = decl[0] == "var" and any(
            fn.name == decl[1] and decl[2] in fn.output_names
            for fn in program.functions)
        if fat:
            plans[decl] = PointerPlan(target=RAW, owning_anywhere=owns, fat=True,
                                      owning_comment=owns, output_param=is_out)
        elif is_out:
            # borrowed in and returned; non-owning as a base (the entry/exit
            # constraints model the borrow, not ownership of the object)
            plans[decl] = PointerPlan(target=MUTREF, owning_anywhere=False,
                                      output_param=True)
        elif owns:
            plans[decl] = PointerPlan(target=BOX, owning_anywhere=True)
        else:
            plans[decl] = PointerPlan(target=RAW)
    return plans


# ---------------------------------------------------------------------------
# Box-move reversion
# ---------------------------------------------------------------------------

def _base_reads(st, var: str) -> bool:
    """Does the statement read `var` (other than reassigning it)?"""

    def place_uses(pl: Place) -> bool:
        return pl.base == var

    def rv_uses(rv) -> bool:
        if isinstance(rv, PlaceRv):
            return place_uses(rv.place)
        if isinstance(rv, Realloc):
            return place_uses(rv.src)
        if isinstance(rv, IntExpr):
            return any(place_uses(p) for p in _expr_places(rv.expr))
        return False

    if isinstance(st, Assign):
        lhs_use = st.lhs.base == var and bool(st.lhs.selectors)
        return lhs_use or rv_uses(st.rhs)
    if isinstance(st, LocalDecl):
        return st.init is not None and rv_uses(st.init)
    if isinstance(st, FreeStmt):
        return place_uses(st.place)
    if isinstance(st, (If, While)):
        cond = st.cond
        if isinstance(cond, (NullTest, NonNullTest)):
            return place_uses(cond.place)
        return any(place_uses(p) for p in _expr_places(cond.expr))
    if isinstance(st, Return):
        return st.value is not None and rv_uses(st.value)
    if isinstance(st, CallStmt):
        for arg in st.args:
            pl = arg.place if isinstance(arg, OutArg) else None
            if pl is None and isinstance(arg.value, PlaceRv):
                pl = arg.value.place
            if pl is not None and place_uses(pl):
                return True
        return False
    return False


def _expr_places(e):
    if isinstance(e, PlaceExpr):
        yield e.place
    elif isinstance(e, BinOp):
        yield from _expr_places(e.left)
        yield from _expr_places(e.right)


def _is_reassign(st, var: str) -> bool:
    return (isinstance(st, Assign) and st.lhs.base == var and not st.lhs.selectors) \
        or (isinstance(st, LocalDecl) and st.name == var) \
        or (isinstance(st, CallStmt) and st.result == var)


def _move_uids(system: ConstraintSystem, scheme: OwnershipScheme, fn: str, var: str) -> set:
    """Statement uids where `var` loses its base ownership through a
    transfer (assignment, call argument or return) under the scheme."""
    uids = set()
    for site in system.transfer_sites:
        if site.function != fn or site.rhs_base != var or not site.pairs \
                or not site.rhs_is_base:
            continue
        base = site.pairs[0]
        val = scheme.assignment
        if val[base.rhs_old] == 1 and val[base.rhs_new] == 0 and val[base.lhs_new] == 1:
            uids.add(site.uid)
    return uids


def box_move_check(program: Program, system: ConstraintSystem,
                   scheme: OwnershipScheme, plans: dict) -> set:
    """Box-typed variables used (other than reassignment) after a
    version where their ownership is 0 following a transfer are demoted
    to raw pointers; demotions are monotone, so rerunning reaches a
    fixpoint (at most one extra confirming round)."""
    demoted: set = set()
    for _ in range(10):
        changed = False
        for fn in program.functions:
            for decl, plan in plans.items():
                if plan.target != BOX or decl[0] != "var" or decl[1] != fn.name:
                    continue
                var = decl[2]
                moves = _move_uids(system, scheme, fn.name, var)
                if not moves:
                    continue
                if _used_after_move(fn.body, var, moves):
                    plans[decl] = PointerPlan(target=RAW,
                                              owning_anywhere=plan.owning_anywhere)
                    demoted.add(decl)
                    changed = True
        if not changed:
            break
    return demoted


def _used_after_move(body, var: str, moves: set) -> bool:
    def walk(stmts, moved: bool):
        # returns (moved_after, violated)
        violated = False
        for st in stmts:
            if moved and _base_reads(st, var) and st.uid not in moves:
                violated = True
            if isinstance(st, If):
                m1, v1 = walk(st.then, moved)
                m2, v2 = walk(st.els, moved)
                violated = violated or v1 or v2
                moved = m1 or m2
                continue
            if isinstance(st, While):
                m1, v1 = walk(st.body, moved)
                # second pass with the back-edge state
                m2, v2 = walk(st.body, m1 or moved)
                violated = violated or v1 or v2
                moved = moved or m1 or m2
                continue
            if st.uid in moves:
                moved = True
            if _is_reassign(st, var) and st.uid not in moves:
                moved = False
        return moved, violated

    return walk(body, False)[1]


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

class Emitter:
    def __init__(self, program: Program, plans: dict, scheme: OwnershipScheme,
                 system: ConstraintSystem):
        self.program = program
        self.plans = plans
        self.scheme = scheme
        self.system = system
        self.lines: list = []
        self.need_to_raw = False
        self.need_extern: list = []
        self.default_structs: list = []
        self.fn = None
        self.env = None

    # -- plan helpers ----------------------------------------------------------

    def plan_of(self, decl) -> PointerPlan:
        return self.plans.get(decl, PointerPlan(target=RAW))

    def place_decls(self, place: Place):
        return _decl_steps(place, self.env, self.program, self.fn.name)

    def last_plan(self, place: Place) -> PointerPlan:
        _, decl = self.place_decls(place)
        return self.plan_of(decl)

    # -- types ------------------------------------------------------------------

    def rust_elem(self, ty) -> str:
        if isinstance(ty, IntType):
            return "i32"
        if isinstance(ty, StructType):
            return ty.name
        return self.raw_type(ty)

    def raw_type(self, ty) -> str:
        if isinstance(ty, PtrType):
            return f"*mut {self.rust_elem(ty.pointee)}"
        return self.rust_elem(ty)

    def decl_type(self, ty, plan: PointerPlan) -> str:
        if not isinstance(ty, PtrType):
            return self.rust_elem(ty)
        if plan.target == BOX:
            return f"Option<Box<{self.boxed_inner(ty.pointee, plan)}>>"
        if plan.target == MUTREF:
            return f"Option<&mut {self.rust_elem(ty.pointee)}>"
        if plan.owning_comment:
            return f"*mut /* owning */ {self.rust_elem(ty.pointee)}"
        return self.raw_type(ty)

    def boxed_inner(self, ty, plan) -> str:
        if isinstance(ty, PtrType):
            return f"Option<Box<{self.boxed_inner(ty.pointee, plan)}>>"
        return self.rust_elem(ty)

    def default_value(self, ty, plan: PointerPlan) -> str:
        if not isinstance(ty, PtrType):
            return "0"
        if plan.target in (BOX, MUTREF):
            return "None"
        return "std::ptr::null_mut()"

    # -- places -----------------------------------------------------------------

    def render_place(self, place: Place, mutate: bool) -> str:
        """Render place navigation; retyped prefixes are unwrapped with
        as_deref()/as_deref_mut() plus unwrap()."""
        derefed, _ = self.place_decls(place)
        out = place.base
        for sel, decl in zip(place.selectors, derefed):
            plan = self.plan_of(decl)
            if isinstance(sel, IndexSel):
                idx = self.render_expr(sel.index)
                out = f"*{out}.offset(({idx}) as isize)"
                continue
            if plan.target in (BOX, MUTREF):
                acc = "as_deref_mut" if mutate else "as_deref"
                out = f"(*{out}.{acc}().unwrap())"
            else:
                out = f"(*{out})"
            if isinstance(sel, FieldSel):
                out = f"{out}.{sel.name}"
        return out

    def pointer_value(self, place: Place, ctx: str, move_plain: bool = False) -> str:
        """The rewrite table: a pointer-typed place read in a context."""
        plan = self.last_plan(place)
        mutate = ctx in (BOX_CTX, MUT_CTX, RAW_CTX)
        lv = self.render_place(place, mutate=mutate)
        if ctx == BOX_CTX:
            if plan.target == BOX:
                if move_plain:
                    return lv
                return f"{lv}.take()"
            if plan.target == MUTREF:
                raise AssertionError(
                    "a mutable-reference plan can never feed a box context "
                    "(output parameters are not retyped to boxes)")
            return f"Some(Box::from_raw({lv}))"
        if ctx == MUT_CTX:
            if plan.target in (BOX, MUTREF):
                return f"{lv}.as_deref_mut()"
            return f"{lv}.as_mut()"
        if ctx == CONST_CTX:
            if plan.target in (BOX, MUTREF):
                return f"{lv}.as_deref()"
            return f"{lv}.as_ref()"
        # raw context
        if plan.target in (BOX, MUTREF):
            self.need_to_raw = True
            return f"to_raw(&mut {lv})"
        return lv

    def render_expr(self, e) -> str:
        if isinstance(e, IntLit):
            return str(e.value)
        if isinstance(e, PlaceExpr):
            return self.render_place(e.place, mutate=False)
        if isinstance(e, BinOp):
            return f"{self.render_expr(e.left)} {e.op} {self.render_expr(e.right)}"
        raise TypeError(f"cannot render {e!r}")

    # -- statements ----------------------------------------------------------------

    def ctx_of_plan(self, plan: PointerPlan) -> str:
        if plan.target == BOX:
            return BOX_CTX
        if plan.target == MUTREF:
            return MUT_CTX
        return RAW_CTX

    def move_is_plain(self, st, place: Place) -> bool:
        """Bare box-typed locals move without take() when never read
        afterwards; field paths always take()."""
        if place.selectors:
            return False
        var = place.base
        if self.plan_of(("var", self.fn.name, var)).target != BOX:
            return False
        return not self._read_later(st, var)

    def _read_later(self, st, var: str) -> bool:
        order = [s for s in stmts_iter(self.fn.body)]
        started = False
        enclosing_loops = [w for w in order
                           if isinstance(w, While)
                           and any(s.uid == st.uid for s in stmts_iter(w.body))]
        for s in order:
            if s.uid == st.uid:
                started = True
                continue
            if not started:
                continue
            if isinstance(s, (If, While)):
                pass  # children are visited by the walk itself
            if _base_reads(s, var):
                return True
        # a move inside a loop can be read again via the back edge
        for w in enclosing_loops:
            for s in stmts_iter(w.body):
                if s.uid != st.uid and _base_reads(s, var):
                    return True
        return False

    def alloc_value(self, lhs_place: Place, rhs, plan: PointerPlan) -> str:
        elem = self.rust_elem(rhs.elem)
        if plan.target == BOX and isinstance(rhs, Malloc) and rhs.count is None:
            if isinstance(rhs.elem, StructType):
                if rhs.elem.name not in self.default_structs:
                    self.default_structs.append(rhs.elem.name)
                return f"Some(Box::new(<{elem} as Default>::default()))"
            if isinstance(rhs.elem, PtrType):
                return "Some(Box::new(None))"
            return "Some(Box::new(0))"
        size = f"std::mem::size_of::<{elem}>()"
        if isinstance(rhs, Calloc):
            self._extern("calloc")
            count = self.render_expr(rhs.count)
            return f"calloc(({count}) as usize, {size}) as *mut {elem}"
        if isinstance(rhs, Malloc):
            self._extern("malloc")
            if rhs.count is not None:
                count = self.render_expr(rhs.count)
                return f"malloc((({count}) as usize) * {size}) as *mut {elem}"
            return f"malloc({size}) as *mut {elem}"
        assert isinstance(rhs, Realloc)
        self._extern("realloc")
        src = self.pointer_value(rhs.src, RAW_CTX)
        if rhs.count is not None:
            count = self.render_expr(rhs.count)
            return (f"realloc({src} as *mut c_void, (({count}) as usize) * {size}) "
                    f"as *mut {elem}")
        return f"realloc({src} as *mut c_void, {size}) as *mut {elem}"

    def _extern(self, name: str) -> None:
        if name not in self.need_extern:
            self.need_extern.append(name)

    def emit_stmt(self, st, indent: int) -> None:
        pad = "    " * indent
        if st.synthetic:
            return
        if isinstance(st, LocalDecl):
            decl = ("var", self.fn.name, st.name)
            plan = self.plan_of(decl)
            if st.init is not None:
                value = self.rhs_value(Place(st.name), st.init, plan, st)
                self.lines.append(f"{pad}let mut {st.name} = {value};")
            else:
                ty = self.decl_type(st.ty, plan)
                self.lines.append(f"{pad}let mut {st.name}: {ty} = "
                                  f"{self.default_value(st.ty, plan)};")
            return
        if isinstance(st, Assign):
            self.emit_assign(st, pad)
            return
        if isinstance(st, FreeStmt):
            plan = self.last_plan(st.place)
            if plan.target == BOX:
                return  # the box releases its memory when dropped/overwritten
            self._extern("free")
            val = self.pointer_value(st.place, RAW_CTX) if plan.target == MUTREF \
                else self.render_place(st.place, mutate=False)
            self.lines.append(f"{pad}free({val} as *mut c_void);")
            return
        if isinstance(st, If):
            self.lines.append(f"{pad}if {self.render_cond(st.cond)} {{")
            for s in st.then:
                self.emit_stmt(s, indent + 1)
            if any(not s.synthetic for s in st.els):
                self.lines.append(f"{pad}}} else {{")
                for s in st.els:
                    self.emit_stmt(s, indent + 1)
            self.lines.append(f"{pad}}}")
            return
        if isinstance(st, While):
            self.lines.append(f"{pad}while {self.render_cond(st.cond)} {{")
            for s in st.body:
                self.emit_stmt(s, indent + 1)
            self.lines.append(f"{pad}}}")
            return
        if isinstance(st, Return):
            if st.value is None:
                self.lines.append(f"{pad}return;")
                return
            plan = self.plan_of(("ret", self.fn.name))
            value = self.rhs_value(None, st.value, plan, st)
            self.lines.append(f"{pad}return {value};")
            return
        if isinstance(st, CallStmt):
            self.emit_call(st, pad)
            return
        raise TypeError(f"cannot emit {st!r}")

    def rhs_value(self, lhs_place, rhs, plan: PointerPlan, st) -> str:
        """Render an rvalue for a target with the given plan."""
        if isinstance(rhs, IntExpr):
            return self.render_expr(rhs.expr)
        if isinstance(rhs, NullRv):
            return "None" if plan.target in (BOX, MUTREF) else "std::ptr::null_mut()"
        if isinstance(rhs, (Malloc, Calloc, Realloc)):
            value = self.alloc_value(lhs_place, rhs, plan)
            if plan.target == BOX and not value.startswith("Some("):
                return f"Some(Box::from_raw({value}))"
            return value
        assert isinstance(rhs, PlaceRv)
        ty = self._place_ty(rhs.place)
        if not is_pointer(ty) or rhs.place.has_index:
            val = self.render_place(rhs.place, mutate=False)
            return val
        ctx = self.ctx_of_plan(plan)
        plain = ctx == BOX_CTX and self.move_is_plain(st, rhs.place)
        val = self.pointer_value(rhs.place, ctx, move_plain=plain)
        if rhs.cast is not None and ctx == RAW_CTX:
            val = f"{val} as {self.raw_type(rhs.cast)}"
        return val

    def _place_ty(self, place: Place):
        from .ir import place_type
        return place_type(place, self.env, self.program)

    def emit_assign(self, st: Assign, pad: str) -> None:
        lty = self._place_ty(st.lhs)
        if not is_pointer(lty) or st.lhs.has_index:
            lhs = self.render_place(st.lhs, mutate=True)
            value = self.rhs_value(st.lhs, st.rhs, PointerPlan(target=RAW), st)
            self.lines.append(f"{pad}{lhs} = {value};")
            return
        plan = self.last_plan(st.lhs)
        lhs = self.render_place(st.lhs, mutate=True)
        value = self.rhs_value(st.lhs, st.rhs, plan, st)
        self.lines.append(f"{pad}{lhs} = {value};")

    def render_cond(self, cond) -> str:
        if isinstance(cond, (NullTest, NonNullTest)):
            plan = self.last_plan(cond.place)
            lv = self.render_place(cond.place, mutate=False)
            test = f"{lv}.as_deref().is_none()" if plan.target in (BOX, MUTREF) \
                else f"{lv}.is_null()"
            return test if isinstance(cond, NullTest) else f"!{test}"
        expr = cond.expr
        if isinstance(expr, BinOp) and expr.op in ("==", "!=", "<", "<=", ">", ">="):
            return self.render_expr(expr)
        return f"{self.render_expr(expr)} != 0"

    def emit_call(self, st: CallStmt, pad: str) -> None:
        callee = self.program.function(st.callee)
        args = []
        if callee is not None:
            for arg, (pname, pty) in zip(st.args, callee.params):
                pplan = self.plan_of(("var", st.callee, pname))
                if isinstance(arg, OutArg):
                    args.append(self.pointer_value(arg.place, MUT_CTX))
                elif isinstance(arg.value, PlaceRv) and is_pointer(pty) \
                        and not arg.value.place.has_index:
                    ctx = self.ctx_of_plan(pplan)
                    plain = ctx == BOX_CTX and self.move_is_plain(st, arg.value.place)
                    args.append(self.pointer_value(arg.value.place, ctx, move_plain=plain))
                elif isinstance(arg.value, NullRv):
                    args.append("None" if pplan.target in (BOX, MUTREF)
                                else "std::ptr::null_mut()")
                else:
                    args.append(self.rhs_value(None, arg.value, PointerPlan(target=RAW), st))
            call = f"{st.callee}({', '.join(args)})"
            if st.result is None:
                self.lines.append(f"{pad}{call};")
                return
            rplan = self.plan_of(("var", self.fn.name, st.result))
            retplan = self.plan_of(("ret", st.callee))
            if rplan.target == BOX and retplan.target == RAW:
                call = f"Some(Box::from_raw({call}))"
            elif rplan.target != BOX and retplan.target == BOX:
                self.need_to_raw = True
                call = f"{{ let mut __ret = {call}; to_raw(&mut __ret) }}"
            self.lines.append(f"{pad}{st.result} = {call};")
            return
        # intrinsics and extern calls keep their C shape over raw values
        if st.callee in INTRINSICS:
            self._extern(st.callee)
        rendered = []
        for arg in st.args:
            if isinstance(arg, OutArg):
                rendered.append(self.pointer_value(arg.place, RAW_CTX))
            elif isinstance(arg.value, PlaceRv):
                pl = arg.value.place
                if not pl.has_index and is_pointer(self._place_ty(pl)):
                    val = self.pointer_value(pl, RAW_CTX)
                    if st.callee == "memset":
                        val = f"{val} as *mut c_void"
                    rendered.append(val)
                else:
                    rendered.append(self.render_place(pl, mutate=False))
            elif isinstance(arg.value, NullRv):
                rendered.append("std::ptr::null_mut()")
            else:
                rendered.append(self.rhs_value(None, arg.value, PointerPlan(target=RAW), st))
        if st.callee == "memset":
            rendered = [rendered[0]] + rendered[1:2] + [f"({rendered[2]}) as usize"] \
                if len(rendered) == 3 else rendered
        call = f"{st.callee}({', '.join(rendered)})"
        if st.result is not None:
            self.lines.append(f"{pad}{st.result} = {call};")
        else:
            self.lines.append(f"{pad}{call};")

    # -- top level --------------------------------------------------------------

    def emit_struct(self, sdef) -> list:
        has_box = any(self.plan_of(("field", sdef.name, n)).target == BOX
                      for n, t in sdef.fields if is_pointer(t))
        out = ["#[repr(C)]"]
        if not has_box:
            out.append("#[derive(Copy, Clone)]")
        out.append(f"pub struct {sdef.name} {{")
        for fname, fty in sdef.fields:
            plan = self.plan_of(("field", sdef.name, fname)) if is_pointer(fty) \
                else PointerPlan(target=RAW)
            out.append(f"    pub {fname}: {self.decl_type(fty, plan)},")
        out.append("}")
        return out

    def emit_default_impl(self, sdef) -> list:
        out = [f"impl Default for {sdef.name} {{",
               f"    fn default() -> {sdef.name} {{"]
        inits = []
        for fname, fty in sdef.fields:
            if not is_pointer(fty):
                inits.append(f"{fname}: 0")
            else:
                plan = self.plan_of(("field", sdef.name, fname))
                inits.append(f"{fname}: None" if plan.target == BOX
                             else f"{fname}: std::ptr::null_mut()")
        out.append(f"        {sdef.name} {{ {', '.join(inits)} }}")
        out.extend(["    }", "}"])
        return out

    def emit_function(self, fn: FunctionDef) -> None:
        self.fn = fn
        self.env = function_env(fn)
        params = []
        for pname, pty in fn.params:
            plan = self.plan_of(("var", fn.name, pname)) if is_pointer(pty) \
                else PointerPlan(target=RAW)
            params.append(f"mut {pname}: {self.decl_type(pty, plan)}")
        ret = ""
        if fn.return_type is not None:
            rplan = self.plan_of(("ret", fn.name)) if is_pointer(fn.return_type) \
                else PointerPlan(target=RAW)
            ret = f" -> {self.decl_type(fn.return_type, rplan)}"
        self.lines.append(f"pub unsafe extern \"C\" fn {fn.name}"
                          f"({', '.join(params)}){ret} {{")
        for st in fn.body:
            self.emit_stmt(st, 1)
        self.lines.append("}")
        self.lines.append("")

    def emit_program(self) -> str:
        self.lines = []
        for fn in self.program.functions:
            self.emit_function(fn)
        body = self.lines

        head = ["#![allow(dead_code, non_camel_case_types, non_snake_case, "
                "unused_assignments, unused_mut, unused_parens, unused_unsafe, "
                "unused_variables)]", ""]
        if self.need_extern or "as *mut c_void" in "\n".join(body):
            head.append("use std::ffi::c_void;")
        if self.need_to_raw:
            head.append("use std::ptr::null_mut;")
        if len(head) > 2:
            head.append("")
        if self.need_extern:
            sigs = {
                "malloc": "    fn malloc(size: usize) -> *mut c_void;",
                "calloc": "    fn calloc(count: usize, size: usize) -> *mut c_void;",
                "realloc": "    fn realloc(p: *mut c_void, size: usize) -> *mut c_void;",
                "free": "    fn free(p: *mut c_void);",
                "memset": "    fn memset(s: *mut c_void, c: i32, n: usize) -> *mut c_void;",
                "strcmp": "    fn strcmp(a: *mut i32, b: *mut i32) -> i32;",
            }
            head.append("extern \"C\" {")
            for name in ("malloc", "calloc", "realloc", "free", "memset", "strcmp"):
                if name in self.need_extern:
                    head.append(sigs[name])
            head.extend(["}", ""])
        if self.need_to_raw:
            head.extend([
                "fn to_raw<T>(b: &mut Option<Box<T>>) -> *mut T {",
                "    b.as_deref_mut().map(|b| b as *mut T).unwrap_or(null_mut())",
                "}",
                "",
            ])
        decls = []
        for sdef in self.program.structs:
            decls.extend(self.emit_struct(sdef))
            if sdef.name in self.default_structs:
                decls.extend(self.emit_default_impl(sdef))
            decls.append("")
        text = "\n".join(head + decls + body)
        return text.rstrip() + "\n"


def rewrite_uses(program: Program, plans: dict, scheme: OwnershipScheme,
                 system: ConstraintSystem) -> Emitter:
    """Build the emitter (the rewritten-program carrier). Emission is a
    two-pass affair because the preamble depends on which helpers the
    rewritten uses reference."""
    em = Emitter(program, plans, scheme, system)
    em.emit_program()  # first pass records helper needs
    return em


def emit(em: Emitter) -> str:
    return em.emit_program()


def translate_program(program: Program, scheme: OwnershipScheme,
                      qualifiers: QualifierMap,
                      system: ConstraintSystem | None = None) -> tuple:
    """Full translation: plans, box-move reversion, emission.

    Returns (rust_text, plans, demoted declarations).
    """
    if system is None:
        system = scheme.system
    plans = make_plans(program, scheme, qualifiers, system)
    demoted = box_move_check(program, system, scheme, plans)
    em = rewrite_uses(program, plans, scheme, system)
    return emit(em), plans, demoted
