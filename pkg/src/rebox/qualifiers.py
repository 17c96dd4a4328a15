"""Mutability and fatness qualifiers.

Both are per-declaration booleans over pointer declarations (variables,
struct fields, return types) computed as may-flow fixpoints:

* mutable: some access path through the pointer is the target of a
  store, is freed/reallocated, or is passed as an output argument;
  mutability propagates from an alias back to its source.
* fat: the pointer is indexed, receives a multi-element allocation
  (calloc or size-scaled malloc), or flows to/from a fat pointer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .ir import (
    Assign, BinOp, CallStmt, Calloc, DerefSel, FieldSel, FreeStmt, If, InArg,
    IndexSel, IntExpr, LocalDecl, Malloc, NonNullTest, NullTest, OutArg, Place,
    PlaceExpr, PlaceRv, Program, PtrType, Realloc, Return, While,
    function_env, is_pointer, local_decls, stmts_iter,
)

# Declaration keys:
#   ("var", function, name)   parameter or local
#   ("field", struct, name)   struct field
#   ("ret", function)         pointer return type


@dataclass
class Quals:
    mutable: bool = False
    fat: bool = False


class QualifierMap:
    def __init__(self, quals: dict):
        self.quals = quals

    def mutable(self, decl) -> bool:
        return self.quals[decl].mutable

    def fat(self, decl) -> bool:
        return self.quals[decl].fat

    def __contains__(self, decl) -> bool:
        return decl in self.quals

    def items(self):
        return self.quals.items()

    def to_json(self) -> str:
        rows = []
        for decl, q in self.quals.items():
            if decl[0] == "var":
                row = {"kind": "var", "function": decl[1], "name": decl[2]}
            elif decl[0] == "field":
                row = {"kind": "field", "struct": decl[1], "name": decl[2]}
            else:
                row = {"kind": "return", "function": decl[1]}
            row.update({"mutable": q.mutable, "fat": q.fat})
            rows.append(row)
        return json.dumps(rows, indent=2)


def pointer_decls(program: Program) -> list:
    decls = []
    for s in program.structs:
        for fname, fty in s.fields:
            if is_pointer(fty):
                decls.append(("field", s.name, fname))
    for fn in program.functions:
        for name, ty in function_env(fn).items():
            if is_pointer(ty):
                decls.append(("var", fn.name, name))
        if is_pointer(fn.return_type):
            decls.append(("ret", fn.name))
    return decls


def _decl_steps(place: Place, env, program: Program, fn_name: str):
    """(declarations dereferenced along the place, declaration of the
    last component).  A bare deref keeps the current declaration."""
    cur_ty = env[place.base]
    cur_decl = ("var", fn_name, place.base)
    derefed = []
    for sel in place.selectors:
        derefed.append(cur_decl)
        if isinstance(sel, FieldSel):
            sname = cur_ty.pointee.name
            cur_decl = ("field", sname, sel.name)
            cur_ty = program.struct(sname).field_type(sel.name)
        else:  # DerefSel or IndexSel
            cur_ty = cur_ty.pointee
    return derefed, cur_decl


def _walk(program: Program, on_place, on_stmt):
    for fn in program.functions:
        env = function_env(fn)
        for st in stmts_iter(fn.body):
            on_stmt(fn, env, st)


def _places_of_expr(e):
    if isinstance(e, PlaceExpr):
        yield e.place
    elif isinstance(e, BinOp):
        yield from _places_of_expr(e.left)
        yield from _places_of_expr(e.right)


class _Analysis:
    def __init__(self, program: Program):
        self.program = program
        self.quals = {d: Quals() for d in pointer_decls(program)}
        self.mut_edges: list = []  # (src, dst): mutable(src) implies mutable(dst)
        self.fat_edges: list = []  # undirected

    def decl(self, place, env, fn):
        return _decl_steps(place, env, self.program, fn.name)

    def seed_mut(self, decl):
        if decl in self.quals:
            self.quals[decl].mutable = True

    def seed_fat(self, decl):
        if decl in self.quals:
            self.quals[decl].fat = True

    def fat_seeds_of_indexing(self, place, env, fn):
        """Indexing marks the indexed pointer fat."""
        if not place.has_index:
            return
        trimmed = place.without_index()
        _, decl = self.decl(trimmed, env, fn)
        self.seed_fat(decl)

    def scan_places_for_indexing(self, fn, env, st):
        places = []
        if isinstance(st, Assign):
            places.append(st.lhs)
            if isinstance(st.rhs, PlaceRv):
                places.append(st.rhs.place)
            elif isinstance(st.rhs, IntExpr):
                places.extend(_places_of_expr(st.rhs.expr))
            elif isinstance(st.rhs, Realloc):
                places.append(st.rhs.src)
        elif isinstance(st, LocalDecl) and st.init is not None:
            if isinstance(st.init, PlaceRv):
                places.append(st.init.place)
            elif isinstance(st.init, IntExpr):
                places.extend(_places_of_expr(st.init.expr))
        elif isinstance(st, FreeStmt):
            places.append(st.place)
        elif isinstance(st, (If, While)):
            cond = st.cond
            if isinstance(cond, (NullTest, NonNullTest)):
                places.append(cond.place)
            else:
                places.extend(_places_of_expr(cond.expr))
        elif isinstance(st, Return) and isinstance(st.value, PlaceRv):
            places.append(st.value.place)
        elif isinstance(st, CallStmt):
            for arg in st.args:
                if isinstance(arg, OutArg):
                    places.append(arg.place)
                elif isinstance(arg.value, PlaceRv):
                    places.append(arg.value.place)
                elif isinstance(arg.value, IntExpr):
                    places.extend(_places_of_expr(arg.value.expr))
        for pl in places:
            self.fat_seeds_of_indexing(pl, env, fn)

    def scan(self, fn, env, st):
        self.scan_places_for_indexing(fn, env, st)

        def assign_like(lhs: Place, rhs):
            derefed, lhs_decl = self.decl(lhs, env, fn)
            for d in derefed:
                self.seed_mut(d)
            if lhs.has_index:
                return  # array contents are untracked
            lty = None
            try:
                from .ir import place_type
                lty = place_type(lhs, env, self.program)
            except Exception:
                pass
            if isinstance(rhs, (Malloc, Calloc)):
                scaled = isinstance(rhs, Calloc) or rhs.count is not None
                if scaled:
                    self.seed_fat(lhs_decl)
            elif isinstance(rhs, Realloc):
                if rhs.count is not None:
                    self.seed_fat(lhs_decl)
                _, src_decl = self.decl(rhs.src, env, fn)
                self.seed_mut(src_decl)
                self.fat_edges.append((lhs_decl, src_decl))
            elif isinstance(rhs, PlaceRv) and is_pointer(lty) and not rhs.place.has_index:
                _, rhs_decl = self.decl(rhs.place, env, fn)
                self.mut_edges.append((lhs_decl, rhs_decl))
                self.fat_edges.append((lhs_decl, rhs_decl))

        if isinstance(st, Assign):
            assign_like(st.lhs, st.rhs)
        elif isinstance(st, LocalDecl) and st.init is not None:
            assign_like(Place(st.name), st.init)
        elif isinstance(st, FreeStmt):
            _, decl = self.decl(st.place, env, fn)
            self.seed_mut(decl)
        elif isinstance(st, Return) and isinstance(st.value, PlaceRv) \
                and not st.value.place.has_index:
            if is_pointer(fn.return_type):
                _, decl = self.decl(st.value.place, env, fn)
                ret = ("ret", fn.name)
                self.mut_edges.append((ret, decl))
                self.fat_edges.append((ret, decl))
        elif isinstance(st, CallStmt):
            callee = self.program.function(st.callee)
            if st.callee == "memset" and st.args:
                arg = st.args[0]
                pl = arg.place if isinstance(arg, OutArg) else (
                    arg.value.place if isinstance(arg.value, PlaceRv) else None)
                if pl is not None:
                    _, decl = self.decl(pl, env, fn)
                    self.seed_mut(decl)
                    self.seed_fat(decl)
            if callee is None:
                return
            for arg, (pname, pty) in zip(st.args, callee.params):
                if not is_pointer(pty):
                    continue
                pdecl = ("var", st.callee, pname)
                if isinstance(arg, OutArg):
                    _, adecl = self.decl(arg.place, env, fn)
                    self.seed_mut(adecl)
                    self.mut_edges.append((pdecl, adecl))
                    self.fat_edges.append((pdecl, adecl))
                elif isinstance(arg.value, PlaceRv) and not arg.value.place.has_index:
                    _, adecl = self.decl(arg.value.place, env, fn)
                    self.mut_edges.append((pdecl, adecl))
                    self.fat_edges.append((pdecl, adecl))
            if st.result is not None and is_pointer(callee.return_type):
                rdecl = ("var", fn.name, st.result)
                ret = ("ret", st.callee)
                self.mut_edges.append((rdecl, ret))
                self.fat_edges.append((rdecl, ret))

    def fixpoint(self):
        changed = True
        while changed:
            changed = False
            for src, dst in self.mut_edges:
                if src in self.quals and dst in self.quals \
                        and self.quals[src].mutable and not self.quals[dst].mutable:
                    self.quals[dst].mutable = True
                    changed = True
            for a, b in self.fat_edges:
                if a not in self.quals or b not in self.quals:
                    continue
                fa, fb = self.quals[a].fat, self.quals[b].fat
                if fa != fb:
                    self.quals[a].fat = self.quals[b].fat = True
                    changed = True


def infer_qualifiers(program: Program) -> QualifierMap:
    an = _Analysis(program)
    for fn in program.functions:
        env = function_env(fn)
        for st in stmts_iter(fn.body):
            an.scan(fn, env, st)
    an.fixpoint()
    return QualifierMap(an.quals)


def infer_mutability(program: Program) -> QualifierMap:
    return infer_qualifiers(program)


def infer_fatness(program: Program) -> QualifierMap:
    return infer_qualifiers(program)
