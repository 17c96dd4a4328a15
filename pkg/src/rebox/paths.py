"""Access paths: a base variable plus a chain of selection steps.

A path names the pointer reached by following its selectors from the
base variable; its textual form `(*(*x).f).g` is canonical and used in
JSON dumps and diagnostics.  Selectors are field names, or None for a
bare dereference through a nested pointer.  Array indexing is not a
path step: array contents are never tracked.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import (
    FieldSel, DerefSel, IndexSel, IntType, Place, Program, PtrType,
    StructType, function_env, is_pointer, pointer_depth, stmts_iter,
    Assign, FreeStmt, If, While, Return, CallStmt, LocalDecl, OutArg, InArg,
    PlaceRv, NullTest, NonNullTest, PlaceExpr, BinOp, IntExpr, Realloc,
)


@dataclass(frozen=True)
class AccessPath:
    base: str
    selectors: tuple = ()  # field names (str) or None for a bare deref

    @property
    def length(self) -> int:
        return 1 + len(self.selectors)

    def extend(self, selector) -> "AccessPath":
        return AccessPath(self.base, self.selectors + (selector,))

    def text(self) -> str:
        out = self.base
        for s in self.selectors:
            out = f"(*{out})" if s is None else f"(*{out}).{s}"
        return out

    def __str__(self) -> str:
        return self.text()


def is_prefix(p: AccessPath, q: AccessPath) -> bool:
    """True iff p and q share a base and p's selectors lead into q's."""
    return (p.base == q.base
            and len(p.selectors) <= len(q.selectors)
            and q.selectors[: len(p.selectors)] == p.selectors)


def path_of_place(place: Place) -> AccessPath:
    """The access path named by an index-free place."""
    sels = []
    for s in place.selectors:
        if isinstance(s, FieldSel):
            sels.append(s.name)
        elif isinstance(s, DerefSel):
            sels.append(None)
        else:
            raise ValueError(f"place '{place}' indexes an array and has no access path")
    return AccessPath(place.base, tuple(sels))


@dataclass(frozen=True)
class PathBound:
    k: int


def enumerate_ap(var: str, lb: int, ub: int, var_type, program: Program) -> list:
    """All type-valid paths based at `var` with length in [lb, ub].

    Deterministic: breadth-first, fields in declaration order.  The
    upper bound makes enumeration over recursive struct types finite.
    """
    assert 1 <= lb <= ub
    out = []
    frontier = [(AccessPath(var), var_type)]
    depth = 1
    while frontier and depth <= ub:
        nxt = []
        for path, ty in frontier:
            if not is_pointer(ty):
                continue
            if depth >= lb:
                out.append(path)
            pointee = ty.pointee
            if isinstance(pointee, StructType):
                sdef = program.struct(pointee.name)
                if sdef is not None:
                    for fname, fty in sdef.pointer_fields():
                        nxt.append((path.extend(fname), fty))
            elif isinstance(pointee, PtrType):
                nxt.append((path.extend(None), pointee))
        frontier = nxt
        depth += 1
    return out


def _place_lengths(fn, program):
    env = function_env(fn)

    def places_of_rvalue(rv):
        if isinstance(rv, PlaceRv):
            yield rv.place
        elif isinstance(rv, Realloc):
            yield rv.src
        elif isinstance(rv, IntExpr):
            yield from places_of_expr(rv.expr)

    def places_of_expr(e):
        if isinstance(e, PlaceExpr):
            yield e.place
        elif isinstance(e, BinOp):
            yield from places_of_expr(e.left)
            yield from places_of_expr(e.right)

    for st in stmts_iter(fn.body):
        places = []
        if isinstance(st, Assign):
            places.append(st.lhs)
            places.extend(places_of_rvalue(st.rhs))
        elif isinstance(st, LocalDecl) and st.init is not None:
            places.extend(places_of_rvalue(st.init))
        elif isinstance(st, FreeStmt):
            places.append(st.place)
        elif isinstance(st, (If, While)):
            cond = st.cond
            if isinstance(cond, (NullTest, NonNullTest)):
                places.append(cond.place)
            else:
                places.extend(places_of_expr(cond.expr))
        elif isinstance(st, Return) and st.value is not None:
            places.extend(places_of_rvalue(st.value))
        elif isinstance(st, CallStmt):
            for arg in st.args:
                if isinstance(arg, OutArg):
                    places.append(arg.place)
                else:
                    places.extend(places_of_rvalue(arg.value))
        for pl in places:
            yield pl.path_len


def compute_k(program: Program) -> PathBound:
    """Pick the path-length bound for a whole program.

    k covers every place written in the source, every declared pointer
    depth, and is at least 2 whenever some struct carries a pointer
    field so that field paths stay visible.
    """
    k = 1
    for fn in program.functions:
        for length in _place_lengths(fn, program):
            k = max(k, length)
        for _, ty in fn.params:
            k = max(k, pointer_depth(ty))
        for decl_ty in function_env(fn).values():
            k = max(k, pointer_depth(decl_ty))
        if fn.return_type is not None:
            k = max(k, pointer_depth(fn.return_type))
    for s in program.structs:
        for _, fty in s.fields:
            k = max(k, pointer_depth(fty))
        if s.pointer_fields():
            k = max(k, 2)
    return PathBound(k)
