"""Typed IR for MiniC, a small C-like pointer language.

The IR is deliberately tiny: integers, raw pointers (possibly nested),
structs whose fields are integers or pointers, and structured control
flow.  Everything is an immutable-ish dataclass so that passes can
rebuild programs without sharing mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Union


class MiniCError(Exception):
    """Base class for diagnostics carrying a source position."""

    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(msg)
        self.msg = msg
        self.line = line
        self.col = col

    def __str__(self) -> str:
        if self.line:
            return f"line {self.line}, col {self.col}: {self.msg}"
        return self.msg


class ParseError(MiniCError):
    pass


class UnsupportedConstruct(MiniCError):
    """Constructs MiniC rejects outright: unions, variadics, function
    pointers, casts that change pointer depth, goto."""


class TypeMismatch(MiniCError):
    pass


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntType:
    def __str__(self) -> str:
        return "int"


@dataclass(frozen=True)
class StructType:
    name: str

    def __str__(self) -> str:
        return f"struct {self.name}"


@dataclass(frozen=True)
class PtrType:
    pointee: "Type"

    def __str__(self) -> str:
        return f"{self.pointee} *"


Type = Union[IntType, StructType, PtrType]

VOID = None  # return type of void functions


def is_pointer(t: Optional[Type]) -> bool:
    return isinstance(t, PtrType)


def pointer_depth(t: Optional[Type]) -> int:
    d = 0
    while isinstance(t, PtrType):
        d += 1
        t = t.pointee
    return d


# ---------------------------------------------------------------------------
# Places (lvalues)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldSel:
    """One dereference-then-field step: (*x).name."""
    name: str


@dataclass(frozen=True)
class DerefSel:
    """A bare dereference step, only meaningful through nested pointers."""


@dataclass(frozen=True)
class IndexSel:
    """Array indexing p[i]; always the last selector of a place."""
    index: "Expr"


Selector = Union[FieldSel, DerefSel, IndexSel]


@dataclass(frozen=True)
class Place:
    base: str
    selectors: tuple = ()

    @property
    def has_index(self) -> bool:
        return any(isinstance(s, IndexSel) for s in self.selectors)

    @property
    def path_len(self) -> int:
        """1 + number of non-index selectors."""
        return 1 + sum(1 for s in self.selectors if not isinstance(s, IndexSel))

    def without_index(self) -> "Place":
        return Place(self.base, tuple(s for s in self.selectors if not isinstance(s, IndexSel)))

    def __str__(self) -> str:
        out = self.base
        for s in self.selectors:
            if isinstance(s, FieldSel):
                out = f"(*{out}).{s.name}"
            elif isinstance(s, DerefSel):
                out = f"(*{out})"
            else:
                out = f"{out}[{s.index}]"
        return out


# ---------------------------------------------------------------------------
# Expressions (scalar only)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntLit:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class PlaceExpr:
    place: Place

    def __str__(self) -> str:
        return str(self.place)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


Expr = Union[IntLit, PlaceExpr, BinOp]


# ---------------------------------------------------------------------------
# Conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NullTest:
    place: Place

    def __str__(self) -> str:
        return f"{self.place} == NULL"


@dataclass(frozen=True)
class NonNullTest:
    place: Place

    def __str__(self) -> str:
        return f"{self.place} != NULL"


@dataclass(frozen=True)
class ScalarCond:
    expr: Expr

    def __str__(self) -> str:
        return str(self.expr)


Cond = Union[NullTest, NonNullTest, ScalarCond]


# ---------------------------------------------------------------------------
# Rvalues
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlaceRv:
    place: Place
    cast: Optional[Type] = None


@dataclass(frozen=True)
class Malloc:
    elem: Type
    count: Optional[Expr] = None  # non-None => size-scaled (array) allocation


@dataclass(frozen=True)
class Calloc:
    elem: Type
    count: Expr


@dataclass(frozen=True)
class Realloc:
    src: Place
    elem: Type
    count: Optional[Expr] = None


@dataclass(frozen=True)
class NullRv:
    pass


@dataclass(frozen=True)
class IntExpr:
    expr: Expr


Rvalue = Union[PlaceRv, Malloc, Calloc, Realloc, NullRv, IntExpr]


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------

@dataclass
class Stmt:
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)
    uid: int = -1            # program point id, assigned by normalize
    synthetic: bool = False  # inserted by normalization, dropped at emission


@dataclass
class LocalDecl(Stmt):
    name: str = ""
    ty: Type = None
    init: Optional[Rvalue] = None


@dataclass
class Assign(Stmt):
    lhs: Place = None
    rhs: Rvalue = None


@dataclass
class FreeStmt(Stmt):
    place: Place = None


@dataclass
class If(Stmt):
    cond: Cond = None
    then: list = field(default_factory=list)
    els: list = field(default_factory=list)


@dataclass
class While(Stmt):
    cond: Cond = None
    body: list = field(default_factory=list)
    loop_id: int = -1  # loop entry/exit marker, assigned by normalize


@dataclass
class Return(Stmt):
    value: Optional[Rvalue] = None


@dataclass
class OutArg:
    """A call argument written `&mut place`; binds an output parameter."""
    place: Place


@dataclass
class InArg:
    value: Rvalue


CallArg = Union[OutArg, InArg]


@dataclass
class CallStmt(Stmt):
    result: Optional[str] = None
    callee: str = ""
    args: list = field(default_factory=list)

    @property
    def out_args(self) -> list:
        return [a for a in self.args if isinstance(a, OutArg)]

    @property
    def in_args(self) -> list:
        return [a for a in self.args if isinstance(a, InArg)]


# ---------------------------------------------------------------------------
# Definitions
# ---------------------------------------------------------------------------

@dataclass
class StructDef:
    name: str
    fields: list  # list of (name, Type)
    line: int = field(default=0, compare=False)

    def field_type(self, name: str) -> Optional[Type]:
        for fname, fty in self.fields:
            if fname == name:
                return fty
        return None

    def pointer_fields(self) -> list:
        return [(n, t) for (n, t) in self.fields if is_pointer(t)]


@dataclass
class FunctionDef:
    name: str
    return_type: Optional[Type]
    params: list  # list of (name, Type), source order
    body: list
    line: int = field(default=0, compare=False)
    # names of parameters acting as output parameters; filled by the
    # frontend's output-parameter detection pass
    output_names: tuple = ()

    @property
    def output_params(self) -> list:
        return [(n, t) for (n, t) in self.params if n in self.output_names]

    @property
    def normal_params(self) -> list:
        return [(n, t) for (n, t) in self.params if n not in self.output_names]

    def param_type(self, name: str) -> Optional[Type]:
        for pname, pty in self.params:
            if pname == name:
                return pty
        return None


@dataclass
class Program:
    structs: list
    functions: list
    source_name: str = field(default="<input>", compare=False)

    @property
    def type_env(self) -> dict:
        env = {s.name: s for s in self.structs}
        env.update({f.name: f for f in self.functions})
        return env

    def struct(self, name: str) -> Optional[StructDef]:
        for s in self.structs:
            if s.name == name:
                return s
        return None

    def function(self, name: str) -> Optional[FunctionDef]:
        for f in self.functions:
            if f.name == name:
                return f
        return None


INTRINSICS = ("memset", "strcmp")


# ---------------------------------------------------------------------------
# Local environments and place typing
# ---------------------------------------------------------------------------

def local_decls(body: list) -> Iterator[LocalDecl]:
    """All local declarations in a function body, in source order.

    Locals are treated as function-scoped (hoisted), mirroring how a
    mid-level IR flattens block scopes.
    """
    for st in body:
        if isinstance(st, LocalDecl):
            yield st
        elif isinstance(st, If):
            yield from local_decls(st.then)
            yield from local_decls(st.els)
        elif isinstance(st, While):
            yield from local_decls(st.body)


def function_env(fn: FunctionDef) -> dict:
    """Variable name -> declared type, parameters plus hoisted locals."""
    env = {}
    for name, ty in fn.params:
        env[name] = ty
    for decl in local_decls(fn.body):
        env[decl.name] = decl.ty
    return env


def place_type(place: Place, env: dict, program: Program) -> Type:
    """Resolve a place against the local environment. Raises TypeMismatch."""
    if place.base not in env:
        raise TypeMismatch(f"unknown variable '{place.base}'")
    cur = env[place.base]
    for sel in place.selectors:
        if isinstance(sel, FieldSel):
            if not isinstance(cur, PtrType) or not isinstance(cur.pointee, StructType):
                raise TypeMismatch(f"field access through non-struct-pointer in '{place}'")
            sdef = program.struct(cur.pointee.name)
            if sdef is None:
                raise TypeMismatch(f"unknown struct '{cur.pointee.name}'")
            fty = sdef.field_type(sel.name)
            if fty is None:
                raise TypeMismatch(f"struct {sdef.name} has no field '{sel.name}'")
            cur = fty
        elif isinstance(sel, DerefSel):
            if not isinstance(cur, PtrType):
                raise TypeMismatch(f"dereference of non-pointer in '{place}'")
            if isinstance(cur.pointee, StructType):
                raise TypeMismatch(f"struct value access in '{place}' is not supported")
            cur = cur.pointee
        else:  # IndexSel
            if not isinstance(cur, PtrType):
                raise TypeMismatch(f"indexing of non-pointer in '{place}'")
            if isinstance(cur.pointee, StructType):
                raise TypeMismatch(f"indexing into struct elements in '{place}' is not supported")
            cur = cur.pointee
    return cur


def stmts_iter(body: list) -> Iterator[Stmt]:
    """Pre-order walk over all statements, including nested ones."""
    for st in body:
        yield st
        if isinstance(st, If):
            yield from stmts_iter(st.then)
            yield from stmts_iter(st.els)
        elif isinstance(st, While):
            yield from stmts_iter(st.body)


def clone_program(p: Program) -> Program:
    """Deep structural copy (statement lists are rebuilt, leaves shared)."""

    def clone_body(body: list) -> list:
        out = []
        for st in body:
            if isinstance(st, If):
                out.append(replace(st, then=clone_body(st.then), els=clone_body(st.els)))
            elif isinstance(st, While):
                out.append(replace(st, body=clone_body(st.body)))
            else:
                out.append(replace(st))
        return out

    fns = [replace(f, body=clone_body(f.body)) for f in p.functions]
    return Program(structs=list(p.structs), functions=fns, source_name=p.source_name)
