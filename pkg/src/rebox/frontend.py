"""Frontend passes: program validation, output-parameter detection and
normalization.

Normalization does three things:

* branch conditions are canonicalized so the non-null branch of a null
  test is always the `then` branch;
* an explicit `q = NULL` is inserted into the null branch whenever the
  non-null branch releases or moves the tested place, so both branches
  agree on the place's status at the join;
* loops receive entry/exit markers (loop ids) and every statement gets
  a stable program-point id.
"""

from __future__ import annotations

from dataclasses import replace

from .ir import (
    Assign, CallStmt, Calloc, FreeStmt, FunctionDef, If, InArg, IntExpr,
    IntType, LocalDecl, Malloc, MiniCError, NonNullTest, NullRv, NullTest,
    OutArg, Place, PlaceExpr, PlaceRv, Program, PtrType, Realloc, Return,
    ScalarCond, StructType, TypeMismatch, UnsupportedConstruct, While,
    BinOp, IntLit, clone_program, function_env, is_pointer, local_decls,
    place_type, pointer_depth, stmts_iter, INTRINSICS,
)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _check_expr(expr, env, program):
    if isinstance(expr, PlaceExpr):
        ty = place_type(expr.place, env, program)
        if is_pointer(ty) and not expr.place.has_index:
            # pointer values may only appear in assignments/conditions
            raise TypeMismatch(f"pointer '{expr.place}' used in arithmetic")
    elif isinstance(expr, BinOp):
        _check_expr(expr.left, env, program)
        _check_expr(expr.right, env, program)


def _check_assign(st: Assign, env, program):
    lty = place_type(st.lhs, env, program)
    rhs = st.rhs
    if isinstance(rhs, IntExpr):
        if is_pointer(lty):
            raise TypeMismatch(f"scalar assigned to pointer '{st.lhs}'", st.line, st.col)
        _check_expr(rhs.expr, env, program)
        return
    if isinstance(rhs, NullRv):
        if not is_pointer(lty):
            raise TypeMismatch(f"NULL assigned to non-pointer '{st.lhs}'", st.line, st.col)
        return
    if isinstance(rhs, (Malloc, Calloc)):
        if not isinstance(lty, PtrType) or lty.pointee != rhs.elem:
            raise TypeMismatch(f"allocation element type does not match '{st.lhs}'",
                               st.line, st.col)
        return
    if isinstance(rhs, Realloc):
        sty = place_type(rhs.src, env, program)
        if sty != lty:
            raise TypeMismatch("realloc source/destination types differ", st.line, st.col)
        if not isinstance(lty, PtrType) or lty.pointee != rhs.elem:
            raise TypeMismatch("realloc element type does not match destination",
                               st.line, st.col)
        return
    assert isinstance(rhs, PlaceRv)
    rty = place_type(rhs.place, env, program)
    if rhs.cast is not None:
        if is_pointer(rty) != is_pointer(rhs.cast):
            raise UnsupportedConstruct("casts between pointer and non-pointer types",
                                       st.line, st.col)
        if pointer_depth(rhs.cast) != pointer_depth(rty):
            raise UnsupportedConstruct("casts between pointer depths", st.line, st.col)
        rty = rhs.cast
    if is_pointer(lty) != is_pointer(rty):
        raise TypeMismatch(f"pointer/scalar mismatch in '{st.lhs} = {rhs.place}'",
                           st.line, st.col)
    if is_pointer(lty) and lty != rty:
        raise TypeMismatch(f"incompatible pointer types in '{st.lhs} = {rhs.place}'",
                           st.line, st.col)


def _check_cond(cond, env, program, line=0, col=0):
    if isinstance(cond, (NullTest, NonNullTest)):
        if cond.place.has_index:
            raise TypeMismatch("null test on an array element", line, col)
        if not is_pointer(place_type(cond.place, env, program)):
            raise TypeMismatch(f"null test on non-pointer '{cond.place}'", line, col)
    else:
        _check_expr(cond.expr, env, program)


def _check_call(st: CallStmt, env, program):
    callee = program.function(st.callee)
    if callee is not None:
        if len(st.args) != len(callee.params):
            raise TypeMismatch(f"call to {st.callee}: expected {len(callee.params)} "
                               f"arguments, got {len(st.args)}", st.line, st.col)
        for arg, (pname, pty) in zip(st.args, callee.params):
            if isinstance(arg, OutArg):
                aty = place_type(arg.place, env, program)
                if arg.place.has_index:
                    raise TypeMismatch("output argument cannot be an array element",
                                       st.line, st.col)
                if aty != pty:
                    raise TypeMismatch(f"output argument '{arg.place}' does not match "
                                       f"parameter {pname}", st.line, st.col)
            else:
                val = arg.value
                if isinstance(val, PlaceRv):
                    aty = place_type(val.place, env, program)
                    if is_pointer(pty) and aty != pty:
                        raise TypeMismatch(f"argument '{val.place}' does not match "
                                           f"parameter {pname}", st.line, st.col)
                    if not is_pointer(pty) and is_pointer(aty) and not val.place.has_index:
                        raise TypeMismatch(f"pointer argument for scalar parameter {pname}",
                                           st.line, st.col)
                elif isinstance(val, IntExpr):
                    if is_pointer(pty):
                        raise TypeMismatch(f"scalar argument for pointer parameter {pname}",
                                           st.line, st.col)
                    _check_expr(val.expr, env, program)
                elif isinstance(val, NullRv):
                    if not is_pointer(pty):
                        raise TypeMismatch(f"NULL argument for scalar parameter {pname}",
                                           st.line, st.col)
                else:
                    raise TypeMismatch("allocations cannot appear as call arguments",
                                       st.line, st.col)
        if st.result is not None:
            if st.result not in env:
                raise TypeMismatch(f"unknown result variable '{st.result}'", st.line, st.col)
            if callee.return_type is None:
                raise TypeMismatch(f"{st.callee} returns void", st.line, st.col)
            rty = env[st.result]
            if is_pointer(callee.return_type) and rty != callee.return_type:
                raise TypeMismatch("call result type mismatch", st.line, st.col)
    else:
        # intrinsics and extern functions: only shape-check the places
        for arg in st.args:
            if isinstance(arg, OutArg):
                place_type(arg.place, env, program)
            elif isinstance(arg.value, PlaceRv):
                place_type(arg.value.place, env, program)
            elif isinstance(arg.value, IntExpr):
                _check_expr(arg.value.expr, env, program)
        if st.result is not None and st.result not in env:
            raise TypeMismatch(f"unknown result variable '{st.result}'", st.line, st.col)


def _must_return(body) -> bool:
    for st in body:
        if isinstance(st, Return):
            return True
        if isinstance(st, If) and _must_return(st.then) and _must_return(st.els):
            return True
    return False


def check_program(program: Program) -> None:
    """Validate name resolution, typing and structural invariants."""
    seen = set()
    for s in program.structs:
        if s.name in seen:
            raise TypeMismatch(f"duplicate struct '{s.name}'", s.line)
        seen.add(s.name)
        fnames = set()
        for fname, fty in s.fields:
            if fname in fnames:
                raise TypeMismatch(f"duplicate field '{fname}' in struct {s.name}", s.line)
            fnames.add(fname)
            if isinstance(fty, StructType):
                raise TypeMismatch(f"struct-valued field '{fname}' in {s.name}; "
                                   "recursive types must go through a pointer", s.line)
            _check_named_types(fty, program, s.line)
    fseen = set()
    for f in program.functions:
        if f.name in fseen:
            raise TypeMismatch(f"duplicate function '{f.name}'", f.line)
        fseen.add(f.name)

    for f in program.functions:
        _check_function(f, program)


def _check_named_types(ty, program, line):
    while isinstance(ty, PtrType):
        ty = ty.pointee
    if isinstance(ty, StructType) and program.struct(ty.name) is None:
        raise TypeMismatch(f"unknown struct '{ty.name}'", line)


def _check_function(fn: FunctionDef, program: Program) -> None:
    names = set()
    for pname, pty in fn.params:
        if pname in names:
            raise TypeMismatch(f"duplicate parameter '{pname}' in {fn.name}", fn.line)
        names.add(pname)
        if isinstance(pty, StructType):
            raise TypeMismatch(f"struct-valued parameter '{pname}'", fn.line)
        _check_named_types(pty, program, fn.line)
    for decl in local_decls(fn.body):
        if decl.name in names:
            raise TypeMismatch(f"duplicate declaration of '{decl.name}' in {fn.name}",
                               decl.line, decl.col)
        names.add(decl.name)
        if isinstance(decl.ty, StructType):
            raise TypeMismatch(f"struct-valued variable '{decl.name}'", decl.line, decl.col)
        _check_named_types(decl.ty, program, decl.line)
    if fn.return_type is not None:
        _check_named_types(fn.return_type, program, fn.line)
        if isinstance(fn.return_type, StructType):
            raise TypeMismatch("struct-valued return type", fn.line)

    env = function_env(fn)
    for st in stmts_iter(fn.body):
        if isinstance(st, LocalDecl):
            if st.init is not None:
                _check_assign(Assign(lhs=Place(st.name), rhs=st.init,
                                     line=st.line, col=st.col), env, program)
        elif isinstance(st, Assign):
            _check_assign(st, env, program)
        elif isinstance(st, FreeStmt):
            if st.place.has_index:
                raise TypeMismatch("free of an array element", st.line, st.col)
            if not is_pointer(place_type(st.place, env, program)):
                raise TypeMismatch(f"free of non-pointer '{st.place}'", st.line, st.col)
        elif isinstance(st, If):
            _check_cond(st.cond, env, program, st.line, st.col)
        elif isinstance(st, While):
            _check_cond(st.cond, env, program, st.line, st.col)
        elif isinstance(st, CallStmt):
            _check_call(st, env, program)
        elif isinstance(st, Return):
            if st.value is None:
                if fn.return_type is not None:
                    raise TypeMismatch(f"{fn.name} must return a value", st.line, st.col)
            else:
                if fn.return_type is None:
                    raise TypeMismatch(f"{fn.name} returns void", st.line, st.col)
                _check_assign(Assign(lhs=Place("$return"), rhs=st.value,
                                     line=st.line, col=st.col),
                              {**env, "$return": fn.return_type}, program)
    if is_pointer(fn.return_type) and not _must_return(fn.body):
        raise TypeMismatch(f"{fn.name} may fall off the end without returning a pointer",
                           fn.line)


# ---------------------------------------------------------------------------
# Output-parameter detection
# ---------------------------------------------------------------------------

def _moved_as_value(body, name: str) -> bool:
    """Is the bare variable used as an rvalue (moved/stored/returned)?
    A consumed pointer is not a result channel for the caller."""
    bare = Place(name)
    for st in stmts_iter(body):
        if isinstance(st, Assign) and isinstance(st.rhs, PlaceRv) and st.rhs.place == bare:
            return True
        if isinstance(st, Return) and isinstance(st.value, PlaceRv) and st.value.place == bare:
            return True
        if isinstance(st, CallStmt):
            for arg in st.args:
                if isinstance(arg, InArg) and isinstance(arg.value, PlaceRv) \
                        and arg.value.place == bare:
                    return True
    return False


def detect_output_params(program: Program) -> dict:
    """Map function name -> set of output-parameter names.

    A pointer parameter is an output parameter when the function stores
    or frees through it (an lvalue or free target rooted at it with at
    least one selector), when it is itself forwarded as an `&mut`
    output argument, or when some call site binds that position with
    `&mut` -- unless the parameter is consumed (moved as a bare value),
    in which case the caller does not retain the referent and the
    parameter is an ordinary (transferable) one.
    """
    out: dict = {f.name: set() for f in program.functions}
    for fn in program.functions:
        param_names = {n for n, t in fn.params if is_pointer(t)}
        for st in stmts_iter(fn.body):
            if isinstance(st, Assign) and st.lhs.selectors and st.lhs.base in param_names:
                out[fn.name].add(st.lhs.base)
            elif isinstance(st, FreeStmt) and st.place.selectors and st.place.base in param_names:
                out[fn.name].add(st.place.base)
            elif isinstance(st, CallStmt):
                for i, arg in enumerate(st.args):
                    if isinstance(arg, OutArg):
                        if arg.place.base in param_names:
                            out[fn.name].add(arg.place.base)
                        callee = program.function(st.callee)
                        if callee is not None and i < len(callee.params):
                            out[st.callee].add(callee.params[i][0])
    for fn in program.functions:
        out[fn.name] = {n for n in out[fn.name] if not _moved_as_value(fn.body, n)}
    return out


def _check_out_markers(program: Program) -> None:
    """Call sites must write `&mut` exactly at output-parameter positions."""
    for fn in program.functions:
        for st in stmts_iter(fn.body):
            if isinstance(st, CallStmt):
                callee = program.function(st.callee)
                if callee is None:
                    continue
                for arg, (pname, _) in zip(st.args, callee.params):
                    is_out = pname in callee.output_names
                    if is_out and not isinstance(arg, OutArg):
                        raise TypeMismatch(
                            f"parameter '{pname}' of {st.callee} is an output "
                            f"parameter; pass it as '&mut <place>'", st.line, st.col)
                    if not is_out and isinstance(arg, OutArg):
                        raise TypeMismatch(
                            f"parameter '{pname}' of {st.callee} is not an output "
                            f"parameter; drop the '&mut'", st.line, st.col)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def _releases_or_moves(body, place: Place) -> bool:
    for st in stmts_iter(body):
        if isinstance(st, FreeStmt) and st.place == place:
            return True
        if isinstance(st, Assign):
            if isinstance(st.rhs, PlaceRv) and st.rhs.place == place:
                return True
            if isinstance(st.rhs, Realloc) and st.rhs.src == place:
                return True
        if isinstance(st, CallStmt):
            for arg in st.args:
                if isinstance(arg, InArg) and isinstance(arg.value, PlaceRv) \
                        and arg.value.place == place:
                    return True
    return False


def _has_null_kill(body, place: Place) -> bool:
    return any(isinstance(st, Assign) and st.lhs == place and isinstance(st.rhs, NullRv)
               for st in body)


def _normalize_body(body) -> list:
    out = []
    for st in body:
        if isinstance(st, If):
            cond, then, els = st.cond, _normalize_body(st.then), _normalize_body(st.els)
            if isinstance(cond, NullTest):
                cond = NonNullTest(cond.place)
                then, els = els, then
            if isinstance(cond, NonNullTest):
                q = cond.place
                if not q.has_index and _releases_or_moves(then, q) and not _has_null_kill(els, q):
                    els = els + [Assign(lhs=q, rhs=NullRv(), line=st.line, col=st.col,
                                        synthetic=True)]
            out.append(replace(st, cond=cond, then=then, els=els))
        elif isinstance(st, While):
            out.append(replace(st, body=_normalize_body(st.body)))
        else:
            out.append(replace(st))
    return out


def _number_stmts(program: Program) -> None:
    uid = 0
    loop_id = 0

    def walk(body):
        nonlocal uid, loop_id
        for st in body:
            st.uid = uid
            uid += 1
            if isinstance(st, If):
                walk(st.then)
                walk(st.els)
            elif isinstance(st, While):
                st.loop_id = loop_id
                loop_id += 1
                walk(st.body)

    for fn in program.functions:
        walk(fn.body)


def normalize(program: Program) -> Program:
    """Validate and normalize a program. Pure: the input is not modified.

    Idempotent: normalize(normalize(p)) is structurally equal to
    normalize(p).
    """
    check_program(program)
    p = clone_program(program)
    for fn in p.functions:
        fn.body = _normalize_body(fn.body)
    outs = detect_output_params(p)
    for fn in p.functions:
        fn.output_names = tuple(n for n, _ in fn.params if n in outs[fn.name])
    _check_out_markers(p)
    _number_stmts(p)
    return p


def parse_and_normalize(text: str, source_name: str = "<input>") -> Program:
    from .parser import parse_program
    return normalize(parse_program(text, source_name))
