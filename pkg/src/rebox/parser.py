"""Recursive-descent parser for MiniC.

Grammar (sketch):

    program   := (structdef | fndef)*
    structdef := "struct" ident "{" (type ident ";")* "}" ";"?
    type      := ("int" | "void" | "struct" ident) "*"*
    fndef     := type ident "(" params ")" block
    stmt      := type ident ("=" rvalue)? ";"
               | place "=" rvalue ";"
               | ident "=" ident "(" args ")" ";"
               | ident "(" args ")" ";"
               | "free" "(" place ")" ";"
               | "if" "(" cond ")" block ("else" block)?
               | "while" "(" cond ")" block
               | "return" rvalue? ";"
    place     := ident | "(*" place ")" "." ident | "*" place
               | place "->" ident | place "[" expr "]"

Unions, variadic parameter lists, function-pointer declarators and
casts that change pointer depth are rejected with UnsupportedConstruct.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import (
    Assign, BinOp, CallStmt, Calloc, DerefSel, FieldSel, FreeStmt, FunctionDef,
    If, InArg, IndexSel, IntExpr, IntLit, IntType, LocalDecl, Malloc, NonNullTest,
    NullRv, NullTest, OutArg, ParseError, Place, PlaceExpr, PlaceRv, Program,
    PtrType, Realloc, Return, ScalarCond, StructDef, StructType,
    UnsupportedConstruct, While, pointer_depth,
)

KEYWORDS = {
    "struct", "int", "void", "if", "else", "while", "return",
    "free", "malloc", "calloc", "realloc", "sizeof", "NULL", "mut",
}

REJECTED_KEYWORDS = {
    "union": "unions are not supported",
    "goto": "goto is not supported",
    "switch": "switch is not supported",
    "enum": "enums are not supported",
    "typedef": "typedefs are not supported",
}

PUNCT = [
    "->", "==", "!=", "<=", ">=", "...",
    "{", "}", "(", ")", "[", "]", ";", ",", "=", "<", ">",
    "+", "-", "*", "/", "%", "!", "&", ".",
]


@dataclass
class Token:
    kind: str  # 'ident' | 'int' | 'punct' | 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i)
            if j < 0:
                raise ParseError("unterminated comment", line, col)
            skipped = text[i:j + 2]
            line += skipped.count("\n")
            col = 1 if "\n" in skipped else col + len(skipped)
            i = j + 2
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Token("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for p in PUNCT:
            if text.startswith(p, i):
                toks.append(Token("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


class Parser:
    def __init__(self, tokens: list, source_name: str = "<input>"):
        self.toks = tokens
        self.pos = 0
        self.source_name = source_name

    # -- token plumbing -----------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.toks[min(self.pos + offset, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.text == text and t.kind in ("punct", "ident")

    def advance(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text:
            raise ParseError(f"expected {text!r}, got {t.text!r}", t.line, t.col)
        return self.advance()

    def expect_ident(self) -> Token:
        t = self.peek()
        self.check_rejected(t)
        if t.kind != "ident" or t.text in KEYWORDS:
            raise ParseError(f"expected identifier, got {t.text!r}", t.line, t.col)
        return self.advance()

    def check_rejected(self, t: Token) -> None:
        if t.text in REJECTED_KEYWORDS:
            raise UnsupportedConstruct(REJECTED_KEYWORDS[t.text], t.line, t.col)
        if t.text == "...":
            raise UnsupportedConstruct("variadic arguments are not supported", t.line, t.col)

    # -- types --------------------------------------------------------------

    def at_type(self) -> bool:
        t = self.peek()
        return t.text in ("int", "void") or (t.text == "struct")

    def parse_type(self, allow_void: bool = False):
        t = self.peek()
        self.check_rejected(t)
        if t.text == "void":
            self.advance()
            base = None
        elif t.text == "int":
            self.advance()
            base = IntType()
        elif t.text == "struct":
            self.advance()
            name = self.expect_ident().text
            base = StructType(name)
        else:
            raise ParseError(f"expected a type, got {t.text!r}", t.line, t.col)
        while self.at("*"):
            self.advance()
            if base is None:
                raise UnsupportedConstruct("void pointers are not supported", t.line, t.col)
            base = PtrType(base)
        if base is None and not allow_void:
            raise ParseError("void is only valid as a return type", t.line, t.col)
        return base

    # -- top level ----------------------------------------------------------

    def parse_program(self) -> Program:
        structs, functions = [], []
        while self.peek().kind != "eof":
            t = self.peek()
            self.check_rejected(t)
            if t.text == "struct" and self.peek(2).text == "{":
                structs.append(self.parse_struct())
            else:
                functions.append(self.parse_function())
        return Program(structs=structs, functions=functions, source_name=self.source_name)

    def parse_struct(self) -> StructDef:
        start = self.expect("struct")
        name = self.expect_ident().text
        self.expect("{")
        fields = []
        while not self.at("}"):
            fty = self.parse_type()
            if self.at("("):
                t = self.peek()
                raise UnsupportedConstruct("function pointers are not supported", t.line, t.col)
            fname = self.expect_ident().text
            if self.at("("):
                t = self.peek()
                raise UnsupportedConstruct("function pointers are not supported", t.line, t.col)
            self.expect(";")
            fields.append((fname, fty))
        self.expect("}")
        if self.at(";"):
            self.advance()
        return StructDef(name=name, fields=fields, line=start.line)

    def parse_function(self) -> FunctionDef:
        start = self.peek()
        ret = self.parse_type(allow_void=True)
        name_tok = self.expect_ident()
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                self.check_rejected(self.peek())
                if self.at("("):
                    t = self.peek()
                    raise UnsupportedConstruct("function pointers are not supported", t.line, t.col)
                pty = self.parse_type()
                if self.at("("):
                    t = self.peek()
                    raise UnsupportedConstruct("function pointers are not supported", t.line, t.col)
                pname = self.expect_ident().text
                params.append((pname, pty))
                if self.at(","):
                    self.advance()
                    continue
                break
        self.expect(")")
        body = self.parse_block()
        return FunctionDef(name=name_tok.text, return_type=ret, params=params,
                           body=body, line=start.line)

    def parse_block(self) -> list:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            stmts.append(self.parse_stmt())
        self.expect("}")
        return stmts

    # -- statements ----------------------------------------------------------

    def parse_stmt(self):
        t = self.peek()
        self.check_rejected(t)
        if self.at_type():
            return self.parse_decl()
        if t.text == "free":
            self.advance()
            self.expect("(")
            place = self.parse_place()
            self.expect(")")
            self.expect(";")
            return FreeStmt(place=place, line=t.line, col=t.col)
        if t.text == "if":
            return self.parse_if()
        if t.text == "while":
            return self.parse_while()
        if t.text == "return":
            self.advance()
            if self.at(";"):
                self.advance()
                return Return(value=None, line=t.line, col=t.col)
            value = self.parse_rvalue()
            self.expect(";")
            return Return(value=value, line=t.line, col=t.col)
        # call without result: ident "(" ...
        if t.kind == "ident" and t.text not in KEYWORDS and self.peek(1).text == "(":
            return self.parse_call(result=None, start=t)
        # place "=" (rvalue | call)
        place = self.parse_place()
        self.expect("=")
        nxt = self.peek()
        if (nxt.kind == "ident" and nxt.text not in KEYWORDS
                and self.peek(1).text == "("):
            if place.selectors:
                raise ParseError("call result must be bound to a plain variable",
                                 nxt.line, nxt.col)
            return self.parse_call(result=place.base, start=t)
        rhs = self.parse_rvalue()
        self.expect(";")
        return Assign(lhs=place, rhs=rhs, line=t.line, col=t.col)

    def parse_decl(self):
        t = self.peek()
        ty = self.parse_type()
        name = self.expect_ident().text
        if self.at("("):
            raise UnsupportedConstruct("nested function definitions are not supported",
                                       t.line, t.col)
        init = None
        if self.at("="):
            self.advance()
            init = self.parse_rvalue()
        self.expect(";")
        return LocalDecl(name=name, ty=ty, init=init, line=t.line, col=t.col)

    def parse_if(self):
        t = self.expect("if")
        self.expect("(")
        cond = self.parse_cond()
        self.expect(")")
        then = self.parse_block()
        els = []
        if self.at("else"):
            self.advance()
            els = self.parse_block()
        return If(cond=cond, then=then, els=els, line=t.line, col=t.col)

    def parse_while(self):
        t = self.expect("while")
        self.expect("(")
        cond = self.parse_cond()
        self.expect(")")
        body = self.parse_block()
        return While(cond=cond, body=body, line=t.line, col=t.col)

    def parse_call(self, result, start):
        callee = self.expect_ident().text
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                if self.at("&"):
                    amp = self.advance()
                    if self.peek().text != "mut":
                        raise ParseError("expected 'mut' after '&' (output arguments "
                                         "are written '&mut place')", amp.line, amp.col)
                    self.advance()
                    args.append(OutArg(place=self.parse_place()))
                else:
                    args.append(InArg(value=self.parse_rvalue()))
                if self.at(","):
                    self.advance()
                    continue
                break
        self.expect(")")
        self.expect(";")
        return CallStmt(result=result, callee=callee, args=args,
                        line=start.line, col=start.col)

    # -- conditions, rvalues, places, expressions ------------------------------

    def parse_cond(self):
        if self.at("!"):
            self.advance()
            place = self.parse_place()
            return NullTest(place=place)
        save = self.pos
        try:
            place = self.parse_place()
        except ParseError:
            self.pos = save
            return ScalarCond(expr=self.parse_expr())
        if self.at("=="):
            self.advance()
            if self.at("NULL"):
                self.advance()
                return NullTest(place=place)
            right = self.parse_expr()
            return ScalarCond(expr=BinOp("==", PlaceExpr(place), right))
        if self.at("!="):
            self.advance()
            if self.at("NULL"):
                self.advance()
                return NonNullTest(place=place)
            right = self.parse_expr()
            return ScalarCond(expr=BinOp("!=", PlaceExpr(place), right))
        if self.at(")"):
            return NonNullTest(place=place)
        self.pos = save
        return ScalarCond(expr=self.parse_expr())

    def parse_rvalue(self):
        t = self.peek()
        if t.text == "NULL":
            self.advance()
            return NullRv()
        cast = None
        # A cast is "(" type ... ")" — types start with int/struct, which
        # cannot begin a parenthesized arithmetic expression.
        if self.at("(") and self.peek(1).text in ("int", "struct"):
            self.advance()
            cast = self.parse_type()
            self.expect(")")
            t = self.peek()
        if t.text == "malloc":
            return self.parse_alloc("malloc", cast)
        if t.text == "calloc":
            return self.parse_alloc("calloc", cast)
        if t.text == "realloc":
            return self.parse_alloc("realloc", cast)
        if cast is not None:
            place = self.parse_place()
            return PlaceRv(place=place, cast=cast)
        save = self.pos
        try:
            place = self.parse_place()
        except ParseError:
            self.pos = save
            return IntExpr(expr=self.parse_expr())
        if self.at(";") or self.at(")") or self.at(","):
            return PlaceRv(place=place)
        self.pos = save
        return IntExpr(expr=self.parse_expr())

    def parse_alloc(self, kind: str, cast):
        t = self.advance()  # malloc/calloc/realloc
        self.expect("(")
        if kind == "calloc":
            count = self.parse_expr()
            self.expect(",")
            elem = self.parse_sizeof()
            self.expect(")")
            return Calloc(elem=elem, count=count)
        if kind == "realloc":
            src = self.parse_place()
            self.expect(",")
            elem, count = self.parse_size_arg(t)
            self.expect(")")
            return Realloc(src=src, elem=elem, count=count)
        elem, count = self.parse_size_arg(t)
        self.expect(")")
        return Malloc(elem=elem, count=count)

    def parse_size_arg(self, t):
        """sizeof(T), n * sizeof(T) or sizeof(T) * n."""
        if self.at("sizeof"):
            elem = self.parse_sizeof()
            if self.at("*"):
                self.advance()
                count = self.parse_expr()
                return elem, count
            return elem, None
        count = self.parse_expr()
        self.expect("*")
        elem = self.parse_sizeof()
        return elem, count

    def parse_sizeof(self):
        self.expect("sizeof")
        self.expect("(")
        ty = self.parse_type()
        self.expect(")")
        return ty

    def parse_place(self) -> Place:
        t = self.peek()
        if self.at("*"):
            self.advance()
            inner = self.parse_place()
            place = Place(inner.base, inner.selectors + (DerefSel(),))
        elif self.at("("):
            # "(*" place ")" "." ident
            self.advance()
            self.expect("*")
            inner = self.parse_place()
            self.expect(")")
            self.expect(".")
            fname = self.expect_ident().text
            place = Place(inner.base, inner.selectors + (FieldSel(fname),))
        elif t.kind == "ident" and t.text not in KEYWORDS:
            self.check_rejected(t)
            self.advance()
            place = Place(t.text)
        else:
            raise ParseError(f"expected a place, got {t.text!r}", t.line, t.col)
        # postfix: -> ident, [expr]
        while True:
            if self.at("->"):
                self.advance()
                fname = self.expect_ident().text
                place = Place(place.base, place.selectors + (FieldSel(fname),))
            elif self.at("["):
                self.advance()
                idx = self.parse_expr()
                self.expect("]")
                place = Place(place.base, place.selectors + (IndexSel(idx),))
                if self.at("->") or self.at("["):
                    t2 = self.peek()
                    raise ParseError("access through an array element is not supported",
                                     t2.line, t2.col)
                break
            else:
                break
        return place

    def parse_expr(self):
        return self.parse_cmp()

    def parse_cmp(self):
        left = self.parse_add()
        while self.peek().text in ("==", "!=", "<", "<=", ">", ">="):
            op = self.advance().text
            right = self.parse_add()
            left = BinOp(op, left, right)
        return left

    def parse_add(self):
        left = self.parse_mul()
        while self.peek().text in ("+", "-"):
            op = self.advance().text
            right = self.parse_mul()
            left = BinOp(op, left, right)
        return left

    def parse_mul(self):
        left = self.parse_atom()
        while self.peek().text in ("*", "/", "%"):
            if self.peek().text == "*" and self.peek(1).text == "sizeof":
                break  # `n * sizeof(T)` inside an allocation argument
            op = self.advance().text
            right = self.parse_atom()
            left = BinOp(op, left, right)
        return left

    def parse_atom(self):
        t = self.peek()
        self.check_rejected(t)
        if t.kind == "int":
            self.advance()
            return IntLit(int(t.text))
        if t.text == "-" :
            self.advance()
            inner = self.parse_atom()
            return BinOp("-", IntLit(0), inner)
        if t.text == "(":
            self.advance()
            e = self.parse_expr()
            self.expect(")")
            return e
        place = self.parse_place()
        return PlaceExpr(place)


def parse_program(text: str, source_name: str = "<input>") -> Program:
    """Parse MiniC source into an untyped-but-shaped Program.

    Validation (name resolution, place typing, call arity) happens in
    the frontend's check pass so that errors carry positions from here.
    """
    return Parser(tokenize(text), source_name).parse_program()
