import pytest
from hypothesis import given, settings, strategies as st

from rebox.cfg import build_cfg
from rebox.frontend import check_program, detect_output_params, normalize, parse_and_normalize
from rebox.ir import (
    Assign, FreeStmt, If, NonNullTest, NullRv, Place, TypeMismatch,
    UnsupportedConstruct, While, stmts_iter,
)
from rebox.oracle import random_program_source
from rebox.parser import parse_program

PUSH = """
struct Node { int data; struct Node * next; };
struct List { struct Node * head; };
void push(struct List * list, int new_data) {
    struct Node * new_node = (struct Node *) malloc(sizeof(struct Node));
    (*new_node).data = new_data;
    (*new_node).next = (*list).head;
    (*list).head = new_node;
}
"""


# -- parsing -------------------------------------------------------------------

def test_parse_push():
    prog = parse_program(PUSH)
    assert len(prog.structs) == 2
    assert len(prog.functions) == 1
    assert prog.functions[0].name == "push"


def test_parse_empty_file():
    prog = parse_program("")
    assert prog.structs == [] and prog.functions == []


def test_union_rejected():
    with pytest.raises(UnsupportedConstruct):
        parse_program("union U { int a; };")


def test_variadic_rejected():
    with pytest.raises(UnsupportedConstruct):
        parse_program("void f(int a, ...) { }")


def test_function_pointer_rejected():
    with pytest.raises(UnsupportedConstruct):
        parse_program("struct S { int (f)(int); };")


def test_parse_error_carries_position():
    with pytest.raises(Exception) as exc:
        parse_program("void f() { int x = ; }")
    assert "line" in str(exc.value)


def test_arrow_sugar():
    prog = parse_program("""
struct Node { int data; struct Node * next; };
void f(struct Node * p) { p->data = 1; }
""")
    st_ = prog.functions[0].body[0]
    assert str(st_.lhs) == "(*p).data"


def test_depth_changing_cast_rejected():
    src = """
void f(int * * q) {
    int * p;
    p = (int *) q;
    free(p);
}
"""
    with pytest.raises(UnsupportedConstruct):
        parse_and_normalize(src)


# -- validation ------------------------------------------------------------------

def test_unknown_field_rejected():
    with pytest.raises(TypeMismatch):
        parse_and_normalize("""
struct Node { int data; };
void f(struct Node * p) { (*p).nope = 1; }
""")


def test_unknown_variable_rejected():
    with pytest.raises(TypeMismatch):
        parse_and_normalize("void f() { x = 1; }")


def test_pointer_scalar_mismatch_rejected():
    with pytest.raises(TypeMismatch):
        parse_and_normalize("void f(int * p) { p = 3; }")


def test_pointer_returning_function_must_return():
    with pytest.raises(TypeMismatch):
        parse_and_normalize("int * f() { int x; x = 1; }")


def test_every_place_typechecks_on_valid_program():
    check_program(parse_program(PUSH))  # does not raise


# -- normalization ----------------------------------------------------------------

def test_null_branch_insertion():
    prog = parse_and_normalize("""
void f(int * p) {
    if (p != NULL) {
        free(p);
    }
}
""")
    iff = prog.functions[0].body[0]
    assert isinstance(iff, If)
    assert len(iff.els) == 1
    ins = iff.els[0]
    assert ins.synthetic and isinstance(ins, Assign)
    assert ins.lhs == Place("p") and isinstance(ins.rhs, NullRv)


def test_null_test_canonicalized_to_then():
    prog = parse_and_normalize("""
void f(int * p) {
    if (p == NULL) {
    } else {
        free(p);
    }
}
""")
    iff = prog.functions[0].body[0]
    assert isinstance(iff.cond, NonNullTest)
    assert any(isinstance(s, FreeStmt) for s in iff.then)


def test_no_conditionals_unchanged():
    prog = parse_and_normalize("""
void f(int * p) {
    free(p);
}
""")
    assert not any(s.synthetic for s in stmts_iter(prog.functions[0].body))


def test_free_loop_guard_gains_null_else():
    prog = parse_and_normalize("""
struct zzzz { int * name; struct zzzz * link; };
void f(struct zzzz * aa) {
    while (aa != NULL) {
        if ((*aa).name != NULL) {
            free((*aa).name);
        }
        free(aa);
        aa = NULL;
    }
}
""")
    loop = prog.functions[0].body[0]
    iff = loop.body[0]
    assert iff.els and iff.els[-1].synthetic


def test_normalize_idempotent_on_examples():
    for src in (PUSH, random_program_source(7), random_program_source(8)):
        once = parse_and_normalize(src)
        twice = normalize(once)
        assert once.structs == twice.structs
        assert once.functions == twice.functions


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_normalize_idempotent_property(seed):
    once = parse_and_normalize(random_program_source(seed))
    twice = normalize(once)
    assert once.functions == twice.functions


def test_loop_markers_assigned():
    prog = parse_and_normalize("""
void f(int * p) {
    while (p != NULL) {
        free(p);
        p = NULL;
    }
}
""")
    loop = prog.functions[0].body[0]
    assert isinstance(loop, While) and loop.loop_id == 0
    uids = [s.uid for s in stmts_iter(prog.functions[0].body)]
    assert uids == sorted(uids) and len(set(uids)) == len(uids)


# -- output parameters ---------------------------------------------------------------

def test_push_list_is_output_param():
    prog = parse_and_normalize(PUSH)
    assert prog.functions[0].output_names == ("list",)


def test_read_only_param_is_not_output():
    prog = parse_and_normalize("""
struct Node { int data; struct Node * next; };
void g(struct Node * p) {
    int x;
    x = (*p).data;
}
""")
    assert prog.functions[0].output_names == ()


def test_consumed_param_is_not_output():
    prog = parse_and_normalize("""
struct Node { int data; struct Node * next; };
struct List { struct Node * head; };
void push_front(struct List * list, struct Node * node) {
    (*node).next = (*list).head;
    (*list).head = node;
}
""")
    assert prog.functions[0].output_names == ("list",)


def test_field_gain_makes_output():
    # the base stays non-owning but a field gains ownership through a store
    prog = parse_and_normalize("""
struct List { int * head; };
void fill(struct List * list) {
    (*list).head = malloc(sizeof(int));
}
""")
    assert prog.functions[0].output_names == ("list",)


def test_out_marker_mismatch_rejected():
    with pytest.raises(TypeMismatch):
        parse_and_normalize("""
struct List { int * head; };
void fill(struct List * list) { (*list).head = malloc(sizeof(int)); }
void main() {
    struct List * l = malloc(sizeof(struct List));
    fill(l);
    free((*l).head);
    free(l);
}
""")


# -- control-flow graphs ---------------------------------------------------------------

def test_straight_line_single_block():
    prog = parse_and_normalize(PUSH)
    cfg = build_cfg(prog.functions[0])
    body_blocks = [b for b in cfg.blocks if b.stmts]
    assert len(body_blocks) == 1
    assert cfg.join_blocks == [] and cfg.back_edges == []


def test_if_makes_one_join():
    prog = parse_and_normalize("""
void f(int * p) {
    if (p != NULL) {
        free(p);
    }
    p = NULL;
}
""")
    cfg = build_cfg(prog.functions[0])
    assert len(cfg.join_blocks) == 1
    join = cfg.block(cfg.join_blocks[0])
    preds = [b.bid for b in cfg.blocks if join.bid in b.succs]
    assert len(preds) == 2


def test_while_makes_one_back_edge():
    prog = parse_and_normalize("""
void f(int * p) {
    while (p != NULL) {
        free(p);
        p = NULL;
    }
}
""")
    cfg = build_cfg(prog.functions[0])
    assert len(cfg.back_edges) == 1
    src, dst = cfg.back_edges[0]
    assert cfg.block(dst).kind == "loop_head"


def test_cfg_counts_match_structure():
    src = random_program_source(42)
    prog = parse_and_normalize(src)
    fn = prog.functions[0]
    n_ifs = sum(1 for s in stmts_iter(fn.body) if isinstance(s, If))
    n_whiles = sum(1 for s in stmts_iter(fn.body) if isinstance(s, While))
    cfg = build_cfg(fn)
    assert len(cfg.join_blocks) == n_ifs
    assert len(cfg.back_edges) == n_whiles


def test_cfg_all_blocks_reachable():
    prog = parse_and_normalize(PUSH)
    cfg = build_cfg(prog.functions[0])
    seen = set()
    stack = [cfg.entry]
    while stack:
        b = stack.pop()
        if b in seen:
            continue
        seen.add(b)
        stack.extend(cfg.block(b).succs)
    assert seen | {cfg.exit} == {b.bid for b in cfg.blocks}
