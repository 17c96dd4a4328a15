import pytest
from hypothesis import given, strategies as st

from rebox.frontend import parse_and_normalize
from rebox.ir import IntType, PtrType, StructType
from rebox.paths import AccessPath, compute_k, enumerate_ap, is_prefix

NODE_SRC = """
struct Node { int data; struct Node * next; };
struct List { struct Node * head; };
void push(struct List * list, int new_data) {
    struct Node * new_node = (struct Node *) malloc(sizeof(struct Node));
    (*new_node).data = new_data;
    (*new_node).next = (*list).head;
    (*list).head = new_node;
}
"""

CELL_SRC = """
struct zzzz { int * name; struct zzzz * link; };
void f(struct zzzz * aa) {
    if ((*aa).name != NULL) { free((*aa).name); }
}
"""


def node_program():
    return parse_and_normalize(NODE_SRC)


def cell_program():
    return parse_and_normalize(CELL_SRC)


# -- is_prefix ---------------------------------------------------------------

def test_is_prefix_field_extension():
    p = AccessPath("p")
    q = AccessPath("p", ("next",))
    assert is_prefix(p, q)
    assert not is_prefix(q, p)


def test_is_prefix_reflexive():
    p = AccessPath("p", ("next",))
    assert is_prefix(p, p)


def test_is_prefix_different_base():
    assert not is_prefix(AccessPath("p", ("next",)), AccessPath("q", ("next",)))


paths = st.builds(
    AccessPath,
    base=st.sampled_from(["p", "q", "r"]),
    selectors=st.lists(st.sampled_from(["next", "head", None]), max_size=4).map(tuple),
)


@given(paths)
def test_prefix_reflexive_property(p):
    assert is_prefix(p, p)


@given(paths, paths)
def test_prefix_antisymmetric(p, q):
    if is_prefix(p, q) and is_prefix(q, p):
        assert p == q


@given(paths, paths, paths)
def test_prefix_transitive(p, q, r):
    if is_prefix(p, q) and is_prefix(q, r):
        assert is_prefix(p, r)


# -- enumerate_ap -------------------------------------------------------------

def test_enumerate_node_paths():
    prog = node_program()
    ty = PtrType(StructType("Node"))
    got = enumerate_ap("new_node", 1, 2, ty, prog)
    assert got == [AccessPath("new_node"), AccessPath("new_node", ("next",))]


def test_enumerate_base_only():
    prog = node_program()
    got = enumerate_ap("v", 1, 1, PtrType(IntType()), prog)
    assert got == [AccessPath("v")]


def test_enumerate_cell_fields_declaration_order():
    prog = cell_program()
    ty = PtrType(StructType("zzzz"))
    got = enumerate_ap("aa", 1, 2, ty, prog)
    assert got == [AccessPath("aa"),
                   AccessPath("aa", ("name",)),
                   AccessPath("aa", ("link",))]


@given(st.integers(min_value=1, max_value=4), st.integers(min_value=1, max_value=4))
def test_enumerate_decomposes_by_length(lb, ub):
    if lb > ub:
        lb, ub = ub, lb
    prog = node_program()
    ty = PtrType(StructType("Node"))
    whole = enumerate_ap("v", lb, ub, ty, prog)
    pieces = []
    for n in range(lb, ub + 1):
        pieces.extend(enumerate_ap("v", n, n, ty, prog))
    assert whole == pieces
    assert all(p.base == "v" for p in whole)


def test_enumeration_over_recursive_type_is_capped():
    prog = node_program()
    ty = PtrType(StructType("Node"))
    got = enumerate_ap("v", 1, 5, ty, prog)
    assert len(got) == 5  # one path per depth; the bound terminates recursion
    assert max(p.length for p in got) == 5


def test_nested_pointer_paths_use_bare_deref():
    prog = node_program()
    ty = PtrType(PtrType(IntType()))
    got = enumerate_ap("q", 1, 3, ty, prog)
    assert [p.text() for p in got] == ["q", "(*q)"]


def test_canonical_text():
    assert AccessPath("x", ("f", "g")).text() == "(*(*x).f).g"


# -- compute_k ----------------------------------------------------------------

def test_k_for_push():
    assert compute_k(node_program()).k == 2


def test_k_scalar_pointers_only():
    prog = parse_and_normalize("void f(int * p) { free(p); }")
    assert compute_k(prog).k == 1


def test_k_nested_pointer_declarations():
    prog = parse_and_normalize("""
void f() {
    int * * q;
    int * p;
    p = malloc(sizeof(int));
    *q = p;
    free(*q);
    free(q);
}
""")
    assert compute_k(prog).k == 2
