"""Propositional engine: CNF encoding, a DPLL decision procedure, model
decoding, and the EXACT-1-3-SAT reduction into ownership constraints.

The encoding of a 0/1 addition `a + b = c` uses a six-clause template
whose models are exactly the three rows of the addition table
{(0,0,0), (1,0,1), (0,1,1)}.  Inequalities `a >= b` become the single
clause (a | ~b); equalities become two such clauses.

The solver is deliberately in-repo: unit propagation plus chronological
backtracking, deciding the lowest-index unassigned variable, false
first.  That makes every run deterministic with zero environment
coupling; swap in another backend by implementing `solve_sat`'s
contract.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field

from .constraints import (
    Add3, ConstraintSystem, Eq0, Eq1, EqVar, Geq, OwnershipVar,
)
from .paths import AccessPath


@dataclass
class CnfFormula:
    nvars: int
    clauses: list  # list of lists of signed 1-based ints

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.nvars} {len(self.clauses)}"]
        for c in self.clauses:
            lines.append(" ".join(str(l) for l in c) + " 0")
        return "\n".join(lines) + "\n"


def encode_cnf(system: ConstraintSystem) -> tuple:
    """Encode a constraint system; returns (formula, ordered var list).

    DIMACS variable i+1 corresponds to system.vars[i].
    """
    index = {v: i + 1 for i, v in enumerate(system.vars)}
    clauses = []
    for c in system.constraints:
        if isinstance(c, Add3):
            a, b, s = index[c.a], index[c.b], index[c.c]
            clauses.extend([
                [b, a, -s],
                [s, -a],
                [b, s, -a],
                [-a, -b],
                [s, -b],
                [s, a, -b],
            ])
        elif isinstance(c, Eq1):
            clauses.append([index[c.a]])
        elif isinstance(c, Eq0):
            clauses.append([-index[c.a]])
        elif isinstance(c, EqVar):
            a, b = index[c.a], index[c.b]
            clauses.append([a, -b])
            clauses.append([b, -a])
        elif isinstance(c, Geq):
            clauses.append([index[c.a], -index[c.b]])
        else:
            raise TypeError(f"unknown constraint {c!r}")
    return CnfFormula(nvars=len(system.vars), clauses=clauses), list(system.vars)


def solve_sat(formula: CnfFormula):
    """DPLL with unit propagation. Returns {var: bool} (total over
    1..nvars) or None for UNSAT.  Decision order: ascending variable
    index, false first."""
    n = formula.nvars
    clauses = [list(c) for c in formula.clauses]
    for c in clauses:
        if not c:
            return None
    occ = defaultdict(list)
    for ci, c in enumerate(clauses):
        for lit in c:
            occ[lit].append(ci)
    value = [None] * (n + 1)
    sat_cnt = [0] * len(clauses)
    false_cnt = [0] * len(clauses)
    trail = []
    decisions = []  # (var, tried_true, trail_len)

    def set_var(var, val):
        value[var] = val
        trail.append(var)
        tlit = var if val else -var
        for ci in occ[tlit]:
            sat_cnt[ci] += 1
        changed = occ[-tlit]
        for ci in changed:
            false_cnt[ci] += 1
        return changed

    def unset_var(var):
        val = value[var]
        value[var] = None
        tlit = var if val else -var
        for ci in occ[tlit]:
            sat_cnt[ci] -= 1
        for ci in occ[-tlit]:
            false_cnt[ci] -= 1

    def propagate(queue):
        while queue:
            ci = queue.popleft()
            if sat_cnt[ci] > 0:
                continue
            remaining = len(clauses[ci]) - false_cnt[ci]
            if remaining == 0:
                return True  # conflict
            if remaining == 1:
                for lit in clauses[ci]:
                    v = abs(lit)
                    if value[v] is None:
                        queue.extend(set_var(v, lit > 0))
                        break
        return False

    queue = deque(range(len(clauses)))
    next_var = 1
    while True:
        conflict = propagate(queue)
        if conflict:
            while decisions:
                var, tried_true, tlen = decisions.pop()
                while len(trail) > tlen:
                    unset_var(trail.pop())
                if not tried_true:
                    decisions.append((var, True, tlen))
                    queue = deque(set_var(var, True))
                    next_var = var + 1
                    break
            else:
                return None
            continue
        while next_var <= n and value[next_var] is not None:
            next_var += 1
        var = None
        for v in range(1, n + 1):
            if value[v] is None:
                var = v
                break
        if var is None:
            return {v: value[v] for v in range(1, n + 1)}
        decisions.append((var, False, len(trail)))
        queue = deque(set_var(var, False))


# ---------------------------------------------------------------------------
# Ownership schemes
# ---------------------------------------------------------------------------

@dataclass
class OwnershipScheme:
    assignment: dict  # OwnershipVar -> 0/1
    var_order: list = field(default_factory=list)
    system: ConstraintSystem | None = None

    def value(self, var: OwnershipVar) -> int:
        return self.assignment[var]

    def __getitem__(self, var: OwnershipVar) -> int:
        return self.assignment[var]

    def to_json_rows(self) -> list:
        return [{"function": v.function, "path": v.path.text(),
                 "version": v.version, "value": self.assignment[v]}
                for v in self.var_order]


class Infeasible(Exception):
    """No ownership scheme exists: a leak, a prefix-monotonicity
    conflict, or a genuine ownership-model violation."""

    def __init__(self, sites: list):
        self.sites = sites
        detail = "\n".join(f"  - {s}" for s in sites) if sites else "  (no single culprit)"
        super().__init__("ownership constraints are unsatisfiable; "
                         "involved sites:\n" + detail)


def _diagnose(system: ConstraintSystem, max_probes: int = 200) -> list:
    """Best-effort blame list: unit constraints whose individual removal
    makes the system satisfiable."""
    formula, _ = encode_cnf(system)
    unit_positions = [i for i, c in enumerate(system.constraints)
                      if isinstance(c, (Eq0, Eq1))]
    clause_of = {}
    ci = 0
    for i, c in enumerate(system.constraints):
        width = 6 if isinstance(c, Add3) else 2 if isinstance(c, EqVar) else 1
        clause_of[i] = (ci, width)
        ci += width
    sites = []
    for i in unit_positions[:max_probes]:
        start, width = clause_of[i]
        reduced = formula.clauses[:start] + formula.clauses[start + width:]
        if solve_sat(CnfFormula(formula.nvars, reduced)) is not None:
            origin = system.constraints[i].origin or str(system.constraints[i])
            if origin not in sites:
                sites.append(origin)
    return sites


def solve_ownership(system: ConstraintSystem, mode: str = "first-model") -> OwnershipScheme:
    """Decide the system and decode a verified scheme.

    mode "first-model" returns the solver's first model; mode
    "maximize-owning" greedily grows the set of declarations that own
    at some program point, which can only improve how many pointers the
    translation can box.
    """
    formula, order = encode_cnf(system)
    model = solve_sat(formula)
    if model is None:
        raise Infeasible(_diagnose(system))
    if mode == "maximize-owning":
        model = _maximize_owning(system, formula, order, model)
    assignment = {v: int(model[i + 1]) for i, v in enumerate(order)}
    scheme = OwnershipScheme(assignment=assignment, var_order=order, system=system)
    bad = system.violated(assignment)
    if bad:  # decoding bug guard; never expected
        raise AssertionError(f"decoded model violates {bad[0]!r}")
    return scheme


def _maximize_owning(system, formula, order, model):
    groups: dict = {}
    for i, v in enumerate(order):
        decl = system.decl_of.get(v)
        if decl is None:
            continue
        groups.setdefault(decl, []).append(i + 1)
    clauses = list(formula.clauses)
    for decl in groups:
        lits = groups[decl]
        if any(model[l] for l in lits):
            continue
        trial = clauses + [list(lits)]
        m2 = solve_sat(CnfFormula(formula.nvars, trial))
        if m2 is not None:
            clauses = trial
            model = m2
    return model


# ---------------------------------------------------------------------------
# EXACT-1-3-SAT reduction
# ---------------------------------------------------------------------------

@dataclass
class X3SatFormula:
    nvars: int
    clauses: list  # list of 3-tuples of signed nonzero ints

    def __post_init__(self):
        for c in self.clauses:
            if len(c) != 3 or any(l == 0 for l in c):
                raise ValueError(f"clause {c!r} must have exactly 3 nonzero literals")
            if any(abs(l) > self.nvars for l in c):
                raise ValueError(f"literal out of range in {c!r}")


def parse_x3sat(text: str) -> X3SatFormula:
    """One clause per line, signed integers, zero-terminated."""
    clauses = []
    nvars = 0
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("p"):
            continue
        nums = [int(t) for t in line.split()]
        if nums and nums[-1] == 0:
            nums = nums[:-1]
        if not nums:
            continue
        clauses.append(tuple(nums))
        nvars = max(nvars, max(abs(l) for l in nums))
    return X3SatFormula(nvars=nvars, clauses=clauses)


def reduce_x3sat(formula: X3SatFormula) -> ConstraintSystem:
    """Per clause (l1|l2|l3) with exactly-one semantics, generate
    l1 + l2 = not_l3, l3 + not_l3 = s and s = 1 over fresh variables.
    Negated literals are channeled through complement variables pinned
    by x + x_bar = 1 in the same shape."""
    system = ConstraintSystem(k=1, source_name="x3sat")
    made: dict = {}

    def mk(name: str) -> OwnershipVar:
        if name not in made:
            v = OwnershipVar(path=AccessPath(name), version=0, point=-1,
                             function="x3sat")
            system.vars.append(v)
            made[name] = v
        return made[name]

    def lit_var(lit: int) -> OwnershipVar:
        v = mk(f"x{abs(lit)}")
        if lit > 0:
            return v
        neg = f"x{abs(lit)}_bar"
        if neg not in made:
            nv = mk(neg)
            one = mk(f"x{abs(lit)}_one")
            system.constraints.append(
                Add3(v, nv, one, origin=f"complement of x{abs(lit)}"))
            system.constraints.append(Eq1(one, origin=f"complement of x{abs(lit)}"))
        return made[neg]

    for j, (l1, l2, l3) in enumerate(formula.clauses):
        v1, v2, v3 = lit_var(l1), lit_var(l2), lit_var(l3)
        not3 = mk(f"clause{j}_not3")
        total = mk(f"clause{j}_sum")
        origin = f"clause {j}: ({l1} {l2} {l3})"
        system.constraints.append(Add3(v1, v2, not3, origin=origin))
        system.constraints.append(Add3(v3, not3, total, origin=origin))
        system.constraints.append(Eq1(total, origin=origin))
    return system


def x3sat_satisfiable(formula: X3SatFormula) -> bool:
    system = reduce_x3sat(formula)
    cnf, _ = encode_cnf(system)
    return solve_sat(cnf) is not None
