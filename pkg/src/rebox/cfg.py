"""Per-function control-flow graphs over normalized bodies.

Loop bodies appear exactly once (no unrolling); every If contributes
exactly one join block and every While exactly one back edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import FunctionDef, If, Return, While


@dataclass
class Block:
    bid: int
    stmts: list = field(default_factory=list)  # leaf statements, source order
    succs: list = field(default_factory=list)
    kind: str = "plain"  # plain | branch | loop_head | join | exit
    cond_stmt: object = None  # the If/While that terminates this block


@dataclass
class Cfg:
    function: str
    blocks: list
    entry: int
    exit: int
    back_edges: list  # (from_bid, to_bid), one per While
    join_blocks: list  # bid per If, in source order

    def block(self, bid: int) -> Block:
        return self.blocks[bid]


def build_cfg(fn: FunctionDef) -> Cfg:
    blocks: list = []
    back_edges: list = []
    join_blocks: list = []

    def new_block(kind: str = "plain") -> Block:
        b = Block(bid=len(blocks), kind=kind)
        blocks.append(b)
        return b

    entry = new_block()
    exit_block = new_block("exit")

    def walk(body, cur: Block):
        """Emit `body` starting in `cur`; returns the open block after the
        body, or None if all paths returned."""
        for st in body:
            if cur is None:
                return None  # unreachable tail; dropped
            if isinstance(st, If):
                cur.kind = "branch"
                cur.cond_stmt = st
                then_b = new_block()
                cur.succs.append(then_b.bid)
                then_end = walk(st.then, then_b)
                else_b = new_block()
                cur.succs.append(else_b.bid)
                else_end = walk(st.els, else_b)
                join = new_block("join")
                join_blocks.append(join.bid)
                for end in (then_end, else_end):
                    if end is not None:
                        end.succs.append(join.bid)
                cur = join
            elif isinstance(st, While):
                head = new_block("loop_head")
                head.cond_stmt = st
                cur.succs.append(head.bid)
                body_b = new_block()
                head.succs.append(body_b.bid)
                body_end = walk(st.body, body_b)
                if body_end is not None:
                    body_end.succs.append(head.bid)
                    back_edges.append((body_end.bid, head.bid))
                after = new_block()
                head.succs.append(after.bid)
                cur = after
            elif isinstance(st, Return):
                cur.stmts.append(st)
                cur.succs.append(exit_block.bid)
                cur = None
            else:
                cur.stmts.append(st)
        return cur

    last = walk(fn.body, entry)
    if last is not None:
        last.succs.append(exit_block.bid)

    cfg = Cfg(function=fn.name, blocks=blocks, entry=entry.bid, exit=exit_block.bid,
              back_edges=back_edges, join_blocks=join_blocks)
    return _prune_unreachable(cfg)


def _prune_unreachable(cfg: Cfg) -> Cfg:
    seen = set()
    stack = [cfg.entry]
    while stack:
        bid = stack.pop()
        if bid in seen:
            continue
        seen.add(bid)
        stack.extend(cfg.block(bid).succs)
    seen.add(cfg.exit)

    remap = {}
    kept = []
    for b in cfg.blocks:
        if b.bid in seen:
            remap[b.bid] = len(kept)
            kept.append(b)
    for b in kept:
        b.succs = [remap[s] for s in b.succs if s in remap]
        b.bid = remap[b.bid]
    return Cfg(function=cfg.function, blocks=kept, entry=remap[cfg.entry],
               exit=remap[cfg.exit],
               back_edges=[(remap[a], remap[b]) for a, b in cfg.back_edges
                           if a in remap and b in remap],
               join_blocks=[remap[j] for j in cfg.join_blocks if j in remap])
