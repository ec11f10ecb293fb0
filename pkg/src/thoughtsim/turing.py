"""Turing machines on the thought-sequence runtime.

A reference simulator provides the oracle semantics.  Three compilers
turn a transition table into a focus policy plus slot layout:

* ``search``: each machine step writes a pivot row; the head content is
  resolved by jumping pivot to pivot through stored search counts until
  the pivot's recorded write matches the current head (or the sequence
  floor is reached, which reads as blank).  A ``bounded`` variant keeps
  the leftmost/rightmost visited cells in two extra slots and skips the
  search entirely for fresh cells.
* ``constant``: three rows per machine step carry relative step counts
  to the previous visit of the current cell and its two neighbours, so
  the content fetch is a single aimed focus.
* ``memory``: two rows per machine step; a most-recent-hash keyed by
  head position serves the read-write cycle.

Simulated configurations decode exactly back to reference configurations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .memory import MostRecentHash
from .runtime import (
    BLANK,
    WILD,
    Action,
    Component,
    FocusPolicy,
    MemorySpec,
    MemoryWrite,
    Model,
    Num,
    Pos,
    Rule,
    State,
    Sym,
    Tag,
    ThoughtSequence,
    VisibleState,
    run,
    step,
)


class ParseError(Exception):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MissingRule(Exception):
    def __init__(self, state, symbol):
        super().__init__(f"no rule for state {state!r} reading {symbol!r}")
        self.state = state
        self.symbol = symbol


class MalformedTrace(Exception):
    pass


# ---------------------------------------------------------------------------
# machine definition and reference semantics

@dataclass(frozen=True)
class TMSpec:
    states: tuple
    alphabet: tuple
    blank: str
    start: str
    halting: frozenset
    rules: dict = field(hash=False)

    def __post_init__(self):
        if self.blank not in self.alphabet:
            raise ValueError("blank symbol must be in the alphabet")
        if self.start not in self.states:
            raise ValueError("start state must be declared")
        for state in self.states:
            if state in self.halting:
                continue
            for symbol in self.alphabet:
                if (state, symbol) not in self.rules:
                    raise MissingRule(state, symbol)


def parse_tm(text: str) -> TMSpec:
    """Parse the line-oriented machine format ('#' starts a comment)."""
    fields = {}
    rules = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError(lineno, f"expected 'key: value', got {line!r}")
        key, _, rest = line.partition(":")
        key = key.strip()
        rest = rest.strip()
        if key == "rule":
            if "->" not in rest:
                raise ParseError(lineno, "rule needs '->'")
            lhs, _, rhs = rest.partition("->")
            lhs = lhs.split()
            rhs = rhs.split()
            if len(lhs) != 2 or len(rhs) != 3:
                raise ParseError(lineno, "rule must be 'state symbol -> state symbol move'")
            if rhs[2] not in ("L", "R"):
                raise ParseError(lineno, f"move must be L or R, got {rhs[2]!r}")
            if (lhs[0], lhs[1]) in rules:
                raise ParseError(lineno, f"duplicate rule for ({lhs[0]}, {lhs[1]})")
            rules[(lhs[0], lhs[1])] = (rhs[0], rhs[1], rhs[2])
        elif key in ("states", "alphabet", "halting"):
            fields[key] = tuple(rest.split())
        elif key in ("blank", "start"):
            toks = rest.split()
            if len(toks) != 1:
                raise ParseError(lineno, f"{key} takes exactly one token")
            fields[key] = toks[0]
        else:
            raise ParseError(lineno, f"unknown key {key!r}")
    for required in ("states", "alphabet", "blank", "start"):
        if required not in fields:
            raise ParseError(0, f"missing {required!r} declaration")
    states = fields["states"]
    alphabet = fields["alphabet"]
    halting = frozenset(fields.get("halting", ()))
    for state in halting:
        if state not in states:
            raise ParseError(0, f"halting state {state!r} not declared")
    for (s, t), (s2, t2, _) in rules.items():
        for name, pool in ((s, states), (s2, states)):
            if name not in pool:
                raise ParseError(0, f"rule uses undeclared state {name!r}")
        for sym in (t, t2):
            if sym not in alphabet:
                raise ParseError(0, f"rule uses undeclared symbol {sym!r}")
    return TMSpec(states, alphabet, fields["blank"], fields["start"], halting, rules)


@dataclass(frozen=True)
class TMConfig:
    state: str
    head: int
    tape: tuple          # sorted (cell, symbol) pairs, blanks omitted
    step_count: int = field(compare=False, default=0)

    @classmethod
    def make(cls, state, head, tape_dict, blank, step_count):
        support = tuple(sorted((c, s) for c, s in tape_dict.items() if s != blank))
        return cls(state, head, support, step_count)

    def tape_dict(self) -> dict:
        return dict(self.tape)


def _initial_tape(spec: TMSpec, tape_input) -> dict:
    tape = {}
    for i, sym in enumerate(tape_input):
        if sym not in spec.alphabet:
            raise ValueError(f"input symbol {sym!r} not in the alphabet")
        if sym != spec.blank:
            tape[i] = sym
    return tape


def reference_trace(spec: TMSpec, tape_input, n: int) -> list:
    """Configurations 0..n under standard semantics; halting states absorb."""
    if n < 0:
        raise ValueError("n must be >= 0")
    tape = _initial_tape(spec, tape_input)
    state, head = spec.start, 0
    configs = [TMConfig.make(state, head, tape, spec.blank, 0)]
    for k in range(1, n + 1):
        if state not in spec.halting:
            read = tape.get(head, spec.blank)
            state, written, move = spec.rules[(state, read)]
            if written == spec.blank:
                tape.pop(head, None)
            else:
                tape[head] = written
            head += 1 if move == "R" else -1
        configs.append(TMConfig.make(state, head, tape, spec.blank, k))
    return configs


def reference_run(spec: TMSpec, tape_input, n: int) -> TMConfig:
    return reference_trace(spec, tape_input, n)[-1]


def walk_machine(moves) -> TMSpec:
    """A machine whose head replays a fixed move list, rewriting in place."""
    states = tuple(f"w{i}" for i in range(len(moves) + 1))
    rules = {}
    for i, move in enumerate(moves):
        for sym in ("_",):
            rules[(states[i], sym)] = (states[i + 1], sym, move)
    return TMSpec(states, ("_",), "_", states[0], frozenset({states[-1]}), rules)


# ---------------------------------------------------------------------------
# compiled programs

B, A, G = Tag("b"), Tag("a"), Tag("g")
DIR_L, DIR_R, DIR_H = Tag("L"), Tag("R"), Tag("H")

SEARCH_ARITY = 10       # tag s h par/found-h par/found-t tres/f m j lb rb
CONSTANT_ARITY = 9      # tag s h t t' d l c r
MEMORY_ARITY = 4        # tag h t s

COPY = Component("copy", "copy")


def _emit(name, dst, *syms):
    comp = Component(name, "context", transform=lambda _t, syms=syms: syms)
    return Action(comp, 0, (0, 1), dst)


def _map(name, offset, src, dst, fn, kind="context"):
    return Action(Component(name, kind, transform=fn), offset, src, dst)


def _copy(offset, src, dst):
    return Action(COPY, offset, src, dst)


@dataclass
class CompiledProgram:
    algo: str
    spec: TMSpec
    policy: FocusPolicy
    arity: int
    steps_per_tm_step: object            # "variable", 3 or 2
    memory: MostRecentHash | None = None
    tape_input: tuple = ()

    def prepare(self, tape_input):
        """Load an input tape; returns (model, initial states)."""
        tape_input = tuple(tape_input)
        self.tape_input = tape_input
        if self.algo in ("search", "search-bounded"):
            return Model(self.policy, self.arity), _search_initial(
                self.spec, tape_input, bounded=self.algo == "search-bounded")
        if self.algo == "constant":
            if any(sym != self.spec.blank for sym in tape_input):
                raise ValueError("the constant-time variant requires a blank input tape")
            row = VisibleState((B, State(self.spec.start), Pos(0), Sym(self.spec.blank),
                                WILD, WILD, Num(0), Num(0), Num(0)))
            return Model(self.policy, self.arity), [row]
        if self.algo == "memory":
            self.memory.entries.clear()
            self.memory.clock = 0
            for i, sym in enumerate(tape_input):
                if sym not in self.spec.alphabet:
                    raise ValueError(f"input symbol {sym!r} not in the alphabet")
                self.memory.write((Pos(i),), (Sym(sym),))
            row = VisibleState((B, Pos(0), WILD, State(self.spec.start)))
            return Model(self.policy, self.arity), [row]
        raise ValueError(f"unknown algo {self.algo!r}")


# ---- search compiler -------------------------------------------------------

def _search_initial(spec: TMSpec, tape_input, bounded: bool):
    """Sequence floor plus one synthetic pivot per input cell.

    Synthetic pivot i records the write of input cell i-1 in its
    parenthesis slots, so input cells are searchable like any other
    write; the floor row reads as blank and ends every search.
    """
    pad = (WILD, WILD) if not bounded else (BLANK, BLANK)
    # the row below the floor is never inspected, but the jump count
    # beside the floor pivot is prefetched, so it must exist
    rows = [VisibleState((Tag("i"), WILD, WILD, WILD, WILD, WILD, Num(0), WILD) + pad),
            VisibleState((B, WILD, WILD, BLANK, BLANK, WILD, Num(0), WILD) + pad)]
    for i in range(1, len(tape_input)):
        rows.append(VisibleState((B, WILD, WILD, Pos(i - 1), Sym(tape_input[i - 1]),
                                  WILD, Num(0), WILD) + pad))
    if tape_input:
        paren = (Pos(len(tape_input) - 1), Sym(tape_input[-1]))
    else:
        paren = (BLANK, BLANK)
    if bounded:
        bounds = (Pos(0), Pos(len(tape_input) - 1)) if tape_input else (BLANK, BLANK)
    else:
        bounds = (WILD, WILD)
    rows.append(VisibleState((B, State(spec.start), Pos(0)) + paren + (WILD, Num(0), WILD)
                             + bounds))
    return rows


def compile_search(spec: TMSpec, bounded: bool = False) -> CompiledProgram:
    rules_map = dict(spec.rules)
    halting = spec.halting
    blank = spec.blank

    def transition(s, t_name, h):
        s2, t2, move = rules_map[(s.value, t_name)]
        h2 = h.value + (1 if move == "R" else -1)
        return State(s2), Pos(h2), Pos(h.value), Sym(t2)

    def trans_found(content):
        s, h, _fh, ft = content
        return transition(s, ft.value, h)

    def trans_blank(content):
        s, h = content[0], content[1]
        return transition(s, blank, h)

    def jump_f(content):
        f, _m, j = content
        return (Num(f.value - j.value - 1),)

    def bump_m(content):
        return (Num(content[0].value + 1),)

    def widen_bounds(content):
        h, lb, rb = content[0], content[6], content[7]
        lo = h.value if lb == BLANK else min(lb.value, h.value)
        hi = h.value if rb == BLANK else max(rb.value, h.value)
        return (Pos(lo), Pos(hi))

    def pivot_is_halting(w):
        return w[-1][1].kind == "state" and w[-1][1].value in halting

    def pivot_is_live(w):
        return w[-1][1].kind == "state" and w[-1][1].value not in halting

    def head_outside_bounds(w):
        h, lb, rb = w[-1][2], w[-1][8], w[-1][9]
        return lb == BLANK or not lb.value <= h.value <= rb.value

    def found_is_head(w):
        return w[-1][3] == w[-1][2]

    def found_is_floor(w):
        return w[-1][3] == BLANK

    def cont_found_offset(w):
        f, m, j = w[-1][5].value, w[-1][6].value, w[-1][7].value
        return (f - j - 1) - m

    def cont_jump_offset(w):
        return cont_found_offset(w) - 1

    if bounded:
        bound_actions = lambda: (_map("bounds", 0, (2, 8), (8, 2), widen_bounds),)
    else:
        bound_actions = lambda: (_copy(0, (8, 2), (8, 2)),)

    pivot_tail = (_emit("m-zero", (6, 1), Num(0)), _emit("j-pad", (7, 1), WILD))

    rules = [
        Rule("halt-pivot", ((B,),), (
            _emit("tag", (0, 1), B),
            _copy(0, (1, 2), (1, 2)),
            _emit("no-write", (3, 2), BLANK, BLANK),
            _emit("tres-pad", (5, 1), WILD),
            *pivot_tail,
            _copy(0, (8, 2), (8, 2)),
        ), guard=pivot_is_halting),
    ]
    if bounded:
        rules.append(Rule("fresh-cell", ((B,),), (
            _emit("tag", (0, 1), B),
            _map("transition", 0, (1, 2), (1, 4), trans_blank, kind="copy"),
            _emit("tres-blank", (5, 1), Sym(blank)),
            *pivot_tail,
            *bound_actions(),
        ), guard=lambda w: pivot_is_live(w) and head_outside_bounds(w)))
    rules.extend([
        Rule("start-search", ((B,),), (
            _emit("tag", (0, 1), A),
            _copy(0, (1, 2), (1, 2)),
            _copy(0, (3, 2), (3, 2)),             # inspect this pivot's own write
            _emit("f-zero", (5, 1), Num(0)),
            _emit("m-one", (6, 1), Num(1)),
            _copy(-1, (6, 1), (7, 1)),            # search count before this pivot
            _copy(0, (8, 2), (8, 2)),
        ), guard=pivot_is_live),
        Rule("search-hit", ((A,),), (
            _emit("tag", (0, 1), B),
            _map("transition", 0, (1, 4), (1, 4), trans_found, kind="copy"),
            _copy(0, (4, 1), (5, 1)),             # resolved content
            *pivot_tail,
            *bound_actions(),
        ), guard=found_is_head),
        Rule("search-floor", ((A,),), (
            _emit("tag", (0, 1), B),
            _map("transition", 0, (1, 4), (1, 4), trans_blank, kind="copy"),
            _emit("tres-blank", (5, 1), Sym(blank)),
            *pivot_tail,
            *bound_actions(),
        ), guard=found_is_floor),
        Rule("search-jump", ((A,),), (
            _emit("tag", (0, 1), A),
            _copy(0, (1, 2), (1, 2)),
            _copy(cont_found_offset, (3, 2), (3, 2)),
            _map("f-next", 0, (5, 3), (5, 1), jump_f),
            _map("m-next", 0, (6, 1), (6, 1), bump_m),
            _copy(cont_jump_offset, (6, 1), (7, 1)),
            _copy(0, (8, 2), (8, 2)),
        )),
    ])
    return CompiledProgram("search-bounded" if bounded else "search", spec,
                           FocusPolicy(2, tuple(rules)), SEARCH_ARITY, "variable")


def compile_search_bounded(spec: TMSpec) -> CompiledProgram:
    return compile_search(spec, bounded=True)


# ---- constant-time compiler ------------------------------------------------

def compile_constant(spec: TMSpec) -> CompiledProgram:
    """Three rows per machine step: state row, transition row, count row.

    The state row at 3n holds (l, c, r): relative machine-step offsets
    to the previous visit of the left neighbour, the current cell and
    the right neighbour, with (0, 0, 0) as the never-visited sentinel.
    Moving right gives c' = r - 1 and a fresh left neighbour; moving
    left mirrors this.  The missing count chains through the visited
    row: l' = c' + l at the row c' steps back (and symmetrically).

    The count row also carries the content candidate fetched from the
    chained-to rows; the next state row keeps it only when the head
    recorded there matches the current head, otherwise the cell is
    fresh and reads blank.
    """
    rules_map = dict(spec.rules)
    halting = spec.halting
    blank = spec.blank

    def trans_full(content):
        s, h, t = content
        s2, t2, move = rules_map[(s.value, t.value)]
        h2 = h.value + (1 if move == "R" else -1)
        return (State(s2), Pos(h2), Pos(h.value), Sym(t2), DIR_R if move == "R" else DIR_L)

    def next_c(content):
        s, h, t = content[0], content[1], content[2]
        l, r = content[5], content[7]
        _s2, _t2, move = rules_map[(s.value, t.value)]
        base = r.value if move == "R" else l.value
        return (WILD, Num(base - 1), WILD)

    def cand_beta_offset(w):
        return 3 * w[-1][7].value + 2

    def cand_gamma_offset(w):
        return 3 * w[-1][7].value + 3

    def resolve_content(content):
        h, h_cand, t_cand = content
        return (t_cand,) if h_cand == h else (Sym(blank),)

    def close_counts(content):
        d, lpart, c, rpart = content
        if d == DIR_R:
            return (WILD, lpart, c, Num(c.value + rpart.value))
        return (WILD, Num(c.value + lpart.value), c, rpart)

    def beta_is_halting(w):
        return w[-1][1].value in halting

    rules = (
        Rule("halt-state-row", ((B,),), (
            _emit("tag", (0, 1), G),
            _copy(0, (1, 2), (1, 2)),
            _copy(0, (2, 1), (3, 1)),
            _emit("pad", (4, 1), WILD),
            _emit("dir", (5, 1), DIR_H),
            _copy(0, (6, 3), (6, 3)),
        ), guard=beta_is_halting),
        Rule("state-row", ((B,),), (
            _emit("tag", (0, 1), G),
            _map("transition", 0, (1, 3), (1, 5), trans_full, kind="copy"),
            _map("count-seed", 0, (1, 8), (6, 3), next_c),
        )),
        Rule("halt-transition-row", ((G, WILD, WILD, WILD, WILD, DIR_H),), (
            _emit("tag", (0, 1), A),
            _copy(0, (1, 2), (1, 2)),
            _emit("pad", (3, 2), WILD, WILD),
            _emit("dir", (5, 1), DIR_H),
            _copy(0, (6, 3), (6, 3)),
        )),
        Rule("count-row-right", ((G, WILD, WILD, WILD, WILD, DIR_R),), (
            _emit("tag", (0, 1), A),
            _emit("pad", (1, 1), WILD),
            _copy(0, (2, 1), (2, 1)),
            _copy(cand_beta_offset, (2, 1), (3, 1)),      # head at the chained row
            _copy(cand_gamma_offset, (4, 1), (4, 1)),     # content written there
            _copy(0, (5, 1), (5, 1)),
            _emit("fresh-left", (6, 1), Num(-1)),
            _copy(0, (7, 1), (7, 1)),
            _copy(cand_beta_offset, (8, 1), (8, 1)),      # raw right count to close
        )),
        Rule("count-row-left", ((G, WILD, WILD, WILD, WILD, DIR_L),), (
            _emit("tag", (0, 1), A),
            _emit("pad", (1, 1), WILD),
            _copy(0, (2, 1), (2, 1)),
            _copy(cand_beta_offset, (2, 1), (3, 1)),
            _copy(cand_gamma_offset, (4, 1), (4, 1)),
            _copy(0, (5, 1), (5, 1)),
            _copy(cand_beta_offset, (6, 1), (6, 1)),      # raw left count to close
            _copy(0, (7, 1), (7, 1)),
            _emit("fresh-right", (8, 1), Num(-1)),
        )),
        Rule("halt-count-row", ((A, WILD, WILD, WILD, WILD, DIR_H),), (
            _emit("tag", (0, 1), B),
            _copy(0, (1, 2), (1, 2)),
            _emit("pad", (3, 3), WILD, WILD, WILD),
            _copy(0, (6, 3), (6, 3)),
        )),
        Rule("close-step", ((A,),), (
            _emit("tag", (0, 1), B),
            _copy(-1, (1, 2), (1, 2)),                    # state and head from the transition row
            _map("resolve", 0, (2, 3), (3, 1), resolve_content),
            _emit("pad", (4, 1), WILD),
            _map("close-counts", 0, (5, 4), (5, 4), close_counts),
        )),
    )
    return CompiledProgram("constant", spec, FocusPolicy(1, rules), CONSTANT_ARITY, 3)


# ---- memory compiler -------------------------------------------------------

def compile_memory(spec: TMSpec) -> CompiledProgram:
    """Two rows per machine step through a most-recent-hash.

    The read happens while leaving the state row: the memory component
    keys the hash with the head cell and splices the stored content into
    the transition input.  The write happens while closing the step,
    keyed by the previous row's head.
    """
    rules_map = dict(spec.rules)
    halting = spec.halting
    blank = spec.blank
    store = MostRecentHash()

    def trans_mem(content):
        h, t, s = content
        t_name = blank if t == BLANK else t.value
        s2, t2, move = rules_map[(s.value, t_name)]
        h2 = h.value + (1 if move == "R" else -1)
        return (Pos(h2), Sym(t2), State(s2))

    reader = Component("tape-read", "memory", transform=trans_mem,
                       memory=MemorySpec(store, key_slots=(0,), value_arity=1,
                                         splice_slots=(1,)))

    def state_is_halting(w):
        return w[-1][3].value in halting

    rules = (
        Rule("halt-read", ((B,),), (
            _emit("tag", (0, 1), A),
            _copy(0, (1, 3), (1, 3)),
        ), guard=state_is_halting),
        Rule("read-step", ((B,),), (
            _emit("tag", (0, 1), A),
            Action(reader, 0, (1, 3), (1, 3)),
        )),
        Rule("halt-write", ((A,),), (
            _emit("tag", (0, 1), B),
            _copy(0, (1, 3), (1, 3)),
        ), guard=state_is_halting),
        Rule("write-step", ((A,),), (
            _emit("tag", (0, 1), B),
            _copy(0, (1, 3), (1, 3)),
        ), writes=(MemoryWrite(store, -1, (1, 1), 0, (2, 1)),)),
    )
    return CompiledProgram("memory", spec, FocusPolicy(1, rules), MEMORY_ARITY, 2,
                           memory=store)


# ---------------------------------------------------------------------------
# simulation and decoding

ALGOS = ("search", "search-bounded", "constant", "memory")


def compile_program(spec: TMSpec, algo: str) -> CompiledProgram:
    if algo == "search":
        return compile_search(spec)
    if algo == "search-bounded":
        return compile_search_bounded(spec)
    if algo == "constant":
        return compile_constant(spec)
    if algo == "memory":
        return compile_memory(spec)
    raise ValueError(f"unknown algo {algo!r}; expected one of {ALGOS}")


def _pivot_rows(program: CompiledProgram, trace: ThoughtSequence):
    """Indices of the rows that open each machine step."""
    if program.algo in ("search", "search-bounded"):
        return [i for i, row in enumerate(trace.states)
                if row[0] == B and row[1].kind == "state"]
    stride = 3 if program.algo == "constant" else 2
    return list(range(0, len(trace.states), stride))


@dataclass(frozen=True)
class SimulationResult:
    program: CompiledProgram
    trace: ThoughtSequence
    configs: tuple
    model_step_counts: tuple


def simulate(spec: TMSpec, tape_input, tm_steps: int, algo: str) -> SimulationResult:
    """Run ``tm_steps`` machine steps on the compiled program and decode."""
    if tm_steps < 0:
        raise ValueError("tm_steps must be >= 0")
    program = compile_program(spec, algo)
    model, initial = program.prepare(tape_input)
    seq = ThoughtSequence(tuple(initial))
    if program.steps_per_tm_step == "variable":
        needed = tm_steps + 1
        cap = (tm_steps + len(program.tape_input) + 2) * (tm_steps + 3) + 16
        while len(_pivot_rows(program, seq)) < needed:
            if len(seq.states) > cap:
                raise MalformedTrace("search did not produce enough pivots")
            seq = step(model, seq)
    else:
        seq = run(model, initial, program.steps_per_tm_step * tm_steps)
    pivots = _pivot_rows(program, seq)
    counts = tuple(b - a for a, b in zip(pivots, pivots[1:]))[:tm_steps]
    configs = tuple(decode_configs(program, seq, tm_steps))
    return SimulationResult(program, seq, configs, counts)


def decode_configs(program: CompiledProgram, trace: ThoughtSequence, upto: int) -> list:
    """Configurations 0..upto decoded in one incremental pass."""
    spec = program.spec
    pivots = _pivot_rows(program, trace)
    if upto >= len(pivots):
        raise MalformedTrace(f"step {upto} not present in the trace")
    configs = []
    tape = {}
    if program.algo in ("search", "search-bounded"):
        k = 0
        for i, row in enumerate(trace.states):
            if row[0] == B and row[3].kind == "pos":
                tape[row[3].value] = row[4].value
            if k <= upto and i == pivots[k]:
                configs.append(TMConfig.make(row[1].value, row[2].value, tape,
                                             spec.blank, k))
                k += 1
    elif program.algo == "constant":
        for k in range(upto + 1):
            row = trace.states[pivots[k]]
            configs.append(TMConfig.make(row[1].value, row[2].value, tape, spec.blank, k))
            if k < upto:
                r = trace.states[3 * k + 1]
                if r[0] == G and r[5] != DIR_H:
                    tape[r[3].value] = r[4].value
    elif program.algo == "memory":
        for i, sym in enumerate(program.tape_input):
            tape[i] = sym
        for k in range(upto + 1):
            row = trace.states[pivots[k]]
            configs.append(TMConfig.make(row[3].value, row[1].value, tape, spec.blank, k))
            if k < upto and row[3].value not in spec.halting:
                closer = trace.states[2 * k + 1]
                tape[row[1].value] = closer[2].value
    else:
        raise MalformedTrace(f"unknown algo {program.algo!r}")
    return configs


def extract_tm_config(program: CompiledProgram, trace: ThoughtSequence, k: int) -> TMConfig:
    """Decode machine step ``k``: state and head from its opening row,
    tape as the latest write per cell up to that row."""
    config = decode_configs(program, trace, k)[k]
    if not isinstance(config.state, str) or not isinstance(config.head, int):
        raise MalformedTrace(f"row for step {k} is not a machine-step opener")
    return config


def search_costs(result: SimulationResult) -> list:
    """Per machine step, the number of search rows spent resolving it."""
    if result.program.algo not in ("search", "search-bounded"):
        raise ValueError("search costs are defined for the search variants")
    return [c - 1 for c in result.model_step_counts]


def write_config_csv(path, configs) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tm_step", "state", "head", "tape_support"])
        for config in configs:
            support = ",".join(f"{cell}:{sym}" for cell, sym in config.tape)
            writer.writerow([config.step_count, config.state, config.head, support])
