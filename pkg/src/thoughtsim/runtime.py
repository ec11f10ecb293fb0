"""Slot-structured sequence runtime driven by focuses.

A sequence is an append-only list of visible states, each a fixed-arity
tuple of symbols.  Every step a policy inspects only the last ``tau``
states, picks the first matching rule, and the rule's components each
fetch a slot range from somewhere in the sequence (a selective focus),
optionally transform it, and deposit it on a slot range of the new
state (a generative focus).  Generative ranges must tile the new state
exactly, so every component's content can be read back from the result.

Memory components key into a MostRecentHash instead of copying
sequence content; writes back into the hash are rule side effects
applied after the new state is assembled.

Time offsets are nonpositive and relative to the latest existing state:
offset 0 addresses the state the policy just looked at, -1 the one
before it, and so on.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .memory import MostRecentHash


class NoRuleMatched(Exception):
    pass


class FocusOutOfRange(Exception):
    pass


class OverlappingFocus(Exception):
    pass


class UncoveredSlots(Exception):
    pass


class UnknownSymbol(Exception):
    pass


# ---------------------------------------------------------------------------
# symbols

@dataclass(frozen=True)
class Symbol:
    kind: str
    value: object = None

    def __repr__(self):
        if self.kind == "blank":
            return "Φ"
        if self.kind == "wild":
            return "*"
        return f"{self.kind[0]}:{self.value}"


def Tag(name: str) -> Symbol:
    return Symbol("tag", name)


def State(name: str) -> Symbol:
    return Symbol("state", name)


def Pos(i: int) -> Symbol:
    return Symbol("pos", int(i))


def Sym(name: str) -> Symbol:
    return Symbol("sym", name)


def Num(i: int) -> Symbol:
    return Symbol("num", int(i))


BLANK = Symbol("blank")
WILD = Symbol("wild")


def matches(pattern: Symbol, sym: Symbol) -> bool:
    """Structural equality, except a pattern-side WILD matches anything."""
    return pattern == WILD or pattern == sym


# ---------------------------------------------------------------------------
# states and focuses

@dataclass(frozen=True)
class VisibleState:
    slots: tuple
    external: tuple = ()

    def full(self) -> tuple:
        return self.slots + self.external

    def __getitem__(self, i):
        return self.slots[i]

    @property
    def arity(self) -> int:
        return len(self.slots)


def make_state(*symbols, external=()) -> VisibleState:
    return VisibleState(tuple(symbols), tuple(external))


@dataclass(frozen=True)
class SelectiveFocus:
    time_offset: int            # <= 0, relative to the latest existing state
    start: int
    length: int

    def __post_init__(self):
        if self.time_offset > 0:
            raise ValueError("selective focus cannot look forward")


@dataclass(frozen=True)
class GenerativeFocus:
    start: int
    length: int


@dataclass(frozen=True)
class MemorySpec:
    """How a memory component turns an addressed range into content.

    ``key_slots`` index into the fetched tuple and form the hash key.
    With ``splice_slots`` set, the stored value replaces those positions
    of the fetched tuple; otherwise the content is the value alone.
    A missing key reads as BLANK symbols.
    """

    store: MostRecentHash
    key_slots: tuple
    value_arity: int
    splice_slots: tuple | None = None


@dataclass(frozen=True)
class Component:
    name: str
    kind: str                   # copy | context | memory
    transform: object = None    # callable tuple -> tuple, None = identity
    memory: MemorySpec | None = None

    def __post_init__(self):
        if self.kind not in ("copy", "context", "memory"):
            raise ValueError(f"unknown component kind {self.kind!r}")
        if (self.kind == "memory") != (self.memory is not None):
            raise ValueError("memory spec exactly for memory components")


def check_transform_injective(component: Component, domain) -> bool:
    """Enumerate a finite content domain and verify no two inputs collide."""
    fn = component.transform or (lambda t: t)
    seen = {}
    for content in domain:
        out = tuple(fn(tuple(content)))
        if out in seen and seen[out] != tuple(content):
            return False
        seen[out] = tuple(content)
    return True


# ---------------------------------------------------------------------------
# policy

@dataclass(frozen=True)
class Action:
    """One component application: fetch src at offset, place at dst.

    ``offset`` is an int or a callable over the window (newest state
    last) returning an int, so compiled programs can aim a focus using
    counter slots of recent states.
    """

    component: Component
    offset: object
    src: tuple                  # (start, length)
    dst: tuple                  # (start, length)

    def resolve_offset(self, window) -> int:
        off = self.offset(window) if callable(self.offset) else self.offset
        return int(off)


@dataclass(frozen=True)
class MemoryWrite:
    store: MostRecentHash
    key_offset: int
    key_src: tuple
    value_offset: int
    value_src: tuple


@dataclass(frozen=True)
class Rule:
    """First-match rule: symbol patterns over the most recent states.

    ``pattern`` is a tuple of per-state patterns, newest last; each is a
    symbol tuple (WILD entries match anything) or None for any state.
    ``guard`` may refine the match using only the window.
    """

    name: str
    pattern: tuple
    actions: tuple
    guard: object = None
    writes: tuple = ()

    def matches(self, window) -> bool:
        if len(window) < len(self.pattern):
            return False
        for state, pat in zip(window[-len(self.pattern):], self.pattern):
            if pat is None:
                continue
            slots = state.full()
            if len(pat) > len(slots):
                return False
            if not all(matches(p, s) for p, s in zip(pat, slots)):
                return False
        if self.guard is not None and not self.guard(window):
            return False
        return True


@dataclass(frozen=True)
class FocusPolicy:
    tau: int
    rules: tuple

    def window(self, states) -> tuple:
        return tuple(states[-self.tau:]) if self.tau else ()

    def match(self, states) -> Rule:
        window = self.window(states)
        for rule in self.rules:
            if rule.matches(window):
                return rule
        raise NoRuleMatched(f"no rule for window {window}")


def tie_train(policy: FocusPolicy, window_pattern, actions, guard=None,
              name="tied") -> FocusPolicy:
    """Associate a recent-state pattern with actions, along the run direction.

    An existing rule with the identical pattern is overwritten in place;
    otherwise the new rule is appended.  Nothing earlier than the
    pattern window is consulted, so learning happens along and in the
    direction of execution.
    """
    pattern = tuple(window_pattern)
    if len(pattern) > policy.tau:
        raise ValueError(f"pattern arity {len(pattern)} exceeds window {policy.tau}")
    new_rule = Rule(name, pattern, tuple(actions), guard)
    rules = list(policy.rules)
    for i, rule in enumerate(rules):
        if rule.pattern == pattern and rule.guard is None and guard is None:
            rules[i] = new_rule
            return replace(policy, rules=tuple(rules))
    return replace(policy, rules=tuple(rules) + (new_rule,))


# ---------------------------------------------------------------------------
# sequences and execution

@dataclass(frozen=True)
class ThoughtSequence:
    states: tuple
    focus_log: tuple = ()       # per generated step: tuple of (name, sel, gen)

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]


@dataclass(frozen=True)
class Model:
    policy: FocusPolicy
    arity: int
    external_fn: object = None  # callable(states, new_slots) -> external tuple


def activate_focuses(policy: FocusPolicy, sequence: ThoughtSequence):
    """Resolve the focus of every component for the next step.

    Deterministic, and a function of the last ``tau`` states only; the
    actual fetches may reach anywhere in the sequence.
    """
    if len(sequence.states) == 0:
        raise NoRuleMatched("empty sequence")
    rule = policy.match(sequence.states)
    window = policy.window(sequence.states)
    out = []
    for action in rule.actions:
        sel = SelectiveFocus(action.resolve_offset(window), *action.src)
        out.append((action.component, sel, GenerativeFocus(*action.dst)))
    return out


def fetch_content(component: Component, sequence: ThoughtSequence,
                  focus: SelectiveFocus) -> tuple:
    """Fetch the focused range, resolve memory reads, apply the transform."""
    target = len(sequence.states) - 1 + focus.time_offset
    if not 0 <= target < len(sequence.states):
        raise FocusOutOfRange(f"offset {focus.time_offset} at length {len(sequence.states)}")
    slots = sequence.states[target].full()
    if focus.start < 0 or focus.start + focus.length > len(slots):
        raise FocusOutOfRange(f"slots [{focus.start}, {focus.start + focus.length}) "
                              f"outside arity {len(slots)}")
    content = tuple(slots[focus.start:focus.start + focus.length])
    if component.memory is not None:
        spec = component.memory
        key = tuple(content[i] for i in spec.key_slots)
        value = spec.store.read(key)
        if value is None:
            value = (BLANK,) * spec.value_arity
        if spec.splice_slots is None:
            content = tuple(value)
        else:
            merged = list(content)
            for pos, sym in zip(spec.splice_slots, value):
                merged[pos] = sym
            content = tuple(merged)
    if component.transform is not None:
        content = tuple(component.transform(content))
    return content


def combine(contents, g_list) -> VisibleState:
    """Assemble a new state; every component's content must be readable back.

    Generative ranges may not overlap and must jointly cover the state.
    """
    spans = []
    for content, g in zip(contents, g_list):
        if len(content) != g.length:
            raise ValueError(f"content arity {len(content)} vs generative length {g.length}")
        spans.append((g.start, g.length, content))
    spans.sort(key=lambda t: t[0])
    cursor = 0
    slots = []
    for start, length, content in spans:
        if start < cursor:
            raise OverlappingFocus(f"range at {start} overlaps previous end {cursor}")
        if start > cursor:
            raise UncoveredSlots(f"slots [{cursor}, {start}) are not produced")
        slots.extend(content)
        cursor = start + length
    return VisibleState(tuple(slots))


def step(model: Model, sequence: ThoughtSequence) -> ThoughtSequence:
    """Append exactly one state: activate, fetch, combine, then hash writes."""
    rule = model.policy.match(sequence.states)
    window = model.policy.window(sequence.states)
    triples = []
    for action in rule.actions:
        sel = SelectiveFocus(action.resolve_offset(window), *action.src)
        triples.append((action.component, sel, GenerativeFocus(*action.dst)))
    contents = [fetch_content(c, sequence, sel) for c, sel, _ in triples]
    new_state = combine(contents, [g for _, _, g in triples])
    if new_state.arity != model.arity:
        raise UncoveredSlots(f"combined arity {new_state.arity} vs model arity {model.arity}")
    for write in rule.writes:
        key = fetch_content(Component("mw-key", "copy"), sequence,
                            SelectiveFocus(write.key_offset, *write.key_src))
        value = fetch_content(Component("mw-value", "copy"), sequence,
                              SelectiveFocus(write.value_offset, *write.value_src))
        write.store.write(key, value)
    if model.external_fn is not None:
        ext = model.external_fn(sequence.states, new_state.slots)
        new_state = VisibleState(new_state.slots, tuple(ext) if ext else ())
    log_entry = tuple((c.name, sel, g) for c, sel, g in triples)
    return ThoughtSequence(sequence.states + (new_state,),
                           sequence.focus_log + (log_entry,))


def run(model: Model, initial_states, n: int) -> ThoughtSequence:
    """Iterate ``step`` n times from the given prefix; prefix-stable."""
    if n < 0:
        raise ValueError("n must be >= 0")
    seq = ThoughtSequence(tuple(initial_states))
    for _ in range(n):
        seq = step(model, seq)
    return seq


def write_trace_csv(path, sequence: ThoughtSequence) -> None:
    """step, tag slot, all slots pipe-separated, per-component focus log."""
    with open(path, "w", newline="\n") as fh:
        fh.write("step,tag_slot,slots,focuses\n")
        generated_from = len(sequence.states) - len(sequence.focus_log)
        for i, state in enumerate(sequence.states):
            slots = "|".join(repr(s) for s in state.full())
            if i >= generated_from:
                entry = sequence.focus_log[i - generated_from]
                focuses = ";".join(
                    f"({sel.time_offset},{sel.start},{sel.length})->({g.start},{g.length})"
                    for _, sel, g in entry)
            else:
                focuses = ""
            fh.write(f"{i},{repr(state.full()[0])},{slots},{focuses}\n")


# ---------------------------------------------------------------------------
# vector form

@dataclass(frozen=True)
class SymbolCodec:
    """One-hot symbol codec over a fixed alphabet, one block per slot."""

    symbols: tuple
    arity: int
    index: dict = field(hash=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "index", {s: i for i, s in enumerate(self.symbols)})

    @classmethod
    def from_states(cls, states) -> "SymbolCodec":
        seen = []
        marked = set()
        arity = None
        for state in states:
            if arity is None:
                arity = len(state.full())
            for sym in state.full():
                if sym not in marked:
                    marked.add(sym)
                    seen.append(sym)
        return cls(tuple(seen), arity)

    @property
    def width(self) -> int:
        return self.arity * len(self.symbols)


def vector_encode(state: VisibleState, codec: SymbolCodec) -> np.ndarray:
    slots = state.full()
    if len(slots) != codec.arity:
        raise UnknownSymbol(f"state arity {len(slots)} vs codec arity {codec.arity}")
    k = len(codec.symbols)
    vec = np.zeros(codec.arity * k)
    for i, sym in enumerate(slots):
        j = codec.index.get(sym)
        if j is None:
            raise UnknownSymbol(repr(sym))
        vec[i * k + j] = 1.0
    return vec


def vector_decode(vec, codec: SymbolCodec) -> VisibleState:
    """Nearest-symbol rounding: per-slot argmax over the one-hot block."""
    vec = np.asarray(vec, dtype=np.float64)
    k = len(codec.symbols)
    if vec.shape != (codec.arity * k,):
        raise UnknownSymbol(f"vector length {vec.shape} vs codec width {codec.arity * k}")
    slots = []
    for i in range(codec.arity):
        block = vec[i * k:(i + 1) * k]
        slots.append(codec.symbols[int(np.argmax(block))])
    return VisibleState(tuple(slots))
