"""Textual pulse-sequence language: parsing and printing.

Grammar (one statement per line, '#' starts a comment):

    pulse  := ("pi" | "pi/2" | "rot(" FLOAT "rad)") target transition
              ["phase=" ("x" | "y" | FLOAT "rad")] ["if" cond]
    target := "A" | "B" | "AB"
    transition := "0+" | "0-" | "dq"
    cond   := ("mI=+1/2" | "mI=-1/2" | "mS=0" | "mS=+1" | "mS=-1") "@" ("A" | "B")
    delay  := "wait" FLOAT ("ns" | "us" | "ms")
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

TARGETS = ("A", "B", "AB")
TRANSITIONS = ("0+", "0-", "dq")
_UNITS = {"ns": 1e-9, "us": 1e-6, "ms": 1e-3}


class SequenceSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Condition:
    kind: str        # "mI" or "mS"
    value: float     # +-0.5 for mI; -1, 0, +1 for mS
    defect: str      # "A" or "B"

    def __str__(self) -> str:
        if self.kind == "mI":
            v = "+1/2" if self.value > 0 else "-1/2"
        else:
            v = {1: "+1", 0: "0", -1: "-1"}[int(self.value)]
        return f"{self.kind}={v}@{self.defect}"


@dataclass(frozen=True)
class PulseOp:
    angle_rad: float
    target: str
    transition: str
    phase_rad: float = 0.0   # 0 = x axis, pi/2 = y axis
    condition: Condition | None = None

    def __str__(self) -> str:
        if math.isclose(self.angle_rad, math.pi):
            head = "pi"
        elif math.isclose(self.angle_rad, math.pi / 2):
            head = "pi/2"
        else:
            head = f"rot({self.angle_rad!r}rad)"
        parts = [head, self.target, self.transition]
        if self.phase_rad != 0.0:
            if math.isclose(self.phase_rad, math.pi / 2):
                parts.append("phase=y")
            else:
                parts.append(f"phase={self.phase_rad!r}rad")
        if self.condition is not None:
            parts.append(f"if {self.condition}")
        return " ".join(parts)


@dataclass(frozen=True)
class Delay:
    value: float
    unit: str

    def __post_init__(self):
        if self.unit not in _UNITS:
            raise ValueError(f"unknown time unit {self.unit!r}")
        if self.value < 0:
            raise ValueError("delay must be >= 0")

    @property
    def duration_s(self) -> float:
        return self.value * _UNITS[self.unit]

    def __str__(self) -> str:
        return f"wait {self.value!r}{self.unit}"


@dataclass(frozen=True)
class PulseSequence:
    items: tuple
    source: str = ""

    def __str__(self) -> str:
        return "\n".join(str(item) for item in self.items) + "\n"

    @property
    def total_wait_s(self) -> float:
        return sum(i.duration_s for i in self.items if isinstance(i, Delay))

    def has_conditions(self) -> bool:
        return any(isinstance(i, PulseOp) and i.condition is not None
                   for i in self.items)


_FLOAT = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_DELAY_RE = re.compile(rf"^wait\s+({_FLOAT})(ns|us|ms)$")
_ROT_RE = re.compile(rf"^rot\(({_FLOAT})rad\)$")
_PHASE_RE = re.compile(rf"^phase=(x|y|(?:{_FLOAT})rad)$")
_COND_RE = re.compile(r"^(mI=[-+]1/2|mS=(?:[-+]1|0))@(A|B)$")


def _parse_condition(tok: str, line_no: int, col: int) -> Condition:
    m = _COND_RE.match(tok)
    if not m:
        raise SequenceSyntaxError(f"malformed condition {tok!r}", line_no, col)
    spec, defect = m.groups()
    kind, val = spec.split("=")
    value = {"+1/2": 0.5, "-1/2": -0.5, "+1": 1.0, "-1": -1.0, "0": 0.0}[val]
    return Condition(kind, value, defect)


def _parse_pulse(tokens: list[tuple[str, int]], line_no: int) -> PulseOp:
    head, col0 = tokens[0]
    if head == "pi":
        angle = math.pi
    elif head == "pi/2":
        angle = math.pi / 2
    else:
        m = _ROT_RE.match(head)
        if not m:
            raise SequenceSyntaxError(f"unknown statement {head!r}", line_no, col0)
        angle = float(m.group(1))
    if len(tokens) < 3:
        raise SequenceSyntaxError("pulse needs a target and a transition",
                                  line_no, col0 + len(head))
    target, tcol = tokens[1]
    if target not in TARGETS:
        raise SequenceSyntaxError(f"unknown target {target!r}", line_no, tcol)
    transition, xcol = tokens[2]
    if transition not in TRANSITIONS:
        raise SequenceSyntaxError(f"unknown transition {transition!r}", line_no, xcol)
    phase = 0.0
    condition = None
    rest = tokens[3:]
    while rest:
        tok, col = rest[0]
        if tok.startswith("phase="):
            m = _PHASE_RE.match(tok)
            if not m:
                raise SequenceSyntaxError(f"malformed phase {tok!r}", line_no, col)
            val = m.group(1)
            if val == "x":
                phase = 0.0
            elif val == "y":
                phase = math.pi / 2
            else:
                phase = float(val[:-3])
            rest = rest[1:]
        elif tok == "if":
            if len(rest) < 2:
                raise SequenceSyntaxError("missing condition after 'if'", line_no, col)
            condition = _parse_condition(rest[1][0], line_no, rest[1][1])
            rest = rest[2:]
        else:
            raise SequenceSyntaxError(f"unexpected token {tok!r}", line_no, col)
    return PulseOp(angle, target, transition, phase, condition)


def parse_sequence(text: str) -> PulseSequence:
    """Parse DSL text into a PulseSequence (syntax errors carry line/column)."""
    items = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        tokens = [(m.group(0), m.start() + 1)
                  for m in re.finditer(r"\S+", line)]
        head, col = tokens[0]
        if head == "wait":
            stmt = line.strip()
            m = _DELAY_RE.match(stmt)
            if not m:
                raise SequenceSyntaxError(f"malformed delay {stmt!r}", line_no, col)
            items.append(Delay(float(m.group(1)), m.group(2)))
        else:
            items.append(_parse_pulse(tokens, line_no))
    return PulseSequence(tuple(items), source=text)


def format_sequence(seq: PulseSequence) -> str:
    return str(seq)
