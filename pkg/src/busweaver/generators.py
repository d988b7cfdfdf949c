"""Deterministic Verilog corpus generators for tests and probes.

Everything takes an explicit seed or a parameter set and produces plain
source text, so every generated design can be dumped and replayed.
"""

from __future__ import annotations

import random

_TEMPLATE_BINOPS = ("&", "|", "^", "+", "-")


def permutation_design(width: int, seed: int, name: str = "perm") -> str:
    """A scalarized random bit permutation: one assign per output bit,
    in shuffled statement order."""
    rng = random.Random(seed)
    pi = list(range(width))
    rng.shuffle(pi)
    order = list(range(width))
    rng.shuffle(order)
    lines = [
        f"module {name}(input [{width - 1}:0] in,"
        f" output [{width - 1}:0] out);"
    ]
    for i in order:
        lines.append(f"  assign out[{i}] = in[{pi[i]}];")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


class _Template:
    """Random 1-bit expression template, instantiated once per lane.

    Leaves are either strided (``a[i]``, ``b[i]``: per-lane bits of a
    vector input) or invariant (``sel``, a constant): the same value in
    every lane.  Mux selects are always invariant so the family stays
    vectorizable.
    """

    def __init__(self, depth: int, seed: int, invariant_slots: bool):
        self.rng = random.Random(seed)
        self.invariant_slots = invariant_slots
        self.uses_sel = False
        self.body = self._gen(depth)
        if not self._has_strided(self.body):
            # Guarantee at least one per-lane leaf so lanes differ.
            self.body = ("&", self.body, ("var", "a"))

    def _gen(self, depth: int):
        r = self.rng
        if depth <= 0 or r.random() < 0.25:
            return self._leaf()
        pick = r.random()
        if pick < 0.2:
            return ("~", self._gen(depth - 1))
        if pick < 0.35 and self.invariant_slots:
            self.uses_sel = True
            return ("mux", self._gen(depth - 1), self._gen(depth - 1))
        op = r.choice(_TEMPLATE_BINOPS)
        return (op, self._gen(depth - 1), self._gen(depth - 1))

    def _leaf(self):
        r = self.rng
        if self.invariant_slots and r.random() < 0.25:
            if r.random() < 0.5:
                self.uses_sel = True
                return ("var", "sel")
            return ("const", r.randrange(2))
        return ("var", r.choice("ab"))

    def _has_strided(self, node) -> bool:
        tag = node[0]
        if tag == "var":
            return node[1] in ("a", "b")
        if tag == "const":
            return False
        return any(self._has_strided(c) for c in node[1:])

    def render(self, lane: int) -> str:
        return self._render(self.body, lane)

    def _render(self, node, lane: int) -> str:
        tag = node[0]
        if tag == "var":
            if node[1] == "sel":
                return "sel"
            return f"{node[1]}[{lane}]"
        if tag == "const":
            return f"1'b{node[1]}"
        if tag == "~":
            return f"(~{self._render(node[1], lane)})"
        if tag == "mux":
            return (
                f"(sel ? {self._render(node[1], lane)}"
                f" : {self._render(node[2], lane)})"
            )
        return (
            f"({self._render(node[1], lane)} {tag}"
            f" {self._render(node[2], lane)})"
        )


def replicated_cone_design(
    width: int,
    depth: int,
    seed: int,
    invariant_slots: bool = True,
    name: str = "cones",
) -> str:
    """Per-bit copies of one random logic cone over vector inputs
    ``a``/``b`` (plus an invariant ``sel``/constants when enabled)."""
    tpl = _Template(depth, seed, invariant_slots)
    ports = [f"input [{width - 1}:0] a", f"input [{width - 1}:0] b"]
    if tpl.uses_sel:
        ports.append("input sel")
    ports.append(f"output [{width - 1}:0] out")
    lines = [f"module {name}({', '.join(ports)});"]
    for i in range(width):
        lines.append(f"  assign out[{i}] = {tpl.render(i)};")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def ripple_carry_design(width: int, name: str = "rca") -> str:
    """A ripple-carry adder written bit by bit.  The carry chain shares
    logic between adjacent sum cones, so the cones are never
    independent; this is the canonical must-reject input."""
    lines = [
        f"module {name}(input [{width - 1}:0] a, input [{width - 1}:0] b,"
        f" output [{width - 1}:0] sum);"
    ]
    for i in range(1, width):
        lines.append(f"  wire c{i};")
    lines.append("  assign sum[0] = a[0] ^ b[0];")
    if width > 1:
        lines.append("  assign c1 = a[0] & b[0];")
    for i in range(1, width):
        lines.append(f"  assign sum[{i}] = a[{i}] ^ b[{i}] ^ c{i};")
        if i + 1 < width:
            lines.append(
                f"  assign c{i + 1} = (a[{i}] & b[{i}])"
                f" | (c{i} & (a[{i}] ^ b[{i}]));"
            )
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def nested_instance_design(
    width: int, chain_length: int, name: str = "wrapped"
) -> str:
    """A per-bit instantiated inverter chain: a ``chain`` module with
    ``chain_length`` not-ops, instantiated once per lane.  Vectorizable
    only after the instances are inlined, which makes families of these
    (with varied chain lengths) the threshold-sweep corpus."""
    body = "~" * chain_length + "a"
    lines = [
        "module chain(input a, output y);",
        f"  assign y = {body};",
        "endmodule",
        "",
        f"module {name}(input [{width - 1}:0] in,"
        f" output [{width - 1}:0] out);",
    ]
    for i in range(width):
        lines.append(
            f"  chain u{i}(.a(in[{i}]), .y(out[{i}]));"
        )
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def scaling_design(op_target: int, name: str = "mesh") -> str:
    """A per-bit mux pattern sized to roughly ``op_target`` scalar
    instructions (3 per lane plus the repack), for runtime probes."""
    width = max(2, (op_target - 1) // 3)
    lines = [
        f"module {name}(",
        "  input sel,",
        f"  input [{width - 1}:0] a,",
        f"  input [{width - 1}:0] b,",
        f"  output [{width - 1}:0] out",
        ");",
    ]
    for i in range(width):
        lines.append(f"  assign out[{i}] = sel ? a[{i}] : b[{i}];")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"
