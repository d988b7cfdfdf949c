"""Deterministic Verilog emission and a stable IR dump format.

The emitter is the inverse of the frontend on its own output: parsing
emitted text and emitting again reproduces the bytes.  That fixpoint is
what the pipeline's idempotence guarantee is measured against, so every
choice here (port layout, naming, operator parenthesisation, statement
order) is a function of the IR alone.

Naming: user wire names win, instance outputs get ``<inst>_<port>``,
values that must be materialised but have no user name get ``t<k>``.
All generated names are uniquified against the module's namespace by
appending underscores.
"""

from __future__ import annotations

from busweaver.ir import HwDesign, HwModule, Operation, ValueRef

# Verilog precedence levels, high binds tight.
_PREC_TERNARY = 1
_PREC_BINARY = {"or": 2, "xor": 3, "and": 4, "add": 5, "sub": 5}
_PREC_UNARY = 6
_PREC_PRIMARY = 7

#: Kinds that are always rendered inline, never given a generated name.
_INLINE_KINDS = frozenset({"const", "input", "extract"})

#: Maximum inline rendering depth before a temporary is introduced, to
#: keep both our renderer and downstream parsers away from recursion
#: limits on pathological op chains.
_MAX_INLINE_DEPTH = 120


def _literal(value: int, width: int) -> str:
    if width == 1:
        return f"1'b{value}"
    return f"{width}'d{value}"


def _slice(name: str, low: int, width: int, base_width: int) -> str:
    if width == base_width and low == 0:
        return name
    if width == 1:
        return f"{name}[{low}]"
    return f"{name}[{low + width - 1}:{low}]"


class _ModuleEmitter:
    def __init__(self, module: HwModule):
        self.m = module
        self.ops = module.operations
        self.names: dict[int, str] = {}  # op id -> canonical name
        self.aliases: list[tuple[str, int]] = []  # (name, op id)
        self.taken: set[str] = set()
        self.inst_wires: dict[int, dict[str, str]] = {}  # op -> port -> wire
        # (instance op, port) -> user wire that is exactly that port.
        self.preferred: dict[tuple[int, str], str] = {}
        self.uses = [0] * len(self.ops)
        self._plan()

    # -- planning ----------------------------------------------------------

    def _unique(self, candidate: str) -> str:
        name = candidate
        while name in self.taken:
            name += "_"
        self.taken.add(name)
        return name

    def _instance_port_of(self, ref: ValueRef) -> tuple[int, str] | None:
        """(instance op, port name) when ``ref`` is exactly one output
        port of an instance, else None."""
        op = self.ops[ref.op]
        if op.kind == "instance":
            if len(op.out_ports) == 1:
                return ref.op, op.out_ports[0][0]
            return None
        if op.kind != "extract":
            return None
        base = self.ops[op.operands[0].op]
        if base.kind != "instance":
            return None
        offset = 0
        for pname, pwidth in base.out_ports:
            if (op.low, op.width) == (offset, pwidth):
                return op.operands[0].op, pname
            offset += pwidth
        return None

    def _used_out_ports(self, op_id: int) -> list[str]:
        """Output ports of an instance whose bits are read somewhere."""
        op = self.ops[op_id]
        used: set[str] = set()
        whole = any(
            ref.op == op_id for ref in self.m.outputs.values()
        ) or any(ref.op == op_id for ref in self.m.wires.values())
        spans = []
        for other in self.ops:
            for ref in other.operands:
                if ref.op != op_id:
                    continue
                if other.kind == "extract":
                    spans.append((other.low, other.width))
                else:
                    whole = True
        if whole:
            return [p for p, _ in op.out_ports]
        offset = 0
        for pname, pwidth in op.out_ports:
            for low, width in spans:
                if low < offset + pwidth and offset < low + width:
                    used.add(pname)
            offset += pwidth
        return [p for p, _ in op.out_ports if p in used]

    def _plan(self) -> None:
        m = self.m
        self.taken.update(p.name for p in m.ports)
        self.taken.update(m.wires)
        for op in self.ops:
            if op.kind == "instance":
                self.taken.add(op.name)

        for ref in list(m.outputs.values()) + list(m.wires.values()):
            self.uses[ref.op] += 1
        for op in self.ops:
            for ref in op.operands:
                self.uses[ref.op] += 1

        # User wire names: first one on a nameable op is canonical.  A
        # wire that is exactly one instance output port becomes that
        # port's connection wire rather than an alias of it.
        for wname, ref in m.wires.items():
            op = self.ops[ref.op]
            port = self._instance_port_of(ref)
            if port is not None and port not in self.preferred:
                self.preferred[port] = wname
            elif op.kind in _INLINE_KINDS or op.kind == "instance" \
                    or ref.op in self.names:
                self.aliases.append((wname, ref.op))
            else:
                self.names[ref.op] = wname

        # Instance output wires.
        for op_id, op in enumerate(self.ops):
            if op.kind != "instance":
                continue
            wires = {}
            for pname in self._used_out_ports(op_id):
                wires[pname] = self.preferred.get(
                    (op_id, pname)
                ) or self._unique(f"{op.name}_{pname}")
            self.inst_wires[op_id] = wires

        # Output port names double as names for their bound values.
        for p in m.ports:
            if p.direction != "output":
                continue
            ref = m.outputs[p.name]
            op = self.ops[ref.op]
            if op.kind not in _INLINE_KINDS and op.kind != "instance" \
                    and ref.op not in self.names:
                self.names[ref.op] = p.name

        # Forced temporaries: select/reverse bases must be identifiers,
        # anything non-trivial used twice is shared, and very deep
        # inline chains are cut.
        depth = [0] * len(self.ops)
        for op_id, op in enumerate(self.ops):
            kind = op.kind
            for ref in op.operands:
                base = self.ops[ref.op]
                if kind in ("extract", "reverse") \
                        and base.kind not in ("input", "instance") \
                        and ref.op not in self.names:
                    self.names[ref.op] = self._unique(f"t{ref.op}")
            if kind in _INLINE_KINDS or kind == "instance" \
                    or op_id in self.names:
                continue
            if self.uses[op_id] >= 2:
                self.names[op_id] = self._unique(f"t{op_id}")
                continue
            d = 1 + max(
                (depth[r.op] for r in op.operands), default=0
            )
            if d > _MAX_INLINE_DEPTH:
                self.names[op_id] = self._unique(f"t{op_id}")
            else:
                depth[op_id] = d

    # -- rendering -----------------------------------------------------------

    def _inst_slice_texts(self, op_id: int, low: int, width: int) -> list[str]:
        """Pieces (MSB first) of a slice of an instance result."""
        op = self.ops[op_id]
        wires = self.inst_wires[op_id]
        parts: list[str] = []
        offset = 0
        for pname, pwidth in op.out_ports:
            lo = max(low, offset)
            hi = min(low + width, offset + pwidth)
            if lo < hi:
                parts.append(
                    _slice(wires[pname], lo - offset, hi - lo, pwidth)
                )
            offset += pwidth
        return list(reversed(parts))

    def _slice_text(self, ref: ValueRef, low: int, width: int) -> str:
        """Slice of a named/input/instance value as Verilog text."""
        op = self.ops[ref.op]
        if op.kind == "input":
            return _slice(op.port, low, width, op.width)
        if op.kind == "instance":
            parts = self._inst_slice_texts(ref.op, low, width)
            if len(parts) == 1:
                return parts[0]
            return "{" + ", ".join(parts) + "}"
        name = self.names[ref.op]
        return _slice(name, low, width, op.width)

    def _render(self, ref: ValueRef, need: int) -> str:
        text, prec = self._expr(ref)
        if prec < need:
            return f"({text})"
        return text

    def _expr(self, ref: ValueRef) -> tuple[str, int]:
        op_id = ref.op
        op = self.ops[op_id]
        name = self.names.get(op_id)
        if name is not None:
            return name, _PREC_PRIMARY
        kind = op.kind
        if kind == "const":
            return _literal(op.value, op.width), _PREC_PRIMARY
        if kind == "input":
            return op.port, _PREC_PRIMARY
        if kind == "instance":
            parts = self._inst_slice_texts(op_id, 0, op.width)
            if len(parts) == 1:
                return parts[0], _PREC_PRIMARY
            return "{" + ", ".join(parts) + "}", _PREC_PRIMARY
        if kind == "extract":
            return (
                self._slice_text(op.operands[0], op.low, op.width),
                _PREC_PRIMARY,
            )
        if kind == "concat":
            items = [self._render(r, 0) for r in op.operands]
            return "{" + ", ".join(items) + "}", _PREC_PRIMARY
        if kind == "replicate":
            return (
                "{%d{%s}}" % (op.count, self._render(op.operands[0], 0)),
                _PREC_PRIMARY,
            )
        if kind == "reverse":
            src = op.operands[0]
            bits = [
                self._slice_text(src, i, 1) for i in range(src.width)
            ]
            return "{" + ", ".join(bits) + "}", _PREC_PRIMARY
        if kind == "not":
            return "~" + self._render(op.operands[0], _PREC_UNARY), \
                _PREC_UNARY
        if kind in ("redand", "redor", "redxor"):
            sigil = {"redand": "&", "redor": "|", "redxor": "^"}[kind]
            return sigil + self._render(op.operands[0], _PREC_UNARY), \
                _PREC_UNARY
        if kind in _PREC_BINARY:
            prec = _PREC_BINARY[kind]
            sigil = {"and": "&", "or": "|", "xor": "^", "add": "+",
                     "sub": "-"}[kind]
            a = self._render(op.operands[0], prec)
            b = self._render(op.operands[1], prec + 1)
            return f"{a} {sigil} {b}", prec
        if kind == "mux":
            cond = self._render(op.operands[0], _PREC_TERNARY + 1)
            then = self._render(op.operands[1], 0)
            other = self._render(op.operands[2], 0)
            return f"{cond} ? {then} : {other}", _PREC_TERNARY
        raise AssertionError(f"unhandled kind {kind!r}")  # pragma: no cover

    # -- statements ------------------------------------------------------------

    def emit(self) -> str:
        m = self.m
        lines: list[str] = []
        ports = [
            f"{p.direction} {'' if p.width == 1 else f'[{p.width - 1}:0] '}"
            f"{p.name}"
            for p in m.ports
        ]
        if len(m.ports) >= 3:
            lines.append(f"module {m.name}(")
            for i, text in enumerate(ports):
                comma = "," if i < len(ports) - 1 else ""
                lines.append(f"  {text}{comma}")
            lines.append(");")
        else:
            lines.append(f"module {m.name}({', '.join(ports)});")

        port_names = {p.name for p in m.ports}
        decls: list[tuple[int, int, str, int]] = []  # sort key + name, width
        for op_id, name in self.names.items():
            if name in port_names:
                continue  # output-bound values are declared by the port
            decls.append((op_id, 0, name, self.ops[op_id].width))
        for rank, (name, op_id) in enumerate(self.aliases):
            decls.append((op_id, 1 + rank, name, self.ops[op_id].width))
        for op_id in sorted(self.inst_wires):
            op = self.ops[op_id]
            widths = dict(op.out_ports)
            for pidx, (pname, _) in enumerate(op.out_ports):
                if pname in self.inst_wires[op_id]:
                    decls.append(
                        (op_id, -len(op.out_ports) + pidx,
                         self.inst_wires[op_id][pname], widths[pname])
                    )
        for _, _, name, width in sorted(decls):
            rng = "" if width == 1 else f"[{width - 1}:0] "
            lines.append(f"  wire {rng}{name};")

        for op_id, op in enumerate(self.ops):
            if op.kind != "instance":
                continue
            conns = [
                f".{pname}({self._render(ref, 0)})"
                for pname, ref in zip(op.in_ports, op.operands)
            ]
            conns += [
                f".{pname}({self.inst_wires[op_id][pname]})"
                for pname, _ in op.out_ports
                if pname in self.inst_wires[op_id]
            ]
            lines.append(f"  {op.module} {op.name}({', '.join(conns)});")

        for op_id in sorted(self.names):
            text = self._expr_for_named(op_id)
            lines.append(f"  assign {self.names[op_id]} = {text};")
        for name, op_id in self.aliases:
            lines.append(f"  assign {name} = {self._render(self.m.value_of(op_id), 0)};")

        for p in m.ports:
            if p.direction != "output":
                continue
            ref = m.outputs[p.name]
            if self.names.get(ref.op) == p.name:
                continue  # already assigned above under its own name
            lines.append(f"  assign {p.name} = {self._render(ref, 0)};")

        lines.append("endmodule")
        return "\n".join(lines) + "\n"

    def _expr_for_named(self, op_id: int) -> str:
        """Right-hand side for a named op: its own expression, not the
        name (which _expr would return)."""
        name = self.names.pop(op_id)
        try:
            text, _ = self._expr(self.m.value_of(op_id))
        finally:
            self.names[op_id] = name
        return text


def emit_module(module: HwModule) -> str:
    return _ModuleEmitter(module).emit()


def emit_design(design: HwDesign) -> str:
    """Emit every module in definition order."""
    return "\n".join(emit_module(m) for m in design.modules.values())


def _dump_op(op_id: int, op: Operation) -> str:
    args = [f"%{r.op}" for r in op.operands]
    kind = op.kind
    if kind == "const":
        args = [str(op.value)]
    elif kind == "input":
        args = [op.port]
    elif kind == "extract":
        args.append(str(op.low))
    elif kind == "replicate":
        args.append(str(op.count))
    elif kind == "instance":
        args = [op.module, op.name] + args
    return f"  %{op_id} = {kind}({', '.join(args)}) : i{op.width}"


def dump_module(module: HwModule) -> str:
    ports = ", ".join(
        f"{p.direction} {p.name}:{p.width}" for p in module.ports
    )
    lines = [f"module {module.name}({ports})"]
    for op_id, op in enumerate(module.operations):
        lines.append(_dump_op(op_id, op))
    for name, ref in module.wires.items():
        lines.append(f"  wire {name} = %{ref.op}")
    for p in module.ports:
        if p.direction == "output":
            ref = module.outputs[p.name]
            lines.append(f"  output {p.name} = %{ref.op}")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def emit_ir_dump(design: HwDesign) -> str:
    """Stable text form of the IR, one line per operation:
    ``%id = kind(operands) : iN``."""
    return "\n".join(dump_module(m) for m in design.modules.values())
