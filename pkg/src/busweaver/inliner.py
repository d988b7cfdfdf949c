"""Selective inlining of small, regular submodules.

Per-bit structure is routinely hidden behind module boundaries (a
one-bit cell instantiated N times).  Inlining exposes it to the
vectorizer, but inlining everything defeats the point of a hierarchy,
so a site is inlined only when the callee is *regular* (vectorization
could conceivably profit: nothing but bitwise/arithmetic/mux/routing
ops and instances of regular modules) and *small* (recursive
instruction count strictly below the policy threshold).

Decisions are made bottom-up: a callee is itself inlined first, so its
size is measured after its own inlining settled.
"""

from __future__ import annotations

from dataclasses import dataclass

from busweaver.ir import (
    REDUCE_KINDS,
    HwDesign,
    HwModule,
    ValueRef,
    count_instructions,
)
from busweaver.rewrite import ModuleRewriter


@dataclass
class InlinePolicy:
    enabled: bool = True
    threshold: int = 150


@dataclass(frozen=True)
class InlineDecision:
    caller: str
    instance: str
    callee: str
    inlined: bool
    callee_size: int
    reason: str


def regularity_analysis(
    module: HwModule, design: HwDesign | None = None
) -> bool:
    """A module is regular when every operation is something the
    vectorizer can analyze: routing, bitwise logic, add/sub, mux, or an
    instance of a regular module.  Reductions make it irregular."""
    return _regular(module, design, set())


def _regular(
    module: HwModule, design: HwDesign | None, visiting: set[str]
) -> bool:
    if module.name in visiting:
        return False  # recursive instantiation is never regular
    visiting.add(module.name)
    try:
        for op in module.operations:
            if op.kind in REDUCE_KINDS:
                return False
            if op.kind == "instance":
                if design is None:
                    return False
                callee = design.modules.get(op.module)
                if callee is None or not _regular(callee, design, visiting):
                    return False
        return True
    finally:
        visiting.discard(module.name)


def size_analysis(module: HwModule, design: HwDesign | None = None) -> int:
    """Recursive instruction count: the module's own computing ops plus
    the full size of every instantiated callee."""
    return _size(module, design, {}, set())


def _size(
    module: HwModule,
    design: HwDesign | None,
    memo: dict[str, int],
    visiting: set[str],
) -> int:
    if module.name in memo:
        return memo[module.name]
    if module.name in visiting:
        raise ValueError(
            f"instantiation cycle through module {module.name!r}"
        )
    visiting.add(module.name)
    total = count_instructions(module)
    for op in module.operations:
        if op.kind != "instance":
            continue
        callee = design.modules.get(op.module) if design else None
        if callee is not None:
            total += _size(callee, design, memo, visiting)
    visiting.discard(module.name)
    memo[module.name] = total
    return total


def _instantiation_postorder(design: HwDesign) -> list[str]:
    """Module names, callees before callers."""
    order: list[str] = []
    state: dict[str, int] = {}

    def visit(name: str) -> None:
        if state.get(name):
            return
        state[name] = 1
        module = design.modules.get(name)
        if module is not None:
            for op in module.operations:
                if op.kind == "instance" and op.module in design.modules:
                    visit(op.module)
        order.append(name)

    for name in design.modules:
        visit(name)
    return order


def _splice(rw: ModuleRewriter, op_id: int, callee: HwModule,
            taken_names: set[str]) -> None:
    """Copy the callee body into the caller in place of instance
    ``op_id``, substituting connected values for the callee's inputs."""
    inst = rw.builder.operations[op_id]
    inst_ref = ValueRef(op_id, inst.width)
    mapping: dict[int, ValueRef] = {}
    for cid, cop in enumerate(callee.operations):
        kind = cop.kind
        if kind == "input":
            idx = inst.in_ports.index(cop.port)
            mapping[cid] = inst.operands[idx]
        elif kind == "const":
            mapping[cid] = rw.const(cop.value, cop.width)
        elif kind == "extract":
            mapping[cid] = rw.extract(
                mapping[cop.operands[0].op], cop.low, cop.width
            )
        elif kind == "concat":
            mapping[cid] = rw.concat(
                [mapping[r.op] for r in cop.operands]
            )
        elif kind == "reverse":
            mapping[cid] = rw.reverse(mapping[cop.operands[0].op])
        elif kind == "replicate":
            mapping[cid] = rw.replicate(
                mapping[cop.operands[0].op], cop.count
            )
        elif kind == "not":
            mapping[cid] = rw.not_(mapping[cop.operands[0].op])
        elif kind == "mux":
            c, a, b = (mapping[r.op] for r in cop.operands)
            mapping[cid] = rw.mux(c, a, b)
        elif kind in REDUCE_KINDS:
            mapping[cid] = rw.reduce(kind, mapping[cop.operands[0].op])
        elif kind == "instance":
            name = f"{inst.name}_{cop.name}"
            while name in taken_names:
                name += "_"
            taken_names.add(name)
            mapping[cid] = rw.builder.instance(
                cop.module, name,
                [mapping[r.op] for r in cop.operands],
                cop.in_ports, cop.out_ports,
            )
        else:
            mapping[cid] = rw.binary(
                kind, mapping[cop.operands[0].op],
                mapping[cop.operands[1].op],
            )
    outs = [
        mapping[callee.outputs[pname].op] for pname, _ in inst.out_ports
    ]
    packed = rw.concat(list(reversed(outs)))
    rw.replace_uses(inst_ref, packed)
    rw.drop_instance(op_id)


def selective_inline(
    design: HwDesign, policy: InlinePolicy | None = None
) -> tuple[HwDesign, list[InlineDecision]]:
    """Inline every site whose callee is regular and strictly below the
    size threshold.  Returns the rewritten design and one decision per
    site, in processing order."""
    policy = policy or InlinePolicy()
    log: list[InlineDecision] = []
    if not policy.enabled:
        return design, log

    new_modules: dict[str, HwModule] = {}
    for name in _instantiation_postorder(design):
        module = design.modules[name]
        instances = [
            op_id for op_id, op in enumerate(module.operations)
            if op.kind == "instance"
        ]
        if not instances:
            new_modules[name] = module
            continue
        env = HwDesign({**design.modules, **new_modules}, design.top)
        rw = ModuleRewriter(module)
        taken = {
            op.name for op in module.operations if op.kind == "instance"
        }
        changed = False
        for op_id in instances:
            op = module.operations[op_id]
            callee = new_modules.get(op.module)
            if callee is None:
                log.append(InlineDecision(name, op.name, op.module,
                                          False, -1, "unresolved callee"))
                continue
            size = size_analysis(callee, env)
            if not regularity_analysis(callee, env):
                log.append(InlineDecision(name, op.name, op.module,
                                          False, size, "not regular"))
                continue
            if size >= policy.threshold:
                log.append(InlineDecision(
                    name, op.name, op.module, False, size,
                    f"size {size} >= threshold {policy.threshold}",
                ))
                continue
            _splice(rw, op_id, callee, taken)
            changed = True
            log.append(InlineDecision(
                name, op.name, op.module, True, size,
                f"size {size} < threshold {policy.threshold}",
            ))
        new_modules[name] = rw.finish() if changed else module

    ordered = {name: new_modules[name] for name in design.modules}
    return HwDesign(ordered, design.top), log
