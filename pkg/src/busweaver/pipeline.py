"""Vectorization pipeline: whole-sink strategies plus greedy partial
chunking, applied to every multi-bit sink of every module.

Per sink the order is fixed: try a whole-width bit permutation, then a
whole-width replicated cone family, then fall back to partial
vectorization.  Partial chunking scans from the MSB down; at bit ``i``
it tries the widest chunk ``[i:j]`` first (j ascending from 0), for
each candidate checking the bit-permutation test before the structural
test, and on success resumes below the chunk at ``j - 1``.  Remaining
single bits are emitted scalar.  A rewrite is applied only when some
chunk of width >= 2 vectorized; all-scalar plans leave the module
untouched.

A rewrite that reconstructs exactly the existing operations yields a
module equal to its input (the rewriter value-numbers routing ops), so
re-running the pipeline on its own output changes nothing and reports
zero rewrites.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from busweaver.cones import (
    ConeShape,
    LogicCone,
    backward_cone,
    is_independent,
    is_isomorphic,
    plan_vector_expr,
)
from busweaver.inliner import InlineDecision, InlinePolicy, selective_inline
from busweaver.ir import (
    HwDesign,
    HwModule,
    ValueRef,
    count_instructions,
    verify,
)
from busweaver.permutation import (
    PassCounters,
    PermutationMap,
    detect_permutation,
    greedy_group,
    plan_segments,
    rewrite_permutation,
)
from busweaver.rewrite import ModuleRewriter, compact_design


class VectorizationError(Exception):
    """Raised when the input design fails verification."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


@dataclass(frozen=True)
class Chunk:
    """One tile of a sink: bits ``[high:low]`` handled by ``method``
    (``bit-permutation``, ``structural``, or ``scalar``)."""

    high: int
    low: int
    method: str

    @property
    def width(self) -> int:
        return self.high - self.low + 1


@dataclass
class SinkResult:
    module: str
    sink: str
    width: int
    chunks: list[Chunk]
    changed: bool
    #: "bit-level", "structural" or "mixed" for a changed sink
    category: str | None


@dataclass
class PipelineReport:
    sinks: list[SinkResult] = field(default_factory=list)
    inline_log: list[InlineDecision] = field(default_factory=list)
    counters: PassCounters = field(default_factory=PassCounters)
    instructions_before: int = 0
    instructions_after: int = 0
    #: Rewrites in modules that received at least one inlined body.
    inlining_assisted: list[SinkResult] = field(default_factory=list)

    @property
    def rewrites(self) -> list[SinkResult]:
        return [s for s in self.sinks if s.changed]

    @property
    def reduction_percent(self) -> float:
        if self.instructions_before == 0:
            return 0.0
        delta = self.instructions_before - self.instructions_after
        return 100.0 * delta / self.instructions_before


def _structural_family(
    module: HwModule,
    target: ValueRef,
    lo: int,
    hi: int,
    counters: PassCounters | None,
) -> tuple[list[LogicCone], ConeShape] | None:
    """Cones for bits lo..hi if they form a vectorizable family."""
    cones = []
    route_cache: dict = {}
    for bit in range(lo, hi + 1):
        cone = backward_cone(module, target, bit, counters, route_cache)
        if not cone.analyzable:
            return None
        cones.append(cone)
    if not is_independent(cones):
        return None
    shape = is_isomorphic(cones)
    if shape is None:
        return None
    return cones, shape


def partial_vectorize(
    module: HwModule,
    target: ValueRef,
    counters: PassCounters | None = None,
) -> list[Chunk]:
    """Greedy MSB-to-LSB chunking of a sink that did not vectorize
    whole.  Returns the chunk tiling only; ``vectorize_output`` applies
    it."""
    return [
        Chunk(hi, lo, method)
        for hi, lo, method, _ in _plan_chunks(module, target, counters)
    ]


def _plan_chunks(
    module: HwModule,
    target: ValueRef,
    counters: PassCounters | None,
) -> list[tuple[int, int, str, object]]:
    plans: list[tuple[int, int, str, object]] = []
    i = target.width - 1
    while i >= 0:
        found = False
        for j in range(i):  # widest candidate [i:0] first
            if counters is not None:
                counters.partial_candidates += 1
            pi = detect_permutation(
                module, target, lo=j, width=i - j + 1,
                counters=counters, anchored=False,
            )
            if pi is not None:
                plans.append((i, j, "bit-permutation", pi))
                found = True
            else:
                family = _structural_family(module, target, j, i, counters)
                if family is not None:
                    plans.append((i, j, "structural", family))
                    found = True
            if found:
                i = j - 1
                break
        if not found:
            plans.append((i, i, "scalar", None))
            i -= 1
    return plans


def vectorize_output(
    module: HwModule,
    target: ValueRef,
    counters: PassCounters | None = None,
) -> tuple[HwModule, list[Chunk], bool]:
    """Vectorize one sink value.  Returns the (possibly unchanged)
    module, the chunk tiling, and whether anything changed."""
    n = target.width
    assert n >= 2, "vectorization needs a multi-bit sink"

    pi = detect_permutation(module, target, counters=counters)
    if pi is not None:
        rewritten = rewrite_permutation(
            module, target, pi.source, greedy_group(pi)
        )
        return rewritten, [Chunk(n - 1, 0, "bit-permutation")], \
            rewritten != module

    family = _structural_family(module, target, 0, n - 1, counters)
    if family is not None:
        cones, shape = family
        rw = ModuleRewriter(module)
        value = plan_vector_expr(rw, cones[0], shape)
        rw.replace_uses(target, value)
        rewritten = rw.finish()
        return rewritten, [Chunk(n - 1, 0, "structural")], \
            rewritten != module

    plans = _plan_chunks(module, target, counters)
    chunks = [Chunk(hi, lo, method) for hi, lo, method, _ in plans]
    if all(method == "scalar" for _, _, method, _ in plans):
        return module, chunks, False

    rw = ModuleRewriter(module)
    parts: list[ValueRef] = []  # MSB first, matching plan order
    for hi, lo, method, payload in plans:
        if method == "bit-permutation":
            chunk_pi: PermutationMap = payload
            parts.append(
                plan_segments(rw, chunk_pi.source, greedy_group(chunk_pi))
            )
        elif method == "structural":
            cones, shape = payload
            parts.append(plan_vector_expr(rw, cones[0], shape))
        else:
            parts.append(rw.resolve_bit(target, hi))
    value = rw.concat(parts)
    rw.replace_uses(target, value)
    rewritten = rw.finish()
    return rewritten, chunks, rewritten != module


def _sink_refs(module: HwModule) -> list[str]:
    """Sinks in deterministic order: output ports first, then wires."""
    names = [p.name for p in module.ports if p.direction == "output"]
    names.extend(module.wires)
    return names


def _categorize(chunks: list[Chunk]) -> str:
    if len(chunks) == 1 and chunks[0].method == "bit-permutation":
        return "bit-level"
    if len(chunks) == 1 and chunks[0].method == "structural":
        return "structural"
    return "mixed"


def run_pipeline(
    design: HwDesign,
    policy: InlinePolicy | None = None,
    counters: PassCounters | None = None,
) -> tuple[HwDesign, PipelineReport]:
    """Verify, normalise, selectively inline, then vectorize every
    multi-bit sink of every module.

    Raises :class:`VectorizationError` when the input design does not
    verify; all other failures are per-sink analysis failures, which
    simply leave the sink scalar.
    """
    violations = verify(design)
    if violations:
        raise VectorizationError(violations)

    report = PipelineReport(
        counters=counters if counters is not None else PassCounters()
    )
    design = compact_design(design)
    report.instructions_before = sum(
        count_instructions(m) for m in design.modules.values()
    )

    policy = policy or InlinePolicy()
    inlined, report.inline_log = selective_inline(design, policy)
    inlined_modules = {
        d.caller for d in report.inline_log if d.inlined
    }

    result: dict[str, HwModule] = {}
    for name, module in inlined.modules.items():
        current = module
        for sink in _sink_refs(module):
            ref = current.outputs.get(sink)
            if ref is None:
                ref = current.wires.get(sink)
            if ref is None or ref.width < 2:
                continue
            current, chunks, changed = vectorize_output(
                current, ref, report.counters
            )
            category = _categorize(chunks) if changed else None
            report.sinks.append(
                SinkResult(name, sink, ref.width, chunks, changed, category)
            )
        result[name] = current

    out = HwDesign(result, design.top)
    report.instructions_after = sum(
        count_instructions(m) for m in out.modules.values()
    )
    report.inlining_assisted = [
        s for s in report.rewrites if s.module in inlined_modules
    ]
    return out, report
