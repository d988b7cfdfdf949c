"""Bit-permutation detection and rewriting.

A sink is a pure bit permutation when every output bit traces back
through routing operations (extract, concat, reverse, replicate) to a
distinct bit of one input, and the traced bits form a contiguous
window.  The rewrite packs maximal ascending runs of the permutation
into part selects, so ``out[0]=in[1] ... out[2]=in[3], out[3]=in[0]``
becomes ``{in[0], in[3:1]}``; a full identity collapses to the input
itself and a full reversal to one reverse operation.

Ascending runs are the only runs grouped.  Descending runs other than a
whole-output reversal stay as single-bit selects; merging them was
considered and rejected because the emitted form would no longer mirror
the detected segments one-for-one.
"""

from __future__ import annotations

from dataclasses import dataclass

from busweaver.ir import HwModule, ValueRef
from busweaver.rewrite import ModuleRewriter


@dataclass
class PassCounters:
    """Work counters shared by the analysis passes, for complexity
    assertions and reporting.

    ``trace_visits`` counts operations stepped through while tracing
    bit origins (bounded by output bits times graph depth),
    ``cone_visits`` counts operations resolved during cone collection,
    ``partial_candidates`` counts chunk candidates tried by the partial
    strategy (bounded by N*(N-1)/2 for an N-bit sink).
    """

    trace_visits: int = 0
    cone_visits: int = 0
    partial_candidates: int = 0


@dataclass(frozen=True)
class BitOrigin:
    """Where one traced bit comes from: ``bit`` of ``source``, which is
    an input or constant value."""

    source: ValueRef
    bit: int


@dataclass
class PermutationMap:
    """``bits[k]`` is the source bit feeding target bit ``k`` (both LSB
    first); the bits form a contiguous window starting at ``base``."""

    source: ValueRef
    bits: list[int]
    base: int

    @property
    def width(self) -> int:
        return len(self.bits)

    @property
    def is_identity(self) -> bool:
        return all(b == self.base + k for k, b in enumerate(self.bits))

    @property
    def is_reversal(self) -> bool:
        n = len(self.bits)
        return n >= 2 and all(
            b == self.base + n - 1 - k for k, b in enumerate(self.bits)
        )


@dataclass(frozen=True)
class Segment:
    """A maximal ascending run: ``width`` source bits starting at
    ``low``.  Segments are listed target-LSB first."""

    low: int
    width: int


def trace_bit_origin(
    module: HwModule,
    value: ValueRef,
    bit: int,
    counters: PassCounters | None = None,
) -> BitOrigin | None:
    """Follow one bit backwards through routing operations.

    Returns the originating input/const bit, or ``None`` as soon as the
    bit enters a computing operation or an instance.  Each step visits
    one operation, so a single trace is bounded by the dependence depth.
    """
    ops = module.operations
    while True:
        op = ops[value.op]
        kind = op.kind
        if kind in ("input", "const"):
            return BitOrigin(value, bit)
        if kind == "instance":
            return None
        if counters is not None:
            counters.trace_visits += 1
        if kind == "extract":
            bit += op.low
            value = op.operands[0]
        elif kind == "concat":
            offset = 0
            for ref in reversed(op.operands):
                if bit < offset + ref.width:
                    value = ref
                    bit -= offset
                    break
                offset += ref.width
        elif kind == "reverse":
            bit = op.width - 1 - bit
            value = op.operands[0]
        elif kind == "replicate":
            bit %= op.operands[0].width
            value = op.operands[0]
        else:
            return None  # a computing operation; not pure routing


def detect_permutation(
    module: HwModule,
    target: ValueRef,
    lo: int = 0,
    width: int | None = None,
    counters: PassCounters | None = None,
    anchored: bool = True,
) -> PermutationMap | None:
    """Detect a bit permutation on ``target[lo + width - 1 : lo]``.

    All bits must trace to distinct bits of one input, covering a
    contiguous window.  With ``anchored`` (the whole-sink case) the
    window must start at bit 0; chunk detection passes ``anchored=False``
    and accepts any window.
    """
    n = target.width if width is None else width
    if n < 2:
        return None
    origins: list[BitOrigin] = []
    for k in range(n):
        origin = trace_bit_origin(module, target, lo + k, counters)
        if origin is None:
            return None
        origins.append(origin)
    source = origins[0].source
    if module.operations[source.op].kind != "input":
        return None  # constant bits cannot form a permutation
    if any(o.source != source for o in origins[1:]):
        return None
    bits = [o.bit for o in origins]
    base = min(bits)
    if len(set(bits)) != n or max(bits) - base + 1 != n:
        return None
    if anchored and base != 0:
        return None
    return PermutationMap(source, bits, base)


def greedy_group(pi: PermutationMap) -> list[Segment]:
    """Group the permutation into maximal ascending runs, scanning from
    the target LSB: a run extends while pi[j+1] == pi[j] + 1."""
    bits = pi.bits
    segments: list[Segment] = []
    k = 0
    while k < len(bits):
        start = k
        while k + 1 < len(bits) and bits[k + 1] == bits[k] + 1:
            k += 1
        segments.append(Segment(bits[start], k - start + 1))
        k += 1
    return segments


def plan_segments(
    rw: ModuleRewriter, source: ValueRef, segments: list[Segment]
) -> ValueRef:
    """Build the concatenation of part selects for grouped segments.
    Segments come target-LSB first; concat operands are MSB first."""
    parts = [
        rw.extract(source, seg.low, seg.width) for seg in reversed(segments)
    ]
    return rw.concat(parts)


def rewrite_permutation(
    module: HwModule,
    target: ValueRef,
    source: ValueRef,
    segments: list[Segment],
) -> HwModule:
    """Replace ``target`` with the vector form of a detected whole-sink
    permutation.  An identity becomes the input itself (via select
    folding), a full reversal becomes a single reverse operation, and
    everything else a concatenation of part selects."""
    rw = ModuleRewriter(module)
    n = sum(seg.width for seg in segments)
    full_reversal = (
        n == source.width
        and n >= 2
        and all(seg.width == 1 for seg in segments)
        and all(seg.low == n - 1 - k for k, seg in enumerate(segments))
    )
    if full_reversal:
        new = rw.reverse(source)
    else:
        new = plan_segments(rw, source, segments)
    rw.replace_uses(target, new)
    return rw.finish()
