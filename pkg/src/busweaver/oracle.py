"""Simulation-based equivalence checking between module versions.

Small input spaces are enumerated exhaustively; larger ones get a
deterministic seeded sample plus the structured corner vectors
(all-zeros, all-ones, and every one-hot).  Both sides run through the
bit-parallel packed interpreter, so even the exhaustive check at the
16-bit default is a handful of big-integer operations per gate.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from busweaver.ir import HwDesign, HwModule, simulate_packed

DEFAULT_MAX_EXHAUSTIVE_BITS = 16
DEFAULT_SAMPLES = 10000


@dataclass
class EquivalenceVerdict:
    """Outcome of one module-pair check.

    ``status`` is ``equivalent-exhaustive``, ``equivalent-sampled`` or
    ``counterexample``; in the last case ``counterexample`` holds an
    input assignment on which the two modules disagree, and
    ``mismatch_output`` names the first differing output port.
    """

    status: str
    vectors_tested: int
    seed: int | None = None
    counterexample: dict[str, int] | None = None
    mismatch_output: str | None = None

    @property
    def equivalent(self) -> bool:
        return self.status.startswith("equivalent")


def _signature(module: HwModule) -> list[tuple[str, str, int]]:
    return [(p.name, p.direction, p.width) for p in module.ports]


def _exhaustive_lanes(widths: list[int]) -> tuple[list[list[int]], int]:
    """Truth-table lane masks for every input bit, all 2**W vectors."""
    total = sum(widths)
    n_vectors = 1 << total
    lanes_flat: list[int] = []
    for g in range(total):
        span = 1 << g
        mask = ((1 << span) - 1) << span
        stride = span * 2
        while stride < n_vectors:
            mask |= mask << stride
            stride *= 2
        lanes_flat.append(mask)
    out: list[list[int]] = []
    pos = 0
    for w in widths:
        out.append(lanes_flat[pos:pos + w])
        pos += w
    return out, n_vectors


def _sampled_vectors(widths: list[int], samples: int,
                     seed: int) -> list[list[int]]:
    """Corner vectors plus a seeded uniform sample; one entry per test
    vector, each a list of per-port values."""
    total = sum(widths)
    vectors: list[list[int]] = []

    def split(bits: int) -> list[int]:
        vals = []
        pos = 0
        for w in widths:
            vals.append((bits >> pos) & ((1 << w) - 1))
            pos += w
        return vals

    vectors.append(split(0))
    vectors.append(split((1 << total) - 1))
    for g in range(total):
        vectors.append(split(1 << g))
    rng = random.Random(seed)
    for _ in range(samples):
        vectors.append(split(rng.getrandbits(total)))
    return vectors


def _lanes_from_vectors(vectors: list[list[int]],
                        widths: list[int]) -> list[list[int]]:
    lanes = [[0] * w for w in widths]
    for k, vals in enumerate(vectors):
        bit = 1 << k
        for p, w in enumerate(widths):
            v = vals[p]
            lane = lanes[p]
            for i in range(w):
                if (v >> i) & 1:
                    lane[i] |= bit
    return lanes


def _first_mismatch(
    a: dict[str, list[int]], b: dict[str, list[int]], order: list[str]
) -> tuple[str, int] | None:
    """(output port, vector index) of the first disagreement."""
    best: tuple[int, str] | None = None
    for name in order:
        for la, lb in zip(a[name], b[name]):
            diff = la ^ lb
            if diff:
                k = (diff & -diff).bit_length() - 1
                if best is None or k < best[0]:
                    best = (k, name)
    if best is None:
        return None
    return best[1], best[0]


def check_equivalence(
    original: HwModule,
    transformed: HwModule,
    *,
    max_exhaustive_bits: int = DEFAULT_MAX_EXHAUSTIVE_BITS,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    original_design: HwDesign | None = None,
    transformed_design: HwDesign | None = None,
) -> EquivalenceVerdict:
    """Check that two modules with identical port signatures compute the
    same outputs.

    Raises ``ValueError`` on a port signature mismatch; that is an
    ill-posed comparison, not a counterexample.
    """
    sig_a, sig_b = _signature(original), _signature(transformed)
    if sig_a != sig_b:
        raise ValueError(
            f"port signature mismatch: {original.name} has {sig_a},"
            f" {transformed.name} has {sig_b}"
        )
    in_ports = original.input_ports
    names = [p.name for p in in_ports]
    widths = [p.width for p in in_ports]
    out_order = [p.name for p in original.output_ports]
    total = sum(widths)

    if total <= max_exhaustive_bits:
        lanes, n_vectors = _exhaustive_lanes(widths)
        status = "equivalent-exhaustive"
        used_seed = None
        vectors = None
    else:
        vectors = _sampled_vectors(widths, samples, seed)
        lanes = _lanes_from_vectors(vectors, widths)
        n_vectors = len(vectors)
        status = "equivalent-sampled"
        used_seed = seed

    inputs = dict(zip(names, lanes))
    out_a = simulate_packed(original, inputs, n_vectors, original_design)
    out_b = simulate_packed(transformed, inputs, n_vectors,
                            transformed_design)
    hit = _first_mismatch(out_a, out_b, out_order)
    if hit is None:
        return EquivalenceVerdict(status, n_vectors, used_seed)

    port, k = hit
    if vectors is None:
        assignment = {}
        pos = 0
        for name, w in zip(names, widths):
            assignment[name] = (k >> pos) & ((1 << w) - 1)
            pos += w
    else:
        assignment = dict(zip(names, vectors[k]))
    return EquivalenceVerdict(
        "counterexample", n_vectors, used_seed,
        counterexample=assignment, mismatch_output=port,
    )


def check_design_equivalence(
    original: HwDesign,
    transformed: HwDesign,
    *,
    max_exhaustive_bits: int = DEFAULT_MAX_EXHAUSTIVE_BITS,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> dict[str, EquivalenceVerdict]:
    """Check every module the two designs have in common (after a
    rewrite that is all of them), keyed by module name."""
    verdicts = {}
    for name, mod_a in original.modules.items():
        mod_b = transformed.modules.get(name)
        if mod_b is None:
            continue
        verdicts[name] = check_equivalence(
            mod_a, mod_b,
            max_exhaustive_bits=max_exhaustive_bits,
            samples=samples, seed=seed,
            original_design=original, transformed_design=transformed,
        )
    return verdicts


@dataclass
class MutationAuditResult:
    total: int
    caught: int
    seed: int
    details: list[str] = field(default_factory=list)

    @property
    def rate(self) -> float | None:
        if self.total == 0:
            return None
        return self.caught / self.total


def _mutation_candidates(module: HwModule) -> list[tuple[str, int, int]]:
    """(kind, op id, payload) edits that keep the module well-formed."""
    out: list[tuple[str, int, int]] = []
    extracts: dict[tuple[int, int], list[int]] = {}
    for op_id, op in enumerate(module.operations):
        if op.kind == "extract":
            extracts.setdefault(
                (op.operands[0].op, op.width), []
            ).append(op_id)
        elif op.kind in ("and", "or", "xor", "add", "sub"):
            out.append(("flip", op_id, 0))
        elif op.kind == "concat":
            n = len(op.operands)
            for i in range(n - 1):
                for j in range(i + 1, n):
                    a, b = op.operands[i], op.operands[j]
                    if a.width == b.width and a != b:
                        out.append(("swapcat", op_id, i * n + j))
    for peers in extracts.values():
        for i, a in enumerate(peers):
            for b in peers[i + 1:]:
                if module.operations[a].low != module.operations[b].low:
                    out.append(("swapext", a, b))
    return out


_FLIP = {"and": "or", "or": "xor", "xor": "and", "add": "sub", "sub": "add"}


def mutation_audit(
    design: HwDesign,
    mutations: int = 20,
    seed: int = 0,
    *,
    max_exhaustive_bits: int = DEFAULT_MAX_EXHAUSTIVE_BITS,
    samples: int = DEFAULT_SAMPLES,
) -> MutationAuditResult:
    """Sanity-check the oracle by injecting single faults into the top
    module and counting how many it reports as non-equivalent.

    Each mutation swaps two extract offsets, flips a binary operator, or
    swaps two same-width concat operands.  Raises ``ValueError`` if the
    top module offers nothing to mutate.
    """
    from dataclasses import replace

    top = design.top_module
    candidates = _mutation_candidates(top)
    if not candidates:
        raise ValueError(
            f"module {top.name!r} has no mutation candidates"
        )
    rng = random.Random(seed)
    result = MutationAuditResult(0, 0, seed)
    for _ in range(mutations):
        kind, a, b = candidates[rng.randrange(len(candidates))]
        ops = [replace(op, operands=list(op.operands))
               for op in top.operations]
        if kind == "flip":
            ops[a].kind = _FLIP[ops[a].kind]
            label = f"flip %{a}"
        elif kind == "swapext":
            ops[a].low, ops[b].low = ops[b].low, ops[a].low
            label = f"swap extract offsets %{a} %{b}"
        else:
            n = len(ops[a].operands)
            i, j = b // n, b % n
            opnds = ops[a].operands
            opnds[i], opnds[j] = opnds[j], opnds[i]
            label = f"swap concat operands {i},{j} of %{a}"
        mutant = HwModule(top.name, list(top.ports), ops,
                          dict(top.outputs), dict(top.wires))
        verdict = check_equivalence(
            top, mutant,
            max_exhaustive_bits=max_exhaustive_bits,
            samples=samples, seed=seed,
            original_design=design, transformed_design=design,
        )
        result.total += 1
        if verdict.status == "counterexample":
            result.caught += 1
            result.details.append(f"{label}: caught")
        else:
            result.details.append(f"{label}: missed ({verdict.status})")
    return result
