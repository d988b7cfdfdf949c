"""End-to-end pipeline behaviour: chunk tiling, categories, report
fields, counter bounds, and byte-level idempotence."""

import pytest

from busweaver import (
    check_equivalence,
    emit_design,
    parse_design,
    run_pipeline,
)
from busweaver.generators import ripple_carry_design
from busweaver.ir import HwModule, Operation, Port, ValueRef, metrics
from busweaver.permutation import PassCounters
from busweaver.pipeline import VectorizationError, partial_vectorize


def _pipeline(src, **kwargs):
    design = parse_design(src)
    out, report = run_pipeline(design, **kwargs)
    return design, out, report


def test_partial_chunking_tiles_mixed_sink(golden_dir):
    design = parse_design((golden_dir / "partial_mix.v").read_text())
    module = design.top_module
    counters = PassCounters()
    chunks = partial_vectorize(module, module.outputs["out"], counters)
    assert [(c.high, c.low, c.method) for c in chunks] == [
        (3, 1, "bit-permutation"),
        (0, 0, "scalar"),
    ]
    # chunks tile the sink exactly, MSB first
    assert chunks[0].width + chunks[1].width == 4
    assert counters.partial_candidates == 2


def test_partial_takes_widest_window_first():
    # [3:1] is a valid permutation window, so the narrower [3:2] must
    # never be chosen even though it would also match.
    src = """
    module w(input [3:0] a, input s, output [3:0] out);
      assign out[3] = a[1];
      assign out[2] = a[3];
      assign out[1] = a[2];
      assign out[0] = s & a[0];
    endmodule
    """
    design = parse_design(src)
    module = design.top_module
    chunks = partial_vectorize(module, module.outputs["out"])
    assert [(c.high, c.low) for c in chunks] == [(3, 1), (0, 0)]


def test_disjoint_windows_get_separate_methods():
    src = """
    module two_windows(input [1:0] a, input [1:0] b, input [1:0] c,
                       output [3:0] out);
      assign out[3] = b[0];
      assign out[2] = b[1];
      assign out[1] = a[1] & c[1];
      assign out[0] = a[0] & c[0];
    endmodule
    """
    design, out, report = _pipeline(src)
    (sink,) = report.sinks
    assert [(c.high, c.low, c.method) for c in sink.chunks] == [
        (3, 2, "bit-permutation"),
        (1, 0, "structural"),
    ]
    assert sink.category == "mixed"
    assert "assign out = {{b[0], b[1]}, a & c};" in emit_design(out)
    result = check_equivalence(design.top_module, out.top_module)
    assert result.status == "equivalent-exhaustive"


def test_category_labels():
    src = """
    module mix(input [3:0] a, input [3:0] b, output [3:0] p,
               output [3:0] q);
      assign p[0] = a[1];
      assign p[1] = a[2];
      assign p[2] = a[3];
      assign p[3] = a[0];
      assign q[0] = a[0] ^ b[0];
      assign q[1] = a[1] ^ b[1];
      assign q[2] = a[2] ^ b[2];
      assign q[3] = a[3] ^ b[3];
    endmodule
    """
    _, out, report = _pipeline(src)
    assert [(s.sink, s.category) for s in report.sinks] == [
        ("p", "bit-level"),
        ("q", "structural"),
    ]
    emitted = emit_design(out)
    assert "assign p = {a[0], a[3:1]};" in emitted
    assert "assign q = a ^ b;" in emitted


def test_carry_chain_stays_scalar():
    design, out, report = _pipeline(ripple_carry_design(4))
    assert report.rewrites == []
    for sink in report.sinks:
        assert all(c.method == "scalar" for c in sink.chunks)
        assert sink.category is None
    assert report.instructions_after == report.instructions_before


def test_internal_wire_sinks_are_vectorized():
    src = """
    module m(input [3:0] a, input [3:0] b, output [3:0] y);
      wire [3:0] t;
      assign t[0] = a[0] & b[0];
      assign t[1] = a[1] & b[1];
      assign t[2] = a[2] & b[2];
      assign t[3] = a[3] & b[3];
      assign y = ~t;
    endmodule
    """
    design, out, report = _pipeline(src)
    # outputs are visited before wires
    assert [s.sink for s in report.sinks] == ["y", "t"]
    assert [s.changed for s in report.sinks] == [False, True]
    assert report.sinks[1].category == "structural"
    assert "assign t = a & b;" in emit_design(out)
    assert report.instructions_after == 2
    result = check_equivalence(design.top_module, out.top_module)
    assert result.status == "equivalent-exhaustive"


def test_single_bit_sinks_are_skipped():
    src = """
    module m(input a, input b, output y);
      assign y = a & b;
    endmodule
    """
    _, _, report = _pipeline(src)
    assert report.sinks == []


def test_report_reduction_fields(golden_dir):
    _, _, report = _pipeline((golden_dir / "partial_mix.v").read_text())
    assert report.instructions_before == 5
    assert report.instructions_after == 3
    assert report.reduction_percent == pytest.approx(40.0)
    assert len(report.rewrites) == 1


def test_inlining_assisted_rewrites(golden_dir):
    _, out, report = _pipeline((golden_dir / "intermodule_buf.v").read_text())
    assert [d.callee for d in report.inline_log if d.inlined] == ["my_buf"] * 4
    assert [s.module for s in report.inlining_assisted] == ["top4"]
    assert "assign out = in;" in emit_design(out)


def test_partial_candidates_hit_quadratic_bound_exactly():
    # the all-scalar 4-bit sum sink explores every window once:
    # 3 + 2 + 1 = n*(n-1)/2 candidates
    counters = PassCounters()
    run_pipeline(parse_design(ripple_carry_design(4)), counters=counters)
    assert counters.partial_candidates == 6


def test_trace_visits_bounded_by_bits_times_depth(golden_dir):
    design = parse_design((golden_dir / "permute_general.v").read_text())
    depth = max(metrics(design.top_module).max_depth, 2)
    counters = PassCounters()
    run_pipeline(design, counters=counters)
    assert counters.trace_visits <= 4 * depth


def test_invalid_design_is_rejected():
    ops = [
        Operation("input", 1, port="a"),
        Operation("and", 1, [ValueRef(0, 1), ValueRef(1, 1)]),
    ]
    module = HwModule(
        "bad",
        [Port("a", "input", 1), Port("y", "output", 1)],
        ops,
        {"y": ValueRef(1, 1)},
        {},
    )
    from busweaver.ir import HwDesign

    with pytest.raises(VectorizationError, match="cycle"):
        run_pipeline(HwDesign({"bad": module}, "bad"))


def test_second_run_is_byte_identical(golden_dir):
    for path in sorted(golden_dir.glob("*.v")):
        if path.name.endswith(".vec.v"):
            continue
        out1, _ = run_pipeline(parse_design(path.read_text()))
        first = emit_design(out1)
        out2, _ = run_pipeline(parse_design(first))
        assert emit_design(out2) == first, path.name


def test_structural_rewrite_reaches_fixpoint(golden_dir):
    # vector code produced by the structural path no longer looks
    # replicated, so a second pass reports nothing at all
    out1, _ = run_pipeline(parse_design((golden_dir / "perbit_mux.v").read_text()))
    out2, report = run_pipeline(parse_design(emit_design(out1)))
    assert report.rewrites == []
    assert emit_design(out2) == emit_design(out1)
