import pytest

from busweaver.frontend import ParseError, parse_design
from busweaver.ir import count_instructions, simulate, verify


def _errors(src):
    with pytest.raises(ParseError) as info:
        parse_design(src)
    return [str(d) for d in info.value.diagnostics]


def test_diagnostic_format_is_file_line_col():
    msgs = _errors("module m(input a, output y);\n  assign y = ;\nendmodule")
    assert msgs[0].startswith("<input>:2:14: error: ")


def test_ansi_ports_inherit_direction():
    d = parse_design(
        "module m(input [2:0] a, b, output y);"
        " assign y = a[0] & b[1]; endmodule"
    )
    ports = [(p.name, p.direction, p.width) for p in d.top_module.ports]
    assert ports == [
        ("a", "input", 3), ("b", "input", 3), ("y", "output", 1)
    ]


def test_non_ansi_port_directions():
    d = parse_design(
        "module m(a, y);\n"
        "  input [1:0] a;\n"
        "  output y;\n"
        "  assign y = a[0] ^ a[1];\n"
        "endmodule"
    )
    assert [p.direction for p in d.top_module.ports] == ["input", "output"]
    assert simulate(d.top_module, {"a": 0b10}) == {"y": 1}


def test_per_bit_assigns_merge_into_one_driver():
    d = parse_design(
        "module m(input [1:0] a, output [1:0] y);\n"
        "  assign y[0] = a[1];\n"
        "  assign y[1] = a[0];\n"
        "endmodule"
    )
    m = d.top_module
    assert verify(d) == []
    assert simulate(m, {"a": 0b01}) == {"y": 0b10}
    assert simulate(m, {"a": 0b10}) == {"y": 0b01}


def test_part_select_lvalue_and_wire_range():
    d = parse_design(
        "module m(input [3:0] a, output [3:0] y);\n"
        "  wire [1:0] t;\n"
        "  assign t = a[3:2];\n"
        "  assign y[1:0] = t;\n"
        "  assign y[3:2] = a[1:0];\n"
        "endmodule"
    )
    assert simulate(d.top_module, {"a": 0b0111}) == {"y": 0b1101}


def test_operators_and_precedence():
    d = parse_design(
        "module m(input [3:0] a, input [3:0] b, output [3:0] y,"
        " output r);\n"
        "  assign y = ~a & b | a ^ b;\n"
        "  assign r = &a | ^b;\n"
        "endmodule"
    )
    m = d.top_module
    for a in range(16):
        for b in range(16):
            got = simulate(m, {"a": a, "b": b})
            assert got["y"] == ((~a & 15) & b) | (a ^ b)
            want_r = int(a == 15 or bin(b).count("1") % 2 == 1)
            assert got["r"] == want_r


def test_literals_and_replication():
    d = parse_design(
        "module m(input a, output [5:0] y);\n"
        "  assign y = {2'b10, {3{a}}, 1'b1};\n"
        "endmodule"
    )
    assert simulate(d.top_module, {"a": 1}) == {"y": 0b101111}
    assert simulate(d.top_module, {"a": 0}) == {"y": 0b100001}


def test_ternary_requires_one_bit_condition():
    msgs = _errors(
        "module m(input [1:0] c, input a, input b, output y);\n"
        "  assign y = c ? a : b;\n"
        "endmodule"
    )
    assert any("condition" in m for m in msgs)


def test_named_and_positional_instances_agree():
    shared = (
        "module inv2(input [1:0] p, output [1:0] q);\n"
        "  assign q = ~p;\n"
        "endmodule\n"
    )
    named = parse_design(
        shared
        + "module m(input [1:0] a, output [1:0] y);\n"
          "  inv2 u0(.p(a), .q(y));\n"
          "endmodule"
    )
    positional = parse_design(
        shared
        + "module m(input [1:0] a, output [1:0] y);\n"
          "  inv2 u0(a, y);\n"
          "endmodule"
    )
    for d in (named, positional):
        assert d.top == "m"
        assert simulate(d.modules["m"], {"a": 0b01}, d) == {"y": 0b10}


def test_top_is_the_uninstantiated_module():
    d = parse_design(
        "module leaf(input a, output y);\n"
        "  assign y = ~a;\n"
        "endmodule\n"
        "module root(input a, output y);\n"
        "  leaf u(.a(a), .y(y));\n"
        "endmodule"
    )
    assert d.top == "root"


def test_instance_output_feeding_logic():
    d = parse_design(
        "module half(input x, input y, output s, output c);\n"
        "  assign s = x ^ y;\n"
        "  assign c = x & y;\n"
        "endmodule\n"
        "module m(input p, input q, output [1:0] r);\n"
        "  wire s;\n"
        "  wire c;\n"
        "  half u(.x(p), .y(q), .s(s), .c(c));\n"
        "  assign r = {c, s};\n"
        "endmodule"
    )
    for p in (0, 1):
        for q in (0, 1):
            assert simulate(d.modules["m"], {"p": p, "q": q}, d) == {
                "r": (p + q)
            }


def test_unused_wire_cone_is_dropped():
    d = parse_design(
        "module m(input [1:0] a, output y);\n"
        "  wire dead;\n"
        "  assign dead = a[0] & a[1];\n"
        "  assign y = a[0];\n"
        "endmodule"
    )
    assert count_instructions(d.top_module) == 1  # just the bit select


@pytest.mark.parametrize(
    "src, fragment",
    [
        ("module m(input a, output y); assign y = b; endmodule",
         "unknown identifier 'b'"),
        ("module m(input a, output y); assign y = a; assign y = a;"
         " endmodule",
         "multiple drivers for 'y[0]'"),
        ("module m(input a, output [1:0] y); assign y[0] = a; endmodule",
         "bit 1 is never driven"),
        ("module m(input a, output y); assign a = 1'b0;"
         " assign y = a; endmodule",
         "assignment to input port 'a'"),
        ("module m(input a, output y); wire w; assign w = ~w;"
         " assign y = w; endmodule",
         "combinational cycle through net 'w'"),
        ("module m(input [1:0] a, output y); assign y = a; endmodule",
         "width mismatch"),
        ("module m(input a, output y); assign y = 1'b1 & 2'd3;"
         " endmodule",
         "operand width mismatch: 1 vs 2"),
        ("module m(input a, output y); assign y = 2; endmodule",
         "unsized literal"),
        ("module m(input a, output y); assign y = 1'bx; endmodule",
         "four-state literals"),
        ("module m(input a, output y); assign y = 1'd5; endmodule",
         "does not fit in 1 bit"),
        ("module m(input a, input a, output y); assign y = a;"
         " endmodule",
         "duplicate port 'a'"),
        ("module m(input a, output y); foo u(.x(a), .z(y)); endmodule",
         "unknown module 'foo'"),
        ("module m(input a, output y); always @(posedge a) y = a;"
         " endmodule",
         "unsupported construct 'always'"),
        ("module m(input a, output reg y); assign y = a; endmodule",
         "unsupported construct 'reg'"),
        ("module m(input a, output y); assign y = a == a; endmodule",
         "unsupported operator '=='"),
        ("module m(input [3:0] a, output y); assign y = a[0:3];"
         " endmodule",
         "descending"),
    ],
)
def test_rejections(src, fragment):
    msgs = _errors(src)
    assert any(fragment in m for m in msgs), msgs


def test_instance_cycle_is_reported():
    msgs = _errors(
        "module p(input a, output y);\n"
        "  q u(.a(a), .y(y));\n"
        "endmodule\n"
        "module q(input a, output y);\n"
        "  p u(.a(a), .y(y));\n"
        "endmodule"
    )
    assert any("cycle" in m for m in msgs)


def test_comments_are_ignored():
    d = parse_design(
        "// leading\n"
        "module m(input a, output y); /* inline */\n"
        "  assign y = ~a; // trailing\n"
        "endmodule\n"
    )
    assert simulate(d.top_module, {"a": 0}) == {"y": 1}
