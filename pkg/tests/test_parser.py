import pytest

from sailstate.errors import (
    CrossFileDuplicate,
    DuplicateDefinition,
    IoError,
    MalformedDeclaration,
)
from sailstate.parser import merge_units, parse_corpus, parse_unit
from sailstate.tokens import tokenize


def _unit(text, path="<test>"):
    return parse_unit(tokenize(text, path), path)


def _model(*texts, **kw):
    units = [_unit(t, f"u{i}.sail") for i, t in enumerate(texts)]
    return merge_units(units, **kw)


# -- bundled corpus golden shape ---------------------------------------------

def test_corpus_manifest(model):
    assert len(model.instructions()) == 19
    assert len(model.functions) == 35
    assert len(model.registers) == 27
    assert len(model.mappings["csr_name_map"]) == 21
    assert model.opaque_spans == ()


def test_register_and_bitfield_decls(model):
    assert model.registers["mstatus"].rtype.base == "Mstatus"
    assert model.registers["mepc"].rtype.base == "xlenbits"
    mstatus = model.bitfield_types["Mstatus"]
    assert mstatus.width == 64
    fields = {f.name: (f.hi, f.lo) for f in mstatus.fields}
    assert fields["MIE"] == (3, 3)
    assert fields["MPP"] == (12, 11)
    assert fields["FS"] == (14, 13)
    banks = model.registers["Xs"].rtype
    assert (banks.base, banks.size) == ("vector", 32)


def test_instruction_clauses(model):
    mret = model.execute_clauses["MRET"]
    assert mret.operands == ()
    assert "exception_handler" in mret.callees
    assert mret.privilege_guards == frozenset({"Machine"})
    sw = model.execute_clauses["SW"]
    assert sw.operands == ("imm", "rs2", "rs1")
    assert sw.privilege_guards is None  # unguarded: runs anywhere


def test_enum_and_mode_order(model):
    assert model.enums["Privilege"] == ("User", "Supervisor", "Machine")
    assert model.guard_config.mode_order == ("User", "Supervisor", "Machine")


def test_externals_are_called_but_undefined(model):
    assert "phys_mem_write" in model.externals
    assert "exception_handler" not in model.externals


def test_corpus_parse_is_path_order_independent(corpus_paths):
    a = parse_corpus(list(corpus_paths))
    b = parse_corpus(list(reversed(corpus_paths)))
    assert a == b


# -- clause and function forms ----------------------------------------------

def test_wrapped_execute_clause_form():
    m = _model("function clause execute (FOO(rd, rs1)) = { Xs = rd }")
    assert m.execute_clauses["FOO"].operands == ("rd", "rs1")


def test_typed_operands_take_first_ident():
    m = _model("function clause execute BAR(imm : bits(12), rd : regidx) = { nop }")
    assert m.execute_clauses["BAR"].operands == ("imm", "rd")


def test_scattered_function_clauses_union():
    m = _model(
        "register a : bits(8)\nregister b : bits(8)\n"
        "function clause kaboom(x) = { a = x }\n"
        "function clause kaboom(y) = { b = a }\n"
    )
    fn = m.functions["kaboom"]
    assert fn.clause_count == 2
    assert set(fn.state_writes) == {("a", None), ("b", None)}
    assert ("a", None) in fn.state_reads


def test_function_merge_across_files():
    m = _model(
        "register a : bits(8)\nfunction clause f(x) = { a = x }",
        "register b : bits(8)\nfunction clause f(y) = { b = y }",
    )
    assert set(m.functions["f"].state_writes) == {("a", None), ("b", None)}


def test_mapping_directions_both_parse():
    m = _model(
        'mapping clause csr_name_map = 0x105 <-> "stvec"\n'
        'mapping clause csr_name_map = "sip" <-> 0x144\n'
    )
    assert dict(m.mappings["csr_name_map"]) == {0x105: "stvec", 0x144: "sip"}


def test_opaque_spans_captured_not_fatal():
    m = _model(
        "register a : bits(8)\n"
        "$include <prelude.sail>\n"
        "infix 4 ==/\n"
        "function clause execute NOPPY() = { a = a }\n"
    )
    # consecutive unrecognized constructs coalesce into one span, ending at
    # the next recognized top-level anchor
    assert len(m.opaque_spans) == 1
    span = m.opaque_spans[0]
    assert (span.head, span.start_line, span.end_line) == ("$", 2, 3)
    assert "NOPPY" in m.execute_clauses


# -- duplicates and errors ----------------------------------------------------

def test_duplicate_register_same_unit():
    with pytest.raises(DuplicateDefinition):
        _unit("register a : bits(8)\nregister a : bits(8)")


def test_duplicate_register_across_files():
    with pytest.raises(CrossFileDuplicate):
        _model("register a : bits(8)", "register a : bits(8)")


def test_duplicate_execute_clause_across_files():
    with pytest.raises(CrossFileDuplicate):
        _model(
            "function clause execute FOO() = { nop }",
            "function clause execute FOO() = { nop }",
        )


def test_merge_duplicate_clauses_opt_in():
    m = _model(
        "register a : bits(8)\nfunction clause execute FOO() = { a = 1 }",
        "register b : bits(8)\nfunction clause execute FOO() = { b = a }",
        merge_duplicate_clauses=True,
    )
    clause = m.execute_clauses["FOO"]
    assert set(clause.state_writes) == {("a", None), ("b", None)}


def test_malformed_register_decl():
    with pytest.raises(MalformedDeclaration):
        _unit("register : bits(8)")


def test_unreadable_path_raises_io_error():
    with pytest.raises(IoError):
        parse_corpus(["/nonexistent/nowhere.sail"])


# -- harvesting details --------------------------------------------------------

def test_field_access_vs_dynamic_index():
    m = _model(
        "bitfield S : bits(8) = { EN : 0 }\n"
        "register s : S\n"
        "register mem : bits(8)\n"
        "function clause f(i) = {\n"
        "  s[EN] = 0b1;\n"
        "  let x = s[EN];\n"
        "  mem[i] = x;\n"
        "  let y = mem[i];\n"
        "}\n"
    )
    fn = m.functions["f"]
    assert ("s", "EN") in fn.state_writes and ("s", "EN") in fn.state_reads
    # dynamic index is whole-register access, not a field named i
    assert ("mem", None) in fn.state_writes and ("mem", None) in fn.state_reads
    assert ("mem", "i") not in fn.state_writes


def test_bits_suffix_is_whole_register():
    m = _model(
        "bitfield S : bits(8) = { EN : 0 }\n"
        "register s : S\n"
        "function clause g() = { let v = s.bits }\n"
    )
    assert ("s", None) in m.functions["g"].state_reads


def test_lvalue_call_detected():
    m = _model("function clause h(rd, v) = { X(rd) = v; let w = X(rd) }")
    fn = m.functions["h"]
    assert "X" in fn.lvalue_callees
    assert "X" in fn.callees
