#include <doctest.h>

#include <vector>

#include "pcpipe/pseudocode.hpp"
#include "pcpipe/util.hpp"

using namespace pcpipe;

namespace {

const char* kMinimal = "def f(x: str) -> str:\n  \"\"\"d\"\"\"\n  return x\n\n>>> f(x)";

std::string fixture(const std::string& name) {
  return read_file(std::string(PCPIPE_SOURCE_DIR) + "/fixtures/programs/" + name);
}

const std::vector<std::string> kAppendixFixtures = {
    "fig1_career_decision.txt", "cot_creak.txt",    "cot_ecqa.txt",
    "cot_esnli.txt",            "cot_esnli_ii.txt", "cot_gsm8k.txt",
    "cot_qasc.txt",             "cot_sensemaking.txt", "cot_strategyqa.txt",
    "cot_streamaqua.txt",       "science_evidence_inference.txt",
    "repair_buggy.txt",         "repair_correct.txt"};

}  // namespace

TEST_CASE("extract block with direct delimiters") {
  auto block = extract_marked_block("[PSEUDOCODE]\ndef f():...\n[/PSEUDOCODE]\nanswer");
  REQUIRE(block.has_value());
  CHECK(block->program_text == "def f():...");
  CHECK(block->suffix == "answer");
  CHECK(block->prefix.empty());
  CHECK_FALSE(block->variant_close);
}

TEST_CASE("variant closing marker is honored") {
  std::string text =
      "[PSEUDOCODE]\ndef g(x):\n    \"\"\"doc\"\"\"\n    return x\n[/[PSEUDOCODE]]\n"
      "Sunlight is the source of energy for nearly all ecosystems.";
  auto block = extract_marked_block(text);
  REQUIRE(block.has_value());
  CHECK(block->variant_close);
  CHECK(block->suffix == "Sunlight is the source of energy for nearly all ecosystems.");
}

TEST_CASE("missing markers give absent") {
  CHECK_FALSE(extract_marked_block("no markers at all").has_value());
  CHECK_FALSE(extract_marked_block("[PSEUDOCODE]\nopen only").has_value());
  CHECK_FALSE(extract_marked_block("close only\n[/PSEUDOCODE]").has_value());
  // the variant contains the opening token; it must not count as an opening
  CHECK_FALSE(extract_marked_block("text [/[PSEUDOCODE]] more").has_value());
  // closing before opening is malformed
  CHECK_FALSE(extract_marked_block("[/PSEUDOCODE] x [PSEUDOCODE] y").has_value());
}

TEST_CASE("first opening and last closing bound the block") {
  std::string text = "[PSEUDOCODE]a[/PSEUDOCODE]b[PSEUDOCODE]c[/PSEUDOCODE]tail";
  auto block = extract_marked_block(text);
  REQUIRE(block.has_value());
  CHECK(block->program_text == "a[/PSEUDOCODE]b[PSEUDOCODE]c");
  CHECK(block->suffix == "tail");
}

TEST_CASE("block never contains the matched markers at its bounds") {
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    std::string text;
    const char* pieces[] = {"[PSEUDOCODE]", "[/PSEUDOCODE]", "[/[PSEUDOCODE]]",
                            "word", "\n", "x y"};
    for (int j = 0; j < 8; ++j) text += pieces[rng.bounded(6)];
    auto block = extract_marked_block(text);
    if (!block) continue;
    CHECK(block->program_text.find(kMarkerCloseVariant) == std::string::npos);
  }
}

TEST_CASE("marker variant swap changes only the matched span") {
  std::string base = "[PSEUDOCODE]\ncontent\n[/PSEUDOCODE]\nanswer text";
  std::string variant = replace_all(base, "[/PSEUDOCODE]", "[/[PSEUDOCODE]]");
  auto a = extract_marked_block(base);
  auto b = extract_marked_block(variant);
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  CHECK(a->program_text == b->program_text);
  CHECK(a->suffix == b->suffix);
  CHECK(a->prefix == b->prefix);
  CHECK(a->variant_close != b->variant_close);
}

TEST_CASE("minimal program parses to a single return body") {
  ParseResult r = parse_program(kMinimal);
  REQUIRE(r.ok());
  CHECK(r.program->name == "f");
  REQUIRE(r.program->params.size() == 1);
  CHECK(r.program->params[0].name == "x");
  CHECK(r.program->params[0].annotation == "str");
  CHECK(r.program->return_type == "str");
  REQUIRE(r.program->body.size() == 1);
  CHECK(r.program->body[0].kind == BodyKind::ret);
  CHECK(r.program->invocation_form == InvocationForm::repl);
}

TEST_CASE("missing invocation is a strict parse error") {
  ParseResult strict = parse_program("def f(x):\n  \"\"\"d\"\"\"\n  return x\n");
  CHECK_FALSE(strict.ok());
  CHECK(strict.error.code == "missing invocation");

  ParseOptions lenient;
  lenient.require_invocation = false;
  ParseResult ok = parse_program("def f(x):\n  \"\"\"d\"\"\"\n  return x\n", lenient);
  CHECK(ok.ok());
  CHECK(ok.program->invocation_form == InvocationForm::none);
}

TEST_CASE("named parse errors") {
  CHECK(parse_program("no def here").error.code == "missing signature");
  CHECK(parse_program("def f(x):\n  \"\"\"doc\n  return x").error.code ==
        "unterminated docstring");
  CHECK(parse_program("def f(x):\n  \"\"\"d\"\"\"\n\n>>> f(x)").error.code == "empty body");
  CHECK(parse_program("def f(x):\n  \"\"\"d\"\"\"\n  y = g(x)\n\n>>> f(x)").error.code ==
        "missing return");
  CHECK(parse_program("def f(x):\n  \"\"\"d\"\"\"\n  def g(): pass\n  return x\n\n>>> f(x)")
            .error.code == "nested function definition");
  CHECK(parse_program("def f(x):\n  \"\"\"d\"\"\"\n  return x\n\n>>> other(x)")
            .error.code == "invocation mismatch");
  CHECK(parse_program("def f(x):\n  \"\"\"\"\"\"\n  return x\n\n>>> f(x)").error.code ==
        "empty docstring");
}

TEST_CASE("fig1 program parses with the expected shape") {
  ParseResult r = parse_program(fixture("fig1_career_decision.txt"));
  REQUIRE(r.ok());
  CHECK(r.program->name == "code_write_short_story_career_decision");
  REQUIRE(r.program->params.size() == 1);
  CHECK(r.program->params[0].name == "input");
  CHECK(r.program->return_type == "str");
  CHECK(r.program->invocation_form == InvocationForm::repl);
  CHECK(r.program->invocation.find(r.program->name) != std::string::npos);
}

TEST_CASE("multi-line signature parses") {
  ParseResult r = parse_program(fixture("repair_correct.txt"),
                                ParseOptions{.require_invocation = false});
  REQUIRE(r.ok());
  CHECK(r.program->name == "answer_basic_science_question");
  CHECK(r.program->params.size() == 5);
  CHECK(r.program->params[4].name == "option_d");
  // the dialect allows several textual return lines
  int returns = 0;
  for (const auto& bl : r.program->body)
    if (bl.kind == BodyKind::ret) ++returns;
  CHECK(returns == 5);
}

TEST_CASE("cot fixture carries a program-block invocation") {
  ParseResult r = parse_program(fixture("cot_creak.txt"),
                                ParseOptions{.require_invocation = false});
  REQUIRE(r.ok());
  CHECK(r.program->invocation_form == InvocationForm::program_block);
  CHECK(r.program->invocation.find("answer_question_given_options") != std::string::npos);
}

TEST_CASE("parse-render fixed point on every appendix fixture") {
  ParseOptions lenient;
  lenient.require_invocation = false;
  for (const auto& name : kAppendixFixtures) {
    CAPTURE(name);
    ParseResult first = parse_program(fixture(name), lenient);
    REQUIRE_MESSAGE(first.ok(), name << ": " << first.error.message);
    std::string rendered = render_program(*first.program);
    ParseResult second = parse_program(rendered, lenient);
    REQUIRE_MESSAGE(second.ok(), name << ": " << second.error.message);
    CHECK(*first.program == *second.program);
    CHECK(render_program(*second.program) == rendered);
  }
}

TEST_CASE("blank lines do not change the rendering") {
  std::string sparse = "def f(x: str) -> str:\n  \"\"\"d\"\"\"\n\n\n  return x\n\n\n\n>>> f(x)";
  ParseResult a = parse_program(kMinimal);
  ParseResult b = parse_program(sparse);
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  CHECK(render_program(*a.program) == render_program(*b.program));
}

TEST_CASE("minimal render matches the frozen golden file") {
  ParseResult r = parse_program(kMinimal);
  REQUIRE(r.ok());
  CHECK(render_program(*r.program) == fixture("golden_minimal_render.txt"));
}

TEST_CASE("indented teacher output is dedented before parsing") {
  std::string indented = "    def f(x: str) -> str:\n        \"\"\"d\"\"\"\n"
                         "        return x\n\n    >>> f(x)";
  ParseResult r = parse_program(indented);
  REQUIRE(r.ok());
  ParseResult plain = parse_program(kMinimal);
  CHECK(*r.program == *plain.program);
}

TEST_CASE("validate_for_training decisions") {
  std::string good = "[PSEUDOCODE]\n" + fixture("fig1_career_decision.txt") +
                     "\n[/PSEUDOCODE]\nanswer";
  CHECK(validate_for_training(extract_marked_block(good)).pass);

  ValidationResult missing = validate_for_training(std::nullopt);
  CHECK_FALSE(missing.pass);
  CHECK(missing.reason == "missing markers");

  std::string truncated =
      "[PSEUDOCODE]\ndef f(x):\n  \"\"\"doc never ends\n[/PSEUDOCODE]\n";
  ValidationResult bad = validate_for_training(extract_marked_block(truncated));
  CHECK_FALSE(bad.pass);
  CHECK(bad.reason == "unterminated docstring");
}

TEST_CASE("correction example programs parse with nested branches") {
  ParseOptions lenient;
  lenient.require_invocation = false;
  for (const char* name : {"correction_generated.txt", "correction_repaired.txt"}) {
    ParseResult r = parse_program(fixture(name), lenient);
    REQUIRE_MESSAGE(r.ok(), r.error.message);
    bool has_depth = false;
    for (const auto& bl : r.program->body)
      if (bl.depth > 0) has_depth = true;
    CHECK(has_depth);
  }
}
