#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pcpipe {

inline constexpr std::string_view kMarkerOpen = "[PSEUDOCODE]";
inline constexpr std::string_view kMarkerClose = "[/PSEUDOCODE]";
inline constexpr std::string_view kMarkerCloseVariant = "[/[PSEUDOCODE]]";

enum class BodyKind { comment, control, ret, call };

struct BodyLine {
  BodyKind kind = BodyKind::call;
  int depth = 0;  // nesting below the function body base indent
  std::string text;

  bool operator==(const BodyLine&) const = default;
};

struct Param {
  std::string name;
  std::string annotation;  // empty when unannotated

  bool operator==(const Param&) const = default;
};

enum class InvocationForm { none, repl, program_block };

// Parsed form of one pseudo-code program: signature, docstring, classified
// body lines and the trailing invocation. render_program(parse_program(t))
// is the canonical text; parse of that text is structurally equal.
struct PseudoProgram {
  std::string name;
  std::vector<Param> params;
  std::string return_type;  // empty when the signature has no "->"
  std::string docstring;    // verbatim content between the triple quotes
  std::vector<BodyLine> body;
  InvocationForm invocation_form = InvocationForm::none;
  std::string invocation;  // verbatim ">>> ..." lines or "# program {...}" block

  bool operator==(const PseudoProgram&) const = default;
};

struct ParseError {
  std::string code;     // stable identifier, e.g. "missing invocation"
  std::string message;  // human detail
};

struct ParseResult {
  std::optional<PseudoProgram> program;
  ParseError error;

  bool ok() const { return program.has_value(); }
};

struct ParseOptions {
  // Generated programs must carry the trailing invocation statement; the
  // manually written per-dataset programs do not always have one.
  bool require_invocation = true;
};

ParseResult parse_program(std::string_view text);
ParseResult parse_program(std::string_view text, const ParseOptions& opts);

std::string render_program(const PseudoProgram& p);

// Region of a generation delimited by [PSEUDOCODE] ... [/PSEUDOCODE] (or the
// [/[PSEUDOCODE]] closing variant seen in the wild).
struct MarkedBlock {
  std::string program_text;  // between the markers, one bounding newline stripped per side
  std::string prefix;        // text before the opening marker
  std::string suffix;        // text after the closing marker, one leading newline stripped
  bool variant_close = false;
};

// Bounded by the first opening marker and the last closing marker; absent if
// either is missing or they are out of order. Never returns marker tokens
// inside program_text.
std::optional<MarkedBlock> extract_marked_block(std::string_view text);

// Position/width/spelling of the last closing marker, if any.
struct ClosingMarker {
  size_t pos = 0;
  size_t len = 0;
  bool variant = false;
};
std::optional<ClosingMarker> find_last_closing_marker(std::string_view text);

struct ValidationResult {
  bool pass = false;
  std::string reason;  // parse error code on failure
};

// Pass iff a block is present and its program parses under the strict rules.
ValidationResult validate_for_training(const std::optional<MarkedBlock>& block);

}  // namespace pcpipe
