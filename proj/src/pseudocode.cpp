#include "pcpipe/pseudocode.hpp"

#include <cctype>

#include "pcpipe/util.hpp"

namespace pcpipe {

namespace {

size_t leading_spaces(std::string_view line) {
  size_t n = 0;
  while (n < line.size() && line[n] == ' ') ++n;
  return n;
}

std::string dedent(std::string_view line, size_t amount) {
  size_t have = leading_spaces(line);
  return std::string(line.substr(std::min(have, amount)));
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

// True when `line` starts with keyword `kw` followed by a non-identifier char.
bool starts_with_keyword(std::string_view line, std::string_view kw) {
  if (!line.starts_with(kw)) return false;
  if (line.size() == kw.size()) return true;
  char next = line[kw.size()];
  return !(std::isalnum(static_cast<unsigned char>(next)) || next == '_');
}

bool is_control_line(std::string_view trimmed) {
  for (std::string_view kw : {"if", "elif", "else", "for", "while"})
    if (starts_with_keyword(trimmed, kw)) return true;
  return false;
}

// Split a parameter list on top-level commas (brackets and quotes nest).
std::vector<std::string> split_params(std::string_view list) {
  std::vector<std::string> out;
  int depth = 0;
  char quote = 0;
  std::string cur;
  for (char c : list) {
    if (quote) {
      cur += c;
      if (c == quote) quote = 0;
      continue;
    }
    switch (c) {
      case '"': case '\'': quote = c; cur += c; break;
      case '(': case '[': case '{': ++depth; cur += c; break;
      case ')': case ']': case '}': --depth; cur += c; break;
      case ',':
        if (depth == 0) {
          out.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
        break;
      default: cur += c;
    }
  }
  if (!trim_view(cur).empty()) out.push_back(cur);
  return out;
}

ParseResult error_result(std::string code, std::string message) {
  ParseResult r;
  r.error = ParseError{std::move(code), std::move(message)};
  return r;
}

}  // namespace

ParseResult parse_program(std::string_view text) {
  return parse_program(text, ParseOptions{});
}

ParseResult parse_program(std::string_view text, const ParseOptions& opts) {
  // Teacher outputs mix tabs and spaces; the dialect is 4-space indented.
  std::string normalized = replace_all(text, "\t", "    ");
  std::vector<std::string> lines = split_lines(normalized);

  // --- signature ---
  size_t i = 0;
  while (i < lines.size() && !trim_view(lines[i]).starts_with("def ")) ++i;
  if (i == lines.size())
    return error_result("missing signature", "no 'def' line found");
  const size_t base_indent = leading_spaces(lines[i]);

  std::string sig = dedent(lines[i], base_indent);
  ++i;
  auto paren_balance = [](std::string_view s) {
    int bal = 0;
    for (char c : s) {
      if (c == '(') ++bal;
      if (c == ')') --bal;
    }
    return bal;
  };
  while (i < lines.size() &&
         !(paren_balance(sig) == 0 && trim_view(sig).ends_with(":"))) {
    sig += " ";
    sig += trim(lines[i]);
    ++i;
  }
  std::string_view sv = trim_view(sig);
  if (!(paren_balance(sig) == 0 && sv.ends_with(":")))
    return error_result("malformed signature", "signature line never closes: " + sig);
  sv.remove_prefix(4);  // "def "
  sv.remove_suffix(1);  // ":"

  size_t open = sv.find('(');
  if (open == std::string_view::npos)
    return error_result("malformed signature", "no parameter list: " + sig);
  size_t close = sv.rfind(')');
  if (close == std::string_view::npos || close < open)
    return error_result("malformed signature", "unbalanced parameter list: " + sig);

  PseudoProgram prog;
  prog.name = trim(sv.substr(0, open));
  if (!is_identifier(prog.name))
    return error_result("malformed signature", "invalid program name: '" + prog.name + "'");

  for (const std::string& raw : split_params(sv.substr(open + 1, close - open - 1))) {
    Param p;
    size_t colon = raw.find(':');
    if (colon == std::string::npos) {
      p.name = trim(raw);
    } else {
      p.name = trim(raw.substr(0, colon));
      p.annotation = trim(raw.substr(colon + 1));
    }
    if (!is_identifier(p.name))
      return error_result("malformed signature", "invalid parameter name: '" + p.name + "'");
    prog.params.push_back(std::move(p));
  }

  std::string_view tail = trim_view(sv.substr(close + 1));
  if (tail.starts_with("->")) {
    prog.return_type = trim(tail.substr(2));
  } else if (!tail.empty()) {
    return error_result("malformed signature", "unexpected text after ')': " + std::string(tail));
  }

  // --- docstring ---
  while (i < lines.size() && is_blank(lines[i])) ++i;
  if (i == lines.size())
    return error_result("missing docstring", "program ends after the signature");
  std::string first = dedent(lines[i], base_indent);
  const size_t doc_indent = leading_spaces(first);
  std::string_view doc_open = trim_view(first);
  if (!doc_open.starts_with("\"\"\""))
    return error_result("missing docstring", "expected '\"\"\"' after the signature");

  std::vector<std::string> doc_lines;
  std::string_view rest = doc_open.substr(3);
  bool closed = false;
  if (rest.ends_with("\"\"\"") && rest.size() >= 3) {
    doc_lines.emplace_back(rest.substr(0, rest.size() - 3));
    closed = true;
  } else {
    if (!rest.empty()) doc_lines.emplace_back(rest);
    ++i;
    for (; i < lines.size(); ++i) {
      std::string content = dedent(lines[i], base_indent);
      std::string_view t = trim_view(content);
      if (t.ends_with("\"\"\"")) {
        // keep any text preceding the closing quotes on the same line
        std::string kept = dedent(content, doc_indent);
        kept.erase(kept.rfind("\"\"\""));
        while (!kept.empty() && kept.back() == ' ') kept.pop_back();
        if (!kept.empty()) doc_lines.push_back(std::move(kept));
        closed = true;
        break;
      }
      doc_lines.push_back(dedent(content, doc_indent));
    }
  }
  if (!closed)
    return error_result("unterminated docstring", "no closing '\"\"\"' found");
  ++i;

  // strip blank edges; the body of the docstring is kept verbatim
  while (!doc_lines.empty() && is_blank(doc_lines.front())) doc_lines.erase(doc_lines.begin());
  while (!doc_lines.empty() && is_blank(doc_lines.back())) doc_lines.pop_back();
  prog.docstring = join_lines(doc_lines);
  if (trim_view(prog.docstring).empty())
    return error_result("empty docstring", "docstring has no content");

  // --- body and invocation ---
  constexpr size_t kBodyIndent = 4;
  for (; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    std::string content = dedent(lines[i], base_indent);
    std::string_view t = trim_view(content);
    size_t indent = leading_spaces(content);

    if (t.starts_with(">>>")) {
      // REPL invocation: everything from here to the last non-blank line.
      std::vector<std::string> inv;
      inv.push_back(std::string(t));
      for (size_t j = i + 1; j < lines.size(); ++j)
        inv.push_back(dedent(lines[j], base_indent));
      while (!inv.empty() && is_blank(inv.back())) inv.pop_back();
      prog.invocation_form = InvocationForm::repl;
      prog.invocation = join_lines(inv);
      break;
    }
    if (t == "# program") {
      size_t next = i + 1;
      while (next < lines.size() && is_blank(lines[next])) ++next;
      if (next < lines.size() && trim_view(lines[next]).starts_with("{")) {
        std::vector<std::string> inv;
        inv.push_back(std::string(t));
        int braces = 0;
        bool seen_brace = false;
        size_t j = next;
        for (; j < lines.size(); ++j) {
          std::string bl = dedent(lines[j], base_indent);
          inv.push_back(trim(bl));
          for (char c : bl) {
            if (c == '{') { ++braces; seen_brace = true; }
            if (c == '}') --braces;
          }
          if (seen_brace && braces <= 0) break;
        }
        if (braces > 0)
          return error_result("missing invocation", "unterminated '# program' block");
        prog.invocation_form = InvocationForm::program_block;
        prog.invocation = join_lines(inv);
        i = j;
        continue;  // tolerate trailing blanks after the block
      }
      // plain comment that happens to say "# program"
    }
    if (starts_with_keyword(t, "def"))
      return error_result("nested function definition",
                          "nested 'def' is not part of the dialect: " + std::string(t));

    BodyLine bl;
    bl.text = std::string(t);
    bl.depth = indent > kBodyIndent ? static_cast<int>((indent - kBodyIndent) / 4) : 0;
    if (t.starts_with("#"))
      bl.kind = BodyKind::comment;
    else if (is_control_line(t))
      bl.kind = BodyKind::control;
    else if (starts_with_keyword(t, "return"))
      bl.kind = BodyKind::ret;
    else
      bl.kind = BodyKind::call;
    prog.body.push_back(std::move(bl));
  }

  if (prog.body.empty())
    return error_result("empty body", "no statements between docstring and invocation");

  bool has_return = false;
  for (const auto& bl : prog.body)
    if (bl.kind == BodyKind::ret) has_return = true;
  if (!has_return)
    return error_result("missing return", "body has no return statement");

  if (prog.invocation_form == InvocationForm::none && opts.require_invocation)
    return error_result("missing invocation", "no trailing '>>>' invocation line");
  if (prog.invocation_form != InvocationForm::none &&
      prog.invocation.find(prog.name) == std::string::npos)
    return error_result("invocation mismatch",
                        "invocation does not reference '" + prog.name + "'");

  ParseResult r;
  r.program = std::move(prog);
  return r;
}

std::string render_program(const PseudoProgram& p) {
  std::string out = "def " + p.name + "(";
  for (size_t i = 0; i < p.params.size(); ++i) {
    if (i) out += ", ";
    out += p.params[i].name;
    if (!p.params[i].annotation.empty()) out += ": " + p.params[i].annotation;
  }
  out += ")";
  if (!p.return_type.empty()) out += " -> " + p.return_type;
  out += ":\n";

  out += "    \"\"\"\n";
  for (const auto& line : split_lines(p.docstring)) {
    if (is_blank(line))
      out += "\n";
    else
      out += "    " + line + "\n";
  }
  out += "    \"\"\"\n";

  out += "\n";
  for (const auto& bl : p.body) {
    out += std::string(4 * static_cast<size_t>(bl.depth + 1), ' ');
    out += bl.text;
    out += "\n";
  }

  if (p.invocation_form != InvocationForm::none) {
    out += "\n\n";
    out += p.invocation;
    out += "\n";
  }
  return out;
}

std::optional<ClosingMarker> find_last_closing_marker(std::string_view text) {
  size_t plain = text.rfind(kMarkerClose);
  size_t variant = text.rfind(kMarkerCloseVariant);
  if (plain == std::string_view::npos && variant == std::string_view::npos)
    return std::nullopt;
  ClosingMarker m;
  if (variant != std::string_view::npos &&
      (plain == std::string_view::npos || variant > plain)) {
    m.pos = variant;
    m.len = kMarkerCloseVariant.size();
    m.variant = true;
  } else {
    m.pos = plain;
    m.len = kMarkerClose.size();
    m.variant = false;
  }
  return m;
}

std::optional<MarkedBlock> extract_marked_block(std::string_view text) {
  // The closing variant contains the opening token as a substring, so an
  // opening match preceded by "[/" is not a real opening.
  size_t open = std::string_view::npos;
  for (size_t from = 0;;) {
    size_t hit = text.find(kMarkerOpen, from);
    if (hit == std::string_view::npos) break;
    if (hit >= 2 && text.substr(hit - 2, 2) == "[/") {
      from = hit + 1;
      continue;
    }
    open = hit;
    break;
  }
  if (open == std::string_view::npos) return std::nullopt;

  auto close = find_last_closing_marker(text);
  if (!close || close->pos < open + kMarkerOpen.size()) return std::nullopt;

  MarkedBlock block;
  block.prefix = std::string(text.substr(0, open));
  block.variant_close = close->variant;

  std::string_view inner =
      text.substr(open + kMarkerOpen.size(), close->pos - open - kMarkerOpen.size());
  if (inner.starts_with("\n")) inner.remove_prefix(1);
  if (inner.ends_with("\n")) inner.remove_suffix(1);
  block.program_text = std::string(inner);

  std::string_view after = text.substr(close->pos + close->len);
  if (after.starts_with("\n")) after.remove_prefix(1);
  block.suffix = std::string(after);
  return block;
}

ValidationResult validate_for_training(const std::optional<MarkedBlock>& block) {
  if (!block) return {false, "missing markers"};
  ParseResult r = parse_program(block->program_text);
  if (!r.ok()) return {false, r.error.code};
  return {true, ""};
}

}  // namespace pcpipe
