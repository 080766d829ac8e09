#include "pcpipe/postprocess.hpp"

#include <algorithm>
#include <cctype>

#include "pcpipe/pseudocode.hpp"
#include "pcpipe/util.hpp"

namespace pcpipe {

namespace {

bool is_bracket(char c) {
  return c == '(' || c == ')' || c == '[' || c == ']' || c == '{' || c == '}';
}

bool strip_leading_char(char c) { return is_bracket(c) || c == '$' || c == '\''; }

bool strip_trailing_char(char c) {
  return is_bracket(c) || c == '$' || c == '\'' || c == '.' || c == ',' || c == ';' ||
         c == ':' || c == '!' || c == '?';
}

// Last line of `text` that starts with ">>>" followed by a call.
std::optional<size_t> last_repl_line_end(std::string_view text) {
  std::optional<size_t> result;
  size_t line_start = 0;
  while (line_start <= text.size()) {
    size_t nl = text.find('\n', line_start);
    size_t line_end = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(line_start, line_end - line_start);
    std::string_view t = trim_view(line);
    if (t.starts_with(">>>")) {
      std::string_view rest = trim_view(t.substr(3));
      size_t ident = 0;
      while (ident < rest.size() &&
             (std::isalnum(static_cast<unsigned char>(rest[ident])) || rest[ident] == '_'))
        ++ident;
      if (ident > 0 && ident < rest.size() && trim_view(rest.substr(ident)).starts_with("("))
        result = line_end;
    }
    if (nl == std::string_view::npos) break;
    line_start = nl + 1;
  }
  return result;
}

// Case-insensitive search for the last occurrence of `needle`.
std::optional<size_t> rfind_ci(std::string_view haystack, std::string_view needle) {
  if (needle.empty() || haystack.size() < needle.size()) return std::nullopt;
  for (size_t i = haystack.size() - needle.size() + 1; i-- > 0;) {
    if (iequals(haystack.substr(i, needle.size()), needle)) return i;
  }
  return std::nullopt;
}

std::string match_key(std::string_view s) {
  return lower(collapse_whitespace(clean_segment(s)));
}

std::string spaceless_key(std::string_view s) {
  return lower(remove_spaces(clean_segment(s)));
}

const std::string* find_option_by_label(const OptionMap& options, std::string_view label) {
  for (const auto& [k, v] : options)
    if (iequals(k, label)) return &v;
  return nullptr;
}

}  // namespace

std::string_view route_name(Route r) {
  switch (r) {
    case Route::marker: return "marker";
    case Route::marker_variant: return "marker_variant";
    case Route::repl_fallback: return "repl_fallback";
    case Route::response_keyword: return "response_keyword";
    case Route::last_line: return "last_line";
    case Route::passthrough: return "passthrough";
  }
  return "passthrough";
}

std::string clean_segment(std::string_view segment) {
  size_t b = 0, e = segment.size();
  for (;;) {
    size_t ob = b, oe = e;
    while (b < e && std::isspace(static_cast<unsigned char>(segment[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(segment[e - 1]))) --e;
    while (b < e && strip_leading_char(segment[b])) ++b;
    while (e > b && strip_trailing_char(segment[e - 1])) --e;
    if (b == ob && e == oe) break;
  }
  return std::string(segment.substr(b, e - b));
}

ExtractionResult extract_nl_answer(std::string_view generation) {
  ExtractionResult res;
  res.raw = std::string(generation);

  constexpr std::string_view kKeyword = "Response:";
  size_t kw = generation.rfind(kKeyword);
  if (kw != std::string_view::npos) {
    res.route = Route::response_keyword;
    res.segment = std::string(generation.substr(kw + kKeyword.size()));
    res.cleaned = clean_segment(res.segment);
    return res;
  }

  auto lines = split_lines(generation);
  for (size_t i = lines.size(); i-- > 0;) {
    if (is_blank(lines[i])) continue;
    std::string_view line = lines[i];
    res.route = Route::last_line;
    std::optional<size_t> cut;
    size_t cut_len = 0;
    for (std::string_view pat : {"answer is :", "answer is:"}) {
      if (auto pos = rfind_ci(line, pat)) {
        if (!cut || *pos + pat.size() > *cut + cut_len) {
          cut = *pos;
          cut_len = pat.size();
        }
      }
    }
    res.segment = cut ? std::string(line.substr(*cut + cut_len)) : std::string(line);
    res.cleaned = clean_segment(res.segment);
    return res;
  }

  res.route = Route::passthrough;
  res.segment = trim(generation);
  res.cleaned = clean_segment(res.segment);
  return res;
}

ExtractionResult extract_pc_answer(std::string_view generation) {
  if (auto close = find_last_closing_marker(generation)) {
    ExtractionResult res;
    res.raw = std::string(generation);
    res.route = close->variant ? Route::marker_variant : Route::marker;
    res.segment = std::string(generation.substr(close->pos + close->len));
    res.cleaned = clean_segment(res.segment);
    return res;
  }
  if (auto repl_end = last_repl_line_end(generation)) {
    ExtractionResult res;
    res.raw = std::string(generation);
    res.route = Route::repl_fallback;
    size_t start = *repl_end;
    if (start < generation.size() && generation[start] == '\n') ++start;
    res.segment = std::string(generation.substr(start));
    res.cleaned = clean_segment(res.segment);
    return res;
  }
  return extract_nl_answer(generation);
}

std::optional<std::string> extract_last_number(std::string_view text) {
  std::optional<std::string> best;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    size_t start = i;
    bool negative = start > 0 && text[start - 1] == '-' &&
                    (start < 2 || !std::isalnum(static_cast<unsigned char>(text[start - 2])));

    auto digit_at = [&](size_t k) {
      return k < n && std::isdigit(static_cast<unsigned char>(text[k]));
    };

    std::string digits;
    size_t group = 0;
    while (digit_at(i)) {
      digits += text[i];
      ++i;
      ++group;
    }
    // thousands separators: a comma joined to exactly three digits
    while (group <= 3 && i < n && text[i] == ',' && digit_at(i + 1) && digit_at(i + 2) &&
           digit_at(i + 3) && !digit_at(i + 4)) {
      digits += text.substr(i + 1, 3);
      i += 4;
      group = 3;
    }

    std::string frac;
    if (i < n && text[i] == '.' && i + 1 < n &&
        std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
      ++i;
      while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) {
        frac += text[i];
        ++i;
      }
    }

    // canonical form: no leading zeros, no trailing fraction zeros
    size_t first = digits.find_first_not_of('0');
    std::string integral = first == std::string::npos ? "0" : digits.substr(first);
    while (!frac.empty() && frac.back() == '0') frac.pop_back();
    std::string canon = integral;
    if (!frac.empty()) canon += "." + frac;
    bool is_zero = integral == "0" && frac.empty();
    if (negative && !is_zero) canon.insert(canon.begin(), '-');
    best = canon;
  }
  return best;
}

NormalizerKind normalizer_kind_from_name(std::string_view name) {
  if (name == "numeric_extract") return NormalizerKind::numeric_extract;
  if (name == "option_letter_or_value") return NormalizerKind::option_letter_or_value;
  if (name == "index_or_value") return NormalizerKind::index_or_value;
  if (name == "single_char_option") return NormalizerKind::single_char_option;
  if (name == "verbatim") return NormalizerKind::verbatim;
  throw NormalizeError("unknown normalizer kind: " + std::string(name));
}

std::string_view normalizer_kind_name(NormalizerKind kind) {
  switch (kind) {
    case NormalizerKind::numeric_extract: return "numeric_extract";
    case NormalizerKind::option_letter_or_value: return "option_letter_or_value";
    case NormalizerKind::index_or_value: return "index_or_value";
    case NormalizerKind::single_char_option: return "single_char_option";
    case NormalizerKind::verbatim: return "verbatim";
  }
  return "verbatim";
}

namespace {

void require_options(const NormalizerSpec& spec, const OptionMap& options) {
  if (options.empty())
    throw NormalizeError("normalizer '" + std::string(normalizer_kind_name(spec.kind)) +
                         "' for dataset '" + spec.dataset + "' needs an option list");
}

std::string normalize_single_char_option(const std::string& cleaned, const OptionMap& options) {
  if (cleaned.size() == 1) {
    if (const std::string* v = find_option_by_label(options, cleaned))
      return remove_spaces(clean_segment(*v));
  }
  // an already-normalized option value stays put, keeping this idempotent
  std::string key = spaceless_key(cleaned);
  for (const auto& [label, value] : options)
    if (spaceless_key(value) == key) return remove_spaces(clean_segment(value));
  if (auto num = extract_last_number(cleaned)) return *num;
  return cleaned;
}

std::string normalize_option_letter_or_value(const std::string& cleaned,
                                             const OptionMap& options) {
  if (cleaned.size() == 1) return cleaned;
  std::string key = match_key(cleaned);
  for (const auto& [label, value] : options)
    if (match_key(value) == key) return label;
  return cleaned;
}

std::string normalize_index_or_value(const std::string& cleaned, const OptionMap& options) {
  if (auto num = extract_last_number(cleaned)) return *num;
  std::string key = match_key(cleaned);
  for (const auto& [label, value] : options)
    if (match_key(value) == key) return clean_segment(value);
  return cleaned;
}

}  // namespace

std::string normalize_answer(const std::string& cleaned, const NormalizerSpec& spec,
                             const OptionMap& options) {
  switch (spec.kind) {
    case NormalizerKind::numeric_extract: {
      if (auto num = extract_last_number(cleaned)) return *num;
      return cleaned;
    }
    case NormalizerKind::single_char_option:
      require_options(spec, options);
      return normalize_single_char_option(cleaned, options);
    case NormalizerKind::option_letter_or_value:
      require_options(spec, options);
      return normalize_option_letter_or_value(cleaned, options);
    case NormalizerKind::index_or_value:
      require_options(spec, options);
      return normalize_index_or_value(cleaned, options);
    case NormalizerKind::verbatim:
      return cleaned;
  }
  return cleaned;
}

NormalizedPair normalize_pair(const std::string& cleaned_prediction,
                              const std::string& cleaned_gold, const NormalizerSpec& spec,
                              const OptionMap& options) {
  if (spec.kind != NormalizerKind::index_or_value) {
    return {normalize_answer(cleaned_prediction, spec, options),
            normalize_answer(cleaned_gold, spec, options)};
  }
  require_options(spec, options);
  if (auto pred_num = extract_last_number(cleaned_prediction)) {
    // numeric prediction: compare in label space
    std::string gold = cleaned_gold;
    if (auto gold_num = extract_last_number(cleaned_gold)) gold = *gold_num;
    return {*pred_num, gold};
  }
  // textual prediction: compare in option-text space
  NormalizedPair pair;
  pair.prediction = normalize_index_or_value(cleaned_prediction, options);
  if (const std::string* v = find_option_by_label(options, clean_segment(cleaned_gold)))
    pair.gold = clean_segment(*v);
  else
    pair.gold = cleaned_gold;
  return pair;
}

}  // namespace pcpipe
