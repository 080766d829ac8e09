#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pcpipe {

enum class Route {
  marker,
  marker_variant,
  repl_fallback,
  response_keyword,
  last_line,
  passthrough,
};

std::string_view route_name(Route r);

struct ExtractionResult {
  std::string raw;      // full generation text
  std::string segment;  // candidate answer before cleaning
  Route route = Route::passthrough;
  std::string cleaned;
};

// Stage 1 for pseudo-code style generations: text after the last closing
// marker (either spelling), else after the last ">>> name(" REPL line, else
// the natural-language extraction below. Stage 2 is clean_segment.
ExtractionResult extract_pc_answer(std::string_view generation);

// Natural-language extraction: text after the last "Response:", else the
// last non-empty line with "answer is:" style prefixes removed, else the
// whole text trimmed.
ExtractionResult extract_nl_answer(std::string_view generation);

// Strips boundary brackets, dollar signs, single quotes, trailing
// punctuation and surrounding whitespace. Idempotent.
std::string clean_segment(std::string_view segment);

// Last number in the text (optional sign, thousands commas, decimals),
// canonicalized so that "460", "460.0" and "4,60"-free forms compare equal.
std::optional<std::string> extract_last_number(std::string_view text);

enum class NormalizerKind {
  numeric_extract,         // GSM8K, GSM8K-Platinum
  option_letter_or_value,  // ARC
  index_or_value,          // PiQA, Hellaswag, Winogrande
  single_char_option,      // MathQA
  verbatim,
};

struct NormalizerSpec {
  std::string dataset;
  NormalizerKind kind = NormalizerKind::verbatim;
  std::string options_key = "options";  // meta key carrying the option map
};

NormalizerKind normalizer_kind_from_name(std::string_view name);
std::string_view normalizer_kind_name(NormalizerKind kind);

// label -> option text, e.g. {"A": "Sunlight ...", ...} or {"1": "Tanya", ...}
using OptionMap = std::map<std::string, std::string>;

struct NormalizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One-sided canonicalization. Option kinds require a non-empty option map.
std::string normalize_answer(const std::string& cleaned, const NormalizerSpec& spec,
                             const OptionMap& options);

struct NormalizedPair {
  std::string prediction;
  std::string gold;
};

// Canonicalizes prediction and gold together. For index_or_value datasets the
// comparison space depends on the prediction: numeric predictions keep the
// gold as its numeric label, textual predictions move both sides into option
// text. All other kinds normalize each side independently.
NormalizedPair normalize_pair(const std::string& cleaned_prediction,
                              const std::string& cleaned_gold, const NormalizerSpec& spec,
                              const OptionMap& options);

}  // namespace pcpipe
