#include <doctest.h>

#include "pcpipe/postprocess.hpp"
#include "pcpipe/util.hpp"

using namespace pcpipe;

TEST_CASE("clean_segment strips the documented characters") {
  CHECK(clean_segment("'C'.") == "C");
  CHECK(clean_segment("$460") == "460");
  CHECK(clean_segment("answer") == "answer");
  CHECK(clean_segment("  (12 hours) ") == "12 hours");
  CHECK(clean_segment("{[$'x'$]}") == "x");
  CHECK(clean_segment("done?!") == "done");
  CHECK(clean_segment("") == "");
}

TEST_CASE("clean_segment is idempotent") {
  Rng rng(5);
  const std::string alphabet = "ab1 ('$)[].,;:!?\n";
  for (int i = 0; i < 500; ++i) {
    std::string s;
    for (int j = 0; j < 12; ++j) s += alphabet[rng.bounded(alphabet.size())];
    std::string once = clean_segment(s);
    CHECK(clean_segment(once) == once);
  }
}

TEST_CASE("pc extraction routes") {
  ExtractionResult marker = extract_pc_answer("x\n[PSEUDOCODE]\ncode\n[/PSEUDOCODE]\n 460.");
  CHECK(marker.route == Route::marker);
  CHECK(marker.cleaned == "460");

  ExtractionResult variant = extract_pc_answer("[PSEUDOCODE]\ncode\n[/[PSEUDOCODE]]\nA");
  CHECK(variant.route == Route::marker_variant);
  CHECK(variant.cleaned == "A");

  ExtractionResult repl = extract_pc_answer("def f(x):\n    return x\n>>> f(x)\n42");
  CHECK(repl.route == Route::repl_fallback);
  CHECK(repl.cleaned == "42");

  // the last closing marker wins
  ExtractionResult last =
      extract_pc_answer("[/PSEUDOCODE]\nearly\n[/PSEUDOCODE]\nlate answer");
  CHECK(last.route == Route::marker);
  CHECK(last.cleaned == "late answer");
}

TEST_CASE("nl extraction routes") {
  ExtractionResult kw = extract_nl_answer("C. Response:C.");
  CHECK(kw.route == Route::response_keyword);
  CHECK(kw.cleaned == "C");

  ExtractionResult tanya = extract_nl_answer(" 2 Response: Tanya");
  CHECK(tanya.cleaned == "Tanya");

  ExtractionResult heuristic = extract_nl_answer("Some reasoning.\nThe answer is: 42");
  CHECK(heuristic.route == Route::last_line);
  CHECK(heuristic.cleaned == "42");

  ExtractionResult spaced = extract_nl_answer("The answer is : B");
  CHECK(spaced.cleaned == "B");

  ExtractionResult plain = extract_nl_answer("just text");
  CHECK(plain.route == Route::last_line);
  CHECK(plain.cleaned == "just text");

  ExtractionResult empty = extract_nl_answer("  \n \n");
  CHECK(empty.route == Route::passthrough);
  CHECK(empty.cleaned == "");
}

TEST_CASE("extraction is total and pc falls through to nl") {
  Rng rng(11);
  const std::string alphabet = "aZ0 .\n>:()";
  for (int i = 0; i < 300; ++i) {
    std::string s;
    for (int j = 0; j < 20; ++j) s += alphabet[rng.bounded(alphabet.size())];
    ExtractionResult pc = extract_pc_answer(s);
    ExtractionResult nl = extract_nl_answer(s);
    CHECK(pc.cleaned == clean_segment(pc.segment));
    if (s.find("[/PSEUDOCODE]") == std::string::npos &&
        s.find("[/[PSEUDOCODE]]") == std::string::npos &&
        s.find(">>>") == std::string::npos) {
      CHECK(pc.route == nl.route);
      CHECK(pc.cleaned == nl.cleaned);
    }
  }
}

TEST_CASE("number extraction and canonicalization") {
  CHECK(extract_last_number("= $460.") == "460");
  CHECK(extract_last_number("#### 260") == "260");
  CHECK(extract_last_number("460.0") == "460");
  CHECK(extract_last_number("1,234,567 wide") == "1234567");
  CHECK(extract_last_number("price -3.50") == "-3.5");
  CHECK(extract_last_number("45-40 = 5") == "5");
  CHECK(extract_last_number("a-b") == std::nullopt);
  CHECK(extract_last_number("007") == "7");
  CHECK(extract_last_number("first 1 then 2") == "2");
  CHECK(extract_last_number("0.50") == "0.5");
  CHECK(extract_last_number("nothing here") == std::nullopt);
}

TEST_CASE("numeric_extract normalizer") {
  NormalizerSpec spec{"gsm8k", NormalizerKind::numeric_extract, "options"};
  CHECK(normalize_answer("Thus she earns $460.", spec, {}) == "460");
  CHECK(normalize_answer("no digits", spec, {}) == "no digits");
}

TEST_CASE("mathqa single_char_option normalizer") {
  NormalizerSpec spec{"mathqa", NormalizerKind::single_char_option, "options"};
  OptionMap options = {{"a", "8 hours"}, {"b", "10 hours"}, {"c", "12 hours"},
                       {"d", "24 hours"}, {"e", "none of these"}};
  CHECK(normalize_answer("c", spec, options) == "12hours");
  CHECK(normalize_answer("240", NormalizerSpec{"mathqa", NormalizerKind::single_char_option,
                                               "options"},
                         {{"a", "290"}, {"b", "240"}}) == "240");
  // idempotent on the letter-mapped form (no numeric re-extraction)
  CHECK(normalize_answer("12hours", spec, options) == "12hours");
  CHECK_THROWS_AS(normalize_answer("c", spec, {}), NormalizeError);
}

TEST_CASE("arc option_letter_or_value normalizer") {
  NormalizerSpec spec{"arc", NormalizerKind::option_letter_or_value, "options"};
  OptionMap options = {
      {"A", "Sunlight is the source of energy for nearly all ecosystems."},
      {"B", "Most ecosystems are found on land instead of in water."},
      {"C", "Carbon dioxide is more available than other gases."},
      {"D", "The producers in all ecosystems are plants."}};
  CHECK(normalize_answer("C", spec, options) == "C");
  CHECK(normalize_answer("Sunlight is the source of energy for nearly all ecosystems.",
                         spec, options) == "A");
  CHECK(normalize_answer("not an option", spec, options) == "not an option");
}

TEST_CASE("winogrande pair normalization depends on the prediction form") {
  NormalizerSpec spec{"winogrande", NormalizerKind::index_or_value, "options"};
  OptionMap options = {{"1", "Tanya"}, {"2", "Emily"}};

  NormalizedPair textual = normalize_pair("Tanya", "1", spec, options);
  CHECK(textual.prediction == "Tanya");
  CHECK(textual.gold == "Tanya");

  NormalizedPair numeric = normalize_pair("1", "2", spec, options);
  CHECK(numeric.prediction == "1");
  CHECK(numeric.gold == "2");

  NormalizedPair unmatched = normalize_pair("Maria", "2", spec, options);
  CHECK(unmatched.prediction == "Maria");
  CHECK(unmatched.gold == "Emily");
}

TEST_CASE("normalize is idempotent on its own outputs") {
  NormalizerSpec mathqa{"mathqa", NormalizerKind::single_char_option, "options"};
  OptionMap mathqa_options = {{"a", "8 hours"}, {"c", "12 hours"}};
  for (const std::string& input : {"c", "12 hours", "the answer is 8 hours"}) {
    std::string once = normalize_answer(clean_segment(input), mathqa, mathqa_options);
    CHECK(normalize_answer(once, mathqa, mathqa_options) == once);
  }

  NormalizerSpec wino{"winogrande", NormalizerKind::index_or_value, "options"};
  OptionMap wino_options = {{"1", "Tanya"}, {"2", "Emily"}};
  for (const std::string& input : {"1", "Tanya", "2 because reasons"}) {
    std::string once = normalize_answer(clean_segment(input), wino, wino_options);
    CHECK(normalize_answer(once, wino, wino_options) == once);
  }
}
