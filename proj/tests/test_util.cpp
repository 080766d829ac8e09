#include <doctest.h>

#include <set>

#include "pcpipe/util.hpp"

using namespace pcpipe;

TEST_CASE("fnv1a64 is stable") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") != fnv1a64("b"));
  CHECK(fnv1a64("hello") == fnv1a64("hello"));
}

TEST_CASE("rng bounded stays in range and is deterministic") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    uint64_t v = a.bounded(7);
    CHECK(v < 7);
    CHECK(v == b.bounded(7));
  }
}

TEST_CASE("sample_without_replacement has no duplicates") {
  Rng rng(7);
  auto picks = rng.sample_without_replacement(100, 10);
  CHECK(picks.size() == 10);
  std::set<size_t> unique(picks.begin(), picks.end());
  CHECK(unique.size() == 10);
  for (size_t p : picks) CHECK(p < 100);
}

TEST_CASE("sample_without_replacement caps at n") {
  Rng rng(7);
  CHECK(rng.sample_without_replacement(3, 10).size() == 3);
}

TEST_CASE("string helpers") {
  CHECK(trim("  x \n") == "x");
  CHECK(collapse_whitespace("  a \n b\tc ") == "a b c");
  CHECK(remove_spaces("12 hours") == "12hours");
  CHECK(lower("AbC") == "abc");
  CHECK(replace_all("a\tb\tc", "\t", "    ") == "a    b    c");
  CHECK(split_lines("a\nb").size() == 2);
  CHECK(split_lines("a\nb\n").size() == 3);  // trailing newline yields empty tail
  CHECK(join_lines({"a", "b"}) == "a\nb");
}
