#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pcpipe {

// 64-bit FNV-1a. Used for content hashes in manifests and for keying
// deterministic per-id sampling; not cryptographic.
uint64_t fnv1a64(std::string_view data);

// splitmix64 step; the basis of every seeded decision in the toolchain so
// runs are byte-identical across platforms (std:: distributions are not
// pinned by the standard).
uint64_t splitmix64(uint64_t& state);

// Mix two seeds into one (order-sensitive).
uint64_t mix_seed(uint64_t a, uint64_t b);

std::string to_hex(uint64_t v);

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() { return splitmix64(state_); }

  // Unbiased integer in [0, n). n must be > 0.
  uint64_t bounded(uint64_t n);

  double next_double();  // [0, 1)

  // First k elements of a random permutation of [0, n).
  std::vector<size_t> sample_without_replacement(size_t n, size_t k);

 private:
  uint64_t state_;
};

// ---- string helpers ----

std::string_view trim_view(std::string_view s);
std::string trim(std::string_view s);
std::string lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
std::vector<std::string> split_lines(std::string_view text);
std::string join_lines(const std::vector<std::string>& lines);
std::string collapse_whitespace(std::string_view s);  // trim + runs of ws -> one space
std::string remove_spaces(std::string_view s);
bool is_blank(std::string_view s);
std::string replace_all(std::string_view text, std::string_view from, std::string_view to);

// ---- file helpers ----

std::string read_file(const std::string& path);        // throws IoError
void write_file(const std::string& path, std::string_view content);
void append_file(const std::string& path, std::string_view content);
bool file_exists(const std::string& path);
std::string file_hash(const std::string& path);        // "fnv1a64:<hex>"
std::string content_hash(std::string_view data);

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pcpipe
