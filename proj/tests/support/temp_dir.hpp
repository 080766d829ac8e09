#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

namespace pcpipe::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = "/tmp/pcpipe_test_XXXXXX";
    path_ = mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

}  // namespace pcpipe::testing
