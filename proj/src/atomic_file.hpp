#pragma once

// Output file that only appears under its final name once complete: data
// goes to a sibling temporary, which commit() renames into place. An
// uncommitted file is removed on destruction, so errors never leave partial
// output behind.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <string>

#include <unistd.h>

#include "zlab/error.hpp"

namespace zlab::detail {

class AtomicFile {
 public:
  explicit AtomicFile(std::string path) : path_(std::move(path)) {
    static std::atomic<unsigned> counter{0};
    tmp_ = path_ + ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
    out_.open(tmp_, std::ios::out | std::ios::trunc);
    if (!out_) throw IoError("cannot open '" + path_ + "' for writing");
  }

  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::remove(tmp_.c_str());
    }
  }

  std::ofstream& stream() { return out_; }

  void commit() {
    out_.flush();
    const bool ok = static_cast<bool>(out_);
    out_.close();
    if (!ok || out_.fail()) throw IoError("error while writing '" + path_ + "'");
    if (std::rename(tmp_.c_str(), path_.c_str()) != 0) throw IoError("cannot move output into place at '" + path_ + "'");
    committed_ = true;
  }

 private:
  std::string path_, tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

}  // namespace zlab::detail
