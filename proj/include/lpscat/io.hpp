#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "lpscat/grid.hpp"

namespace lpscat {

// Write to `path.tmp` then rename over `path`.
inline void atomic_write(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw IoError("rename " + tmp + " -> " + path + ": " + ec.message());
  }
}

// Writes `base.json` and `base.bin`; returns the two paths.
inline std::pair<std::string, std::string> write_field(const std::string& base, const ComplexField& f) {
  atomic_write(base + ".bin", field_bytes(f));
  atomic_write(base + ".json", field_sidecar(f).dump(2) + "\n");
  return {base + ".json", base + ".bin"};
}

}  // namespace lpscat
