#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "gbr/core/error.hpp"

namespace gbr {

inline constexpr const char* kVersion = "0.1.0";

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr)) {
    throw NumericalError("sha256: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw IoError("cannot write '" + path.string() + "'");
}

/// Regular files under `dir`, sorted, with paths relative to `base`.
inline nlohmann::json hash_tree(const std::filesystem::path& dir, const std::filesystem::path& base) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (fs::is_regular_file(dir)) files.push_back(dir);
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  auto out = nlohmann::json::array();
  for (const auto& f : files) {
    const auto bytes = read_file(f);
    out.push_back({{"path", fs::relative(f, base).generic_string()}, {"sha256", sha256_hex(bytes)},
                   {"bytes", bytes.size()}});
  }
  return out;
}

/// Machine-readable JSON lines next to the artifacts plus a human-readable
/// console echo on stderr.
class EventLog {
 public:
  EventLog() = default;
  EventLog(const std::filesystem::path& path, std::string verbosity)
      : out_(path, std::ios::app), verbosity_(std::move(verbosity)) {
    if (!out_) throw IoError("cannot open event log '" + path.string() + "'");
  }

  void emit(const std::string& level, const std::string& event, nlohmann::json fields = nlohmann::json::object()) {
    fields["time"] = timestamp();
    fields["level"] = level;
    fields["event"] = event;
    if (out_.is_open()) out_ << fields.dump() << '\n' << std::flush;
    if (verbosity_ == "quiet" && level != "error") return;
    if (verbosity_ != "debug" && level == "debug") return;
    std::cerr << "[" << level << "] " << event;
    for (const auto& [k, v] : fields.items()) {
      if (k == "time" || k == "level" || k == "event") continue;
      std::cerr << ' ' << k << '=' << (v.is_string() ? v.get<std::string>() : v.dump());
    }
    std::cerr << '\n';
  }

 private:
  static std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  std::ofstream out_;
  std::string verbosity_ = "info";
};

}  // namespace gbr
