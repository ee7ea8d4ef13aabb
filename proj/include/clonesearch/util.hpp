#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace clonesearch {

// Every failure surfaced by the library carries a short machine-readable kind
// ("parse", "vocabulary", "domain", ...) so the CLI can print one-line errors.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

inline Error parse_error(const std::string& m) { return Error("parse", m); }
inline Error vocabulary_error(const std::string& m) { return Error("vocabulary", m); }
inline Error domain_error(const std::string& m) { return Error("domain", m); }
inline Error config_error(const std::string& m) { return Error("configuration", m); }
inline Error capacity_error(const std::string& m) { return Error("capacity", m); }
inline Error manifest_error(const std::string& m) { return Error("manifest", m); }
inline Error io_error(const std::string& m) { return Error("io", m); }

uint64_t fnv1a64(std::string_view data, uint64_t seed = 14695981039346656037ULL);
std::string hex64(uint64_t v);

// Named sub-stream of a run seed, e.g. derive_seed(seed, "pairs").
uint64_t derive_seed(uint64_t seed, std::string_view stream);

// Seeded generator whose output does not depend on the standard library's
// distribution implementations: mt19937_64 is fully specified, the transforms
// below are written out.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }
  // Uniform integer in [0, n); n > 0.
  uint64_t below(uint64_t n);
  // Uniform real in [0, 1).
  double uniform();
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Reads a whole file; gzip input is decompressed transparently.
std::string read_file_maybe_gz(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

void append_le_f64(std::string& out, double v);
void append_le_f32(std::string& out, float v);
double read_le_f64(const char* p);
float read_le_f32(const char* p);

std::vector<std::string_view> split_lines(std::string_view text);

}  // namespace clonesearch
