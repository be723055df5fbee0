#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace decoyforge {

// Every recoverable failure in the toolkit is reported as an Error. `code`
// is a stable dotted identifier ("corpus.duplicate_id") that the CLI copies
// into its machine-readable error record; `field` names the offending config
// key or record when there is one.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message, std::string field = {})
      : std::runtime_error(message), code_(std::move(code)), field_(std::move(field)) {}

  const std::string& code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string code_;
  std::string field_;
};

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Generator seeded from (global seed, record key, purpose salt). Every
// stochastic per-record decision draws from its own stream so results do not
// depend on processing order.
std::mt19937_64 keyed_rng(std::uint64_t seed, std::string_view key, std::uint64_t salt);

/// Uniform index in [0, n) without relying on std::uniform_int_distribution,
/// whose output differs between standard libraries.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

template <typename T>
void stable_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

/// Worker count: DECOYFORGE_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

// Runs fn(i) for i in [0, n) across worker threads. fn must only write to
// per-index state.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t workers = 0);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

}  // namespace decoyforge
