#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace decoyforge {

// Precomputed image features keyed by image id.
//
// On disk: the 4 magic bytes "DFFS", a little-endian u32 dimension, then a
// sequence of entries, each a u32 id length, the id bytes, and `dim`
// little-endian float32 values. Entries run to end of file.
class FeatureStore {
 public:
  explicit FeatureStore(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool contains(std::string_view image_id) const;

  /// Throws Error("features.dimension") on a wrong-sized vector and
  /// Error("features.duplicate_id") on a repeated id.
  void add(std::string image_id, std::span<const float> values);

  /// Throws Error("features.missing") when the id is absent.
  std::span<const float> lookup(std::string_view image_id) const;

  const std::vector<std::string>& ids() const noexcept { return ids_; }

  static FeatureStore load(const std::string& path);
  static FeatureStore read(std::istream& in);
  void save(const std::string& path) const;
  void write(std::ostream& out) const;

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace decoyforge
