#include "decoyforge/feature_store.hpp"

#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "decoyforge/util.hpp"

namespace decoyforge {

FeatureStore::FeatureStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error("features.dimension", "feature dimension must be positive", "d_img");
}

bool FeatureStore::contains(std::string_view image_id) const {
  return index_.contains(std::string(image_id));
}

void FeatureStore::add(std::string image_id, std::span<const float> values) {
  if (values.size() != dim_) {
    throw Error("features.dimension", "feature for '" + image_id + "' has dimension " +
                                          std::to_string(values.size()) + ", expected " + std::to_string(dim_),
                image_id);
  }
  if (!index_.emplace(image_id, ids_.size()).second) {
    throw Error("features.duplicate_id", "duplicate feature id '" + image_id + "'", image_id);
  }
  ids_.push_back(std::move(image_id));
  values_.insert(values_.end(), values.begin(), values.end());
}

std::span<const float> FeatureStore::lookup(std::string_view image_id) const {
  auto it = index_.find(std::string(image_id));
  if (it == index_.end()) {
    throw Error("features.missing", "no image feature for '" + std::string(image_id) + "'", std::string(image_id));
  }
  return std::span<const float>(values_).subspan(it->second * dim_, dim_);
}

FeatureStore FeatureStore::read(std::istream& in) {
  binio::expect_magic(in, "DFFS", "feature store");
  const std::uint32_t dim = binio::get_u32(in, "feature dimension");
  FeatureStore store(dim);
  std::vector<float> buffer(dim);
  std::uint32_t id_len;
  while (binio::try_get_u32(in, id_len, "feature id length")) {
    std::string id = binio::get_bytes(in, id_len, "feature id");
    for (auto& v : buffer) v = binio::get_f32(in, "feature vector");
    store.add(std::move(id), buffer);
  }
  return store;
}

FeatureStore FeatureStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io.open", "cannot open '" + path + "'", path);
  return read(in);
}

void FeatureStore::write(std::ostream& out) const {
  out.write("DFFS", 4);
  binio::put_u32(out, static_cast<std::uint32_t>(dim_));
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    binio::put_string(out, ids_[i]);
    for (std::size_t d = 0; d < dim_; ++d) binio::put_f32(out, values_[i * dim_ + d]);
  }
}

void FeatureStore::save(const std::string& path) const {
  std::ostringstream ss;
  write(ss);
  write_file(path, ss.str());
}

}  // namespace decoyforge
