#include <fstream>

#include "binary_io.hpp"
#include "decoyforge/model.hpp"

namespace decoyforge {

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;
}

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  if (static_cast<std::size_t>(p.U.size()) != p.hidden_dim()) {
    throw Error("model.dimension", "U has " + std::to_string(p.U.size()) + " entries, W has " +
                                       std::to_string(p.hidden_dim()) + " rows");
  }
  out.write("DFMP", 4);
  binio::put_u32(out, kCheckpointVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(ckpt.mode));
  binio::put_u32(out, static_cast<std::uint32_t>(ckpt.d_img));
  binio::put_u32(out, static_cast<std::uint32_t>(ckpt.d_txt));
  binio::put_u32(out, static_cast<std::uint32_t>(p.hidden_dim()));
  binio::put_u32(out, static_cast<std::uint32_t>(p.input_dim()));
  for (Eigen::Index r = 0; r < p.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.W.cols(); ++c) binio::put_f64(out, p.W(r, c));
  }
  for (Eigen::Index r = 0; r < p.U.size(); ++r) binio::put_f64(out, p.U[r]);
  binio::put_f64(out, p.b);
  if (!out) throw Error("io.write", "failed writing checkpoint");
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io.open", "cannot open '" + path + "' for writing", path);
  save_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(std::istream& in) {
  binio::expect_magic(in, "DFMP", "checkpoint");
  const auto version = binio::get_u32(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw Error("model.checkpoint_version", "unsupported checkpoint version " + std::to_string(version));
  }
  const auto mode = binio::get_u32(in, "checkpoint mode");
  if (mode > static_cast<std::uint32_t>(InputMode::IQA)) {
    throw Error("model.checkpoint", "unknown mode code " + std::to_string(mode));
  }
  Checkpoint ckpt;
  ckpt.mode = static_cast<InputMode>(mode);
  ckpt.d_img = binio::get_u32(in, "checkpoint header");
  ckpt.d_txt = binio::get_u32(in, "checkpoint header");
  const std::size_t hidden = binio::get_u32(in, "checkpoint header");
  const std::size_t input = binio::get_u32(in, "checkpoint header");
  if (input != input_dim(ckpt.mode, ckpt.d_img, ckpt.d_txt)) {
    throw Error("model.checkpoint", "input_dim " + std::to_string(input) + " inconsistent with mode " +
                                        std::string(to_string(ckpt.mode)) + " and feature dims");
  }
  auto& p = ckpt.params;
  p.W.resize(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(input));
  p.U.resize(static_cast<Eigen::Index>(hidden));
  for (Eigen::Index r = 0; r < p.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.W.cols(); ++c) p.W(r, c) = binio::get_f64(in, "checkpoint weights");
  }
  for (Eigen::Index r = 0; r < p.U.size(); ++r) p.U[r] = binio::get_f64(in, "checkpoint weights");
  p.b = binio::get_f64(in, "checkpoint bias");
  return ckpt;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io.open", "cannot open '" + path + "'", path);
  return load_checkpoint(in);
}

}  // namespace decoyforge
