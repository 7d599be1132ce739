#pragma once

#include <fstream>
#include <set>
#include <string>

#include "pouring/binio.hpp"
#include "pouring/model.hpp"

namespace pouring {

// Checkpoint container: header (magic, version, encoder kind, dims,
// normalization constants), then named tensors as row-major float32,
// little-endian. Running batch-norm statistics ride along with the weights
// so a loaded model is immediately usable for inference.

template <typename Scalar>
void save_checkpoint(const std::string& path, Model<Scalar>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_tag(out, "PNCK");
  write_u32le(out, 1);  // version
  write_u32le(out, static_cast<std::uint32_t>(model.kind()));
  write_u32le(out, static_cast<std::uint32_t>(model.input_dim()));
  write_u32le(out, static_cast<std::uint32_t>(model.hidden_dim()));
  write_u32le(out, static_cast<std::uint32_t>(model.mlp_dim()));
  write_f32le(out, model.norm.spec_mean);
  write_f32le(out, model.norm.spec_std);
  write_f32le(out, model.norm.label_scale_mm);

  const auto tensors = model.state_tensors();
  write_u32le(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    write_u32le(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32le(out, static_cast<std::uint32_t>(t.rows));
    write_u32le(out, static_cast<std::uint32_t>(t.cols));
    // Tensors are stored column-major in memory; the file is row-major.
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      for (Eigen::Index c = 0; c < t.cols; ++c) {
        write_f32le(out, static_cast<float>(t.data[c * t.rows + r]));
      }
    }
  }
  if (!out) throw std::runtime_error("short write to " + path);
}

template <typename Scalar>
Model<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  expect_tag(in, "PNCK", "checkpoint");
  const std::uint32_t version = read_u32le(in);
  if (version != 1) {
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  const std::uint32_t kind_raw = read_u32le(in);
  if (kind_raw > 2) throw std::runtime_error(path + ": invalid encoder kind");
  const auto kind = static_cast<EncoderKind>(kind_raw);
  const int input_dim = static_cast<int>(read_u32le(in));
  const int hidden_dim = static_cast<int>(read_u32le(in));
  const int mlp_dim = static_cast<int>(read_u32le(in));

  Model<Scalar> model(kind, input_dim, hidden_dim, mlp_dim, /*seed=*/0);
  model.norm.spec_mean = read_f32le(in);
  model.norm.spec_std = read_f32le(in);
  model.norm.label_scale_mm = read_f32le(in);

  auto tensors = model.state_tensors();
  std::set<std::string> pending;
  for (const auto& t : tensors) pending.insert(t.name);

  const std::uint32_t count = read_u32le(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = read_u32le(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error(path + ": truncated tensor name");
    const auto rows = static_cast<Eigen::Index>(read_u32le(in));
    const auto cols = static_cast<Eigen::Index>(read_u32le(in));

    NamedTensor<Scalar>* target = nullptr;
    for (auto& t : tensors) {
      if (t.name == name) {
        target = &t;
        break;
      }
    }
    if (target == nullptr) {
      throw std::runtime_error(path + ": unexpected tensor '" + name + "'");
    }
    if (target->rows != rows || target->cols != cols) {
      throw std::runtime_error(path + ": tensor '" + name + "' has shape " +
                               std::to_string(rows) + "x" + std::to_string(cols) +
                               ", expected " + std::to_string(target->rows) + "x" +
                               std::to_string(target->cols));
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        target->data[c * rows + r] = static_cast<Scalar>(read_f32le(in));
      }
    }
    pending.erase(name);
  }
  if (!pending.empty()) {
    throw std::runtime_error(path + ": checkpoint is missing tensor '" + *pending.begin() + "'");
  }
  return model;
}

}  // namespace pouring
