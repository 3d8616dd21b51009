// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mapgate/autodiff.hpp"

namespace mapgate::ckpt {

// Single-file checkpoint layout (all integers little-endian):
//   bytes 0..7   magic "MGCK0001"
//   bytes 8..11  uint32 header length H
//   bytes 12..   header: UTF-8 JSON with {"format_version", "meta",
//                "tensors": [{"name", "rows", "cols", "offset"}, ...]}
//   then         payload: for each tensor, rows*cols float64 values,
//                row-major, little-endian, at its stated offset
//   last 8 bytes uint64 FNV-1a checksum of everything before it
inline constexpr int kFormatVersion = 1;
inline constexpr char kMagic[9] = "MGCK0001";

struct TensorEntry {
  std::string name;
  Eigen::MatrixXd value;
};

struct Checkpoint {
  nlohmann::json meta;
  std::vector<TensorEntry> tensors;

  const Eigen::MatrixXd& tensor(const std::string& name) const;
  bool has(const std::string& name) const;
};

void save(const std::filesystem::path& path, const nlohmann::json& meta,
          const std::vector<TensorEntry>& tensors);

// Throws MissingCheckpoint when the file does not exist and IoFailure when
// the contents fail validation (bad magic, checksum mismatch, truncation).
Checkpoint load(const std::filesystem::path& path);

// Convenience bridges to Parameter groups.
std::vector<TensorEntry> snapshot(std::span<diff::Parameter* const> params);
void restore(const Checkpoint& c, std::span<diff::Parameter*> params);

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

}  // namespace mapgate::ckpt
