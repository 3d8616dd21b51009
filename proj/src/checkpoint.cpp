// SPDX-License-Identifier: Apache-2.0
#include "mapgate/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace mapgate::ckpt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001B3ULL;
  }
  return h;
}

namespace {

void append_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  unsigned char buf[4];
  std::memcpy(buf, &v, 4);
  out.insert(out.end(), buf, buf + 4);
}

void append_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  unsigned char buf[8];
  std::memcpy(buf, &v, 8);
  out.insert(out.end(), buf, buf + 8);
}

}  // namespace

const Eigen::MatrixXd& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw IoFailure("checkpoint has no tensor named " + name);
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

void save(const std::filesystem::path& path, const nlohmann::json& meta,
          const std::vector<TensorEntry>& tensors) {
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["meta"] = meta;
  header["tensors"] = nlohmann::json::array();

  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    header["tensors"].push_back({{"name", t.name},
                                 {"rows", t.value.rows()},
                                 {"cols", t.value.cols()},
                                 {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.value.size()) * sizeof(double);
  }
  const std::string header_str = header.dump();

  std::vector<unsigned char> bytes;
  bytes.reserve(12 + header_str.size() + offset + 8);
  bytes.insert(bytes.end(), kMagic, kMagic + 8);
  append_u32(bytes, static_cast<std::uint32_t>(header_str.size()));
  bytes.insert(bytes.end(), header_str.begin(), header_str.end());

  for (const auto& t : tensors) {
    for (long r = 0; r < t.value.rows(); ++r) {
      for (long c = 0; c < t.value.cols(); ++c) {
        const double v = t.value(r, c);
        unsigned char buf[8];
        std::memcpy(buf, &v, 8);
        bytes.insert(bytes.end(), buf, buf + 8);
      }
    }
  }

  append_u64(bytes, fnv1a64(std::span<const unsigned char>(bytes)));

  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoFailure("short write to " + path.string());
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingCheckpoint("checkpoint not found: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 20) throw IoFailure("checkpoint truncated: " + path.string());

  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  const auto body =
      std::span<const unsigned char>(bytes.data(), bytes.size() - 8);
  if (fnv1a64(body) != stored) {
    throw IoFailure("checkpoint checksum mismatch: " + path.string());
  }
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw IoFailure("bad checkpoint magic: " + path.string());
  }

  std::uint32_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 4);
  if (12 + header_len > bytes.size() - 8) {
    throw IoFailure("checkpoint header overruns file: " + path.string());
  }
  const nlohmann::json header = nlohmann::json::parse(
      bytes.begin() + 12, bytes.begin() + 12 + header_len);
  if (header.at("format_version").get<int>() != kFormatVersion) {
    throw IoFailure("unsupported checkpoint format version");
  }

  Checkpoint out;
  out.meta = header.at("meta");
  const unsigned char* payload = bytes.data() + 12 + header_len;
  const std::size_t payload_size = bytes.size() - 8 - 12 - header_len;
  for (const auto& t : header.at("tensors")) {
    TensorEntry e;
    e.name = t.at("name").get<std::string>();
    const long rows = t.at("rows").get<long>();
    const long cols = t.at("cols").get<long>();
    const std::uint64_t offset = t.at("offset").get<std::uint64_t>();
    const std::uint64_t nbytes =
        static_cast<std::uint64_t>(rows) * cols * sizeof(double);
    if (offset + nbytes > payload_size) {
      throw IoFailure("tensor payload overruns file: " + e.name);
    }
    e.value.resize(rows, cols);
    const unsigned char* src = payload + offset;
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) {
        double v = 0.0;
        std::memcpy(&v, src, 8);
        src += 8;
        e.value(r, c) = v;
      }
    }
    out.tensors.push_back(std::move(e));
  }
  return out;
}

std::vector<TensorEntry> snapshot(std::span<diff::Parameter* const> params) {
  std::vector<TensorEntry> out;
  out.reserve(params.size());
  for (const diff::Parameter* p : params) {
    out.push_back({p->name, p->value});
  }
  return out;
}

void restore(const Checkpoint& c, std::span<diff::Parameter*> params) {
  for (diff::Parameter* p : params) {
    const Eigen::MatrixXd& v = c.tensor(p->name);
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw ShapeMismatch("checkpoint tensor " + p->name + " has shape " +
                          std::to_string(v.rows()) + "x" +
                          std::to_string(v.cols()));
    }
    p->value = v;
    p->zero_grad();
  }
}

}  // namespace mapgate::ckpt
