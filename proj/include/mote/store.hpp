#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mote/common.hpp"
#include "mote/types.hpp"

namespace mote {

struct IoFailure : Error {
  explicit IoFailure(const std::string& msg) : Error("IoFailure", msg) {}
};

struct MagicMismatch : Error {
  MagicMismatch(const std::string& path, std::uint64_t off)
      : Error("MagicMismatch", path + ": bad magic at byte offset " + std::to_string(off)),
        offset(off) {}
  std::uint64_t offset;
};

struct TruncatedFile : Error {
  TruncatedFile(const std::string& path, std::uint64_t off)
      : Error("TruncatedFile",
              path + ": unexpected end of file at byte offset " + std::to_string(off)),
        offset(off) {}
  std::uint64_t offset;
};

struct NonFiniteValue : Error {
  NonFiniteValue(const std::string& path, std::uint64_t off)
      : Error("NonFiniteValue",
              path + ": non-finite value at byte offset " + std::to_string(off)),
        offset(off) {}
  std::uint64_t offset;
};

struct FormatVersionError : Error {
  explicit FormatVersionError(const std::string& msg) : Error("FormatVersionError", msg) {}
};

struct AlreadyEnrolled : Error {
  explicit AlreadyEnrolled(const IdentityId& id)
      : Error("AlreadyEnrolled", "identity " + id + " is already enrolled") {}
};

namespace detail {

// All on-disk integers and floats are little-endian.
inline void put_u16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v & 0xff));
  b.push_back(static_cast<unsigned char>(v >> 8));
}

inline void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::vector<unsigned char>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<unsigned char>& b, float v) {
  put_u32(b, std::bit_cast<std::uint32_t>(v));
}

/// Sequential reader over an in-memory file image that reports the byte
/// offset of whatever it failed to read.
class Cursor {
 public:
  Cursor(const std::string& path, std::span<const unsigned char> bytes)
      : path_(path), bytes_(bytes) {}

  std::uint64_t offset() const { return off_; }

  void need(std::size_t n) const {
    if (off_ + n > bytes_.size()) throw TruncatedFile(path_, off_);
  }

  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[off_] | (bytes_[off_ + 1] << 8));
    off_ += 2;
    return v;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[off_ + static_cast<std::size_t>(i)];
    off_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | bytes_[off_ + static_cast<std::size_t>(i)];
    off_ += 8;
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + off_), n);
    off_ += n;
    return s;
  }

  void expect_magic(const char magic[4]) {
    std::uint64_t at = off_;
    need(4);
    if (std::memcmp(bytes_.data() + off_, magic, 4) != 0) throw MagicMismatch(path_, at);
    off_ += 4;
  }

  void done() const {
    if (off_ != bytes_.size()) throw TruncatedFile(path_, bytes_.size());
  }

 private:
  const std::string& path_;
  std::span<const unsigned char> bytes_;
  std::uint64_t off_ = 0;
};

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  auto size = in.tellg();
  if (size < 0) throw IoFailure("cannot stat " + path.string());
  in.seekg(0, std::ios::beg);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
  if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw IoFailure("short read on " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoFailure("short write on " + path.string());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Embedding file: "EMB1" | u16 version=1 | u32 dim | u64 count | count*dim f32
// ---------------------------------------------------------------------------

struct EmbeddingFile {
  std::uint32_t dim = 0;
  std::vector<Embedding> embeddings;
};

inline std::uint64_t save_embedding_file(const std::filesystem::path& path, std::uint32_t dim,
                                         std::span<const Embedding> embeddings) {
  std::vector<unsigned char> buf;
  buf.reserve(18 + embeddings.size() * dim * 4);
  buf.insert(buf.end(), {'E', 'M', 'B', '1'});
  detail::put_u16(buf, 1);
  detail::put_u32(buf, dim);
  detail::put_u64(buf, embeddings.size());
  for (const auto& e : embeddings) {
    if (e.size() != dim) throw IoFailure("embedding length does not match declared dim");
    for (float v : e) detail::put_f32(buf, v);
  }
  detail::write_file(path, buf);
  return buf.size();
}

inline EmbeddingFile load_embedding_file(const std::filesystem::path& path) {
  auto bytes = detail::read_file(path);
  std::string name = path.string();
  detail::Cursor cur(name, bytes);
  cur.expect_magic("EMB1");
  std::uint16_t version = cur.u16();
  if (version != 1) {
    throw FormatVersionError(name + ": unsupported embedding file version " +
                             std::to_string(version));
  }
  EmbeddingFile out;
  out.dim = cur.u32();
  std::uint64_t count = cur.u64();
  out.embeddings.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Embedding e(out.dim);
    for (std::uint32_t k = 0; k < out.dim; ++k) {
      std::uint64_t at = cur.offset();
      float v = cur.f32();
      if (!std::isfinite(v)) throw NonFiniteValue(name, at);
      e[k] = v;
    }
    out.embeddings.push_back(std::move(e));
  }
  cur.done();
  return out;
}

// ---------------------------------------------------------------------------
// Model-template file: "MOTE" | u16 version=1 | u16 idlen + id | 4x u32 dims |
// f32 balancing_factor | u16 digestlen + digest | weights f32
// ---------------------------------------------------------------------------

inline constexpr std::array<std::uint32_t, 4> kTemplateLayerDims{512, 128, 64, 1};

inline std::uint64_t save_model_template(const ModelTemplate& t,
                                         const std::filesystem::path& path) {
  t.validate();
  if (t.layer_dims != kTemplateLayerDims) {
    throw InvalidTemplate("unsupported layer dims for the v1 template format");
  }
  std::vector<unsigned char> buf;
  buf.reserve(64 + t.weights.size() * 4);
  buf.insert(buf.end(), {'M', 'O', 'T', 'E'});
  detail::put_u16(buf, 1);
  detail::put_u16(buf, static_cast<std::uint16_t>(t.identity.size()));
  buf.insert(buf.end(), t.identity.begin(), t.identity.end());
  for (std::uint32_t d : t.layer_dims) detail::put_u32(buf, d);
  detail::put_f32(buf, t.balancing_factor);
  detail::put_u16(buf, static_cast<std::uint16_t>(t.train_config_digest.size()));
  buf.insert(buf.end(), t.train_config_digest.begin(), t.train_config_digest.end());
  for (float w : t.weights) detail::put_f32(buf, w);
  detail::write_file(path, buf);
  return buf.size();
}

inline ModelTemplate load_model_template(const std::filesystem::path& path) {
  auto bytes = detail::read_file(path);
  std::string name = path.string();
  detail::Cursor cur(name, bytes);
  cur.expect_magic("MOTE");
  std::uint16_t version = cur.u16();
  if (version != 1) {
    throw FormatVersionError(name + ": unsupported template version " +
                             std::to_string(version));
  }
  ModelTemplate t;
  t.identity = cur.bytes(cur.u16());
  for (auto& d : t.layer_dims) d = cur.u32();
  if (t.layer_dims != kTemplateLayerDims) {
    throw FormatVersionError(name + ": unsupported layer dims in template header");
  }
  t.balancing_factor = cur.f32();
  t.train_config_digest = cur.bytes(cur.u16());
  std::size_t count = t.expected_weight_count();
  t.weights.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t at = cur.offset();
    float v = cur.f32();
    if (!std::isfinite(v)) throw NonFiniteValue(name, at);
    t.weights[i] = v;
  }
  cur.done();
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// Manifest JSON
// ---------------------------------------------------------------------------

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : m.rows) {
    rows.push_back({{"row", r.row},
                    {"identity", r.identity},
                    {"attribute", to_string(r.attribute)},
                    {"split", to_string(r.split)}});
  }
  return {{"dim", m.dim}, {"normalized", m.normalized}, {"rows", rows}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.dim = j.at("dim").get<std::uint32_t>();
    m.normalized = j.at("normalized").get<bool>();
    for (const auto& r : j.at("rows")) {
      ManifestRow row;
      row.row = r.at("row").get<std::uint64_t>();
      row.identity = r.at("identity").get<std::string>();
      row.attribute = attribute_from_string(r.at("attribute").get<std::string>());
      row.split = split_from_string(r.at("split").get<std::string>());
      m.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(std::string("malformed manifest JSON: ") + e.what());
  }
  return m;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  auto text = manifest_to_json(m).dump(2);
  text.push_back('\n');
  detail::write_file(path, {reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  auto bytes = detail::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

// ---------------------------------------------------------------------------
// On-disk template store
// ---------------------------------------------------------------------------

/// Directory-backed store of model templates: <root>/templates/<id>.mote
/// plus an append-only JSON-lines enrollment log. Loaded templates are
/// immutable values; writes go through save() which is single-writer per
/// identity by construction (one file per identity).
class TemplateStore {
 public:
  explicit TemplateStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path template_path(const IdentityId& id) const {
    if (id.empty() || id.find('/') != std::string::npos ||
        id.find('\\') != std::string::npos || id.find("..") != std::string::npos) {
      throw IoFailure("identity token not usable as a file name: " + id);
    }
    return root_ / "templates" / (id + ".mote");
  }

  std::filesystem::path log_path() const { return root_ / "enrollment_log.jsonl"; }

  bool exists(const IdentityId& id) const {
    return std::filesystem::exists(template_path(id));
  }

  std::uint64_t save(const ModelTemplate& t, bool overwrite = false) {
    if (!overwrite && exists(t.identity)) throw AlreadyEnrolled(t.identity);
    return save_model_template(t, template_path(t.identity));
  }

  ModelTemplate load(const IdentityId& id) const {
    return load_model_template(template_path(id));
  }

  std::vector<IdentityId> list() const {
    std::vector<IdentityId> ids;
    auto dir = root_ / "templates";
    if (!std::filesystem::exists(dir)) return ids;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() == ".mote") ids.push_back(entry.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  void append_log_line(const std::string& line) {
    std::filesystem::create_directories(root_);
    std::ofstream out(log_path(), std::ios::app);
    if (!out) throw IoFailure("cannot open enrollment log for append");
    out << line << '\n';
  }

 private:
  std::filesystem::path root_;
};

}  // namespace mote
