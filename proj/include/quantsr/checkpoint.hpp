#pragma once

// Checkpoint / artifact container.
//
//   8 bytes   magic "QSRCKPT\0"
//   u32       format version
//   str       JSON metadata
//   u32       tensor count, then per tensor: str name, u8 rank, u32 dims[rank], f32 data
//   u32       blob count,   then per blob:   str name, u32 size, bytes
//   u32       CRC-32 (zlib) of everything above

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "quantsr/binary_io.hpp"
#include "quantsr/tensor.hpp"

namespace qsr {

inline constexpr char kContainerMagic[8] = {'Q', 'S', 'R', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kContainerVersion = 1;

struct Container {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::vector<std::uint8_t>> blobs;

  const Tensor& tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("container: missing tensor '" + name + "'");
    return it->second;
  }
  const std::vector<std::uint8_t>& blob(const std::string& name) const {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw FormatError("container: missing blob '" + name + "'");
    return it->second;
  }
};

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::vector<std::uint8_t> serialize_container(const Container& c) {
  ByteWriter w;
  w.bytes(kContainerMagic, sizeof kContainerMagic);
  w.u32(kContainerVersion);
  w.str(c.meta.dump());
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    w.str(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.data) w.f32(v);
  }
  w.u32(static_cast<std::uint32_t>(c.blobs.size()));
  for (const auto& [name, b] : c.blobs) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(b.size()));
    w.bytes(b.data(), b.size());
  }
  const std::uint32_t crc = crc32_of(w.buffer().data(), w.size());
  w.u32(crc);
  return w.take();
}

inline Container parse_container(const std::vector<std::uint8_t>& buf, const std::string& what = "container") {
  if (buf.size() < sizeof kContainerMagic + 4 || std::memcmp(buf.data(), kContainerMagic, sizeof kContainerMagic) != 0) {
    if (buf.size() >= sizeof kContainerMagic && std::memcmp(buf.data(), kContainerMagic, sizeof kContainerMagic) == 0) {
      throw FormatError(what + ": checksum mismatch (file truncated)");
    }
    throw FormatError(what + ": not a checkpoint file (bad magic)");
  }
  ByteReader hdr(buf.data() + sizeof kContainerMagic, 4);
  const std::uint32_t version = hdr.u32();
  if (version != kContainerVersion) {
    throw FormatError(what + ": unsupported format version " + std::to_string(version) + " (expected " +
                      std::to_string(kContainerVersion) + ")");
  }
  if (buf.size() < sizeof kContainerMagic + 8) throw FormatError(what + ": checksum mismatch (file truncated)");
  const std::size_t body = buf.size() - 4;
  ByteReader tail(buf.data() + body, 4);
  if (tail.u32() != crc32_of(buf.data(), body)) throw FormatError(what + ": checksum mismatch (corrupt or truncated)");

  ByteReader r(buf.data(), body);
  r.bytes(sizeof kContainerMagic);
  r.u32();
  Container c;
  try {
    c.meta = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": bad metadata: " + e.what());
  }
  const std::uint32_t nt = r.u32();
  for (std::uint32_t i = 0; i < nt; ++i) {
    std::string name = r.str();
    const int rank = r.u8();
    Shape shape(static_cast<std::size_t>(rank));
    for (auto& d : shape) d = static_cast<int>(r.u32());
    Tensor t(shape);
    for (auto& v : t.data) v = r.f32();
    c.tensors.emplace(std::move(name), std::move(t));
  }
  const std::uint32_t nb = r.u32();
  for (std::uint32_t i = 0; i < nb; ++i) {
    std::string name = r.str();
    const std::uint32_t n = r.u32();
    const auto* p = r.bytes(n);
    c.blobs.emplace(std::move(name), std::vector<std::uint8_t>(p, p + n));
  }
  if (r.remaining() != 0) throw FormatError(what + ": trailing bytes after blobs");
  return c;
}

inline void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void save_container(const Container& c, const std::string& path) { write_file_atomic(path, serialize_container(c)); }

inline Container load_container(const std::string& path) { return parse_container(read_file_bytes(path), path); }

}  // namespace qsr
