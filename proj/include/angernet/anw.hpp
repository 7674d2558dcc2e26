// Copyright 2026 The AngerNet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/*!
 * \file anw.hpp
 * \brief The "ANW1" portable tensor container.
 *
 * Layout (all integers little-endian):
 *
 *   "ANW1" | u32 version (=1) | u32 tensor count
 *   per tensor: u16 name length | UTF-8 name | u8 rank | rank x u32 dims |
 *               prod(dims) x f32
 *   optional:   JSON metadata | u64 byte offset of the JSON
 *
 * A file without metadata ends right after the last tensor.
 */

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "angernet/error.hpp"

namespace angernet {

static_assert(std::endian::native == std::endian::little,
              "ANW1 encoding assumes a little-endian host");

inline constexpr std::uint32_t kAnwVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }

  std::string shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(dims[i]);
    }
    return s + "]";
  }
};

/// Ordered collection of uniquely named tensors.
class WeightStore {
 public:
  void add(NamedTensor tensor) {
    if (find(tensor.name)) throw FormatError("duplicate tensor name '" + tensor.name + "'");
    if (tensor.element_count() != tensor.data.size()) {
      throw FormatError("tensor '" + tensor.name + "' declares " + tensor.shape_string() +
                        " but holds " + std::to_string(tensor.data.size()) + " values");
    }
    tensors_.push_back(std::move(tensor));
  }

  const NamedTensor* find(std::string_view name) const {
    for (const auto& t : tensors_)
      if (t.name == name) return &t;
    return nullptr;
  }

  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }
  std::uint32_t version() const { return kAnwVersion; }

 private:
  std::vector<NamedTensor> tensors_;
};

struct AnwFile {
  WeightStore store;
  std::optional<nlohmann::json> metadata;
};

namespace detail {

class ByteWriter {
 public:
  template <typename U>
  void put(U value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(U));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::size_t size() const { return bytes_.size(); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::size_t end)
      : bytes_(bytes), end_(end) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return value;
  }
  void get_bytes(void* out, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (end_ - pos_ < n) {
      throw FormatError(std::string("ANW1 truncated while reading ") + what + " at byte " +
                        std::to_string(pos_) + " (need " + std::to_string(n) + ", have " +
                        std::to_string(end_ - pos_) + ")");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_anw(const WeightStore& store,
                                            const std::optional<nlohmann::json>& metadata = {}) {
  detail::ByteWriter w;
  w.put_bytes("ANW1", 4);
  w.put<std::uint32_t>(kAnwVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(store.size()));
  for (const auto& t : store.tensors()) {
    if (t.name.size() > 0xFFFF) throw FormatError("tensor name too long: " + t.name);
    if (t.dims.size() > 0xFF) throw FormatError("tensor rank too large: " + t.name);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.put_bytes(t.name.data(), t.name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.put<std::uint32_t>(d);
    w.put_bytes(t.data.data(), t.data.size() * sizeof(float));
  }
  if (metadata) {
    const std::uint64_t offset = w.size();
    const std::string text = metadata->dump();
    w.put_bytes(text.data(), text.size());
    w.put<std::uint64_t>(offset);
  }
  return w.take();
}

inline AnwFile decode_anw(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, bytes.size());
  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, "ANW1", 4) != 0) throw FormatError("not an ANW1 file (bad magic)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kAnwVersion) {
    throw FormatError("unsupported ANW1 version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("tensor count");

  // The tensor section ends where metadata begins; resolved after parsing.
  AnwFile file;
  for (std::uint32_t n = 0; n < count; ++n) {
    NamedTensor t;
    const auto name_len = r.get<std::uint16_t>("name length");
    t.name.resize(name_len);
    r.get_bytes(t.name.data(), name_len, "tensor name");
    const auto rank = r.get<std::uint8_t>("rank");
    t.dims.resize(rank);
    for (auto& d : t.dims) d = r.get<std::uint32_t>("dims");
    t.data.resize(t.element_count());
    r.get_bytes(t.data.data(), t.data.size() * sizeof(float), "tensor data");
    file.store.add(std::move(t));
  }
  const std::size_t tensors_end = r.position();
  if (tensors_end == bytes.size()) return file;

  if (bytes.size() - tensors_end < sizeof(std::uint64_t)) {
    throw FormatError("ANW1 has " + std::to_string(bytes.size() - tensors_end) +
                      " trailing bytes, too few for a metadata trailer");
  }
  std::uint64_t offset;
  std::memcpy(&offset, bytes.data() + bytes.size() - sizeof(offset), sizeof(offset));
  if (offset != tensors_end) {
    throw FormatError("ANW1 metadata offset " + std::to_string(offset) +
                      " does not match end of tensor data at " + std::to_string(tensors_end) +
                      " (file truncated or corrupt)");
  }
  const auto* first = reinterpret_cast<const char*>(bytes.data() + tensors_end);
  const std::size_t len = bytes.size() - tensors_end - sizeof(offset);
  try {
    file.metadata = nlohmann::json::parse(first, first + len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ANW1 metadata is not valid JSON: ") + e.what());
  }
  return file;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline AnwFile read_anw_file(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return decode_anw(bytes);
}

inline void write_anw_file(const std::string& path, const WeightStore& store,
                           const std::optional<nlohmann::json>& metadata = {}) {
  write_file_bytes(path, encode_anw(store, metadata));
}

}  // namespace angernet
