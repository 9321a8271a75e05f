// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/gjsa/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/hash.hpp"
#include "earthmapper/common/image.hpp"

namespace emap::gjsa {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'E', 'M', 'A', 'P'};

template <class U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  std::uint8_t buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.insert(out.end(), buf, buf + sizeof(U));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  template <class U>
  U read() {
    U v;
    std::memcpy(&v, take(sizeof(U)).data(), sizeof(U));
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw IntegrityError("checkpoint truncated");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> digest(std::span<const std::uint8_t> bytes) {
  const auto hex = sha256_hex(bytes);
  std::vector<std::uint8_t> raw(32);
  for (int i = 0; i < 32; ++i) raw[i] = static_cast<std::uint8_t>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
  return raw;
}

std::size_t width_of(DType t) { return t == DType::f32 ? 4 : 8; }

}  // namespace

Blob& Archive::slot(const std::string& name) {
  if (contains(name)) throw ConfigError("archive: duplicate blob '" + name + "'");
  return blobs_.emplace_back(Blob{name, DType::f32, {}, {}});
}

void Archive::put(const std::string& name, const num::Tensor<float>& t) {
  auto& b = slot(name);
  b.dtype = DType::f32;
  b.shape = t.shape;
  b.bytes.resize(t.data.size() * 4);
  std::memcpy(b.bytes.data(), t.data.data(), b.bytes.size());
}

void Archive::put(const std::string& name, const num::Tensor<double>& t) {
  auto& b = slot(name);
  b.dtype = DType::f64;
  b.shape = t.shape;
  b.bytes.resize(t.data.size() * 8);
  std::memcpy(b.bytes.data(), t.data.data(), b.bytes.size());
}

void Archive::put_i64(const std::string& name, const std::vector<std::int64_t>& values) {
  auto& b = slot(name);
  b.dtype = DType::i64;
  b.shape = {static_cast<std::int64_t>(values.size())};
  b.bytes.resize(values.size() * 8);
  std::memcpy(b.bytes.data(), values.data(), b.bytes.size());
}

bool Archive::contains(const std::string& name) const {
  return std::any_of(blobs_.begin(), blobs_.end(), [&](const Blob& b) { return b.name == name; });
}

const Blob& Archive::blob(const std::string& name) const {
  for (const auto& b : blobs_) {
    if (b.name == name) return b;
  }
  throw IntegrityError("checkpoint has no entry '" + name + "'", {name});
}

template <class T>
num::Tensor<T> Archive::get(const std::string& name) const {
  const auto& b = blob(name);
  num::Tensor<T> t(b.shape);
  if (b.dtype == DType::f32) {
    std::vector<float> v(t.data.size());
    std::memcpy(v.data(), b.bytes.data(), b.bytes.size());
    std::copy(v.begin(), v.end(), t.data.begin());
  } else if (b.dtype == DType::f64) {
    std::vector<double> v(t.data.size());
    std::memcpy(v.data(), b.bytes.data(), b.bytes.size());
    std::copy(v.begin(), v.end(), t.data.begin());
  } else {
    throw IntegrityError("checkpoint entry '" + name + "' is not floating point", {name});
  }
  return t;
}

template num::Tensor<float> Archive::get<float>(const std::string&) const;
template num::Tensor<double> Archive::get<double>(const std::string&) const;

std::vector<std::int64_t> Archive::get_i64(const std::string& name) const {
  const auto& b = blob(name);
  if (b.dtype != DType::i64) throw IntegrityError("checkpoint entry '" + name + "' is not integer", {name});
  std::vector<std::int64_t> v(b.bytes.size() / 8);
  std::memcpy(v.data(), b.bytes.data(), b.bytes.size());
  return v;
}

std::vector<std::uint8_t> Archive::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_le<std::uint32_t>(out, kArchiveVersion);
  const std::string text = meta.dump();
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(blobs_.size()));
  for (const auto& b : blobs_) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b.name.size()));
    out.insert(out.end(), b.name.begin(), b.name.end());
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(b.dtype));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b.shape.size()));
    for (auto d : b.shape) put_le<std::int64_t>(out, d);
    put_le<std::uint64_t>(out, b.bytes.size());
    out.insert(out.end(), b.bytes.begin(), b.bytes.end());
  }
  const auto sum = digest(out);
  out.insert(out.end(), sum.begin(), sum.end());
  return out;
}

Archive Archive::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 4 + 32 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw IntegrityError("not a checkpoint (bad magic)");
  }
  Reader r(bytes.subspan(4));
  const auto version = r.read<std::uint32_t>();
  if (version != kArchiveVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kArchiveVersion) + ")",
                       version, kArchiveVersion);
  }
  const auto body = bytes.first(bytes.size() - 32);
  if (!std::equal(bytes.end() - 32, bytes.end(), digest(body).begin())) {
    throw IntegrityError("checkpoint checksum mismatch (corrupt or truncated file)");
  }
  Reader in(body.subspan(8));
  Archive a;
  try {
    const auto n = in.read<std::uint64_t>();
    const auto text = in.take(n);
    a.meta = nlohmann::json::parse(text.begin(), text.end());
    const auto count = in.read<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
      Blob b;
      const auto name = in.take(in.read<std::uint32_t>());
      b.name.assign(name.begin(), name.end());
      const auto dt = in.read<std::uint8_t>();
      if (dt > 2) throw IntegrityError("checkpoint entry '" + b.name + "' has unknown dtype");
      b.dtype = static_cast<DType>(dt);
      const auto rank = in.read<std::uint32_t>();
      for (std::uint32_t d = 0; d < rank; ++d) b.shape.push_back(in.read<std::int64_t>());
      const auto len = in.read<std::uint64_t>();
      if (len != static_cast<std::uint64_t>(num::numel(b.shape)) * width_of(b.dtype)) {
        throw IntegrityError("checkpoint entry '" + b.name + "' size does not match its shape");
      }
      const auto data = in.take(len);
      b.bytes.assign(data.begin(), data.end());
      a.blobs_.push_back(std::move(b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint metadata: ") + e.what());
  }
  if (in.remaining() != 0) throw IntegrityError("checkpoint has trailing bytes");
  return a;
}

void Archive::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  write_file_atomic(path, bytes);
}

Archive Archive::load(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse(bytes);
  } catch (const VersionError&) {
    throw;
  } catch (const IntegrityError& e) {
    throw IntegrityError(path.string() + ": " + e.what(), {path.string()});
  }
}

}  // namespace emap::gjsa
