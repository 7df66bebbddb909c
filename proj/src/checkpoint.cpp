/*
 * Copyright 2026 The insulscan Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "insul/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "insul/error.hpp"

namespace insul {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'S', 'L', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    const U u = std::bit_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  template <typename T>
  T get(const char* what) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    need(sizeof(U), what);
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return std::bit_cast<T>(u);
  }
  std::string get_string(const char* what) {
    const auto n = get<std::uint32_t>(what);
    need(n, what);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  void need(std::uint64_t n, const char* what) const {
    if (n > bytes_.size() - pos_) throw CorruptFileError(std::string("checkpoint truncated while reading ") + what, pos_);
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint make_checkpoint(const Model& model, const OptimizerState* optimizer) {
  Checkpoint c;
  c.descriptor = model.descriptor();
  for (const auto& p : model.named_parameters()) {
    const auto d = p.value.data();
    c.params.emplace_back(p.name, std::vector<float>(d.begin(), d.end()));
    c.shapes.push_back(p.value.shape());
  }
  if (optimizer) c.optimizer = *optimizer;
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kMagic), std::end(kMagic));
  w.put(kCheckpointVersion);
  w.put_string(ckpt.descriptor);
  w.put(static_cast<std::uint32_t>(ckpt.params.size()));
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    w.put_string(ckpt.params[i].first);
    w.put(static_cast<std::uint32_t>(ckpt.shapes[i].size()));
    for (auto d : ckpt.shapes[i]) w.put(static_cast<std::uint64_t>(d));
    for (float v : ckpt.params[i].second) w.put(v);
  }
  w.put(static_cast<std::uint8_t>(ckpt.optimizer ? 1 : 0));
  if (ckpt.optimizer) {
    const auto& o = *ckpt.optimizer;
    w.put(o.lr0);
    w.put(o.momentum);
    w.put(o.factor);
    w.put(o.lr);
    w.put(o.step);
    w.put(static_cast<std::uint32_t>(o.velocity.size()));
    for (const auto& v : o.velocity) {
      w.put(static_cast<std::uint64_t>(v.size()));
      for (double x : v) w.put(x);
    }
  }
  w.put(fnv1a(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(sizeof kMagic, "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw CorruptFileError("not a checkpoint (bad magic)", 0);
  for (std::size_t i = 0; i < sizeof kMagic; ++i) (void)r.get<std::uint8_t>("magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  Checkpoint c;
  c.descriptor = r.get_string("descriptor");
  const auto count = r.get<std::uint32_t>("parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.get_string("parameter name");
    const auto rank = r.get<std::uint32_t>("rank");
    r.need(std::uint64_t{rank} * 8, "dims");
    Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(r.get<std::uint64_t>("dims"));
      n *= d;
    }
    r.need(n * 4, "parameter values");
    std::vector<float> values(static_cast<std::size_t>(n));
    for (auto& v : values) v = r.get<float>("parameter values");
    c.params.emplace_back(std::move(name), std::move(values));
    c.shapes.push_back(std::move(shape));
  }
  const auto flag = r.get<std::uint8_t>("optimizer flag");
  if (flag > 1) throw CorruptFileError("bad optimizer flag", r.pos() - 1);
  if (flag == 1) {
    OptimizerState o;
    o.lr0 = r.get<double>("optimizer state");
    o.momentum = r.get<double>("optimizer state");
    o.factor = r.get<double>("optimizer state");
    o.lr = r.get<double>("optimizer state");
    o.step = r.get<std::uint64_t>("optimizer state");
    const auto nv = r.get<std::uint32_t>("velocity count");
    for (std::uint32_t i = 0; i < nv; ++i) {
      const auto len = r.get<std::uint64_t>("velocity length");
      r.need(len * 8, "velocity values");
      std::vector<double> v(static_cast<std::size_t>(len));
      for (auto& x : v) x = r.get<double>("velocity values");
      o.velocity.push_back(std::move(v));
    }
    c.optimizer = std::move(o);
  }
  const std::size_t body = r.pos();
  const auto stored = r.get<std::uint64_t>("checksum");
  if (stored != fnv1a(bytes.data(), body)) throw CorruptFileError("checkpoint checksum mismatch", body);
  if (r.pos() != bytes.size()) throw CorruptFileError("trailing bytes after checkpoint", r.pos());
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const OptimizerState* optimizer) {
  const auto bytes = encode_checkpoint(make_checkpoint(model, optimizer));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing checkpoint '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void load_parameters(Model& model, const Checkpoint& ckpt) {
  if (ckpt.descriptor != model.descriptor()) throw ArchitectureMismatch(model.descriptor(), ckpt.descriptor);
  const auto& named = model.named_parameters();
  if (named.size() != ckpt.params.size()) throw ArchitectureMismatch(model.descriptor(), ckpt.descriptor);
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (named[i].name != ckpt.params[i].first || named[i].value.shape() != ckpt.shapes[i])
      throw ArchitectureMismatch(model.descriptor() + " (" + named[i].name + " " + to_string(named[i].value.shape()) + ")",
                                 ckpt.descriptor + " (" + ckpt.params[i].first + " " + to_string(ckpt.shapes[i]) + ")");
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    Tensor t = named[i].value;
    auto dst = t.mutable_data();
    const auto& src = ckpt.params[i].second;
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = src[k];
  }
}

UNetLite load_unet(const std::filesystem::path& path) {
  const auto c = read_checkpoint(path);
  UNetLite m(parse_unet_descriptor(c.descriptor), InitSpec{InitScheme::zeros, 0.0, 0});
  load_parameters(m, c);
  return m;
}

VggLite load_vgg(const std::filesystem::path& path) {
  const auto c = read_checkpoint(path);
  VggLite m(parse_vgg_descriptor(c.descriptor), InitSpec{InitScheme::zeros, 0.0, 0});
  load_parameters(m, c);
  return m;
}

}  // namespace insul
