#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tfdm/errors.hpp"
#include "tfdm/network.hpp"
#include "tfdm/optim.hpp"

namespace tfdm {

// Checkpoint container:
//   "TFDM" | u32 version | u64 config digest | i64 epoch | i64 step
//   | u8 optimizer kind | f64 lr | f64 momentum
//   | u32 config json length | bytes
//   | u32 tensor count | tensors
//   | u64 checksum (over everything before it)
// Tensor record: u32 name length | name | u8 dtype (0 = f32, 1 = f64)
//   | u64 element count | raw little-endian data.
// Loading verifies, in order: magic, version, checksum, config digest, and
// the presence/shape of every expected tensor; each failure mode has its
// own diagnostic.

constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  OptKind opt = OptKind::kRmsProp;
  double lr = 0.0;
  double momentum = 0.9;
  std::string config_json;
};

namespace ckpt_detail {

struct Writer {
  std::vector<unsigned char> buf;
  void u8(std::uint8_t v) { buf.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    __builtin_memcpy(&bits, &v, 8);
    u64(bits);
  }
  void bytes(const void* p, size_t n) {
    const unsigned char* c = static_cast<const unsigned char*>(p);
    buf.insert(buf.end(), c, c + n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
};

struct Reader {
  const std::vector<unsigned char>& buf;
  size_t at = 0;
  explicit Reader(const std::vector<unsigned char>& b) : buf(b) {}
  void need(size_t n) const {
    if (at + n > buf.size())
      throw CheckpointError("truncated: wanted " + std::to_string(n) + " bytes at offset " +
                            std::to_string(at) + ", file has " + std::to_string(buf.size()));
  }
  std::uint8_t u8() {
    need(1);
    return buf[at++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[at++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[at++]) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    __builtin_memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf.data() + at), n);
    at += n;
    return s;
  }
};

std::uint64_t fnv1a(const unsigned char* p, size_t n);
void write_file(const std::string& path, const std::vector<unsigned char>& buf);
std::vector<unsigned char> read_whole_file(const std::string& path);

template <typename T>
constexpr std::uint8_t dtype_tag() {
  return sizeof(T) == 4 ? 0 : 1;
}

}  // namespace ckpt_detail

// Reads just the embedded network description out of a checkpoint (after
// validating magic, version and checksum), so a caller can build the right
// network before loading the tensors.
std::string peek_checkpoint_config(const std::string& path);

template <typename T>
void save_checkpoint(const std::string& path, Network<T>& net, Optimizer<T>* opt,
                     const CheckpointMeta& meta) {
  using namespace ckpt_detail;
  Writer w;
  w.bytes("TFDM", 4);
  w.u32(kCheckpointVersion);
  w.u64(config_digest(net.config()));
  w.u64(static_cast<std::uint64_t>(meta.epoch));
  w.u64(static_cast<std::uint64_t>(meta.step));
  w.u8(meta.opt == OptKind::kRmsProp ? 0 : 1);
  w.f64(meta.lr);
  w.f64(meta.momentum);
  w.str(config_to_json(net.config()));

  std::vector<ParamRef<T>> tensors = net.params();
  {
    std::vector<ParamRef<T>> st = net.state();
    tensors.insert(tensors.end(), st.begin(), st.end());
  }
  std::uint32_t count = static_cast<std::uint32_t>(tensors.size());
  std::uint32_t slot_count = 0;
  if (opt && !opt->slots().empty()) slot_count = static_cast<std::uint32_t>(opt->slots().size());
  w.u32(count + slot_count);
  auto tensor = [&](const std::string& name, const std::vector<T>& v) {
    w.str(name);
    w.u8(dtype_tag<T>());
    w.u64(v.size());
    w.bytes(v.data(), v.size() * sizeof(T));
  };
  for (const auto& t : tensors) tensor(t.name, *t.value);
  for (std::uint32_t i = 0; i < slot_count; ++i)
    tensor("opt/slot" + std::to_string(i), opt->slots()[i]);

  w.u64(fnv1a(w.buf.data(), w.buf.size()));
  write_file(path, w.buf);
}

template <typename T>
CheckpointMeta load_checkpoint(const std::string& path, Network<T>& net, Optimizer<T>* opt) {
  using namespace ckpt_detail;
  std::vector<unsigned char> buf = read_whole_file(path);
  if (buf.size() < 12) throw CheckpointError("truncated: file smaller than any valid header");
  if (!(buf[0] == 'T' && buf[1] == 'F' && buf[2] == 'D' && buf[3] == 'M'))
    throw CheckpointError("bad magic: not a model checkpoint");
  Reader header(buf);
  header.at = 4;
  std::uint32_t version = header.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError("version mismatch: file has " + std::to_string(version) +
                          ", this build reads " + std::to_string(kCheckpointVersion));
  if (buf.size() < 8 + 12)
    throw CheckpointError("truncated: no room for a checksum");
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<std::uint64_t>(buf[buf.size() - 8 + i]) << (8 * i);
  std::uint64_t actual = fnv1a(buf.data(), buf.size() - 8);
  if (stored != actual)
    throw CheckpointError("checksum mismatch: file is corrupt (stored " +
                          std::to_string(stored) + ", computed " + std::to_string(actual) + ")");

  Reader r(buf);
  r.at = 8;  // past magic + version
  std::uint64_t digest = r.u64();
  CheckpointMeta meta;
  meta.epoch = static_cast<std::int64_t>(r.u64());
  meta.step = static_cast<std::int64_t>(r.u64());
  meta.opt = r.u8() == 0 ? OptKind::kRmsProp : OptKind::kSgd;
  meta.lr = r.f64();
  meta.momentum = r.f64();
  meta.config_json = r.str();
  if (digest != config_digest(net.config()))
    throw CheckpointError("config mismatch: checkpoint was written for a different network (" +
                          std::to_string(digest) + " vs " +
                          std::to_string(config_digest(net.config())) + ")");

  std::uint32_t count = r.u32();
  std::vector<ParamRef<T>> tensors = net.params();
  {
    std::vector<ParamRef<T>> st = net.state();
    tensors.insert(tensors.end(), st.begin(), st.end());
  }
  std::vector<bool> seen(tensors.size(), false);
  std::vector<std::vector<T>> slots;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    std::uint8_t dtype = r.u8();
    std::uint64_t n = r.u64();
    if (dtype != dtype_tag<T>())
      throw CheckpointError("config mismatch: tensor " + name +
                            " has a different floating-point width");
    r.need(n * sizeof(T));
    const T* data = reinterpret_cast<const T*>(buf.data() + r.at);
    r.at += n * sizeof(T);
    if (name.rfind("opt/slot", 0) == 0) {
      slots.emplace_back(data, data + n);
      continue;
    }
    bool matched = false;
    for (size_t t = 0; t < tensors.size(); ++t) {
      if (tensors[t].name != name) continue;
      if (tensors[t].value->size() != n)
        throw CheckpointError("config mismatch: tensor " + name + " has " + std::to_string(n) +
                              " elements, network expects " +
                              std::to_string(tensors[t].value->size()));
      std::copy(data, data + n, tensors[t].value->begin());
      seen[t] = true;
      matched = true;
      break;
    }
    if (!matched)
      throw CheckpointError("config mismatch: checkpoint tensor " + name +
                            " has no place in this network");
  }
  for (size_t t = 0; t < tensors.size(); ++t)
    if (!seen[t])
      throw CheckpointError("config mismatch: tensor " + tensors[t].name +
                            " missing from checkpoint");
  if (opt && !slots.empty()) opt->slots() = std::move(slots);
  return meta;
}

}  // namespace tfdm
