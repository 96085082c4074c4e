#include "tfdm/checkpoint.hpp"

#include <fstream>

namespace tfdm {
namespace ckpt_detail {

std::uint64_t fnv1a(const unsigned char* p, size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

void write_file(const std::string& path, const std::vector<unsigned char>& buf) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw CheckpointError("short write to " + path);
}

std::vector<unsigned char> read_whole_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open " + path);
  f.seekg(0, std::ios::end);
  std::streamoff len = f.tellg();
  f.seekg(0, std::ios::beg);
  std::vector<unsigned char> buf(static_cast<size_t>(len));
  if (len > 0) f.read(reinterpret_cast<char*>(buf.data()), len);
  if (!f) throw CheckpointError("short read on " + path);
  return buf;
}

}  // namespace ckpt_detail

std::string peek_checkpoint_config(const std::string& path) {
  using namespace ckpt_detail;
  std::vector<unsigned char> buf = read_whole_file(path);
  if (buf.size() < 12) throw CheckpointError("truncated: file smaller than any valid header");
  if (!(buf[0] == 'T' && buf[1] == 'F' && buf[2] == 'D' && buf[3] == 'M'))
    throw CheckpointError("bad magic: not a model checkpoint");
  Reader r(buf);
  r.at = 4;
  std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError("version mismatch: file has " + std::to_string(version) +
                          ", this build reads " + std::to_string(kCheckpointVersion));
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<std::uint64_t>(buf[buf.size() - 8 + i]) << (8 * i);
  std::uint64_t actual = fnv1a(buf.data(), buf.size() - 8);
  if (stored != actual)
    throw CheckpointError("checksum mismatch: file is corrupt (stored " + std::to_string(stored) +
                          ", computed " + std::to_string(actual) + ")");
  r.at = 8 + 8 + 8 + 8 + 1 + 8 + 8;  // digest, epoch, step, opt, lr, momentum
  return r.str();
}

}  // namespace tfdm
