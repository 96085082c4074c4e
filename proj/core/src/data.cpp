#include "tfdm/data.hpp"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "tfdm/errors.hpp"

namespace tfdm {

namespace {

std::vector<unsigned char> read_raw(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path);
  f.seekg(0, std::ios::end);
  std::streamoff len = f.tellg();
  f.seekg(0, std::ios::beg);
  std::vector<unsigned char> buf(static_cast<size_t>(len));
  if (len > 0) f.read(reinterpret_cast<char*>(buf.data()), len);
  if (!f) throw DataError("short read on " + path);
  return buf;
}

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in, const std::string& path) {
  z_stream zs;
  std::memset(&zs, 0, sizeof(zs));
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw DataError("zlib init failed for " + path);
  std::vector<unsigned char> out;
  out.resize(in.size() * 4 + 1024);
  zs.next_in = const_cast<unsigned char*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  size_t written = 0;
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    if (written == out.size()) out.resize(out.size() * 2);
    zs.next_out = out.data() + written;
    zs.avail_out = static_cast<uInt>(out.size() - written);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw DataError("gzip data in " + path + " is corrupt (zlib rc " + std::to_string(rc) + ")");
    }
    written = zs.total_out;
  }
  inflateEnd(&zs);
  out.resize(written);
  return out;
}

std::uint32_t be32(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

std::string resolve(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path)) return path;
  if (fs::exists(path + ".gz")) return path + ".gz";
  throw DataError("missing file " + path + " (also tried .gz)");
}

// Shared post-processing: scale to [0,1], standardize with train statistics.
void standardize(DatasetPair& ds) {
  const int c = ds.train.images.c;
  ds.mean.assign(c, 0.0);
  ds.stddev.assign(c, 0.0);
  const std::int64_t n = ds.train.images.size() / c;
  for (std::int64_t i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) ds.mean[ch] += ds.train.images.v[i * c + ch];
  for (int ch = 0; ch < c; ++ch) ds.mean[ch] /= static_cast<double>(n);
  for (std::int64_t i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      double d = ds.train.images.v[i * c + ch] - ds.mean[ch];
      ds.stddev[ch] += d * d;
    }
  for (int ch = 0; ch < c; ++ch) {
    ds.stddev[ch] = std::sqrt(ds.stddev[ch] / static_cast<double>(n));
    if (ds.stddev[ch] < 1e-8) ds.stddev[ch] = 1.0;
  }
  auto apply = [&](Dataset& d) {
    const std::int64_t m = d.images.size() / c;
    for (std::int64_t i = 0; i < m; ++i)
      for (int ch = 0; ch < c; ++ch)
        d.images.v[i * c + ch] =
            static_cast<float>((d.images.v[i * c + ch] - ds.mean[ch]) / ds.stddev[ch]);
  };
  apply(ds.train);
  apply(ds.test);
}

}  // namespace

std::vector<unsigned char> read_file_maybe_gz(const std::string& path) {
  std::vector<unsigned char> raw = read_raw(path);
  if (raw.size() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b) return gunzip(raw, path);
  return raw;
}

Tensor4<float> load_idx_images(const std::string& path) {
  std::vector<unsigned char> buf = read_file_maybe_gz(resolve(path));
  if (buf.size() < 16) throw DataError(path + ": truncated image header");
  if (be32(buf.data()) != 0x00000803)
    throw DataError(path + ": bad image magic (expected 0x00000803)");
  const std::int64_t n = be32(buf.data() + 4);
  const std::int64_t h = be32(buf.data() + 8);
  const std::int64_t w = be32(buf.data() + 12);
  if (static_cast<std::int64_t>(buf.size()) != 16 + n * h * w)
    throw DataError(path + ": size mismatch, header promises " + std::to_string(n * h * w) +
                    " pixels");
  Tensor4<float> t(static_cast<int>(n), static_cast<int>(h), static_cast<int>(w), 1);
  for (std::int64_t i = 0; i < n * h * w; ++i)
    t.v[i] = static_cast<float>(buf[16 + i]) / 255.0f;
  return t;
}

std::vector<int> load_idx_labels(const std::string& path) {
  std::vector<unsigned char> buf = read_file_maybe_gz(resolve(path));
  if (buf.size() < 8) throw DataError(path + ": truncated label header");
  if (be32(buf.data()) != 0x00000801)
    throw DataError(path + ": bad label magic (expected 0x00000801)");
  const std::int64_t n = be32(buf.data() + 4);
  if (static_cast<std::int64_t>(buf.size()) != 8 + n)
    throw DataError(path + ": size mismatch for " + std::to_string(n) + " labels");
  std::vector<int> labels(n);
  for (std::int64_t i = 0; i < n; ++i) labels[i] = buf[8 + i];
  return labels;
}

DatasetPair load_mnist(const std::string& dir) {
  DatasetPair ds;
  ds.train.images = load_idx_images(dir + "/train-images-idx3-ubyte");
  ds.train.labels = load_idx_labels(dir + "/train-labels-idx1-ubyte");
  ds.test.images = load_idx_images(dir + "/t10k-images-idx3-ubyte");
  ds.test.labels = load_idx_labels(dir + "/t10k-labels-idx1-ubyte");
  ds.train.classes = ds.test.classes = 10;
  ds.train.name = "mnist-train";
  ds.test.name = "mnist-test";
  if (ds.train.images.b != static_cast<int>(ds.train.labels.size()))
    throw DataError("mnist train: image and label counts differ");
  if (ds.test.images.b != static_cast<int>(ds.test.labels.size()))
    throw DataError("mnist test: image and label counts differ");
  standardize(ds);
  return ds;
}

namespace {

void load_cifar_file(const std::string& path, Tensor4<float>* images, std::vector<int>* labels,
                     int offset) {
  std::vector<unsigned char> buf = read_file_maybe_gz(path);
  constexpr std::int64_t kRecord = 3073;  // label + 32*32*3 channel-planar
  if (buf.size() % kRecord != 0)
    throw DataError(path + ": size " + std::to_string(buf.size()) +
                    " is not a multiple of 3073-byte records");
  const std::int64_t n = static_cast<std::int64_t>(buf.size()) / kRecord;
  if (n != 10000)
    throw DataError(path + ": expected 10000 records, found " + std::to_string(n));
  for (std::int64_t r = 0; r < n; ++r) {
    const unsigned char* rec = buf.data() + r * kRecord;
    if (rec[0] > 9) throw DataError(path + ": label " + std::to_string(rec[0]) + " out of range");
    (*labels)[offset + r] = rec[0];
    for (int ch = 0; ch < 3; ++ch)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
          images->at(static_cast<int>(offset + r), y, x, ch) =
              static_cast<float>(rec[1 + (ch * 32 + y) * 32 + x]) / 255.0f;
  }
}

std::string cifar_path(const std::string& dir, const std::string& file) {
  namespace fs = std::filesystem;
  for (const std::string& p : {dir + "/" + file, dir + "/cifar-10-batches-bin/" + file}) {
    if (fs::exists(p) || fs::exists(p + ".gz")) return fs::exists(p) ? p : p + ".gz";
  }
  throw DataError("missing file " + file + " under " + dir);
}

}  // namespace

DatasetPair load_cifar10(const std::string& dir) {
  DatasetPair ds;
  ds.train.images = Tensor4<float>(50000, 32, 32, 3);
  ds.train.labels.assign(50000, 0);
  for (int i = 0; i < 5; ++i)
    load_cifar_file(cifar_path(dir, "data_batch_" + std::to_string(i + 1) + ".bin"),
                    &ds.train.images, &ds.train.labels, i * 10000);
  ds.test.images = Tensor4<float>(10000, 32, 32, 3);
  ds.test.labels.assign(10000, 0);
  load_cifar_file(cifar_path(dir, "test_batch.bin"), &ds.test.images, &ds.test.labels, 0);
  ds.train.classes = ds.test.classes = 10;
  ds.train.name = "cifar10-train";
  ds.test.name = "cifar10-test";
  standardize(ds);
  return ds;
}

DatasetPair synthetic_dataset(int train_n, int test_n, int h, int w, int c, int classes,
                              std::uint64_t seed) {
  auto make = [&](int n, std::uint64_t salt, const std::string& name) {
    Dataset d;
    d.images = Tensor4<float>(n, h, w, c);
    d.labels.assign(n, 0);
    d.classes = classes;
    d.name = name;
    Rng rng(mix_key(seed, salt));
    for (int i = 0; i < n; ++i) {
      int label = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(classes));
      d.labels[i] = label;
      // Class-keyed blob: a Gaussian bump whose center and sign depend on
      // the label, plus modest noise. Linearly separable enough to learn
      // quickly, spatial enough to exercise filters and pooling.
      double cy = (0.2 + 0.6 * ((label * 7) % classes) / std::max(1, classes - 1)) * h;
      double cx = (0.2 + 0.6 * ((label * 3) % classes) / std::max(1, classes - 1)) * w;
      double sign = (label % 2 == 0) ? 1.0 : -1.0;
      double sigma = 0.12 * std::max(h, w) + 1e-9;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          for (int ch = 0; ch < c; ++ch) {
            double dy = (y - cy) / sigma, dx = (x - cx) / sigma;
            double bump = sign * std::exp(-0.5 * (dy * dy + dx * dx));
            double phase = 0.25 * std::sin(2.0 * 3.14159265358979 * (ch + 1) * x / w +
                                           label);
            d.images.at(i, y, x, ch) =
                static_cast<float>(bump + phase + 0.1 * rng.normal(0.0, 1.0));
          }
    }
    return d;
  };
  DatasetPair ds;
  ds.train = make(train_n, 0xaaull, "synthetic-train");
  ds.test = make(test_n, 0xbbull, "synthetic-test");
  standardize(ds);
  return ds;
}

DatasetPair take_subset(DatasetPair ds, int train_n, int test_n) {
  auto cut = [](Dataset& d, int n) {
    if (n <= 0 || n >= d.images.b) return;
    Tensor4<float> img(n, d.images.h, d.images.w, d.images.c);
    std::copy_n(d.images.v.begin(), img.v.size(), img.v.begin());
    d.images = std::move(img);
    d.labels.resize(n);
  };
  cut(ds.train, train_n);
  cut(ds.test, test_n);
  return ds;
}

std::vector<std::vector<std::int64_t>> epoch_batches(std::int64_t n, int batch_size,
                                                     std::uint64_t seed, std::int64_t epoch,
                                                     bool drop_partial) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  std::vector<std::int64_t> order = shuffled_indices(n, seed, epoch);
  std::vector<std::vector<std::int64_t>> out;
  for (std::int64_t at = 0; at < n; at += batch_size) {
    std::int64_t take = std::min<std::int64_t>(batch_size, n - at);
    if (take < batch_size && drop_partial) break;
    out.emplace_back(order.begin() + at, order.begin() + at + take);
  }
  return out;
}

void gather_batch(const Dataset& ds, const std::vector<std::int64_t>& rows,
                  Tensor4<float>* images, std::vector<int>* labels) {
  const std::int64_t row_elems =
      static_cast<std::int64_t>(ds.images.h) * ds.images.w * ds.images.c;
  *images = Tensor4<float>(static_cast<int>(rows.size()), ds.images.h, ds.images.w, ds.images.c);
  labels->resize(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(ds.images.v.begin() + rows[i] * row_elems, row_elems,
                images->v.begin() + static_cast<std::int64_t>(i) * row_elems);
    (*labels)[i] = ds.labels[rows[i]];
  }
}

}  // namespace tfdm
