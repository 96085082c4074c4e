#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tfdm/rng.hpp"
#include "tfdm/tensor.hpp"

namespace tfdm {

// An in-memory labeled image set, pixels already scaled to [0,1] and then
// standardized per channel with statistics taken from the training split.
struct Dataset {
  Tensor4<float> images;  // n x h x w x c
  std::vector<int> labels;
  int classes = 0;
  std::string name;

  std::int64_t size() const { return images.b; }
};

struct DatasetPair {
  Dataset train, test;
  // per-channel statistics of the training split, applied to both splits
  std::vector<double> mean, stddev;
};

// Reads a whole file; transparently inflates gzip (1f 8b magic).
std::vector<unsigned char> read_file_maybe_gz(const std::string& path);

// IDX image/label containers, plain or .gz (tries path, then path + ".gz").
// Big-endian headers, magic 0x00000803 for images and 0x00000801 for labels.
Tensor4<float> load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);

// MNIST directory layout: train-images-idx3-ubyte[.gz], train-labels-idx1-ubyte[.gz],
// t10k-images-idx3-ubyte[.gz], t10k-labels-idx1-ubyte[.gz].
DatasetPair load_mnist(const std::string& dir);

// CIFAR-10 binary layout: data_batch_{1..5}.bin and test_batch.bin, each
// 10000 records of 1 label byte + 3072 channel-planar RGB bytes. Also
// accepts the files nested under cifar-10-batches-bin/.
DatasetPair load_cifar10(const std::string& dir);

// Separable class-dependent blob patterns plus noise; exercises the full
// training stack when no real data is mounted.
DatasetPair synthetic_dataset(int train_n, int test_n, int h, int w, int c, int classes,
                              std::uint64_t seed);

// Takes the first n examples of each split (n <= 0 keeps everything).
DatasetPair take_subset(DatasetPair ds, int train_n, int test_n);

// Deterministic batch order for one epoch: a seeded shuffle of [0, n)
// chopped into batches. Training drops a trailing partial batch; evaluation
// keeps it.
std::vector<std::vector<std::int64_t>> epoch_batches(std::int64_t n, int batch_size,
                                                     std::uint64_t seed, std::int64_t epoch,
                                                     bool drop_partial);

// Gathers rows into a batch tensor + labels.
void gather_batch(const Dataset& ds, const std::vector<std::int64_t>& rows,
                  Tensor4<float>* images, std::vector<int>* labels);

}  // namespace tfdm
