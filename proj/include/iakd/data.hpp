#pragma once

#include "iakd/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace iakd {

enum class Split { train, test };

struct Dataset {
    Tensor features; // N x D
    std::vector<int> labels;
    std::size_t num_classes = 0;
    Split split = Split::train;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }
};

struct Batch {
    Tensor x;
    std::vector<int> y;
};

/// Isotropic Gaussian classes. Each class owns `modes_per_class` centres drawn
/// uniformly on the unit sphere in R^D; samples add N(0, spread^2 I) noise to a
/// uniformly chosen centre of their class. The first 80% of each class's draws
/// form the training split.
std::pair<Dataset, Dataset> make_gaussian_mixture(std::size_t classes, std::size_t dims, std::size_t n_per_class,
                                                  double spread, std::uint64_t seed,
                                                  std::size_t modes_per_class = 1);

/// C interleaved 2-D spiral arms with Gaussian noise, split 80/20 per class.
std::pair<Dataset, Dataset> make_spirals(std::size_t classes, std::size_t n_per_class, double noise,
                                         std::uint64_t seed);

/// Epoch-seeded shuffle, drop-last batching. Throws InvalidBatchError for batch_size < 2.
std::vector<Batch> batches(const Dataset& data, std::size_t batch_size, std::uint64_t epoch_seed);
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed);

/// Sequential, unshuffled chunks covering every sample; a trailing chunk of one
/// sample is folded into the previous chunk so batch-norm always sees >= 2 rows.
std::vector<Batch> eval_batches(const Dataset& data, std::size_t batch_size);

// Dump/load through the checkpoint container ("features", "labels", "num_classes").
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path, Split split);

} // namespace iakd
