#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "protovae/numgrad/tensor.hpp"

namespace protovae::dataio {

/// Images as flat pixel rows in [0,1] with integer labels in [0, num_classes).
struct RawDataset {
    numgrad::Tensor images;  // n x D
    std::vector<std::int32_t> labels;
    std::size_t num_classes = 0;
    std::vector<std::string> class_names;  // empty or num_classes entries
    std::string provenance;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return images.cols(); }

    /// Throws DomainError/ShapeError when an invariant is broken.
    void validate() const;

    bool operator==(const RawDataset&) const = default;
};

/// Rows picked by index, in order. Labels and metadata follow.
RawDataset subset(const RawDataset& data, std::span<const std::size_t> indices);

/// Number of images per label.
std::vector<std::size_t> class_counts(const RawDataset& data);

bool is_binary(const RawDataset& data);

// --- loaders ---------------------------------------------------------------

/// MNIST-style IDX pair: images magic 0x00000803 (n, rows, cols), labels magic
/// 0x00000801 (n). Pixels are bytes scaled by 1/255.
RawDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// CIFAR-10 binary batches: 3073-byte records of one label byte then 3072
/// channel-planar pixel bytes.
RawDataset load_cifar_binary(std::span<const std::filesystem::path> batches);

// --- internal cache format --------------------------------------------------
//
//   "PVDSET\0\1"              8-byte magic (last byte is the format version)
//   u64 n, u64 D, u64 C       little-endian
//   string provenance         u32 length + bytes
//   u32 name count, strings   class names
//   n*D f64                   pixels, row-major, little-endian IEEE-754
//   n   i32                   labels

void write_cache(const RawDataset& data, const std::filesystem::path& path);
RawDataset read_cache(const std::filesystem::path& path);

// --- transforms --------------------------------------------------------------

enum class BinarizeMode { threshold, stochastic };

struct Binarization {
    BinarizeMode mode = BinarizeMode::threshold;
    double threshold = 0.5;  // pixel := 1 iff value >= threshold
    std::uint64_t seed = 0;  // stochastic mode only
};

RawDataset binarize(const RawDataset& data, const Binarization& how);

struct Split {
    RawDataset train;
    RawDataset test;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

/// Disjoint seed-deterministic train/test subsample. Stratified mode gives
/// every class floor(n/C) rows, with the remainder going to the lowest class
/// ids; it fails if a class is too small for its quota.
Split subsample_split(const RawDataset& data, std::size_t train_size, std::size_t test_size, std::uint64_t seed,
                      bool stratified);

// --- synthetic ground truth ---------------------------------------------------

struct SyntheticSpec {
    std::size_t num_classes = 0;
    numgrad::Tensor templates;  // num_classes x D, binary
    double flip_rate = 0.0;     // in [0, 0.5)
    std::size_t samples_per_class = 0;
    std::uint64_t seed = 0;

    /// Random binary templates with the given pixel density.
    static SyntheticSpec random(std::size_t num_classes, std::size_t dim, double flip_rate,
                                std::size_t samples_per_class, std::uint64_t seed, double density = 0.5);
};

struct SyntheticDataset {
    RawDataset data;
    numgrad::Tensor templates;
};

/// Each image is its class template with every pixel flipped independently
/// with probability flip_rate. Rows are grouped by class.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace protovae::dataio
