#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "protovae/dataio/dataset.hpp"
#include "protovae/numgrad/tensor.hpp"

namespace protovae::perturb {

/// p(c, i): fraction of class-c images whose pixel i is on.
struct CategoryPixelModel {
    numgrad::Tensor probs;  // C x D
};

CategoryPixelModel fit_pixel_model(const dataio::RawDataset& data);

/// Category-conditional pixel flips. Each datapoint of class c picks a noise
/// class c' != c uniformly; pixel i with value v flips with probability
/// min(1, eps * P_c'(pixel != v)). Datapoint r draws from its own stream
/// derive_seed(seed, r). When `noise_sources` is non-null it receives c' per row.
dataio::RawDataset smooth_noise(const dataio::RawDataset& data, const CategoryPixelModel& model, double eps,
                                std::uint64_t seed, std::vector<std::int32_t>* noise_sources = nullptr);

/// Flip probability used by smooth_noise for one pixel.
double flip_probability(double p_on, double value, double eps);

// --- human-judgment entropy ---------------------------------------------------

/// Aggregated annotator counts: header `image_id,<class>,...,<class>`, then one
/// row per image with non-negative counts.
struct ResponseCounts {
    std::vector<std::string> image_ids;
    std::vector<std::string> class_names;
    numgrad::Tensor counts;  // n x C
};

ResponseCounts parse_response_csv(std::istream& in);
ResponseCounts read_response_csv(const std::filesystem::path& path);

enum class EntropyGrouping { ground_truth, human_majority };

struct EntropyTable {
    numgrad::Tensor distributions;  // n x C, rows sum to 1
    std::vector<double> entropy;    // nats
    std::vector<std::int32_t> majority;  // argmax of counts, ties to the lower index
    std::vector<double> class_mean_entropy;
    std::vector<std::size_t> class_sizes;
};

/// With ground_truth grouping, `labels` must hold one label per image.
EntropyTable image_entropy(const numgrad::Tensor& counts, std::span<const std::int32_t> labels = {},
                           EntropyGrouping grouping = EntropyGrouping::ground_truth);

struct ClassRemoval {
    dataio::RawDataset data;
    std::vector<std::int32_t> removed;  // highest mean entropy first
    std::vector<std::int32_t> mapping;  // old label -> new label, -1 if removed
};

/// Drops the m classes with the highest mean entropy (ties remove the lower
/// class index first) and relabels the rest densely in their original order.
ClassRemoval remove_top_entropy_classes(const dataio::RawDataset& data, const EntropyTable& table, std::size_t m);

}  // namespace protovae::perturb
