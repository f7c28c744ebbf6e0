#include "protovae/dataio/dataset.hpp"

#include <algorithm>
#include <numeric>

#include "protovae/error.hpp"
#include "protovae/rng.hpp"

namespace protovae::dataio {

void RawDataset::validate() const {
    if (images.rank() != 2 && !(images.empty() && labels.empty())) {
        throw ShapeError("dataset images must be a 2-D tensor");
    }
    if (images.rows() != labels.size() && !labels.empty()) {
        throw ShapeError("dataset has " + std::to_string(images.rows()) + " images but " +
                         std::to_string(labels.size()) + " labels");
    }
    for (double v : images.values()) {
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("pixel value " + std::to_string(v) + " outside [0,1]");
    }
    for (std::int32_t l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
            throw DomainError("label " + std::to_string(l) + " outside [0," + std::to_string(num_classes) + ")");
        }
    }
    if (!class_names.empty() && class_names.size() != num_classes) {
        throw ShapeError("class name count does not match class count");
    }
}

RawDataset subset(const RawDataset& data, std::span<const std::size_t> indices) {
    RawDataset out;
    out.images = data.images.gather_rows(indices);
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) out.labels.push_back(data.labels.at(i));
    out.num_classes = data.num_classes;
    out.class_names = data.class_names;
    out.provenance = data.provenance;
    return out;
}

std::vector<std::size_t> class_counts(const RawDataset& data) {
    std::vector<std::size_t> counts(data.num_classes, 0);
    for (std::int32_t l : data.labels) ++counts.at(static_cast<std::size_t>(l));
    return counts;
}

bool is_binary(const RawDataset& data) {
    return std::all_of(data.images.values().begin(), data.images.values().end(),
                       [](double v) { return v == 0.0 || v == 1.0; });
}

RawDataset binarize(const RawDataset& data, const Binarization& how) {
    RawDataset out = data;
    if (how.mode == BinarizeMode::threshold) {
        for (double& v : out.images.values()) v = v >= how.threshold ? 1.0 : 0.0;
    } else {
        Rng rng(how.seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (double& v : out.images.values()) v = u(rng) < v ? 1.0 : 0.0;
    }
    return out;
}

Split subsample_split(const RawDataset& data, std::size_t train_size, std::size_t test_size, std::uint64_t seed,
                      bool stratified) {
    if (train_size + test_size > data.size()) {
        throw ContractError("split: requested " + std::to_string(train_size) + "+" + std::to_string(test_size) +
                            " rows from a dataset of " + std::to_string(data.size()));
    }
    Rng rng(seed);
    Split split;
    if (!stratified) {
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        split.train_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_size));
        split.test_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(train_size),
                                  order.begin() + static_cast<std::ptrdiff_t>(train_size + test_size));
    } else {
        const std::size_t classes = data.num_classes;
        if (classes == 0) throw ContractError("split: stratified mode needs classes");
        std::vector<std::vector<std::size_t>> by_class(classes);
        for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
        auto quota = [classes](std::size_t total, std::size_t c) {
            return total / classes + (c < total % classes ? 1 : 0);
        };
        for (std::size_t c = 0; c < classes; ++c) {
            const std::size_t q_train = quota(train_size, c), q_test = quota(test_size, c);
            if (by_class[c].size() < q_train + q_test) {
                throw ContractError("split: class " + std::to_string(c) + " has " +
                                    std::to_string(by_class[c].size()) + " rows, stratified quota needs " +
                                    std::to_string(q_train + q_test));
            }
            std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
            split.train_indices.insert(split.train_indices.end(), by_class[c].begin(),
                                       by_class[c].begin() + static_cast<std::ptrdiff_t>(q_train));
            split.test_indices.insert(split.test_indices.end(),
                                      by_class[c].begin() + static_cast<std::ptrdiff_t>(q_train),
                                      by_class[c].begin() + static_cast<std::ptrdiff_t>(q_train + q_test));
        }
        std::shuffle(split.train_indices.begin(), split.train_indices.end(), rng);
        std::shuffle(split.test_indices.begin(), split.test_indices.end(), rng);
    }
    split.train = subset(data, split.train_indices);
    split.test = subset(data, split.test_indices);
    return split;
}

SyntheticSpec SyntheticSpec::random(std::size_t num_classes, std::size_t dim, double flip_rate,
                                    std::size_t samples_per_class, std::uint64_t seed, double density) {
    SyntheticSpec spec;
    spec.num_classes = num_classes;
    spec.flip_rate = flip_rate;
    spec.samples_per_class = samples_per_class;
    spec.seed = seed;
    spec.templates = numgrad::Tensor({num_classes, dim});
    Rng rng(derive_seed(seed, seed_stream::synthetic));
    std::bernoulli_distribution on(density);
    for (double& v : spec.templates.values()) v = on(rng) ? 1.0 : 0.0;
    return spec;
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    if (!(spec.flip_rate >= 0.0 && spec.flip_rate < 0.5)) throw ContractError("synthetic: flip rate must be in [0, 0.5)");
    if (spec.templates.rows() != spec.num_classes || spec.templates.rank() != 2) {
        throw ShapeError("synthetic: need one template row per class");
    }
    for (double v : spec.templates.values()) {
        if (v != 0.0 && v != 1.0) throw DomainError("synthetic: templates must be binary");
    }
    const std::size_t dim = spec.templates.cols();
    const std::size_t n = spec.num_classes * spec.samples_per_class;
    SyntheticDataset out;
    out.templates = spec.templates;
    out.data.images = numgrad::Tensor({n, dim});
    out.data.labels.resize(n);
    out.data.num_classes = spec.num_classes;
    out.data.provenance = "synthetic:seed=" + std::to_string(spec.seed);
    Rng rng(spec.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t c = 0, row = 0; c < spec.num_classes; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
            out.data.labels[row] = static_cast<std::int32_t>(c);
            for (std::size_t j = 0; j < dim; ++j) {
                const double t = spec.templates(c, j);
                out.data.images(row, j) = u(rng) < spec.flip_rate ? 1.0 - t : t;
            }
        }
    }
    return out;
}

}  // namespace protovae::dataio
