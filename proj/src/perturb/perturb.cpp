#include "protovae/perturb/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "protovae/error.hpp"
#include "protovae/rng.hpp"

namespace protovae::perturb {

using dataio::RawDataset;
using numgrad::Tensor;

CategoryPixelModel fit_pixel_model(const RawDataset& data) {
    if (!dataio::is_binary(data)) throw DomainError("fit_pixel_model: pixels must be binary; binarize first");
    const std::size_t classes = data.num_classes, dim = data.dim();
    std::vector<std::size_t> counts(classes, 0);
    CategoryPixelModel model{Tensor({classes, dim})};
    for (std::size_t r = 0; r < data.size(); ++r) {
        const auto c = static_cast<std::size_t>(data.labels[r]);
        ++counts.at(c);
        const double* row = data.images.data() + r * dim;
        double* acc = model.probs.data() + c * dim;
        for (std::size_t j = 0; j < dim; ++j) acc[j] += row[j];
    }
    for (std::size_t c = 0; c < classes; ++c) {
        if (counts[c] == 0) throw ContractError("fit_pixel_model: class " + std::to_string(c) + " has no images");
        double* acc = model.probs.data() + c * dim;
        for (std::size_t j = 0; j < dim; ++j) acc[j] /= static_cast<double>(counts[c]);
    }
    return model;
}

double flip_probability(double p_on, double value, double eps) {
    const double differs = value == 1.0 ? 1.0 - p_on : p_on;
    return std::clamp(eps * differs, 0.0, 1.0);
}

RawDataset smooth_noise(const RawDataset& data, const CategoryPixelModel& model, double eps, std::uint64_t seed,
                        std::vector<std::int32_t>* noise_sources) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw DomainError("smooth_noise: eps must be a finite value >= 0");
    if (!dataio::is_binary(data)) throw DomainError("smooth_noise: pixels must be binary; binarize first");
    const std::size_t classes = data.num_classes, dim = data.dim();
    if (model.probs.rows() != classes || model.probs.cols() != dim) {
        throw ShapeError("smooth_noise: pixel model is " + numgrad::shape_string(model.probs.shape()) +
                         ", dataset needs " + std::to_string(classes) + "x" + std::to_string(dim));
    }
    if (classes < 2) throw ContractError("smooth_noise: needs at least two classes");
    RawDataset out = data;
    if (noise_sources) noise_sources->assign(data.size(), -1);
    if (eps == 0.0) return out;

    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t r = 0; r < data.size(); ++r) {
        Rng rng(derive_seed(seed, r));
        const auto c = static_cast<std::size_t>(data.labels[r]);
        std::uniform_int_distribution<std::size_t> pick(0, classes - 2);
        std::size_t other = pick(rng);
        if (other >= c) ++other;
        if (noise_sources) (*noise_sources)[r] = static_cast<std::int32_t>(other);
        const double* p = model.probs.data() + other * dim;
        double* row = out.images.data() + r * dim;
        for (std::size_t j = 0; j < dim; ++j) {
            if (u(rng) < flip_probability(p[j], row[j], eps)) row[j] = 1.0 - row[j];
        }
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

ResponseCounts parse_response_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("response csv: missing header");
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "image_id") {
        throw ParseError("response csv: header must be image_id followed by at least two class columns");
    }
    ResponseCounts out;
    out.class_names.assign(header.begin() + 1, header.end());
    const std::size_t classes = out.class_names.size();
    std::vector<double> counts;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != classes + 1) {
            throw ParseError("response csv line " + std::to_string(line_no) + ": expected " +
                             std::to_string(classes + 1) + " columns, got " + std::to_string(cells.size()));
        }
        out.image_ids.push_back(cells[0]);
        for (std::size_t c = 1; c <= classes; ++c) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cells[c], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cells[c].size() || cells[c].empty() || !std::isfinite(v) || v < 0.0) {
                throw ParseError("response csv line " + std::to_string(line_no) + ": bad count '" + cells[c] +
                                 "' in column " + out.class_names[c - 1]);
            }
            counts.push_back(v);
        }
    }
    out.counts = Tensor({out.image_ids.size(), classes}, std::move(counts));
    return out;
}

ResponseCounts read_response_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return parse_response_csv(in);
}

EntropyTable image_entropy(const Tensor& counts, std::span<const std::int32_t> labels, EntropyGrouping grouping) {
    const std::size_t n = counts.rows(), classes = counts.cols();
    if (grouping == EntropyGrouping::ground_truth && labels.size() != n) {
        throw ShapeError("image_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                         " images");
    }
    EntropyTable t;
    t.distributions = Tensor({n, classes});
    t.entropy.resize(n);
    t.majority.resize(n);
    t.class_mean_entropy.assign(classes, 0.0);
    t.class_sizes.assign(classes, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = counts.data() + i * classes;
        double total = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            if (!(row[c] >= 0.0)) throw DomainError("image_entropy: negative count for image " + std::to_string(i));
            total += row[c];
        }
        if (total <= 0.0) throw DomainError("image_entropy: image " + std::to_string(i) + " has no responses");
        double h = 0.0;
        double* dist = t.distributions.data() + i * classes;
        for (std::size_t c = 0; c < classes; ++c) {
            dist[c] = row[c] / total;
            if (dist[c] > 0.0) h -= dist[c] * std::log(dist[c]);
        }
        t.entropy[i] = std::max(h, 0.0);
        t.majority[i] = static_cast<std::int32_t>(std::max_element(row, row + classes) - row);

        const std::int32_t group = grouping == EntropyGrouping::ground_truth ? labels[i] : t.majority[i];
        if (group < 0 || static_cast<std::size_t>(group) >= classes) {
            throw DomainError("image_entropy: label " + std::to_string(group) + " outside the response classes");
        }
        t.class_mean_entropy[static_cast<std::size_t>(group)] += t.entropy[i];
        ++t.class_sizes[static_cast<std::size_t>(group)];
    }
    for (std::size_t c = 0; c < classes; ++c) {
        if (t.class_sizes[c] > 0) t.class_mean_entropy[c] /= static_cast<double>(t.class_sizes[c]);
    }
    return t;
}

ClassRemoval remove_top_entropy_classes(const RawDataset& data, const EntropyTable& table, std::size_t m) {
    const std::size_t classes = data.num_classes;
    if (table.class_mean_entropy.size() != classes) {
        throw ShapeError("remove_top_entropy_classes: entropy table has " +
                         std::to_string(table.class_mean_entropy.size()) + " classes, dataset has " +
                         std::to_string(classes));
    }
    if (m >= classes) {
        throw ContractError("remove_top_entropy_classes: cannot remove " + std::to_string(m) + " of " +
                            std::to_string(classes) + " classes");
    }
    std::vector<std::int32_t> order(classes);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
        return table.class_mean_entropy[static_cast<std::size_t>(a)] >
               table.class_mean_entropy[static_cast<std::size_t>(b)];
    });
    ClassRemoval out;
    out.removed.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
    out.mapping.assign(classes, -1);
    std::vector<bool> dropped(classes, false);
    for (std::int32_t c : out.removed) dropped[static_cast<std::size_t>(c)] = true;
    std::int32_t next = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        if (!dropped[c]) out.mapping[c] = next++;
    }

    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < data.size(); ++r) {
        if (!dropped[static_cast<std::size_t>(data.labels[r])]) keep.push_back(r);
    }
    out.data = dataio::subset(data, keep);
    for (auto& l : out.data.labels) l = out.mapping[static_cast<std::size_t>(l)];
    out.data.num_classes = classes - m;
    if (!data.class_names.empty()) {
        out.data.class_names.clear();
        for (std::size_t c = 0; c < classes; ++c) {
            if (!dropped[c]) out.data.class_names.push_back(data.class_names[c]);
        }
    }
    return out;
}

}  // namespace protovae::perturb
