#include <algorithm>
#include <numeric>
#include <set>

#include "protovae/error.hpp"
#include "protovae/evalkit/evalkit.hpp"
#include "protovae/numgrad/kernels.hpp"

namespace protovae::evalkit {

namespace {

constexpr std::size_t kEmbedBatch = 500;

}  // namespace

const char* to_string(SplitTag tag) { return tag == SplitTag::train ? "train" : "test"; }

EmbeddingSet embed(const dataio::RawDataset& data, const model::EncoderParams& encoder, EmbedMode mode,
                   SplitTag source, Rng* rng) {
    if (mode == EmbedMode::sample && !rng) throw ContractError("embed: sample mode needs an rng");
    const std::size_t n = data.size();
    const std::size_t L = encoder.w_mean.value().cols();
    EmbeddingSet out;
    out.Z = Tensor({n, L});
    out.labels = data.labels;
    out.source = source;
    for (std::size_t begin = 0; begin < n; begin += kEmbedBatch) {
        const std::size_t end = std::min(n, begin + kEmbedBatch);
        const model::GaussianParams g = model::encode(data.images.slice_rows(begin, end), encoder);
        const Tensor z = mode == EmbedMode::mean ? g.mean.value() : model::reparameterized_sample(g, *rng).value();
        std::copy(z.values().begin(), z.values().end(), out.Z.data() + begin * L);
    }
    return out;
}

double accuracy(std::span<const std::int32_t> predicted, std::span<const std::int32_t> truth) {
    if (predicted.size() != truth.size()) throw ShapeError("accuracy: length mismatch");
    std::size_t labeled = 0, correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0) continue;
        ++labeled;
        correct += predicted[i] == truth[i];
    }
    return labeled == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(labeled);
}

Classification knn_classify(const EmbeddingSet& train, const EmbeddingSet& test, std::size_t k) {
    const std::size_t n = train.size();
    if (n == 0) throw ContractError("knn_classify: empty training set");
    if (k == 0 || k > n) throw ContractError("knn_classify: k must be in [1, " + std::to_string(n) + "]");
    if (train.Z.cols() != test.Z.cols()) throw ShapeError("knn_classify: embedding widths differ");
    std::int32_t classes = 0;
    for (std::int32_t l : train.labels) {
        if (l < 0) throw ContractError("knn_classify: training labels must all be valid");
        classes = std::max(classes, l + 1);
    }
    const std::size_t L = train.Z.cols();
    const auto& kern = numgrad::kernels();
    Classification out;
    out.predicted.resize(test.size());
    std::vector<std::pair<double, std::size_t>> dist(n);
    std::vector<std::size_t> votes(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < test.size(); ++i) {
        const double* q = test.Z.data() + i * L;
        for (std::size_t j = 0; j < n; ++j) dist[j] = {kern.squared_distance(L, q, train.Z.data() + j * L), j};
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        std::fill(votes.begin(), votes.end(), 0);
        std::size_t best = 0;
        for (std::size_t r = 0; r < k; ++r) {
            best = std::max(best, ++votes[static_cast<std::size_t>(train.labels[dist[r].second])]);
        }
        // Neighbours are sorted by distance, so the first tied class seen is the nearest one.
        for (std::size_t r = 0; r < k; ++r) {
            const std::int32_t c = train.labels[dist[r].second];
            if (votes[static_cast<std::size_t>(c)] == best) {
                out.predicted[i] = c;
                break;
            }
        }
    }
    out.accuracy = accuracy(out.predicted, test.labels);
    return out;
}

PrototypeLabeling label_prototypes(const model::PseudoInputBank& bank, const model::ModelParams& params,
                                   const ClassifierParams& f, EmbedMode mode, Rng* rng) {
    if (bank.size() == 0) throw ContractError("label_prototypes: empty pseudo-input bank");
    if (mode == EmbedMode::sample && !rng) throw ContractError("label_prototypes: sample mode needs an rng");
    const model::GaussianParams g = model::encode(bank.pseudo_inputs(), params.encoder);
    PrototypeLabeling out;
    out.embeddings = mode == EmbedMode::mean ? g.mean.value() : model::reparameterized_sample(g, *rng).value();
    out.images = model::decode_sample(out.embeddings, params.decoder);
    const Tensor probs = classifier_probabilities(f, out.images);
    for (std::size_t k = 0; k < probs.rows(); ++k) {
        const auto row = probs.row(k);
        const auto best = std::max_element(row.begin(), row.end());
        out.labels.push_back(static_cast<std::int32_t>(best - row.begin()));
        out.confidence.push_back(*best);
    }
    return out;
}

Classification prototype_classify(const EmbeddingSet& test, const PrototypeLabeling& labeling) {
    if (labeling.size() == 0) throw ContractError("prototype_classify: empty labeling");
    if (labeling.embeddings.cols() != test.Z.cols()) throw ShapeError("prototype_classify: embedding widths differ");
    const std::size_t L = test.Z.cols(), K = labeling.size();
    const auto& kern = numgrad::kernels();
    Classification out;
    out.predicted.resize(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const double* q = test.Z.data() + i * L;
        std::size_t best = 0;
        double best_d = kern.squared_distance(L, q, labeling.embeddings.data());
        for (std::size_t k = 1; k < K; ++k) {
            const double d = kern.squared_distance(L, q, labeling.embeddings.data() + k * L);
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        out.predicted[i] = labeling.labels[best];
    }
    out.accuracy = accuracy(out.predicted, test.labels);
    return out;
}

double coverage_bound(const EmbeddingSet& test, const PrototypeLabeling& labeling) {
    const std::set<std::int32_t> covered(labeling.labels.begin(), labeling.labels.end());
    std::size_t labeled = 0, inside = 0;
    for (std::int32_t l : test.labels) {
        if (l < 0) continue;
        ++labeled;
        inside += covered.count(l);
    }
    return labeled == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(labeled);
}

}  // namespace protovae::evalkit
