#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "protovae/dataio/dataset.hpp"
#include "protovae/model/vae.hpp"
#include "protovae/numgrad/graph.hpp"
#include "protovae/rng.hpp"

namespace protovae::evalkit {

using numgrad::Tensor;
using numgrad::Var;

enum class EmbedMode { mean, sample };
enum class SplitTag { train, test };

const char* to_string(SplitTag tag);

struct EmbeddingSet {
    Tensor Z;                          // n x L
    std::vector<std::int32_t> labels;  // -1 marks unlabeled rows
    SplitTag source = SplitTag::test;

    std::size_t size() const { return labels.size(); }
};

/// Posterior means (deterministic) or one reparameterized draw per row. Sample
/// mode needs `rng`.
EmbeddingSet embed(const dataio::RawDataset& data, const model::EncoderParams& encoder, EmbedMode mode,
                   SplitTag source, Rng* rng = nullptr);

struct Classification {
    std::vector<std::int32_t> predicted;
    double accuracy = 0.0;  // over rows with a label >= 0
};

double accuracy(std::span<const std::int32_t> predicted, std::span<const std::int32_t> truth);

/// Euclidean k-NN majority vote. A tie between classes goes to the class of
/// the nearest neighbour among the tied classes.
Classification knn_classify(const EmbeddingSet& train, const EmbeddingSet& test, std::size_t k = 5);

// --- surrogate classifier -----------------------------------------------------

struct ClassifierConfig {
    std::size_t hidden = 256;
    std::size_t epochs = 30;
    std::size_t batch_size = 100;
    double learning_rate = 1e-3;
    // Random affine warps of training images (square images only): rotation in
    // degrees, relative scale and translation in pixels, each drawn uniformly
    // from [-limit, limit]. All zero disables augmentation.
    double augment_rotation = 0.0;
    double augment_scale = 0.0;
    double augment_shift = 0.0;
    std::uint64_t seed = 0;
};

struct ClassifierParams {
    Var w_hidden, b_hidden, w_out, b_out;  // D x H_c, H_c, H_c x C, C
    std::size_t num_classes = 0;
    std::vector<Var> parameters() const { return {w_hidden, b_hidden, w_out, b_out}; }
};

struct SurrogateClassifier {
    ClassifierParams params;
    double train_accuracy = 0.0;
};

SurrogateClassifier train_surrogate_classifier(const dataio::RawDataset& data, const ClassifierConfig& config);

/// Softmax probabilities, n x C.
Tensor classifier_probabilities(const ClassifierParams& f, const Tensor& x);
std::vector<std::int32_t> classify(const ClassifierParams& f, const Tensor& x);

// --- prototypes -------------------------------------------------------------------

struct PrototypeLabeling {
    Tensor embeddings;  // K x L
    Tensor images;      // K x D Bernoulli means
    std::vector<std::int32_t> labels;
    std::vector<double> confidence;

    std::size_t size() const { return labels.size(); }
};

PrototypeLabeling label_prototypes(const model::PseudoInputBank& bank, const model::ModelParams& params,
                                   const ClassifierParams& f, EmbedMode mode = EmbedMode::mean, Rng* rng = nullptr);

/// Nearest component embedding under squared Euclidean distance; ties go to
/// the lowest component index.
Classification prototype_classify(const EmbeddingSet& test, const PrototypeLabeling& labeling);

/// Fraction of labeled test rows whose class appears among the surrogate labels.
double coverage_bound(const EmbeddingSet& test, const PrototypeLabeling& labeling);

// --- clustering ---------------------------------------------------------------------

/// Per-column z-scores using the set's own standard deviation (floor 1e-8).
Tensor standardize(const Tensor& Z);

struct KMeansResult {
    Tensor centers;                       // clusters x L
    std::vector<std::size_t> assignment;  // nearest center per row
    double loss = 0.0;                    // within-cluster SSE / n
};

struct KMeansOptions {
    std::size_t restarts = 10;
    std::size_t max_iterations = 100;
};

/// Best of `restarts` Lloyd runs seeded by k-means++. When `warm_start` holds
/// fewer centers than requested, one extra run starts from them plus
/// k-means++ additions. Operates on `X` as given (no standardization).
KMeansResult kmeans(const Tensor& X, std::size_t clusters, Rng& rng, const KMeansOptions& options = {},
                    const Tensor* warm_start = nullptr);

/// Nearest-center index per row, ties to the lowest index.
std::vector<std::size_t> assign_to_centers(const Tensor& X, const Tensor& centers);

double kmeans_loss(const EmbeddingSet& emb, std::size_t clusters, std::uint64_t seed,
                   const KMeansOptions& options = {});

/// Losses for ascending cluster counts, each run warm-started from the
/// previous count's best centers, so the curve never increases.
std::vector<double> kmeans_loss_curve(const EmbeddingSet& emb, std::span<const std::size_t> clusters,
                                      std::uint64_t seed, const KMeansOptions& options = {});

// --- projection --------------------------------------------------------------------

struct Projection {
    Tensor coords;        // n x 2
    Tensor extra_coords;  // m x 2 when extra points were given
    Tensor basis;         // L x 2, orthonormal columns
    Tensor center;        // L
    std::vector<double> eigenvalues;  // covariance spectrum, descending
};

/// Top two principal components of the centered embeddings. `extra` rows are
/// projected with the same center and basis.
Projection project_2d(const EmbeddingSet& emb, const Tensor* extra = nullptr);

}  // namespace protovae::evalkit
