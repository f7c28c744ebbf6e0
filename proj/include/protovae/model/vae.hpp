#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "protovae/dataio/dataset.hpp"
#include "protovae/numgrad/graph.hpp"
#include "protovae/rng.hpp"

namespace protovae::model {

using numgrad::Tensor;
using numgrad::Var;

inline constexpr double kLogVarMin = -7.0;
inline constexpr double kLogVarMax = 7.0;

enum class PriorKind { standard, vamp };

const char* to_string(PriorKind kind);
PriorKind prior_from_string(const std::string& name);  // ConfigError on unknown names

struct TrainConfig {
    PriorKind prior = PriorKind::standard;
    std::size_t K = 500;  // ignored for the standard prior
    std::size_t latent_dim = 40;
    std::size_t hidden_dim = 300;
    double learning_rate = 5e-4;
    std::size_t batch_size = 100;
    std::size_t epochs = 40;
    std::uint64_t seed = 0;
    std::optional<std::size_t> warmup_epochs;  // default: epochs / 5

    std::size_t effective_warmup_epochs() const { return warmup_epochs.value_or(epochs / 5); }
    /// ConfigError naming the offending field.
    void validate() const;
};

struct EncoderParams {
    Var w_hidden, b_hidden;    // D x H, H
    Var w_mean, b_mean;        // H x L, L
    Var w_log_var, b_log_var;  // H x L, L
    std::vector<Var> parameters() const;
};

struct DecoderParams {
    Var w_hidden, b_hidden;  // L x H, H
    Var w_logits, b_logits;  // H x D, D
    std::vector<Var> parameters() const;
};

/// Pseudo-inputs are sigmoid(u), so they always stay inside (0,1).
struct PseudoInputBank {
    Var u;  // K x D
    std::size_t size() const { return u ? u.value().rows() : 0; }
    Tensor pseudo_inputs() const;
};

struct ModelParams {
    std::size_t input_dim = 0, hidden_dim = 0, latent_dim = 0;
    EncoderParams encoder;
    DecoderParams decoder;
    PseudoInputBank bank;

    /// Encoder, decoder, then the bank when `with_bank` and the bank is non-empty.
    std::vector<Var> parameters(bool with_bank = true) const;
    /// Fresh nodes holding copies of every tensor.
    ModelParams clone() const;
    bool values_equal(const ModelParams& other) const;
};

/// Glorot-uniform weights, zero biases. The bank is logit(clamped mean image)
/// plus N(0, 0.1^2) noise when `mean_image` is given, else pure noise.
ModelParams init_params(std::size_t input_dim, std::size_t hidden_dim, std::size_t latent_dim, std::size_t K,
                        std::uint64_t seed, const Tensor* mean_image = nullptr);

struct GaussianParams {
    Var mean;     // n x L
    Var log_var;  // n x L, inside [kLogVarMin, kLogVarMax]
};

GaussianParams encode(const Var& x, const EncoderParams& enc);
GaussianParams encode(const Tensor& x, const EncoderParams& enc);

/// z = mean + exp(log_var / 2) * noise.
Var reparameterize(const GaussianParams& g, const Tensor& noise);
Var reparameterized_sample(const GaussianParams& g, Rng& rng);
Tensor standard_normal(std::size_t rows, std::size_t cols, Rng& rng);

/// Diagonal Gaussian log density per row: [n].
Var gaussian_log_density(const Var& z, const GaussianParams& g);
Var standard_prior_log_density(const Var& z);
/// Every z row against every component row: [n x K].
Var pairwise_gaussian_log_density(const Var& z, const Var& mean, const Var& log_var);
/// log(1/K) + logsumexp_k log N(z; encode(sigmoid(u_k))).
Var vamp_prior_log_density(const Var& z, const PseudoInputBank& bank, const EncoderParams& enc);

Var decode_logits(const Var& z, const DecoderParams& dec);
/// Bernoulli means sigmoid(logits).
Tensor decode_sample(const Tensor& z, const DecoderParams& dec);

/// Per-datapoint means. prior_term and entropy_term are already scaled by beta.
struct ElboBreakdown {
    double reconstruction = 0, prior_term = 0, entropy_term = 0, total = 0;
};

struct ElboGraph {
    Var total;
    ElboBreakdown breakdown;
    GaussianParams posterior;
    Var z;
};

ElboGraph elbo(const ModelParams& params, const Tensor& x, PriorKind prior, const Tensor& noise, double beta);
ElboGraph elbo(const ModelParams& params, const Tensor& x, PriorKind prior, Rng& rng, double beta);

struct EpochStats {
    std::size_t epoch = 0;
    double beta = 0;
    ElboBreakdown mean;  // per-datapoint, averaged over the epoch's batches
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> trace;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Adam on -ELBO with a linear beta ramp from 0 to 1 over the warm-up steps.
/// Non-finite values raise TrainingError naming the epoch and batch.
TrainResult train(const dataio::RawDataset& data, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Same loop starting from given parameters (which are updated in place).
std::vector<EpochStats> train_from(ModelParams& params, const dataio::RawDataset& data, const TrainConfig& config,
                                   const EpochCallback& on_epoch = {});

/// Mean image of a dataset, one row.
Tensor mean_image(const dataio::RawDataset& data);

}  // namespace protovae::model
