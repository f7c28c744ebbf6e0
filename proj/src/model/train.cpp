#include <algorithm>
#include <cmath>
#include <numeric>

#include "protovae/error.hpp"
#include "protovae/model/vae.hpp"
#include "protovae/numgrad/adam.hpp"
#include "protovae/numgrad/ops.hpp"

namespace protovae::model {

namespace {

ElboBreakdown scaled_sum(ElboBreakdown acc, const ElboBreakdown& b, double w) {
    acc.reconstruction += w * b.reconstruction;
    acc.prior_term += w * b.prior_term;
    acc.entropy_term += w * b.entropy_term;
    acc.total += w * b.total;
    return acc;
}

}  // namespace

TrainResult train(const dataio::RawDataset& data, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (data.size() == 0) throw ContractError("train: dataset is empty");
    if (config.prior == PriorKind::vamp && config.K >= data.size()) {
        throw ConfigError("K must be smaller than the number of training datapoints (" +
                          std::to_string(data.size()) + ")");
    }
    const Tensor mean = mean_image(data);
    TrainResult result;
    result.params = init_params(data.dim(), config.hidden_dim, config.latent_dim,
                                config.prior == PriorKind::vamp ? config.K : 0,
                                derive_seed(config.seed, seed_stream::model_init), &mean);
    result.trace = train_from(result.params, data, config, on_epoch);
    return result;
}

std::vector<EpochStats> train_from(ModelParams& params, const dataio::RawDataset& data, const TrainConfig& config,
                                   const EpochCallback& on_epoch) {
    config.validate();
    if (data.size() == 0) throw ContractError("train: dataset is empty");
    if (data.dim() != params.input_dim) throw ShapeError("train: dataset dimension does not match the model");
    if (config.prior == PriorKind::vamp && params.bank.size() == 0) {
        throw ContractError("train: vamp prior needs a pseudo-input bank");
    }

    const std::size_t n = data.size();
    const std::size_t batch = std::min(config.batch_size, n);
    const std::size_t steps_per_epoch = (n + batch - 1) / batch;
    const std::size_t warmup_steps = config.effective_warmup_epochs() * steps_per_epoch;

    numgrad::Adam adam(params.parameters(config.prior == PriorKind::vamp), config.learning_rate);
    Rng rng(derive_seed(config.seed, seed_stream::training));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<EpochStats> trace;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochStats stats;
        stats.epoch = epoch;
        for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step) {
            const std::size_t begin = b * batch, end = std::min(n, begin + batch);
            const std::span<const std::size_t> idx(order.data() + begin, end - begin);
            const Tensor x = data.images.gather_rows(idx);
            const double beta =
                warmup_steps == 0 ? 1.0
                                  : std::min(1.0, static_cast<double>(step) / static_cast<double>(warmup_steps));
            try {
                const ElboGraph g = elbo(params, x, config.prior, rng, beta);
                if (!std::isfinite(g.breakdown.total)) throw NumericError("non-finite ELBO");
                numgrad::backward(numgrad::scale(g.total, -1.0));
                adam.step();
                stats.mean = scaled_sum(stats.mean, g.breakdown, static_cast<double>(end - begin) / n);
                stats.beta = beta;
            } catch (const NumericError& e) {
                throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(b) + ": " + e.what());
            } catch (const OptimizationError& e) {
                throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(b) + ": " + e.what());
            }
        }
        trace.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    return trace;
}

}  // namespace protovae::model
