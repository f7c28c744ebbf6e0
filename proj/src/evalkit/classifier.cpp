#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "protovae/error.hpp"
#include "protovae/evalkit/evalkit.hpp"
#include "protovae/numgrad/adam.hpp"
#include "protovae/numgrad/ops.hpp"

namespace protovae::evalkit {

namespace ng = numgrad;

namespace {

Var logits(const ClassifierParams& f, const Var& x) {
    return ng::linear(ng::relu(ng::linear(x, f.w_hidden, f.b_hidden)), f.w_out, f.b_out);
}

// Random affine warp of each square image in the batch: rotation, isotropic
// scale and translation about the image centre, bilinear sampling, zero fill.
void random_affine(Tensor& batch, std::size_t side, const ClassifierConfig& cfg, Rng& rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double centre = (static_cast<double>(side) - 1.0) / 2.0;
    const long w = static_cast<long>(side);
    std::vector<double> src(side * side);
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        const double angle = unit(rng) * cfg.augment_rotation * std::numbers::pi / 180.0;
        const double scale = 1.0 + unit(rng) * cfg.augment_scale;
        const double tr = unit(rng) * cfg.augment_shift, tc = unit(rng) * cfg.augment_shift;
        const double cs = std::cos(angle) / scale, sn = std::sin(angle) / scale;
        double* img = batch.data() + i * side * side;
        std::copy(img, img + side * side, src.begin());
        auto at = [&](long r, long c) { return r < 0 || c < 0 || r >= w || c >= w ? 0.0 : src[r * w + c]; };
        for (long r = 0; r < w; ++r)
            for (long c = 0; c < w; ++c) {
                // inverse map: output pixel -> source coordinates
                const double y = r - centre - tr, x = c - centre - tc;
                const double sy = cs * y - sn * x + centre, sx = sn * y + cs * x + centre;
                const double fy = std::floor(sy), fx = std::floor(sx);
                const long y0 = static_cast<long>(fy), x0 = static_cast<long>(fx);
                const double ay = sy - fy, ax = sx - fx;
                img[r * w + c] = (1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
                                 ay * ((1 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
            }
    }
}

}  // namespace

Tensor classifier_probabilities(const ClassifierParams& f, const Tensor& x) {
    if (x.cols() != f.w_hidden.value().rows()) throw ShapeError("classifier: input width mismatch");
    Tensor out = logits(f, Var::constant(x)).value();
    const Tensor lse = ng::log_sum_exp_values(out);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t c = 0; c < out.cols(); ++c) out(i, c) = std::exp(out(i, c) - lse[i]);
    return out;
}

std::vector<std::int32_t> classify(const ClassifierParams& f, const Tensor& x) {
    const Tensor p = classifier_probabilities(f, x);
    std::vector<std::int32_t> out(p.rows());
    for (std::size_t i = 0; i < p.rows(); ++i) {
        const auto row = p.row(i);
        out[i] = static_cast<std::int32_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

SurrogateClassifier train_surrogate_classifier(const dataio::RawDataset& input, const ClassifierConfig& config) {
    if (input.size() == 0) throw ContractError("surrogate classifier: empty dataset");
    const std::set<std::int32_t> distinct(input.labels.begin(), input.labels.end());
    if (distinct.size() < 2) throw ContractError("surrogate classifier: needs at least two classes");
    if (*distinct.begin() < 0) throw ContractError("surrogate classifier: every row needs a label");
    if (config.hidden == 0 || config.batch_size == 0 || !(config.learning_rate > 0)) {
        throw ConfigError("surrogate classifier: hidden, batch_size and learning_rate must be positive");
    }
    const dataio::RawDataset& data = input;
    const std::size_t n = data.size(), D = data.dim(), C = data.num_classes, H = config.hidden;
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(D))));
    const bool augment = config.augment_rotation > 0 || config.augment_scale > 0 || config.augment_shift > 0;
    if (augment && side * side != D) throw ContractError("shift augmentation needs square images");

    Rng rng(config.seed);
    auto glorot = [&rng](std::size_t in, std::size_t out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> u(-limit, limit);
        Tensor t({in, out});
        for (double& v : t.values()) v = u(rng);
        return t;
    };
    SurrogateClassifier result;
    ClassifierParams& f = result.params;
    f.num_classes = C;
    f.w_hidden = Var::parameter(glorot(D, H), "classifier.w_hidden");
    f.b_hidden = Var::parameter(Tensor({H}), "classifier.b_hidden");
    f.w_out = Var::parameter(glorot(H, C), "classifier.w_out");
    f.b_out = Var::parameter(Tensor({C}), "classifier.b_out");

    ng::Adam adam(f.parameters(), config.learning_rate);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch = std::min(config.batch_size, n);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        // cosine decay to zero over the run
        adam.set_learning_rate(config.learning_rate * 0.5 *
                               (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                                               static_cast<double>(config.epochs))));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t begin = 0; begin < n; begin += batch) {
            const std::size_t end = std::min(n, begin + batch);
            const std::span<const std::size_t> idx(order.data() + begin, end - begin);
            Tensor onehot({end - begin, C});
            for (std::size_t r = 0; r < idx.size(); ++r) onehot(r, static_cast<std::size_t>(data.labels[idx[r]])) = 1.0;
            Tensor x = data.images.gather_rows(idx);
            if (augment) random_affine(x, side, config, rng);
            const Var z = logits(f, Var::constant(std::move(x)));
            const Var lse = ng::reshape(ng::log_sum_exp(z), {end - begin, 1});
            const Var log_probs = ng::sub(z, lse);
            const Var loss = ng::scale(ng::sum(ng::mul(log_probs, Var::constant(onehot))),
                                       -1.0 / static_cast<double>(end - begin));
            ng::backward(loss);
            adam.step();
        }
    }
    result.train_accuracy = accuracy(classify(f, input.images), input.labels);
    return result;
}

}  // namespace protovae::evalkit
