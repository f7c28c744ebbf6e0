#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "fd_oracle.hpp"
#include "protovae/error.hpp"
#include "protovae/model/checkpoint.hpp"
#include "protovae/model/vae.hpp"
#include "protovae/numgrad/ops.hpp"

using namespace protovae;
using namespace protovae::model;
using numgrad::Tensor;
using numgrad::Var;
using protovae::testing::max_relative_error;
using protovae::testing::numeric_gradient;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t({r, c});
    for (double& v : t.values()) v = u(rng);
    return t;
}

GaussianParams constant_gaussian(const Tensor& mean, const Tensor& log_var) {
    return {Var::constant(mean), Var::constant(log_var)};
}

// Plain-loop Gaussian density, no graph.
double naive_density(std::span<const double> z, std::span<const double> m, std::span<const double> lv) {
    double p = 1.0;
    for (std::size_t l = 0; l < z.size(); ++l) {
        const double var = std::exp(lv[l]);
        p *= std::exp(-(z[l] - m[l]) * (z[l] - m[l]) / (2 * var)) / std::sqrt(2 * std::numbers::pi * var);
    }
    return p;
}

dataio::RawDataset two_cluster_data(std::uint64_t seed, std::size_t per_class = 100) {
    return dataio::generate_synthetic(dataio::SyntheticSpec::random(2, 16, 0.05, per_class, seed)).data;
}

TrainConfig toy_config(PriorKind prior) {
    TrainConfig c;
    c.prior = prior;
    c.K = 4;
    c.latent_dim = 2;
    c.hidden_dim = 16;
    c.learning_rate = 1e-2;
    c.batch_size = 20;
    c.epochs = 50;
    c.seed = 11;
    return c;
}

const TrainResult& trained_toy() {
    static const TrainResult result = train(two_cluster_data(3), toy_config(PriorKind::vamp));
    return result;
}

}  // namespace

TEST(Encode, IdenticalRowsGiveIdenticalPosteriors) {
    const ModelParams p = init_params(6, 5, 3, 0, 1);
    Rng rng(2);
    Tensor x = random_tensor(3, 6, rng, 0.0, 1.0);
    for (std::size_t j = 0; j < 6; ++j) x(2, j) = x(0, j);
    const GaussianParams g = encode(x, p.encoder);
    for (std::size_t l = 0; l < 3; ++l) {
        EXPECT_EQ(g.mean.value()(0, l), g.mean.value()(2, l));
        EXPECT_EQ(g.log_var.value()(0, l), g.log_var.value()(2, l));
    }
}

TEST(Encode, LogVarStaysInsideClampBounds) {
    ModelParams p = init_params(10, 8, 4, 0, 5);
    for (double& v : p.encoder.w_log_var.mutable_value().values()) v *= 200.0;
    Rng rng(4);
    const GaussianParams g = encode(random_tensor(50, 10, rng, 0.0, 1.0), p.encoder);
    double lo = 0, hi = 0;
    for (double v : g.log_var.value().values()) {
        EXPECT_GE(v, kLogVarMin);
        EXPECT_LE(v, kLogVarMax);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_EQ(lo, kLogVarMin);
    EXPECT_EQ(hi, kLogVarMax);
}

TEST(Encode, RejectsBadInput) {
    const ModelParams p = init_params(6, 5, 3, 0, 1);
    EXPECT_THROW(encode(Tensor({2, 5}, 0.5), p.encoder), ShapeError);
    EXPECT_THROW(encode(Tensor({2, 6}, 1.5), p.encoder), DomainError);
}

TEST(Encode, TrainedToyModelSeparatesClasses) {
    const auto data = two_cluster_data(3);
    const Tensor means = encode(data.images, trained_toy().params.encoder).mean.value();
    double within = 0, between = 0;
    std::size_t nw = 0, nb = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t j = i + 1; j < data.size(); ++j) {
            double d = 0;
            for (std::size_t l = 0; l < means.cols(); ++l) d += std::pow(means(i, l) - means(j, l), 2);
            d = std::sqrt(d);
            if (data.labels[i] == data.labels[j]) {
                within += d;
                ++nw;
            } else {
                between += d;
                ++nb;
            }
        }
    EXPECT_LT(within / nw, between / nb);
}

TEST(Reparameterize, FloorVarianceIsNearDeterministic) {
    const Tensor mean({10000, 1}, 0.7);
    const Tensor lv({10000, 1}, kLogVarMin);
    Rng rng(1);
    const Tensor z = reparameterized_sample(constant_gaussian(mean, lv), rng).value();
    double ss = 0;
    for (double v : z.values()) ss += (v - 0.7) * (v - 0.7);
    const double sd = std::sqrt(ss / 10000);
    EXPECT_LT(sd, 0.09);
    EXPECT_NEAR(sd, std::exp(kLogVarMin / 2), 0.002);
    Rng one(9);
    const Tensor single = reparameterized_sample(constant_gaussian(Tensor({1, 1}, 0.7), Tensor({1, 1}, kLogVarMin)), one).value();
    EXPECT_LT(std::abs(single[0] - 0.7), 0.09);
}

TEST(Reparameterize, FixedSeedIsReproducible) {
    Rng rng(5);
    const GaussianParams g = constant_gaussian(random_tensor(4, 3, rng), random_tensor(4, 3, rng));
    Rng a(77), b(77);
    EXPECT_EQ(reparameterized_sample(g, a).value(), reparameterized_sample(g, b).value());
}

TEST(Reparameterize, MonteCarloMoments) {
    Rng rng(12);
    const Tensor z = reparameterized_sample(constant_gaussian(Tensor({10000, 3}), Tensor({10000, 3})), rng).value();
    for (std::size_t l = 0; l < 3; ++l) {
        double s = 0, ss = 0;
        for (std::size_t i = 0; i < 10000; ++i) s += z(i, l);
        const double m = s / 10000;
        for (std::size_t i = 0; i < 10000; ++i) ss += (z(i, l) - m) * (z(i, l) - m);
        EXPECT_NEAR(m, 0.0, 0.05);
        EXPECT_GE(ss / 9999, 0.9);
        EXPECT_LE(ss / 9999, 1.1);
    }
}

TEST(Reparameterize, DifferentiableInMeanAndLogVar) {
    Rng rng(8);
    Var mean = Var::parameter(random_tensor(3, 2, rng));
    Var lv = Var::parameter(random_tensor(3, 2, rng));
    const Tensor noise = standard_normal(3, 2, rng);
    auto loss = [&] { return numgrad::sum(numgrad::square(reparameterize({mean, lv}, noise))); };
    numgrad::backward(loss());
    const Tensor gm = mean.grad(), gl = lv.grad();
    EXPECT_LT(max_relative_error(gm, numeric_gradient([&] { return loss().value().item(); }, mean.mutable_value())), 1e-4);
    EXPECT_LT(max_relative_error(gl, numeric_gradient([&] { return loss().value().item(); }, lv.mutable_value())), 1e-4);
}

TEST(GaussianLogDensity, StandardNormalAtOrigin) {
    const Var z = Var::constant(Tensor({1, 1}));
    const double v = gaussian_log_density(z, constant_gaussian(Tensor({1, 1}), Tensor({1, 1}))).value()[0];
    EXPECT_NEAR(v, -0.5 * std::log(2 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(v, -0.918939, 1e-6);
}

TEST(GaussianLogDensity, ModeIsMaximal) {
    Rng rng(3);
    const Tensor m = random_tensor(1, 4, rng), lv = random_tensor(1, 4, rng);
    const double at_mode = gaussian_log_density(Var::constant(m), constant_gaussian(m, lv)).value()[0];
    for (int t = 0; t < 50; ++t) {
        Tensor z = m;
        for (double& v : z.values()) v += std::uniform_real_distribution<double>(-1, 1)(rng);
        EXPECT_LT(gaussian_log_density(Var::constant(z), constant_gaussian(m, lv)).value()[0], at_mode);
    }
}

TEST(GaussianLogDensity, MatchesProductOfDensities) {
    Rng rng(21);
    for (int t = 0; t < 100; ++t) {
        const Tensor z = random_tensor(3, 4, rng), m = random_tensor(3, 4, rng), lv = random_tensor(3, 4, rng);
        const Tensor got = gaussian_log_density(Var::constant(z), constant_gaussian(m, lv)).value();
        for (std::size_t i = 0; i < 3; ++i) ASSERT_NEAR(got[i], std::log(naive_density(z.row(i), m.row(i), lv.row(i))), 1e-10);
    }
}

TEST(GaussianLogDensity, ShapeMismatch) {
    EXPECT_THROW(gaussian_log_density(Var::constant(Tensor({2, 3})), constant_gaussian(Tensor({2, 2}), Tensor({2, 2}))),
                 ShapeError);
}

TEST(StandardPrior, OriginInTwoDimensions) {
    EXPECT_NEAR(standard_prior_log_density(Var::constant(Tensor({1, 2}))).value()[0], -1.837877, 1e-6);
}

TEST(StandardPrior, EqualsZeroMeanGaussianExactly) {
    Rng rng(2);
    const Tensor z = random_tensor(5, 3, rng);
    EXPECT_EQ(standard_prior_log_density(Var::constant(z)).value(),
              gaussian_log_density(Var::constant(z), constant_gaussian(Tensor({5, 3}), Tensor({5, 3}))).value());
}

TEST(StandardPrior, DecreasesAlongRays) {
    Rng rng(6);
    for (int t = 0; t < 20; ++t) {
        const Tensor dir = random_tensor(1, 3, rng);
        double previous = std::numeric_limits<double>::infinity();
        for (double r = 0.0; r < 5.0; r += 0.25) {
            Tensor z = dir;
            for (double& v : z.values()) v *= r;
            const double v = standard_prior_log_density(Var::constant(z)).value()[0];
            EXPECT_LT(v, previous);
            previous = v;
        }
    }
}

TEST(VampPrior, SingleComponentIsThatPosterior) {
    Rng rng(4);
    ModelParams p = init_params(5, 4, 2, 1, 3);
    const Var z = Var::constant(random_tensor(6, 2, rng));
    const Tensor u = p.bank.pseudo_inputs();
    const GaussianParams comp = encode(u, p.encoder);
    Tensor m({6, 2}), lv({6, 2});
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t l = 0; l < 2; ++l) {
            m(i, l) = comp.mean.value()(0, l);
            lv(i, l) = comp.log_var.value()(0, l);
        }
    const Tensor vamp = vamp_prior_log_density(z, p.bank, p.encoder).value();
    const Tensor direct = gaussian_log_density(z, constant_gaussian(m, lv)).value();
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(vamp[i], direct[i], 1e-12);
}

TEST(VampPrior, DuplicateComponentsMatchSingle) {
    Rng rng(5);
    ModelParams one = init_params(5, 4, 2, 1, 3);
    ModelParams many = one.clone();
    Tensor u({7, 5});
    for (std::size_t k = 0; k < 7; ++k)
        for (std::size_t j = 0; j < 5; ++j) u(k, j) = one.bank.u.value()(0, j);
    many.bank.u = Var::parameter(u, "bank.u");
    const Var z = Var::constant(random_tensor(4, 2, rng));
    const Tensor a = vamp_prior_log_density(z, one.bank, one.encoder).value();
    const Tensor b = vamp_prior_log_density(z, many.bank, many.encoder).value();
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
}

TEST(VampPrior, MatchesDirectMixture) {
    Rng rng(31);
    for (int t = 0; t < 100; ++t) {
        const ModelParams p = init_params(4, 3, 2, 3, rng());
        const Tensor z = random_tensor(5, 2, rng);
        const Tensor got = vamp_prior_log_density(Var::constant(z), p.bank, p.encoder).value();
        const GaussianParams comp = encode(p.bank.pseudo_inputs(), p.encoder);
        for (std::size_t i = 0; i < 5; ++i) {
            double mix = 0;
            for (std::size_t k = 0; k < 3; ++k)
                mix += naive_density(z.row(i), comp.mean.value().row(k), comp.log_var.value().row(k)) / 3.0;
            ASSERT_NEAR(got[i], std::log(mix), 1e-8);
        }
    }
}

TEST(VampPrior, EmptyBankIsContractError) {
    const ModelParams p = init_params(4, 3, 2, 0, 1);
    EXPECT_THROW(vamp_prior_log_density(Var::constant(Tensor({1, 2})), p.bank, p.encoder), ContractError);
}

TEST(PairwiseDensity, MatchesRowwiseDensityAndGradients) {
    Rng rng(13);
    Var z = Var::parameter(random_tensor(4, 3, rng));
    Var m = Var::parameter(random_tensor(5, 3, rng));
    Var lv = Var::parameter(random_tensor(5, 3, rng));
    const Tensor out = pairwise_gaussian_log_density(z, m, lv).value();
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 5; ++k)
            EXPECT_NEAR(out(i, k), std::log(naive_density(z.value().row(i), m.value().row(k), lv.value().row(k))), 1e-12);

    Rng wrng(2);
    const Var weights = Var::constant(random_tensor(4, 5, wrng));
    auto loss = [&] { return numgrad::sum(numgrad::mul(pairwise_gaussian_log_density(z, m, lv), weights)); };
    numgrad::backward(loss());
    for (Var* v : {&z, &m, &lv}) {
        const Tensor analytic = v->grad();
        const Tensor numeric = numeric_gradient([&] { return loss().value().item(); }, v->mutable_value());
        EXPECT_LT(max_relative_error(analytic, numeric), 1e-4);
    }
}

TEST(Decode, ZeroLogitsGiveHalf) {
    ModelParams p = init_params(6, 4, 2, 0, 1);
    p.decoder.w_logits.mutable_value().fill(0.0);
    Rng rng(1);
    const Tensor out = decode_sample(random_tensor(3, 2, rng), p.decoder);
    for (double v : out.values()) EXPECT_EQ(v, 0.5);
}

TEST(Decode, OutputsStrictlyInsideUnitInterval) {
    ModelParams p = init_params(6, 4, 2, 0, 1);
    for (double& v : p.decoder.w_logits.mutable_value().values()) v *= 30;
    Rng rng(1);
    const Tensor out = decode_sample(random_tensor(100, 2, rng, -20, 20), p.decoder);
    for (double v : out.values()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
    EXPECT_THROW(decode_sample(Tensor({1, 3}), p.decoder), ShapeError);
}

TEST(Decode, TrainedRoundTripBeatsShuffledTargets) {
    const auto data = two_cluster_data(3);
    const auto& params = trained_toy().params;
    const Tensor recon = decode_sample(encode(data.images, params.encoder).mean.value(), params.decoder);
    auto cross_entropy = [&](std::size_t target_row, std::size_t recon_row) {
        double ce = 0;
        for (std::size_t j = 0; j < data.dim(); ++j) {
            const double x = data.images(target_row, j), p = recon(recon_row, j);
            ce -= x * std::log(p) + (1 - x) * std::log(1 - p);
        }
        return ce;
    };
    double own = 0, shuffled = 0;
    const std::size_t n = data.size();
    for (std::size_t i = 0; i < n; ++i) {
        own += cross_entropy(i, i);
        shuffled += cross_entropy((i + n / 2 + 7) % n, i);
    }
    EXPECT_LT(own, shuffled);
}

TEST(Elbo, UniformDecoderReconstruction) {
    ModelParams p = init_params(8, 4, 2, 0, 1);
    p.decoder.w_logits.mutable_value().fill(0.0);
    Rng rng(3);
    const Tensor x = random_tensor(5, 8, rng, 0.0, 1.0);
    const ElboGraph g = elbo(p, x, PriorKind::standard, rng, 1.0);
    EXPECT_NEAR(g.breakdown.reconstruction, -8 * std::log(2.0), 1e-12);
}

TEST(Elbo, ZeroBetaIsReconstructionOnly) {
    const ModelParams p = init_params(8, 4, 2, 3, 1);
    Rng rng(3);
    const Tensor x = random_tensor(5, 8, rng, 0.0, 1.0);
    for (PriorKind prior : {PriorKind::standard, PriorKind::vamp}) {
        const ElboGraph g = elbo(p, x, prior, rng, 0.0);
        EXPECT_EQ(g.breakdown.total, g.breakdown.reconstruction);
    }
}

TEST(Elbo, MatchedSingleComponentHasZeroKl) {
    ModelParams p = init_params(6, 5, 2, 1, 4);
    const Tensor u = p.bank.pseudo_inputs();
    Tensor x({10000, 6});
    for (std::size_t i = 0; i < 10000; ++i)
        for (std::size_t j = 0; j < 6; ++j) x(i, j) = u(0, j);
    Rng rng(8);
    const ElboGraph g = elbo(p, x, PriorKind::vamp, rng, 1.0);
    // KL estimate = -(prior_term + entropy_term); each sample's log-ratio is zero.
    EXPECT_NEAR(g.breakdown.prior_term + g.breakdown.entropy_term, 0.0, 1e-9);
}

TEST(Elbo, BreakdownIsAdditiveAndReconstructionNonPositive) {
    Rng rng(10);
    for (int t = 0; t < 20; ++t) {
        const ModelParams p = init_params(7, 4, 3, 3, rng());
        const Tensor x = random_tensor(6, 7, rng, 0.0, 1.0);
        for (PriorKind prior : {PriorKind::standard, PriorKind::vamp}) {
            const double beta = std::uniform_real_distribution<double>(0, 1)(rng);
            const ElboBreakdown b = elbo(p, x, prior, rng, beta).breakdown;
            EXPECT_NEAR(b.total, b.reconstruction + b.prior_term + b.entropy_term, 1e-10);
            EXPECT_LE(b.reconstruction, 0.0);
        }
    }
}

TEST(Elbo, RejectsPixelsOutsideUnitInterval) {
    const ModelParams p = init_params(3, 2, 2, 0, 1);
    Rng rng(1);
    EXPECT_THROW(elbo(p, Tensor({1, 3}, -0.1), PriorKind::standard, rng, 1.0), DomainError);
    EXPECT_THROW(elbo(p, Tensor({1, 3}, 0.5), PriorKind::standard, rng, 1.5), ContractError);
}

class ElboGradient : public ::testing::TestWithParam<PriorKind> {};

TEST_P(ElboGradient, EveryParameterMatchesFiniteDifferences) {
    Rng rng(17);
    ModelParams p = init_params(4, 3, 2, 3, 99);
    for (const Var& v : p.parameters()) {
        Var mutable_v = v;
        for (double& x : mutable_v.mutable_value().values()) x += std::normal_distribution<double>(0, 0.3)(rng);
    }
    const Tensor x = random_tensor(5, 4, rng, 0.0, 1.0);
    const Tensor noise = standard_normal(5, 2, rng);
    auto total = [&] { return elbo(p, x, GetParam(), noise, 0.7).total; };
    numgrad::backward(total());
    for (const Var& v : p.parameters(GetParam() == PriorKind::vamp)) {
        const Tensor analytic = v.grad();
        Var handle = v;
        const Tensor numeric = numeric_gradient([&] { return total().value().item(); }, handle.mutable_value());
        EXPECT_LT(max_relative_error(analytic, numeric), 1e-4) << v.name();
    }
}

INSTANTIATE_TEST_SUITE_P(BothPriors, ElboGradient, ::testing::Values(PriorKind::standard, PriorKind::vamp),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Init, GlorotBoundsZeroBiasesAndBankRange) {
    Tensor mean({20}, 0.0);
    for (std::size_t j = 0; j < 20; ++j) mean[j] = j / 19.0;
    const ModelParams p = init_params(20, 10, 3, 5, 7, &mean);
    const double bound = std::sqrt(6.0 / 30.0);
    for (double v : p.encoder.w_hidden.value().values()) EXPECT_LE(std::abs(v), bound);
    for (double v : p.encoder.b_hidden.value().values()) EXPECT_EQ(v, 0.0);
    const Tensor pseudo = p.bank.pseudo_inputs();
    for (std::size_t k = 0; k < 5; ++k)
        for (std::size_t j = 0; j < 20; ++j) {
            EXPECT_GT(pseudo(k, j), 0.0);
            EXPECT_LT(pseudo(k, j), 1.0);
            EXPECT_NEAR(pseudo(k, j), std::clamp(mean[j], 1e-3, 1 - 1e-3), 0.06);
        }
    EXPECT_TRUE(p.values_equal(init_params(20, 10, 3, 5, 7, &mean)));
    EXPECT_FALSE(p.values_equal(init_params(20, 10, 3, 5, 8, &mean)));
}

TEST(TrainConfigValidation, RejectsNonPositiveFields) {
    TrainConfig c;
    c.latent_dim = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.learning_rate = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.prior = PriorKind::vamp;
    c.K = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c.prior = PriorKind::standard;
    EXPECT_NO_THROW(c.validate());
    EXPECT_THROW(prior_from_string("gaussian"), ConfigError);
}

TEST(Train, ZeroEpochsReturnsInitialization) {
    TrainConfig c = toy_config(PriorKind::vamp);
    c.epochs = 0;
    const auto data = two_cluster_data(1);
    const TrainResult r = train(data, c);
    const Tensor mean = mean_image(data);
    EXPECT_TRUE(r.params.values_equal(init_params(16, 16, 2, 4, derive_seed(c.seed, seed_stream::model_init), &mean)));
    EXPECT_TRUE(r.trace.empty());
}

TEST(Train, ElboImprovesOnTwoClusters) {
    const auto& trace = trained_toy().trace;
    ASSERT_EQ(trace.size(), 50u);
    EXPECT_GT(trace.back().mean.total, trace.front().mean.total);
    EXPECT_EQ(trace.back().beta, 1.0);
    EXPECT_LT(trace.front().beta, 1.0);
    for (const auto& s : trace) {
        EXPECT_NEAR(s.mean.total, s.mean.reconstruction + s.mean.prior_term + s.mean.entropy_term, 1e-9);
    }
}

TEST(Train, SameSeedIsBitIdentical) {
    TrainConfig c = toy_config(PriorKind::vamp);
    c.epochs = 3;
    const auto data = two_cluster_data(2);
    const TrainResult a = train(data, c), b = train(data, c);
    EXPECT_TRUE(a.params.values_equal(b.params));
    c.seed += 1;
    EXPECT_FALSE(a.params.values_equal(train(data, c).params));
}

TEST(Train, StandardPriorNeverTouchesBank) {
    const auto data = two_cluster_data(4);
    const Tensor mean = mean_image(data);
    ModelParams p = init_params(16, 8, 2, 5, 3, &mean);
    const Tensor before = p.bank.u.value();
    TrainConfig c = toy_config(PriorKind::standard);
    c.epochs = 2;
    train_from(p, data, c);
    EXPECT_EQ(p.bank.u.value(), before);
}

TEST(Train, OneVampStepMovesPseudoInputs) {
    const auto data = two_cluster_data(4);
    const Tensor mean = mean_image(data);
    ModelParams p = init_params(16, 8, 2, 5, 3, &mean);
    const Tensor before = p.bank.u.value();
    TrainConfig c = toy_config(PriorKind::vamp);
    c.epochs = 1;
    c.warmup_epochs = 0;
    c.batch_size = data.size();
    train_from(p, data, c);
    EXPECT_NE(p.bank.u.value(), before);
}

TEST(Train, DivergenceNamesEpochAndBatch) {
    const auto data = two_cluster_data(4);
    ModelParams p = init_params(16, 8, 2, 0, 3);
    p.decoder.w_logits.mutable_value()[0] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig c = toy_config(PriorKind::standard);
    try {
        train_from(p, data, c);
        FAIL() << "expected TrainingError";
    } catch (const TrainingError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch 0, batch 0"), std::string::npos) << e.what();
    }
}

TEST(Train, RejectsBankLargerThanData) {
    TrainConfig c = toy_config(PriorKind::vamp);
    c.K = 200;
    EXPECT_THROW(train(two_cluster_data(1), c), ConfigError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    const auto path = std::filesystem::temp_directory_path() / "protovae_ckpt_roundtrip.bin";
    Checkpoint ckpt;
    ckpt.config = toy_config(PriorKind::vamp);
    ckpt.config.warmup_epochs = 3;
    ckpt.config_echo = R"({"model":{"prior":"vamp"}})";
    ckpt.params = trained_toy().params;
    ckpt.trace = trained_toy().trace;
    write_checkpoint(path, ckpt);
    const Checkpoint back = read_checkpoint(path);
    EXPECT_TRUE(back.params.values_equal(ckpt.params));
    EXPECT_EQ(back.config_echo, ckpt.config_echo);
    EXPECT_EQ(back.config.warmup_epochs, std::optional<std::size_t>(3));
    EXPECT_EQ(back.config.seed, ckpt.config.seed);
    EXPECT_EQ(back.config.learning_rate, ckpt.config.learning_rate);
    ASSERT_EQ(back.trace.size(), ckpt.trace.size());
    EXPECT_EQ(back.trace.back().mean.total, ckpt.trace.back().mean.total);

    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 1);
    EXPECT_THROW(read_checkpoint(path), ParseError);
    std::filesystem::remove(path);
    EXPECT_THROW(read_checkpoint(path), ParseError);
}
