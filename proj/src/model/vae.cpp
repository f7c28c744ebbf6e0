#include "protovae/model/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "protovae/error.hpp"
#include "protovae/numgrad/ops.hpp"

namespace protovae::model {

namespace ng = numgrad;

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

void check_pixels(const Tensor& x, const char* op) {
    for (double v : x.values()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DomainError(std::string(op) + ": pixel value " + std::to_string(v) + " outside [0,1]");
        }
    }
}

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Tensor t({fan_in, fan_out});
    for (double& v : t.values()) v = u(rng);
    return t;
}

}  // namespace

const char* to_string(PriorKind kind) { return kind == PriorKind::standard ? "standard" : "vamp"; }

PriorKind prior_from_string(const std::string& name) {
    if (name == "standard") return PriorKind::standard;
    if (name == "vamp") return PriorKind::vamp;
    throw ConfigError("prior: expected \"standard\" or \"vamp\", got \"" + name + "\"");
}

void TrainConfig::validate() const {
    auto positive = [](std::size_t v, const char* key) {
        if (v == 0) throw ConfigError(std::string(key) + " must be positive");
    };
    positive(latent_dim, "latent_dim");
    positive(hidden_dim, "hidden_dim");
    positive(batch_size, "batch_size");
    if (prior == PriorKind::vamp) positive(K, "K");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
    if (warmup_epochs && *warmup_epochs > epochs) throw ConfigError("warmup_epochs exceeds epochs");
}

std::vector<Var> EncoderParams::parameters() const {
    return {w_hidden, b_hidden, w_mean, b_mean, w_log_var, b_log_var};
}

std::vector<Var> DecoderParams::parameters() const { return {w_hidden, b_hidden, w_logits, b_logits}; }

Tensor PseudoInputBank::pseudo_inputs() const {
    Tensor out = u.value();
    for (double& v : out.values()) v = ng::stable_sigmoid(v);
    return out;
}

std::vector<Var> ModelParams::parameters(bool with_bank) const {
    std::vector<Var> out = encoder.parameters();
    for (const Var& v : decoder.parameters()) out.push_back(v);
    if (with_bank && bank.size() > 0) out.push_back(bank.u);
    return out;
}

ModelParams ModelParams::clone() const {
    auto copy = [](const Var& v) { return v ? Var::parameter(v.value(), v.name()) : Var(); };
    ModelParams out;
    out.input_dim = input_dim;
    out.hidden_dim = hidden_dim;
    out.latent_dim = latent_dim;
    out.encoder = {copy(encoder.w_hidden), copy(encoder.b_hidden), copy(encoder.w_mean),
                   copy(encoder.b_mean),   copy(encoder.w_log_var), copy(encoder.b_log_var)};
    out.decoder = {copy(decoder.w_hidden), copy(decoder.b_hidden), copy(decoder.w_logits), copy(decoder.b_logits)};
    out.bank.u = copy(bank.u);
    return out;
}

bool ModelParams::values_equal(const ModelParams& other) const {
    const auto a = parameters(), b = other.parameters();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i].value() == b[i].value())) return false;
    }
    return true;
}

ModelParams init_params(std::size_t input_dim, std::size_t hidden_dim, std::size_t latent_dim, std::size_t K,
                        std::uint64_t seed, const Tensor* mean_image) {
    if (input_dim == 0 || hidden_dim == 0 || latent_dim == 0) throw ContractError("init_params: zero dimension");
    Rng rng(seed);
    ModelParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.latent_dim = latent_dim;
    auto weight = [&rng](std::size_t in, std::size_t out, const char* name) {
        return Var::parameter(glorot(in, out, rng), name);
    };
    auto bias = [](std::size_t n, const char* name) { return Var::parameter(Tensor({n}), name); };
    p.encoder.w_hidden = weight(input_dim, hidden_dim, "encoder.w_hidden");
    p.encoder.b_hidden = bias(hidden_dim, "encoder.b_hidden");
    p.encoder.w_mean = weight(hidden_dim, latent_dim, "encoder.w_mean");
    p.encoder.b_mean = bias(latent_dim, "encoder.b_mean");
    p.encoder.w_log_var = weight(hidden_dim, latent_dim, "encoder.w_log_var");
    p.encoder.b_log_var = bias(latent_dim, "encoder.b_log_var");
    p.decoder.w_hidden = weight(latent_dim, hidden_dim, "decoder.w_hidden");
    p.decoder.b_hidden = bias(hidden_dim, "decoder.b_hidden");
    p.decoder.w_logits = weight(hidden_dim, input_dim, "decoder.w_logits");
    p.decoder.b_logits = bias(input_dim, "decoder.b_logits");

    if (K > 0) {
        if (mean_image && mean_image->size() != input_dim) throw ShapeError("init_params: mean image size mismatch");
        Tensor u({K, input_dim});
        std::normal_distribution<double> noise(0.0, 0.1);
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t j = 0; j < input_dim; ++j) {
                double centre = 0.0;
                if (mean_image) {
                    const double m = std::clamp((*mean_image)[j], 1e-3, 1.0 - 1e-3);
                    centre = std::log(m / (1.0 - m));
                }
                u(k, j) = centre + noise(rng);
            }
        }
        p.bank.u = Var::parameter(std::move(u), "bank.u");
    }
    return p;
}

GaussianParams encode(const Var& x, const EncoderParams& enc) {
    if (x.value().cols() != enc.w_hidden.value().rows()) {
        throw ShapeError("encode: input has " + std::to_string(x.value().cols()) + " pixels, encoder expects " +
                         std::to_string(enc.w_hidden.value().rows()));
    }
    const Var h = ng::softplus(ng::linear(x, enc.w_hidden, enc.b_hidden));
    GaussianParams g;
    g.mean = ng::linear(h, enc.w_mean, enc.b_mean);
    g.log_var = ng::clamp(ng::linear(h, enc.w_log_var, enc.b_log_var), kLogVarMin, kLogVarMax);
    return g;
}

GaussianParams encode(const Tensor& x, const EncoderParams& enc) {
    check_pixels(x, "encode");
    return encode(Var::constant(x), enc);
}

Tensor standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Tensor t({rows, cols});
    for (double& v : t.values()) v = n(rng);
    return t;
}

Var reparameterize(const GaussianParams& g, const Tensor& noise) {
    if (noise.shape() != g.mean.shape() || g.log_var.shape() != g.mean.shape()) {
        throw ShapeError("reparameterize: mean " + ng::shape_string(g.mean.shape()) + ", log_var " +
                         ng::shape_string(g.log_var.shape()) + ", noise " + ng::shape_string(noise.shape()));
    }
    const Var std_dev = ng::exp(ng::scale(g.log_var, 0.5));
    return ng::add(g.mean, ng::mul(std_dev, Var::constant(noise)));
}

Var reparameterized_sample(const GaussianParams& g, Rng& rng) {
    const Tensor& m = g.mean.value();
    return reparameterize(g, standard_normal(m.rows(), m.cols(), rng));
}

Var gaussian_log_density(const Var& z, const GaussianParams& g) {
    if (z.shape() != g.mean.shape() || z.shape() != g.log_var.shape()) {
        throw ShapeError("gaussian_log_density: z " + ng::shape_string(z.shape()) + " vs mean " +
                         ng::shape_string(g.mean.shape()) + " and log_var " + ng::shape_string(g.log_var.shape()));
    }
    const double L = static_cast<double>(z.value().cols());
    const Var quad = ng::mul(ng::square(ng::sub(z, g.mean)), ng::exp(ng::negate(g.log_var)));
    const Var per_row = ng::sum_rows(ng::add(g.log_var, quad));
    return ng::add_scalar(ng::scale(per_row, -0.5), -L * kHalfLog2Pi);
}

Var standard_prior_log_density(const Var& z) {
    const Var zeros = Var::constant(Tensor(z.shape()));
    return gaussian_log_density(z, GaussianParams{zeros, zeros});
}

Var pairwise_gaussian_log_density(const Var& z, const Var& mean, const Var& log_var) {
    const Tensor& zv = z.value();
    const Tensor& mv = mean.value();
    const Tensor& lv = log_var.value();
    if (zv.rank() != 2 || mv.rank() != 2 || mv.shape() != lv.shape() || zv.cols() != mv.cols()) {
        throw ShapeError("pairwise_gaussian_log_density: z " + ng::shape_string(zv.shape()) + ", mean " +
                         ng::shape_string(mv.shape()) + ", log_var " + ng::shape_string(lv.shape()));
    }
    const std::size_t n = zv.rows(), K = mv.rows(), L = zv.cols();
    Tensor inv(lv.shape());
    for (std::size_t i = 0; i < lv.size(); ++i) inv[i] = std::exp(-lv[i]);
    const double constant = -static_cast<double>(L) * kHalfLog2Pi;

    Tensor out({n, K});
    for (std::size_t i = 0; i < n; ++i) {
        const double* zi = zv.data() + i * L;
        for (std::size_t k = 0; k < K; ++k) {
            const double* mk = mv.data() + k * L;
            const double* lk = lv.data() + k * L;
            const double* ik = inv.data() + k * L;
            double acc = 0.0;
            for (std::size_t l = 0; l < L; ++l) {
                const double d = zi[l] - mk[l];
                acc += lk[l] + d * d * ik[l];
            }
            out(i, k) = -0.5 * acc + constant;
        }
    }
    return ng::make_node(
        std::move(out), {z, mean, log_var},
        [inv = std::move(inv), n, K, L](ng::DiffNode& self) {
            ng::DiffNode& zn = *self.parents[0];
            ng::DiffNode& mn = *self.parents[1];
            ng::DiffNode& ln = *self.parents[2];
            for (std::size_t i = 0; i < n; ++i) {
                const double* zi = zn.value.data() + i * L;
                for (std::size_t k = 0; k < K; ++k) {
                    const double g = self.grad[i * K + k];
                    if (g == 0.0) continue;
                    const double* mk = mn.value.data() + k * L;
                    const double* ik = inv.data() + k * L;
                    for (std::size_t l = 0; l < L; ++l) {
                        const double d = zi[l] - mk[l];
                        const double scaled = d * ik[l];
                        if (zn.requires_grad) zn.grad[i * L + l] -= g * scaled;
                        if (mn.requires_grad) mn.grad[k * L + l] += g * scaled;
                        if (ln.requires_grad) ln.grad[k * L + l] += g * 0.5 * (d * scaled - 1.0);
                    }
                }
            }
        },
        "pairwise_gaussian_log_density");
}

Var vamp_prior_log_density(const Var& z, const PseudoInputBank& bank, const EncoderParams& enc) {
    const std::size_t K = bank.size();
    if (K == 0) throw ContractError("vamp_prior_log_density: pseudo-input bank is empty");
    const GaussianParams comp = encode(ng::sigmoid(bank.u), enc);
    const Var log_components = pairwise_gaussian_log_density(z, comp.mean, comp.log_var);
    return ng::add_scalar(ng::log_sum_exp(log_components), -std::log(static_cast<double>(K)));
}

Var decode_logits(const Var& z, const DecoderParams& dec) {
    if (z.value().cols() != dec.w_hidden.value().rows()) {
        throw ShapeError("decode: latent has " + std::to_string(z.value().cols()) + " dims, decoder expects " +
                         std::to_string(dec.w_hidden.value().rows()));
    }
    const Var h = ng::softplus(ng::linear(z, dec.w_hidden, dec.b_hidden));
    return ng::linear(h, dec.w_logits, dec.b_logits);
}

Tensor decode_sample(const Tensor& z, const DecoderParams& dec) {
    // sigmoid(36) is the largest value below 1 in double precision.
    Tensor out = decode_logits(Var::constant(z), dec).value();
    for (double& v : out.values()) v = ng::stable_sigmoid(std::clamp(v, -36.0, 36.0));
    return out;
}

ElboGraph elbo(const ModelParams& params, const Tensor& x, PriorKind prior, const Tensor& noise, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ContractError("elbo: beta must be in [0,1]");
    check_pixels(x, "elbo");
    ElboGraph out;
    const Var xv = Var::constant(x);
    out.posterior = encode(xv, params.encoder);
    out.z = reparameterize(out.posterior, noise);
    const Var logits = decode_logits(out.z, params.decoder);

    // log Bernoulli(x | sigmoid(l)) = x*l - softplus(l)
    const Var recon = ng::mean(ng::sum_rows(ng::sub(ng::mul(xv, logits), ng::softplus(logits))));
    const Var log_prior = prior == PriorKind::standard
                              ? standard_prior_log_density(out.z)
                              : vamp_prior_log_density(out.z, params.bank, params.encoder);
    const Var prior_term = ng::scale(ng::mean(log_prior), beta);
    const Var entropy_term = ng::scale(ng::mean(gaussian_log_density(out.z, out.posterior)), -beta);
    out.total = ng::add(ng::add(recon, prior_term), entropy_term);
    out.breakdown = {recon.value().item(), prior_term.value().item(), entropy_term.value().item(),
                     out.total.value().item()};
    return out;
}

ElboGraph elbo(const ModelParams& params, const Tensor& x, PriorKind prior, Rng& rng, double beta) {
    const Tensor noise = standard_normal(x.rows(), params.latent_dim, rng);
    return elbo(params, x, prior, noise, beta);
}

Tensor mean_image(const dataio::RawDataset& data) {
    if (data.size() == 0) throw ContractError("mean_image: empty dataset");
    const std::size_t n = data.size(), D = data.dim();
    Tensor out({D});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < D; ++j) out[j] += data.images(i, j);
    for (double& v : out.values()) v /= static_cast<double>(n);
    return out;
}

}  // namespace protovae::model
