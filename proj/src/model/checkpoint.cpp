#include "protovae/model/checkpoint.hpp"

#include <fstream>
#include <map>

#include "../common/binary_io.hpp"
#include "protovae/error.hpp"

namespace protovae::model {

namespace {

constexpr char kMagic[8] = {'P', 'V', 'C', 'K', 'P', 'T', '\0', '\1'};

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    detail::write_string(out, name);
    detail::write_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) detail::write_u64(out, d);
    for (double v : t.values()) detail::write_f64(out, v);
}

Tensor read_tensor(detail::Reader& r, std::string& name) {
    name = r.string();
    const std::uint32_t rank = r.u32();
    if (rank > 4) throw ParseError(r.what() + ": tensor " + name + " has rank " + std::to_string(rank));
    numgrad::Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const std::size_t count = numgrad::shape_size(shape);
    if (count > (std::size_t{1} << 32)) throw ParseError(r.what() + ": tensor " + name + " too large");
    Tensor t(shape);
    for (double& v : t.values()) v = r.f64();
    return t;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write " + path.string());
    out.write(kMagic, 8);
    const TrainConfig& c = ckpt.config;
    detail::write_string(out, to_string(c.prior));
    detail::write_u64(out, c.K);
    detail::write_u64(out, c.latent_dim);
    detail::write_u64(out, c.hidden_dim);
    detail::write_f64(out, c.learning_rate);
    detail::write_u64(out, c.batch_size);
    detail::write_u64(out, c.epochs);
    detail::write_u64(out, c.seed);
    detail::write_u64(out, c.warmup_epochs ? *c.warmup_epochs + 1 : 0);
    detail::write_string(out, ckpt.config_echo);

    detail::write_u64(out, ckpt.trace.size());
    for (const EpochStats& s : ckpt.trace) {
        detail::write_u64(out, s.epoch);
        detail::write_f64(out, s.beta);
        detail::write_f64(out, s.mean.reconstruction);
        detail::write_f64(out, s.mean.prior_term);
        detail::write_f64(out, s.mean.entropy_term);
        detail::write_f64(out, s.mean.total);
    }

    const auto params = ckpt.params.parameters();
    detail::write_u64(out, ckpt.params.input_dim);
    detail::write_u64(out, ckpt.params.hidden_dim);
    detail::write_u64(out, ckpt.params.latent_dim);
    detail::write_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const Var& v : params) write_tensor(out, v.name(), v.value());
    if (!out) throw ParseError("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint " + path.string());
    detail::Reader r(in, path.string());
    char magic[8];
    r.bytes(magic, 8);
    if (std::string(magic, 7) != std::string(kMagic, 7)) throw ParseError(path.string() + ": not a checkpoint");
    if (magic[7] != kMagic[7]) {
        throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(int(magic[7])));
    }
    Checkpoint ckpt;
    TrainConfig& c = ckpt.config;
    try {
        c.prior = prior_from_string(r.string());
    } catch (const ConfigError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    c.K = r.u64();
    c.latent_dim = r.u64();
    c.hidden_dim = r.u64();
    c.learning_rate = r.f64();
    c.batch_size = r.u64();
    c.epochs = r.u64();
    c.seed = r.u64();
    if (const std::uint64_t w = r.u64(); w > 0) c.warmup_epochs = w - 1;
    ckpt.config_echo = r.string();

    const std::uint64_t epochs = r.u64();
    if (epochs > (1u << 24)) throw ParseError(path.string() + ": implausible trace length");
    for (std::uint64_t e = 0; e < epochs; ++e) {
        EpochStats s;
        s.epoch = r.u64();
        s.beta = r.f64();
        s.mean.reconstruction = r.f64();
        s.mean.prior_term = r.f64();
        s.mean.entropy_term = r.f64();
        s.mean.total = r.f64();
        ckpt.trace.push_back(s);
    }

    ModelParams& p = ckpt.params;
    p.input_dim = r.u64();
    p.hidden_dim = r.u64();
    p.latent_dim = r.u64();
    std::map<std::string, Tensor> tensors;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name;
        Tensor t = read_tensor(r, name);
        tensors.emplace(std::move(name), std::move(t));
    }
    r.expect_end();

    auto take = [&](const std::string& name, numgrad::Shape shape) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ParseError(path.string() + ": missing tensor " + name);
        if (it->second.shape() != shape) {
            throw ParseError(path.string() + ": tensor " + name + " has shape " +
                             numgrad::shape_string(it->second.shape()) + ", expected " +
                             numgrad::shape_string(shape));
        }
        return Var::parameter(it->second, name);
    };
    const std::size_t D = p.input_dim, H = p.hidden_dim, L = p.latent_dim;
    p.encoder.w_hidden = take("encoder.w_hidden", {D, H});
    p.encoder.b_hidden = take("encoder.b_hidden", {H});
    p.encoder.w_mean = take("encoder.w_mean", {H, L});
    p.encoder.b_mean = take("encoder.b_mean", {L});
    p.encoder.w_log_var = take("encoder.w_log_var", {H, L});
    p.encoder.b_log_var = take("encoder.b_log_var", {L});
    p.decoder.w_hidden = take("decoder.w_hidden", {L, H});
    p.decoder.b_hidden = take("decoder.b_hidden", {H});
    p.decoder.w_logits = take("decoder.w_logits", {H, D});
    p.decoder.b_logits = take("decoder.b_logits", {D});
    if (auto it = tensors.find("bank.u"); it != tensors.end()) {
        if (it->second.rank() != 2 || it->second.cols() != D) throw ParseError(path.string() + ": bad bank shape");
        p.bank.u = Var::parameter(it->second, "bank.u");
    }
    if (tensors.size() != p.parameters().size()) throw ParseError(path.string() + ": unexpected extra tensors");
    return ckpt;
}

}  // namespace protovae::model
