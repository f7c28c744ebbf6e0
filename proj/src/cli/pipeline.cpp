#include "protovae/cli/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>

#include "protovae/cli/svg.hpp"
#include "protovae/error.hpp"
#include "protovae/evalkit/evalkit.hpp"
#include "protovae/model/checkpoint.hpp"
#include "protovae/perturb/perturb.hpp"

namespace protovae::cli {

namespace fs = std::filesystem;
using numgrad::Tensor;
using numgrad::Var;

namespace {

std::string hash_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

class Timings {
public:
    explicit Timings(fs::path dir) : path_(std::move(dir) / "timings.json") {
        if (fs::exists(path_)) {
            doc_ = Json::parse(read_text_file(path_), nullptr, false);
            if (doc_.is_discarded() || !doc_.is_object()) doc_ = Json::object();
        }
    }
    template <class F>
    auto time(const std::string& stage, F&& f) {
        const auto start = std::chrono::steady_clock::now();
        auto finish = [&] {
            doc_[stage] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        };
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            finish();
        } else {
            auto r = f();
            finish();
            return r;
        }
    }
    void save() const { write_text_file(path_, doc_.dump(2) + "\n"); }

private:
    fs::path path_;
    Json doc_ = Json::object();
};

// --- classifier cache -----------------------------------------------------------

constexpr char kClassifierMagic[8] = {'P', 'V', 'C', 'L', 'F', '\0', '\0', 1};

void write_classifier(const fs::path& path, const evalkit::SurrogateClassifier& c) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(kClassifierMagic, 8);
        const std::uint64_t classes = c.params.num_classes;
        out.write(reinterpret_cast<const char*>(&classes), 8);
        out.write(reinterpret_cast<const char*>(&c.train_accuracy), 8);
        for (const auto& v : c.params.parameters()) {
            const Tensor& t = v.value();
            const std::uint64_t rank = t.rank();
            out.write(reinterpret_cast<const char*>(&rank), 8);
            for (std::size_t d : t.shape()) {
                const std::uint64_t dim = d;
                out.write(reinterpret_cast<const char*>(&dim), 8);
            }
            out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
        }
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

evalkit::SurrogateClassifier read_classifier(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kClassifierMagic, 8) != 0) throw ParseError(path.string() + ": not a classifier cache");
    evalkit::SurrogateClassifier c;
    std::uint64_t classes = 0;
    in.read(reinterpret_cast<char*>(&classes), 8);
    in.read(reinterpret_cast<char*>(&c.train_accuracy), 8);
    c.params.num_classes = classes;
    Var* slots[] = {&c.params.w_hidden, &c.params.b_hidden, &c.params.w_out, &c.params.b_out};
    for (Var* slot : slots) {
        std::uint64_t rank = 0;
        in.read(reinterpret_cast<char*>(&rank), 8);
        if (!in || rank > 2) throw ParseError(path.string() + ": corrupt classifier cache");
        numgrad::Shape shape(rank);
        std::size_t count = 1;
        for (auto& d : shape) {
            std::uint64_t dim = 0;
            in.read(reinterpret_cast<char*>(&dim), 8);
            d = dim;
            count *= dim;
        }
        std::vector<double> values(count);
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * 8));
        if (!in) throw ParseError(path.string() + ": truncated classifier cache");
        *slot = Var::parameter(Tensor(shape, std::move(values)));
    }
    return c;
}

evalkit::SurrogateClassifier surrogate_for(const ExperimentConfig& cfg, const PreparedData& data, std::ostream& log) {
    const auto& f = cfg.eval.classifier;
    const Json spec = {{"data", data.key},         {"hidden", f.hidden},
                       {"epochs", f.epochs},        {"batch_size", f.batch_size},
                       {"learning_rate", f.learning_rate}, {"augment_rotation", f.augment_rotation},
                       {"augment_scale", f.augment_scale}, {"augment_shift", f.augment_shift},
                       {"seed", f.seed}};
    const fs::path path = cache_dir(cfg) / ("classifier-" + hash_hex(spec.dump()) + ".pvclf");
    if (fs::exists(path)) {
        log << "classifier: cached " << path.string() << "\n";
        return read_classifier(path);
    }
    log << "classifier: training (" << f.epochs << " epochs)\n";
    auto c = evalkit::train_surrogate_classifier(data.train, f);
    write_classifier(path, c);
    return c;
}

// --- data ------------------------------------------------------------------------

dataio::RawDataset load_source(const ExperimentConfig& cfg) {
    const auto& d = cfg.dataset;
    if (d.source == "mnist") return dataio::load_idx(d.images, d.labels);
    if (d.source == "cifar10") {
        std::vector<fs::path> batches(d.batches.begin(), d.batches.end());
        return dataio::load_cifar_binary(batches);
    }
    const auto& s = d.synthetic;
    return dataio::generate_synthetic(dataio::SyntheticSpec::random(s.classes, s.dim, s.flip_rate, s.per_class,
                                                                    derive_seed(cfg.seed, seed_stream::synthetic), s.density))
        .data;
}

dataio::RawDataset binarize_split(const ExperimentConfig& cfg, const dataio::RawDataset& data, std::uint64_t which) {
    const auto& d = cfg.dataset;
    if (d.binarize == "none") return data;
    dataio::Binarization how;
    how.mode = d.binarize == "threshold" ? dataio::BinarizeMode::threshold : dataio::BinarizeMode::stochastic;
    how.threshold = d.threshold;
    how.seed = derive_seed(derive_seed(cfg.seed, seed_stream::binarize), which);
    return dataio::binarize(data, how);
}

std::string cell_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// --- eval helpers ------------------------------------------------------------------

double mean_elbo(const model::ModelParams& params, const dataio::RawDataset& data, model::PriorKind prior, Rng& rng) {
    constexpr std::size_t kBatch = 500;
    double total = 0.0;
    for (std::size_t begin = 0; begin < data.size(); begin += kBatch) {
        const std::size_t end = std::min(data.size(), begin + kBatch);
        const auto g = model::elbo(params, data.images.slice_rows(begin, end), prior, rng, 1.0);
        total += g.breakdown.total * static_cast<double>(end - begin);
    }
    return total / static_cast<double>(data.size());
}

Json matrix_json(const Tensor& t) {
    Json out = Json::array();
    for (std::size_t i = 0; i < t.rows(); ++i) out.push_back({t(i, 0), t(i, 1)});
    return out;
}

Tensor matrix_from_json(const Json& rows) {
    Tensor t({rows.size(), 2});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        t(i, 0) = rows[i].at(0).get<double>();
        t(i, 1) = rows[i].at(1).get<double>();
    }
    return t;
}

std::string file_safe(std::string s) {
    for (char& c : s)
        if (c == '/' || c == ' ') c = '_';
    return s;
}

}  // namespace

fs::path cache_dir(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv(kCacheEnv); env && *env) return env;
    return fs::path(cfg.output_dir) / "cache";
}

PreparedData prepare_data(const ExperimentConfig& cfg, std::ostream& log) {
    PreparedData out;
    const Json spec = {{"dataset", to_json(cfg)["dataset"]}, {"seed", cfg.seed}};
    out.key = hash_hex(spec.dump());
    const fs::path dir = cache_dir(cfg) / ("dataset-" + out.key);
    if (fs::exists(dir / "test.pvd") && fs::exists(dir / "train.pvd")) {
        log << "data: cached " << dir.string() << "\n";
        out.train = dataio::read_cache(dir / "train.pvd");
        out.test = dataio::read_cache(dir / "test.pvd");
        return out;
    }

    const auto& d = cfg.dataset;
    const auto& p = d.perturbation;
    dataio::RawDataset raw = load_source(cfg);
    log << "data: loaded " << raw.size() << " x " << raw.dim() << " from " << d.source << "\n";
    if (p.remove_classes > 0) {
        const auto responses = perturb::read_response_csv(p.responses);
        if (responses.counts.rows() != raw.size()) {
            throw ContractError("response file has " + std::to_string(responses.counts.rows()) + " rows for " +
                                std::to_string(raw.size()) + " images");
        }
        const auto table = perturb::image_entropy(responses.counts, raw.labels, p.grouping);
        auto removal = perturb::remove_top_entropy_classes(raw, table, p.remove_classes);
        log << "data: removed classes";
        for (auto c : removal.removed) log << " " << (raw.class_names.empty() ? std::to_string(c) : raw.class_names[c]);
        log << "\n";
        raw = std::move(removal.data);
    }
    auto split = dataio::subsample_split(raw, d.train_size, d.test_size, derive_seed(cfg.seed, seed_stream::split),
                                         d.stratified);
    out.train = binarize_split(cfg, split.train, 0);
    out.test = binarize_split(cfg, split.test, 1);
    if (p.epsilon > 0 && (p.smooth_train || p.smooth_test)) {
        const auto pixels = perturb::fit_pixel_model(out.train);
        if (p.smooth_train) {
            out.train = perturb::smooth_noise(out.train, pixels, p.epsilon, derive_seed(cfg.seed, seed_stream::perturb_train));
        }
        if (p.smooth_test) {
            out.test = perturb::smooth_noise(out.test, pixels, p.epsilon, derive_seed(cfg.seed, seed_stream::perturb_test));
        }
        log << "data: smoothed with epsilon " << p.epsilon << "\n";
    }
    fs::create_directories(dir);
    dataio::write_cache(out.train, dir / "train.pvd");
    dataio::write_cache(out.test, dir / "test.pvd");
    return out;
}

void run_perturb(const ExperimentConfig& cfg, std::ostream& log) {
    const fs::path out = cfg.output_dir;
    Timings timings(out);
    const PreparedData data = timings.time("perturb", [&] { return prepare_data(cfg, log); });
    fs::create_directories(out / "data");
    dataio::write_cache(data.train, out / "data" / "train.pvd");
    dataio::write_cache(data.test, out / "data" / "test.pvd");
    const Json summary = {{"key", data.key},
                          {"train", {{"rows", data.train.size()}, {"dim", data.train.dim()}, {"classes", data.train.num_classes}}},
                          {"test", {{"rows", data.test.size()}, {"dim", data.test.dim()}, {"classes", data.test.num_classes}}},
                          {"config", to_json(cfg)}};
    write_text_file(out / "data" / "data.json", summary.dump(2) + "\n");
    timings.save();
    log << "perturb: wrote " << (out / "data").string() << "\n";
}

void run_train(const ExperimentConfig& cfg, std::ostream& log) {
    const fs::path out = cfg.output_dir;
    fs::create_directories(out);
    Timings timings(out);
    const PreparedData data = timings.time("data", [&] { return prepare_data(cfg, log); });
    log << "train: " << model::to_string(cfg.model.prior) << " prior, " << cfg.model.epochs << " epochs\n";
    auto result = timings.time("train", [&] {
        return model::train(data.train, cfg.model, [&log](const model::EpochStats& s) {
            log << "  epoch " << s.epoch << " elbo " << s.mean.total << " beta " << s.beta << "\n";
        });
    });
    model::Checkpoint ckpt{cfg.model, to_json(cfg).dump(), std::move(result.params), std::move(result.trace)};
    model::write_checkpoint(out / "checkpoint.pvck", ckpt);
    std::string csv = "epoch,beta,reconstruction,prior_term,entropy_term,elbo\n";
    for (const auto& s : ckpt.trace) {
        csv += std::to_string(s.epoch) + "," + format_number(s.beta) + "," + format_number(s.mean.reconstruction) + "," +
               format_number(s.mean.prior_term) + "," + format_number(s.mean.entropy_term) + "," +
               format_number(s.mean.total) + "\n";
    }
    write_text_file(out / "trace.csv", csv);
    timings.save();
}

Report run_eval(const ExperimentConfig& cfg, std::ostream& log) {
    const fs::path out = cfg.output_dir;
    const fs::path ckpt_path = cfg.eval.checkpoint.empty() ? out / "checkpoint.pvck" : fs::path(cfg.eval.checkpoint);
    if (!fs::exists(ckpt_path)) throw ContractError("missing checkpoint " + ckpt_path.string() + " (run train first)");
    Timings timings(out);
    const model::Checkpoint ckpt = model::read_checkpoint(ckpt_path);
    const PreparedData data = timings.time("data", [&] { return prepare_data(cfg, log); });
    if (ckpt.params.input_dim != data.train.dim()) {
        throw ContractError("checkpoint input width " + std::to_string(ckpt.params.input_dim) + " does not match data width " +
                            std::to_string(data.train.dim()));
    }
    const auto& params = ckpt.params;
    const auto prior = ckpt.config.prior;
    const bool vamp = prior == model::PriorKind::vamp;
    const std::string run_name = out.filename().string();

    std::vector<MetricRow> rows;
    auto add = [&](const std::string& metric, const std::string& split, double value) {
        if (!std::isfinite(value)) throw NumericError("metric " + metric + " (" + split + ") is not finite");
        MetricRow r;
        r.metric = metric;
        r.prior = model::to_string(prior);
        if (vamp) r.K = ckpt.config.K;
        r.epsilon = cfg.dataset.perturbation.epsilon;
        r.removed = cfg.dataset.perturbation.remove_classes;
        r.split = split;
        r.value = value;
        r.run = run_name;
        rows.push_back(std::move(r));
    };

    timings.time("elbo", [&] {
        Rng rng(derive_seed(cfg.seed, seed_stream::evaluation));
        add("elbo", "train", mean_elbo(params, data.train, prior, rng));
        add("elbo", "test", mean_elbo(params, data.test, prior, rng));
    });

    Rng embed_rng(derive_seed(cfg.seed, seed_stream::embedding));
    const auto mode = cfg.eval.embedding;
    const auto train_emb = evalkit::embed(data.train, params.encoder, mode, evalkit::SplitTag::train, &embed_rng);
    const auto test_emb = evalkit::embed(data.test, params.encoder, mode, evalkit::SplitTag::test, &embed_rng);

    timings.time("knn", [&] {
        add("knn_accuracy", "test", evalkit::knn_classify(train_emb, test_emb, cfg.eval.knn_k).accuracy);
    });

    Tensor prototype_embeddings;
    if (vamp) prototype_embeddings = model::encode(params.bank.pseudo_inputs(), params.encoder).mean.value();
    if (vamp && cfg.eval.prototypes) {
        timings.time("prototypes", [&] {
            const auto clf = surrogate_for(cfg, data, log);
            add("classifier_accuracy", "train", clf.train_accuracy);
            add("classifier_accuracy", "test", evalkit::accuracy(evalkit::classify(clf.params, data.test.images), data.test.labels));
            const auto labeling = evalkit::label_prototypes(params.bank, params, clf.params, mode, &embed_rng);
            prototype_embeddings = labeling.embeddings;
            add("prototype_accuracy", "train", evalkit::prototype_classify(train_emb, labeling).accuracy);
            add("prototype_accuracy", "test", evalkit::prototype_classify(test_emb, labeling).accuracy);
            add("prototype_coverage", "train", evalkit::coverage_bound(train_emb, labeling));
            add("prototype_coverage", "test", evalkit::coverage_bound(test_emb, labeling));
        });
    }

    if (!cfg.eval.kmeans_clusters.empty()) {
        timings.time("kmeans", [&] {
            const std::uint64_t seed = derive_seed(cfg.seed, seed_stream::kmeans);
            for (const auto* emb : {&train_emb, &test_emb}) {
                std::vector<std::size_t> clusters;
                for (std::size_t c : cfg.eval.kmeans_clusters)
                    if (c <= emb->size()) clusters.push_back(c);
                const auto curve = evalkit::kmeans_loss_curve(*emb, clusters, seed, cfg.eval.kmeans);
                for (std::size_t i = 0; i < clusters.size(); ++i) {
                    add("kmeans_loss@" + std::to_string(clusters[i]), evalkit::to_string(emb->source), curve[i]);
                }
            }
        });
    }

    RunRecord run;
    run.name = run_name;
    run.trace = ckpt.trace;
    run.artifacts["checkpoint"] = cfg.eval.checkpoint.empty() ? "checkpoint.pvck" : cfg.eval.checkpoint;
    run.artifacts["trace"] = "trace.csv";
    if (cfg.eval.projection) {
        const auto proj = evalkit::project_2d(test_emb, vamp ? &prototype_embeddings : nullptr);
        const Json doc = {{"coords", matrix_json(proj.coords)},
                          {"labels", test_emb.labels},
                          {"prototypes", vamp ? matrix_json(proj.extra_coords) : Json::array()},
                          {"eigenvalues", proj.eigenvalues}};
        write_text_file(out / "projection.json", doc.dump() + "\n");
        run.artifacts["projection"] = "projection.json";
    }

    Report report;
    report.config = to_json(cfg);
    report.runs.push_back(std::move(run));
    report.metrics = std::move(rows);
    write_report(out, report);
    timings.save();
    for (const auto& r : report.metrics) log << "  " << r.metric << " [" << r.split << "] " << r.value << "\n";
    return report;
}

std::vector<std::pair<std::string, ExperimentConfig>> sweep_cells(const ExperimentConfig& cfg) {
    const auto& s = cfg.sweep;
    const std::vector<std::string> priors = s.priors.empty() ? std::vector<std::string>{model::to_string(cfg.model.prior)} : s.priors;
    const std::vector<std::size_t> Ks = s.K.empty() ? std::vector<std::size_t>{cfg.model.K} : s.K;
    const std::vector<double> eps = s.epsilon.empty() ? std::vector<double>{cfg.dataset.perturbation.epsilon} : s.epsilon;
    const std::vector<std::size_t> ms =
        s.remove_classes.empty() ? std::vector<std::size_t>{cfg.dataset.perturbation.remove_classes} : s.remove_classes;

    std::vector<std::pair<std::string, ExperimentConfig>> cells;
    for (const auto& prior : priors) {
        const bool vamp = model::prior_from_string(prior) == model::PriorKind::vamp;
        for (std::size_t ki = 0; ki < (vamp ? Ks.size() : 1); ++ki) {
            for (double e : eps) {
                for (std::size_t m : ms) {
                    const std::string name = (vamp ? prior + "-K" + std::to_string(Ks[ki]) : prior) + "_eps" + cell_number(e) +
                                             "_m" + std::to_string(m);
                    Json doc = to_json(cfg);
                    doc["model"]["prior"] = prior;
                    if (vamp) doc["model"]["K"] = Ks[ki];
                    doc["dataset"]["perturbation"]["epsilon"] = e;
                    doc["dataset"]["perturbation"]["remove_classes"] = m;
                    doc["sweep"] = {{"priors", Json::array()}, {"K", Json::array()}, {"epsilon", Json::array()}, {"remove_classes", Json::array()}};
                    doc["output_dir"] = (fs::path(cfg.output_dir) / "cells" / name).string();
                    doc["thresholds"] = Json::array();
                    // A configured cache stays shared; otherwise cells share the sweep's cache.
                    cells.emplace_back(name, parse_config(doc));
                }
            }
        }
    }
    return cells;
}

namespace {

// Results do not depend on where they are written, so a moved sweep resumes.
bool same_run(Json stored, const ExperimentConfig& cell) {
    if (!stored.is_object()) return false;
    Json current = to_json(cell);
    stored.erase("output_dir");
    current.erase("output_dir");
    return stored.dump() == current.dump();
}

}  // namespace

Report run_sweep(const ExperimentConfig& cfg, std::ostream& log) {
    const fs::path out = cfg.output_dir;
    const auto cells = sweep_cells(cfg);
    Report aggregate;
    aggregate.config = to_json(cfg);
    const bool shared_cache = std::getenv(kCacheEnv) && *std::getenv(kCacheEnv);
    if (!shared_cache) setenv(kCacheEnv, (out / "cache").c_str(), 1);
    std::size_t index = 0;
    try {
        for (const auto& [name, cell] : cells) {
            ++index;
            const fs::path dir = cell.output_dir;
            const fs::path done = dir / "report.json";
            Report r;
            bool finished = false;
            if (fs::exists(done)) {
                r = read_report(done);
                finished = same_run(r.config, cell);
            }
            if (finished) {
                log << "sweep [" << index << "/" << cells.size() << "] " << name << ": done, skipping\n";
            } else {
                log << "sweep [" << index << "/" << cells.size() << "] " << name << "\n";
                bool trained = false;
                if (fs::exists(dir / "checkpoint.pvck")) {
                    const std::string echo = model::read_checkpoint(dir / "checkpoint.pvck").config_echo;
                    trained = same_run(Json::parse(echo, nullptr, false), cell);
                }
                if (!trained) run_train(cell, log);
                r = run_eval(cell, log);
            }
            for (auto& run : r.runs) {
                for (auto& [key, value] : run.artifacts.items()) {
                    if (value.is_string()) value = (fs::path("cells") / name / value.get<std::string>()).string();
                }
                aggregate.runs.push_back(std::move(run));
            }
            for (auto& row : r.metrics) aggregate.metrics.push_back(std::move(row));
        }
    } catch (...) {
        if (!shared_cache) unsetenv(kCacheEnv);
        throw;
    }
    if (!shared_cache) unsetenv(kCacheEnv);
    write_report(out, aggregate);
    return aggregate;
}

void run_report(const ExperimentConfig& cfg, std::ostream& log) {
    const fs::path out = cfg.output_dir;
    const fs::path src = out / "report.json";
    if (!fs::exists(src)) throw ContractError("no report at " + src.string() + " (run eval or sweep first)");
    const Report report = read_report(src);
    if (report.metrics.empty()) throw ContractError("report " + src.string() + " has no metric rows; nothing to render");

    // Render everything in memory first so a failure leaves no partial output.
    std::vector<std::pair<fs::path, std::string>> files;
    files.emplace_back(out / "metrics.csv", metrics_csv(report.metrics));
    files.emplace_back(out / "table.csv", pivot_csv(report.metrics));
    files.emplace_back(out / "table.json", pivot_table(report.metrics).dump(2) + "\n");

    // k-means loss curves, one series per run and split.
    std::vector<LineSeries> curves;
    for (const auto& row : report.metrics) {
        if (row.metric.rfind("kmeans_loss@", 0) != 0) continue;
        const double clusters = std::stod(row.metric.substr(std::strlen("kmeans_loss@")));
        const std::string name = row.run + " (" + row.split + ")";
        auto it = std::find_if(curves.begin(), curves.end(), [&](const LineSeries& s) { return s.name == name; });
        if (it == curves.end()) it = curves.insert(curves.end(), LineSeries{name, {}, {}});
        it->x.push_back(clusters);
        it->y.push_back(row.value);
    }
    if (!curves.empty()) {
        files.emplace_back(out / "kmeans_loss.svg", render_line_plot(curves, "clusters", "loss per datapoint", "k-means loss"));
    }

    std::vector<LineSeries> traces;
    for (const auto& run : report.runs) {
        LineSeries s{run.name, {}, {}};
        for (const auto& e : run.trace) {
            s.x.push_back(static_cast<double>(e.epoch));
            s.y.push_back(e.mean.total);
        }
        if (!s.x.empty()) traces.push_back(std::move(s));
    }
    if (!traces.empty()) files.emplace_back(out / "elbo_trace.svg", render_line_plot(traces, "epoch", "ELBO", "training ELBO"));

    // KNN accuracy against smoothing, one series per prior/K/removal.
    std::set<double> eps_values;
    for (const auto& row : report.metrics)
        if (row.metric == "knn_accuracy") eps_values.insert(row.epsilon);
    if (eps_values.size() > 1) {
        std::vector<LineSeries> knn;
        for (const auto& row : report.metrics) {
            if (row.metric != "knn_accuracy") continue;
            const std::string name = row.prior + (row.K ? " K=" + std::to_string(*row.K) : "") + " m=" + std::to_string(row.removed);
            auto it = std::find_if(knn.begin(), knn.end(), [&](const LineSeries& s) { return s.name == name; });
            if (it == knn.end()) it = knn.insert(knn.end(), LineSeries{name, {}, {}});
            it->x.push_back(row.epsilon);
            it->y.push_back(row.value);
        }
        files.emplace_back(out / "knn_vs_epsilon.svg", render_line_plot(knn, "epsilon", "KNN accuracy", "KNN accuracy"));
    }

    for (const auto& run : report.runs) {
        if (!run.artifacts.contains("projection")) continue;
        const fs::path p = out / run.artifacts["projection"].get<std::string>();
        const Json doc = Json::parse(read_text_file(p), nullptr, false);
        if (doc.is_discarded()) throw ParseError(p.string() + " is not valid JSON");
        const Tensor coords = matrix_from_json(doc.at("coords"));
        const auto labels = doc.at("labels").get<std::vector<std::int32_t>>();
        const Tensor protos = doc.at("prototypes").empty() ? Tensor() : matrix_from_json(doc.at("prototypes"));
        files.emplace_back(out / ("projection_" + file_safe(run.name) + ".svg"),
                           render_projection_plot(coords, labels, protos, run.name));
    }

    for (const auto& [path, text] : files) {
        write_text_file(path, text);
        log << "report: wrote " << path.string() << "\n";
    }
}

std::vector<std::string> threshold_failures(const ExperimentConfig& cfg, const std::vector<MetricRow>& rows) {
    std::vector<std::string> out;
    for (const auto& t : cfg.thresholds) {
        bool seen = false;
        for (const auto& r : rows) {
            if (r.metric != t.metric || r.split != t.split) continue;
            seen = true;
            if (r.value < t.min) {
                out.push_back(r.metric + " [" + r.split + "] of " + r.run + " is " + format_number(r.value) +
                              ", below " + format_number(t.min));
            }
        }
        if (!seen) out.push_back("threshold metric " + t.metric + " [" + t.split + "] was not produced");
    }
    return out;
}

int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& log) {
    std::vector<MetricRow> rows;
    if (command == "perturb") {
        run_perturb(cfg, log);
    } else if (command == "train") {
        run_train(cfg, log);
    } else if (command == "eval") {
        rows = run_eval(cfg, log).metrics;
    } else if (command == "sweep") {
        rows = run_sweep(cfg, log).metrics;
    } else if (command == "report") {
        run_report(cfg, log);
        rows = read_report(fs::path(cfg.output_dir) / "report.json").metrics;
    } else {
        throw ConfigError("unknown subcommand '" + command + "'");
    }
    if (command == "perturb" || command == "train") return kExitOk;
    const auto failures = threshold_failures(cfg, rows);
    for (const auto& f : failures) log << "threshold: " << f << "\n";
    return failures.empty() ? kExitOk : kExitThreshold;
}

}  // namespace protovae::cli
