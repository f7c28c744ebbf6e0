#include "protovae/cli/config.hpp"

#include <fstream>
#include <set>

#include "protovae/error.hpp"

namespace protovae::cli {

namespace {

std::string join(const std::string& prefix, const std::string& key) { return prefix.empty() ? key : prefix + "." + key; }

// Recursively overlays `user` onto `base`, rejecting keys that `base` lacks.
void strict_merge(Json& base, const Json& user, const std::string& path) {
    if (!user.is_object()) throw ConfigError(path.empty() ? "config must be a JSON object" : path + ": expected an object");
    for (const auto& [key, value] : user.items()) {
        const std::string where = join(path, key);
        if (!base.contains(key)) throw ConfigError("unknown config key '" + where + "'");
        Json& slot = base[key];
        if (slot.is_object()) {
            strict_merge(slot, value, where);
        } else {
            slot = value;
        }
    }
}

class Reader {
public:
    explicit Reader(const Json& doc) : doc_(doc) {}

    const Json& at(const std::string& path) const {
        const Json* node = &doc_;
        std::size_t start = 0;
        while (true) {
            const std::size_t dot = path.find('.', start);
            node = &node->at(path.substr(start, dot - start));
            if (dot == std::string::npos) return *node;
            start = dot + 1;
        }
    }

    std::string str(const std::string& path) const {
        const Json& v = at(path);
        if (!v.is_string()) fail(path, "expected a string");
        return v.get<std::string>();
    }
    bool boolean(const std::string& path) const {
        const Json& v = at(path);
        if (!v.is_boolean()) fail(path, "expected true or false");
        return v.get<bool>();
    }
    double number(const std::string& path) const {
        const Json& v = at(path);
        if (!v.is_number()) fail(path, "expected a number");
        return v.get<double>();
    }
    std::size_t count(const std::string& path) const { return count_value(at(path), path); }
    std::uint64_t u64(const std::string& path) const {
        const Json& v = at(path);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            fail(path, "expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }
    template <class T, class F>
    std::vector<T> list(const std::string& path, F element) const {
        const Json& v = at(path);
        if (!v.is_array()) fail(path, "expected an array");
        std::vector<T> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(element(v[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }

    [[noreturn]] static void fail(const std::string& path, const std::string& what) {
        throw ConfigError("config key '" + path + "': " + what);
    }
    static std::size_t count_value(const Json& v, const std::string& path) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(path, "expected a non-negative integer");
        return v.get<std::size_t>();
    }

private:
    const Json& doc_;
};

void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) Reader::fail(path, what);
}

}  // namespace

Json to_json(const ExperimentConfig& c) {
    const auto& d = c.dataset;
    const auto& p = d.perturbation;
    const auto& m = c.model;
    const auto& e = c.eval;
    Json thresholds = Json::array();
    for (const auto& t : c.thresholds) thresholds.push_back({{"metric", t.metric}, {"split", t.split}, {"min", t.min}});
    return Json{
        {"seed", c.seed},
        {"output_dir", c.output_dir},
        {"dataset",
         {{"source", d.source},
          {"images", d.images},
          {"labels", d.labels},
          {"batches", d.batches},
          {"synthetic",
           {{"classes", d.synthetic.classes},
            {"dim", d.synthetic.dim},
            {"flip_rate", d.synthetic.flip_rate},
            {"per_class", d.synthetic.per_class},
            {"density", d.synthetic.density}}},
          {"train_size", d.train_size},
          {"test_size", d.test_size},
          {"stratified", d.stratified},
          {"binarize", d.binarize},
          {"threshold", d.threshold},
          {"perturbation",
           {{"epsilon", p.epsilon},
            {"smooth_train", p.smooth_train},
            {"smooth_test", p.smooth_test},
            {"remove_classes", p.remove_classes},
            {"responses", p.responses},
            {"grouping", p.grouping == perturb::EntropyGrouping::ground_truth ? "ground_truth" : "human_majority"}}}}},
        {"model",
         {{"prior", model::to_string(m.prior)},
          {"K", m.K},
          {"latent_dim", m.latent_dim},
          {"hidden_dim", m.hidden_dim},
          {"learning_rate", m.learning_rate},
          {"batch_size", m.batch_size},
          {"epochs", m.epochs},
          {"warmup_epochs", m.warmup_epochs ? Json(*m.warmup_epochs) : Json(nullptr)}}},
        {"eval",
         {{"knn_k", e.knn_k},
          {"kmeans_clusters", e.kmeans_clusters},
          {"kmeans_restarts", e.kmeans.restarts},
          {"kmeans_max_iterations", e.kmeans.max_iterations},
          {"prototypes", e.prototypes},
          {"projection", e.projection},
          {"embedding", e.embedding == evalkit::EmbedMode::mean ? "mean" : "sample"},
          {"checkpoint", e.checkpoint},
          {"classifier",
           {{"hidden", e.classifier.hidden},
            {"epochs", e.classifier.epochs},
            {"batch_size", e.classifier.batch_size},
            {"learning_rate", e.classifier.learning_rate},
            {"augment_rotation", e.classifier.augment_rotation},
            {"augment_scale", e.classifier.augment_scale},
            {"augment_shift", e.classifier.augment_shift}}}}},
        {"sweep", {{"priors", c.sweep.priors}, {"K", c.sweep.K}, {"epsilon", c.sweep.epsilon}, {"remove_classes", c.sweep.remove_classes}}},
        {"thresholds", thresholds},
    };
}

Json default_config_json() {
    ExperimentConfig c;
    c.dataset.images = "data/mnist/mnist-images-idx3-ubyte";
    c.dataset.labels = "data/mnist/mnist-labels-idx1-ubyte";
    c.eval.classifier.epochs = 100;
    c.eval.classifier.learning_rate = 2e-3;
    c.eval.classifier.augment_rotation = 12.0;
    c.eval.classifier.augment_scale = 0.1;
    c.eval.classifier.augment_shift = 2.0;
    return to_json(c);
}

void apply_override(Json& doc, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    Json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (!node->is_object() || !node->contains(key)) throw ConfigError("unknown config key '" + path + "'");
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    if (node->is_object()) {
        strict_merge(*node, value, path);
    } else {
        *node = std::move(value);
    }
}

ExperimentConfig parse_config(const Json& user) {
    Json doc = default_config_json();
    strict_merge(doc, user, "");
    const Reader r(doc);
    ExperimentConfig c;

    c.seed = r.u64("seed");
    c.output_dir = r.str("output_dir");
    require(!c.output_dir.empty(), "output_dir", "must not be empty");

    auto& d = c.dataset;
    d.source = r.str("dataset.source");
    require(d.source == "mnist" || d.source == "cifar10" || d.source == "synthetic", "dataset.source",
            "expected mnist, cifar10 or synthetic");
    d.images = r.str("dataset.images");
    d.labels = r.str("dataset.labels");
    d.batches = r.list<std::string>("dataset.batches", [](const Json& v, const std::string& path) {
        if (!v.is_string()) Reader::fail(path, "expected a string");
        return v.get<std::string>();
    });
    if (d.source == "mnist") require(!d.images.empty() && !d.labels.empty(), "dataset.images", "mnist needs images and labels");
    if (d.source == "cifar10") require(!d.batches.empty(), "dataset.batches", "cifar10 needs at least one batch file");
    d.synthetic.classes = r.count("dataset.synthetic.classes");
    d.synthetic.dim = r.count("dataset.synthetic.dim");
    d.synthetic.flip_rate = r.number("dataset.synthetic.flip_rate");
    d.synthetic.per_class = r.count("dataset.synthetic.per_class");
    d.synthetic.density = r.number("dataset.synthetic.density");
    if (d.source == "synthetic") {
        require(d.synthetic.classes >= 2, "dataset.synthetic.classes", "must be at least 2");
        require(d.synthetic.dim >= 1, "dataset.synthetic.dim", "must be positive");
        require(d.synthetic.flip_rate >= 0 && d.synthetic.flip_rate < 0.5, "dataset.synthetic.flip_rate", "must be in [0, 0.5)");
        require(d.synthetic.per_class >= 1, "dataset.synthetic.per_class", "must be positive");
    }
    d.train_size = r.count("dataset.train_size");
    d.test_size = r.count("dataset.test_size");
    require(d.train_size >= 1, "dataset.train_size", "must be positive");
    require(d.test_size >= 1, "dataset.test_size", "must be positive");
    d.stratified = r.boolean("dataset.stratified");
    d.binarize = r.str("dataset.binarize");
    require(d.binarize == "threshold" || d.binarize == "stochastic" || d.binarize == "none", "dataset.binarize",
            "expected threshold, stochastic or none");
    d.threshold = r.number("dataset.threshold");
    require(d.threshold > 0 && d.threshold <= 1, "dataset.threshold", "must be in (0, 1]");

    auto& p = d.perturbation;
    p.epsilon = r.number("dataset.perturbation.epsilon");
    require(p.epsilon >= 0, "dataset.perturbation.epsilon", "must be non-negative");
    p.smooth_train = r.boolean("dataset.perturbation.smooth_train");
    p.smooth_test = r.boolean("dataset.perturbation.smooth_test");
    p.remove_classes = r.count("dataset.perturbation.remove_classes");
    p.responses = r.str("dataset.perturbation.responses");
    require(p.remove_classes == 0 || !p.responses.empty(), "dataset.perturbation.responses",
            "class removal needs an annotator response file");
    const std::string grouping = r.str("dataset.perturbation.grouping");
    require(grouping == "ground_truth" || grouping == "human_majority", "dataset.perturbation.grouping",
            "expected ground_truth or human_majority");
    p.grouping = grouping == "ground_truth" ? perturb::EntropyGrouping::ground_truth : perturb::EntropyGrouping::human_majority;
    require(p.epsilon == 0 || d.binarize != "none", "dataset.perturbation.epsilon", "smoothing needs binarized data");

    auto& m = c.model;
    try {
        m.prior = model::prior_from_string(r.str("model.prior"));
    } catch (const ConfigError& e) {
        Reader::fail("model.prior", e.what());
    }
    m.K = r.count("model.K");
    m.latent_dim = r.count("model.latent_dim");
    m.hidden_dim = r.count("model.hidden_dim");
    m.learning_rate = r.number("model.learning_rate");
    m.batch_size = r.count("model.batch_size");
    m.epochs = r.count("model.epochs");
    if (!r.at("model.warmup_epochs").is_null()) m.warmup_epochs = r.count("model.warmup_epochs");
    m.seed = c.seed;
    try {
        m.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config section 'model': ") + e.what());
    }
    if (m.prior == model::PriorKind::vamp) {
        require(m.K < d.train_size, "model.K", "must be smaller than dataset.train_size");
    }

    auto& e = c.eval;
    e.knn_k = r.count("eval.knn_k");
    require(e.knn_k >= 1 && e.knn_k <= d.train_size, "eval.knn_k", "must be in [1, dataset.train_size]");
    e.kmeans_clusters = r.list<std::size_t>("eval.kmeans_clusters", Reader::count_value);
    for (std::size_t i = 0; i < e.kmeans_clusters.size(); ++i) {
        require(e.kmeans_clusters[i] >= 1 && e.kmeans_clusters[i] <= d.test_size, "eval.kmeans_clusters",
                "entries must be in [1, dataset.test_size]");
        require(i == 0 || e.kmeans_clusters[i] > e.kmeans_clusters[i - 1], "eval.kmeans_clusters", "must ascend");
    }
    e.kmeans.restarts = r.count("eval.kmeans_restarts");
    e.kmeans.max_iterations = r.count("eval.kmeans_max_iterations");
    require(e.kmeans.restarts >= 1, "eval.kmeans_restarts", "must be positive");
    e.prototypes = r.boolean("eval.prototypes");
    e.projection = r.boolean("eval.projection");
    const std::string embedding = r.str("eval.embedding");
    require(embedding == "mean" || embedding == "sample", "eval.embedding", "expected mean or sample");
    e.embedding = embedding == "mean" ? evalkit::EmbedMode::mean : evalkit::EmbedMode::sample;
    e.checkpoint = r.str("eval.checkpoint");
    auto& f = e.classifier;
    f.hidden = r.count("eval.classifier.hidden");
    f.epochs = r.count("eval.classifier.epochs");
    f.batch_size = r.count("eval.classifier.batch_size");
    f.learning_rate = r.number("eval.classifier.learning_rate");
    f.augment_rotation = r.number("eval.classifier.augment_rotation");
    f.augment_scale = r.number("eval.classifier.augment_scale");
    f.augment_shift = r.number("eval.classifier.augment_shift");
    require(f.hidden >= 1, "eval.classifier.hidden", "must be positive");
    require(f.batch_size >= 1, "eval.classifier.batch_size", "must be positive");
    require(f.learning_rate > 0, "eval.classifier.learning_rate", "must be positive");
    require(f.augment_rotation >= 0 && f.augment_scale >= 0 && f.augment_scale < 1 && f.augment_shift >= 0,
            "eval.classifier", "augmentation limits must be non-negative (scale below 1)");
    f.seed = derive_seed(c.seed, seed_stream::classifier);

    auto& s = c.sweep;
    s.priors = r.list<std::string>("sweep.priors", [](const Json& v, const std::string& path) {
        if (!v.is_string()) Reader::fail(path, "expected a string");
        try {
            model::prior_from_string(v.get<std::string>());
        } catch (const ConfigError& err) {
            Reader::fail(path, err.what());
        }
        return v.get<std::string>();
    });
    s.K = r.list<std::size_t>("sweep.K", Reader::count_value);
    for (std::size_t k : s.K) require(k >= 1 && k < d.train_size, "sweep.K", "entries must be in [1, dataset.train_size)");
    s.epsilon = r.list<double>("sweep.epsilon", [](const Json& v, const std::string& path) {
        if (!v.is_number() || v.get<double>() < 0) Reader::fail(path, "expected a non-negative number");
        return v.get<double>();
    });
    s.remove_classes = r.list<std::size_t>("sweep.remove_classes", Reader::count_value);
    for (std::size_t m_ : s.remove_classes) {
        require(m_ == 0 || !p.responses.empty(), "sweep.remove_classes", "class removal needs dataset.perturbation.responses");
    }

    const Json& th = r.at("thresholds");
    require(th.is_array(), "thresholds", "expected an array");
    for (std::size_t i = 0; i < th.size(); ++i) {
        const std::string where = "thresholds[" + std::to_string(i) + "]";
        require(th[i].is_object(), where, "expected an object");
        for (const auto& [key, value] : th[i].items()) {
            require(key == "metric" || key == "split" || key == "min", where + "." + key, "unknown key");
        }
        Threshold t;
        require(th[i].contains("metric") && th[i]["metric"].is_string(), where + ".metric", "expected a string");
        require(th[i].contains("min") && th[i]["min"].is_number(), where + ".min", "expected a number");
        t.metric = th[i]["metric"].get<std::string>();
        t.min = th[i]["min"].get<double>();
        if (th[i].contains("split")) {
            require(th[i]["split"].is_string(), where + ".split", "expected a string");
            t.split = th[i]["split"].get<std::string>();
        }
        c.thresholds.push_back(t);
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    Json user = Json::parse(in, nullptr, false);
    if (user.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
    Json doc = default_config_json();
    strict_merge(doc, user, "");
    for (const auto& o : overrides) apply_override(doc, o);
    return parse_config(doc);
}

}  // namespace protovae::cli
