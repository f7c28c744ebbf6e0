#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "protovae/evalkit/evalkit.hpp"
#include "protovae/model/vae.hpp"
#include "protovae/perturb/perturb.hpp"

namespace protovae::cli {

using Json = nlohmann::ordered_json;

struct SyntheticSource {
    std::size_t classes = 3;
    std::size_t dim = 64;
    double flip_rate = 0.05;
    std::size_t per_class = 100;
    double density = 0.5;
};

struct PerturbationSpec {
    double epsilon = 0.0;
    bool smooth_train = true;
    bool smooth_test = true;
    std::size_t remove_classes = 0;
    std::string responses;  // annotator count CSV, needed when remove_classes > 0
    perturb::EntropyGrouping grouping = perturb::EntropyGrouping::ground_truth;
};

struct DatasetSpec {
    std::string source = "mnist";  // mnist | cifar10 | synthetic
    std::string images, labels;    // mnist IDX pair
    std::vector<std::string> batches;  // cifar10 binary batches
    SyntheticSource synthetic;
    std::size_t train_size = 8000;
    std::size_t test_size = 2000;
    bool stratified = false;
    std::string binarize = "threshold";  // threshold | stochastic | none
    double threshold = 0.5;
    PerturbationSpec perturbation;
};

struct EvalSpec {
    std::size_t knn_k = 5;
    std::vector<std::size_t> kmeans_clusters{5, 10, 20, 50};
    evalkit::KMeansOptions kmeans;
    bool prototypes = true;
    bool projection = true;
    evalkit::EmbedMode embedding = evalkit::EmbedMode::mean;
    evalkit::ClassifierConfig classifier;
    std::string checkpoint;  // default <out>/checkpoint.pvck
};

struct SweepSpec {
    std::vector<std::string> priors;
    std::vector<std::size_t> K;
    std::vector<double> epsilon;
    std::vector<std::size_t> remove_classes;
};

/// Metric floors for CI gating: a metric row with this name and split below
/// `min` makes the run exit with the threshold status.
struct Threshold {
    std::string metric;
    std::string split = "test";
    double min = 0.0;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "runs/default";
    DatasetSpec dataset;
    model::TrainConfig model;
    EvalSpec eval;
    SweepSpec sweep;
    std::vector<Threshold> thresholds;
};

/// Defaults as a JSON document; every accepted key appears here.
Json default_config_json();

/// Applies `key.path=value` overrides. The value is parsed as JSON when it
/// parses, else taken as a string. Unknown paths are ConfigErrors.
void apply_override(Json& doc, const std::string& assignment);

/// Strict conversion: unknown keys, wrong types and invalid values raise
/// ConfigError naming the key.
ExperimentConfig parse_config(const Json& doc);

/// Canonical JSON with every default filled in.
Json to_json(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

}  // namespace protovae::cli
