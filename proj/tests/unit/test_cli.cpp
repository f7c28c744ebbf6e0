#include <gtest/gtest.h>

#include <cstdlib>
#include <regex>
#include <sstream>

#include "protovae/cli/config.hpp"
#include "protovae/cli/pipeline.hpp"
#include "protovae/cli/report.hpp"
#include "protovae/cli/svg.hpp"
#include "protovae/error.hpp"

using namespace protovae;
using namespace protovae::cli;
namespace fs = std::filesystem;
using numgrad::Tensor;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("protovae_cli_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Json tiny_config(const fs::path& out) {
    return Json{{"seed", 3},
                {"output_dir", out.string()},
                {"dataset",
                 {{"source", "synthetic"},
                  {"synthetic", {{"classes", 3}, {"dim", 16}, {"flip_rate", 0.05}, {"per_class", 40}}},
                  {"train_size", 90},
                  {"test_size", 30},
                  {"binarize", "none"}}},
                {"model",
                 {{"prior", "vamp"}, {"K", 4}, {"latent_dim", 2}, {"hidden_dim", 8}, {"learning_rate", 0.01}, {"batch_size", 30}, {"epochs", 4}}},
                {"eval",
                 {{"kmeans_clusters", {2, 3}},
                  {"kmeans_restarts", 2},
                  {"classifier",
                   {{"hidden", 8}, {"epochs", 5}, {"batch_size", 30}, {"learning_rate", 0.01}, {"augment_rotation", 0},
                    {"augment_scale", 0}, {"augment_shift", 0}}}}}};
}

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

double attr(const std::string& svg, const std::string& name) {
    const std::regex re(name + "=\"([^\"]+)\"");
    std::smatch m;
    if (!std::regex_search(svg, m, re)) throw std::runtime_error("attribute " + name + " missing");
    return std::stod(m[1]);
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

// Keeps PROTOVAE_CACHE_DIR out of tests that expect the default location.
struct CacheEnvGuard {
    std::string saved;
    bool had = false;
    CacheEnvGuard() {
        if (const char* v = std::getenv(kCacheEnv)) {
            had = true;
            saved = v;
        }
        unsetenv(kCacheEnv);
    }
    ~CacheEnvGuard() {
        if (had) setenv(kCacheEnv, saved.c_str(), 1);
        else unsetenv(kCacheEnv);
    }
};

}  // namespace

// --- config -------------------------------------------------------------------------

TEST(Config, DefaultsMatchTrainingSettings) {
    const ExperimentConfig c = parse_config(Json::object());
    EXPECT_EQ(c.model.learning_rate, 5e-4);
    EXPECT_EQ(c.model.batch_size, 100u);
    EXPECT_EQ(c.model.latent_dim, 40u);
    EXPECT_EQ(c.model.hidden_dim, 300u);
    EXPECT_EQ(c.model.epochs, 40u);
    EXPECT_EQ(c.model.K, 500u);
    EXPECT_EQ(c.eval.knn_k, 5u);
    EXPECT_EQ(c.eval.kmeans.restarts, 10u);
    EXPECT_EQ(c.eval.kmeans.max_iterations, 100u);
    EXPECT_EQ(c.eval.kmeans_clusters, (std::vector<std::size_t>{5, 10, 20, 50}));
    EXPECT_EQ(c.dataset.train_size, 8000u);
    EXPECT_EQ(c.dataset.test_size, 2000u);
    EXPECT_EQ(c.eval.embedding, evalkit::EmbedMode::mean);
}

TEST(Config, RoundTripsThroughJson) {
    const ExperimentConfig a = parse_config(tiny_config("/tmp/x"));
    const ExperimentConfig b = parse_config(to_json(a));
    EXPECT_EQ(to_json(a), to_json(b));
}

TEST(Config, UnknownKeysAreNamed) {
    Json doc = tiny_config("/tmp/x");
    doc["dataset"]["colour"] = 1;
    EXPECT_NE(message_of([&] { parse_config(doc); }).find("dataset.colour"), std::string::npos);
    EXPECT_THROW(parse_config(Json{{"bogus", 1}}), ConfigError);
}

TEST(Config, BadValuesNameTheKey) {
    const std::pair<std::string, Json> cases[] = {
        {"model.epochs", Json{{"model", {{"epochs", "ten"}}}}},
        {"dataset.binarize", Json{{"dataset", {{"binarize", "maybe"}}}}},
        {"dataset.perturbation.epsilon", Json{{"dataset", {{"perturbation", {{"epsilon", -0.1}}}}}}},
        {"model.prior", Json{{"model", {{"prior", "gaussian"}}}}},
        {"model.K", Json{{"dataset", {{"train_size", 100}}}, {"model", {{"prior", "vamp"}, {"K", 100}}}}},
        {"eval.kmeans_clusters", Json{{"eval", {{"kmeans_clusters", {10, 5}}}}}},
        {"dataset.perturbation.responses", Json{{"dataset", {{"perturbation", {{"remove_classes", 2}}}}}}},
        {"thresholds[0].min", Json{{"thresholds", {{{"metric", "knn_accuracy"}}}}}},
    };
    for (const auto& [key, doc] : cases) {
        SCOPED_TRACE(key);
        EXPECT_THROW(parse_config(doc), ConfigError);
        EXPECT_NE(message_of([&] { parse_config(doc); }).find(key), std::string::npos);
    }
}

TEST(Config, OverridesParseJsonOrFallBackToString) {
    Json doc = default_config_json();
    apply_override(doc, "model.epochs=3");
    apply_override(doc, "model.prior=vamp");
    apply_override(doc, "eval.kmeans_clusters=[2,4]");
    apply_override(doc, "dataset.synthetic={\"classes\": 4}");
    const ExperimentConfig c = parse_config(doc);
    EXPECT_EQ(c.model.epochs, 3u);
    EXPECT_EQ(c.model.prior, model::PriorKind::vamp);
    EXPECT_EQ(c.eval.kmeans_clusters, (std::vector<std::size_t>{2, 4}));
    EXPECT_EQ(c.dataset.synthetic.classes, 4u);
    EXPECT_EQ(c.dataset.synthetic.dim, 64u);
    EXPECT_THROW(apply_override(doc, "model.depth=3"), ConfigError);
    EXPECT_THROW(apply_override(doc, "model.epochs"), ConfigError);
    EXPECT_THROW(apply_override(doc, "dataset.synthetic={\"colour\": 1}"), ConfigError);
}

TEST(Config, SeedsFanOut) {
    const ExperimentConfig c = parse_config(Json{{"seed", 11}});
    EXPECT_EQ(c.model.seed, 11u);
    EXPECT_EQ(c.eval.classifier.seed, derive_seed(11, seed_stream::classifier));
}

// --- svg ----------------------------------------------------------------------------

TEST(Svg, ThreePointsOnePrototypeGiveFourMarks) {
    const Tensor coords = Tensor::matrix({{0, 0}, {1, 2}, {-1, 1}});
    const std::vector<std::int32_t> labels = {0, 1, 1};
    const Tensor protos = Tensor::matrix({{0.5, 0.5}});
    const std::string svg = render_projection_plot(coords, labels, protos);
    EXPECT_EQ(count(svg, "<circle") + count(svg, "<rect"), 4u);
    EXPECT_EQ(count(svg, "<rect"), 1u);
}

TEST(Svg, IdenticalInputsGiveIdenticalBytes) {
    const Tensor coords = Tensor::matrix({{0.1, 0.3}, {1.7, -2}, {-1, 1e-3}});
    const std::vector<std::int32_t> labels = {2, 0, 1};
    EXPECT_EQ(render_projection_plot(coords, labels, Tensor(), "t"), render_projection_plot(coords, labels, Tensor(), "t"));
    const LineSeries s[] = {{"a", {1, 2, 3}, {3, 2, 1}}};
    EXPECT_EQ(render_line_plot(s, "x", "y"), render_line_plot(s, "x", "y"));
}

TEST(Svg, AxisRangesHaveFivePercentMargins) {
    const Tensor coords = Tensor::matrix({{-2, 10}, {3, 30}, {0, 20}});
    const std::vector<std::int32_t> labels = {0, 0, 1};
    const Tensor protos = Tensor::matrix({{4, 15}});
    const std::string svg = render_projection_plot(coords, labels, protos);
    EXPECT_DOUBLE_EQ(attr(svg, "data-x-min"), -2 - 0.05 * 6);
    EXPECT_DOUBLE_EQ(attr(svg, "data-x-max"), 4 + 0.05 * 6);
    EXPECT_DOUBLE_EQ(attr(svg, "data-y-min"), 10 - 0.05 * 20);
    EXPECT_DOUBLE_EQ(attr(svg, "data-y-max"), 30 + 0.05 * 20);

    // Every mark lies strictly inside the plot frame.
    const std::regex cx("cx=\"([^\"]+)\" cy=\"([^\"]+)\"");
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), cx); it != std::sregex_iterator(); ++it) {
        const double x = std::stod((*it)[1]), y = std::stod((*it)[2]);
        EXPECT_GT(x, 70.0);
        EXPECT_LT(x, 490.0);
        EXPECT_GT(y, 40.0);
        EXPECT_LT(y, 430.0);
    }
}

TEST(Svg, RejectsBadShapesAndNonFiniteValues) {
    const std::vector<std::int32_t> labels = {0};
    EXPECT_THROW(render_projection_plot(Tensor({1, 3}), labels, Tensor()), ShapeError);
    EXPECT_THROW(render_projection_plot(Tensor({2, 2}), labels, Tensor()), ShapeError);
    EXPECT_THROW(render_projection_plot(Tensor::matrix({{std::nan(""), 0}}), labels, Tensor()), DomainError);
    const LineSeries ragged[] = {{"a", {1, 2}, {1}}};
    EXPECT_THROW(render_line_plot(ragged, "x", "y"), ShapeError);
}

TEST(Svg, LinePlotMarksEveryPoint) {
    const LineSeries s[] = {{"vamp", {5, 10, 20, 50}, {4, 3, 2, 1}}, {"standard", {5, 10, 20, 50}, {5, 4, 3, 2}}};
    const std::string svg = render_line_plot(s, "clusters", "loss");
    EXPECT_EQ(count(svg, "<circle"), 8u);
    EXPECT_EQ(count(svg, "<polyline"), 3u);  // frame plus one per series
}

// --- report -------------------------------------------------------------------------

TEST(Report, JsonRoundTripAndCsv) {
    Report r;
    r.config = Json{{"seed", 1}};
    RunRecord run;
    run.name = "a";
    run.trace.push_back({0, 0.5, {-1.0, -0.25, 0.125, -1.125}});
    r.runs.push_back(run);
    r.metrics.push_back({"knn_accuracy", "vamp", 500, 0.3, 0, "test", 0.9512, "a"});
    r.metrics.push_back({"knn_accuracy", "standard", std::nullopt, 0.0, 2, "test", 0.1 + 0.2, "b,c"});
    const Report back = report_from_json(to_json(r));
    EXPECT_EQ(back.metrics, r.metrics);
    EXPECT_EQ(back.runs[0].trace[0].mean.total, -1.125);
    const std::string csv = metrics_csv(r.metrics);
    EXPECT_EQ(csv,
              "metric,prior,K,epsilon,removed,split,value,run\n"
              "knn_accuracy,vamp,500,0.29999999999999999,0,test,0.95120000000000005,a\n"
              "knn_accuracy,standard,,0,2,test,0.30000000000000004,\"b,c\"\n");
}

TEST(Report, NonFiniteMetricIsRejected) {
    Report r;
    r.metrics.push_back({"elbo", "vamp", 5, 0, 0, "test", std::nan(""), "a"});
    EXPECT_THROW(to_json(r), NumericError);
}

TEST(Report, PivotHasOneColumnPerMetric) {
    std::vector<MetricRow> rows = {{"knn_accuracy", "vamp", 10, 0, 0, "test", 0.9, "r1"},
                                   {"kmeans_loss@5", "vamp", 10, 0, 0, "test", 3.0, "r1"},
                                   {"kmeans_loss@5", "vamp", 10, 0, 0, "train", 3.5, "r1"}};
    const Json t = pivot_table(rows);
    EXPECT_EQ(t["columns"].size(), 8u);
    EXPECT_EQ(t["rows"].size(), 2u);
    EXPECT_TRUE(t["rows"][1][6].is_null());
    EXPECT_EQ(pivot_csv(rows),
              "run,prior,K,epsilon,removed,split,knn_accuracy,kmeans_loss@5\n"
              "r1,vamp,10,0,0,test,0.90000000000000002,3\n"
              "r1,vamp,10,0,0,train,,3.5\n");
}

TEST(Report, EmptyMetricSetIsAnErrorAndWritesNothing) {
    CacheEnvGuard guard;
    const fs::path dir = scratch("empty_report");
    Report r;
    r.config = Json::object();
    write_report(dir, r);
    const auto before = std::distance(fs::directory_iterator(dir), fs::directory_iterator());
    ExperimentConfig cfg = parse_config(tiny_config(dir));
    std::ostringstream log;
    EXPECT_THROW(run_report(cfg, log), ContractError);
    EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator()), before);
    EXPECT_FALSE(fs::exists(dir / "table.csv"));
}

// --- pipeline -----------------------------------------------------------------------

TEST(Pipeline, TrainEvalReportIsBitReproducible) {
    CacheEnvGuard guard;
    const fs::path dir = scratch("repro");
    const ExperimentConfig cfg = parse_config(tiny_config(dir));
    std::ostringstream log;
    std::string first;
    for (int pass = 0; pass < 2; ++pass) {
        fs::remove_all(dir);
        run_train(cfg, log);
        run_eval(cfg, log);
        run_report(cfg, log);
        const std::string now = read_text_file(dir / "report.json") + read_text_file(dir / "table.csv") +
                                read_text_file(dir / ("projection_" + dir.filename().string() + ".svg"));
        if (pass == 0) first = now;
        else EXPECT_EQ(now, first);
    }
    EXPECT_TRUE(fs::exists(dir / "timings.json"));
    EXPECT_TRUE(fs::exists(dir / "kmeans_loss.svg"));
}

TEST(Pipeline, EvalRowsAreTraceableToTheCheckpoint) {
    CacheEnvGuard guard;
    const fs::path dir = scratch("trace");
    const ExperimentConfig cfg = parse_config(tiny_config(dir));
    std::ostringstream log;
    run_train(cfg, log);
    const Report a = run_eval(cfg, log);
    ASSERT_FALSE(a.metrics.empty());
    EXPECT_EQ(a.runs[0].artifacts["checkpoint"], "checkpoint.pvck");
    std::set<std::string> names;
    for (const auto& r : a.metrics) names.insert(r.metric);
    for (const char* m : {"elbo", "knn_accuracy", "classifier_accuracy", "prototype_accuracy", "prototype_coverage", "kmeans_loss@2",
                          "kmeans_loss@3"}) {
        EXPECT_TRUE(names.count(m)) << m;
    }
    // Cached data and classifier must not change the numbers.
    EXPECT_EQ(run_eval(cfg, log).metrics, a.metrics);
    fs::remove_all(dir / "cache");
    EXPECT_EQ(run_eval(cfg, log).metrics, a.metrics);
}

TEST(Pipeline, MissingCheckpointIsAnError) {
    CacheEnvGuard guard;
    const fs::path dir = scratch("missing");
    std::ostringstream log;
    EXPECT_THROW(run_eval(parse_config(tiny_config(dir)), log), ContractError);
}

TEST(Pipeline, CacheDirectoryComesFromTheEnvironment) {
    CacheEnvGuard guard;
    const fs::path dir = scratch("cache_env");
    const fs::path cache = scratch("cache_env_store");
    setenv(kCacheEnv, cache.c_str(), 1);
    std::ostringstream log;
    const ExperimentConfig cfg = parse_config(tiny_config(dir));
    EXPECT_EQ(cache_dir(cfg), cache);
    run_perturb(cfg, log);
    EXPECT_FALSE(fs::exists(dir / "cache"));
    bool found = false;
    for (const auto& e : fs::directory_iterator(cache)) found |= e.path().filename().string().rfind("dataset-", 0) == 0;
    EXPECT_TRUE(found);
    EXPECT_EQ(dataio::read_cache(dir / "data" / "train.pvd").size(), 90u);
}

TEST(Pipeline, SmoothingChangesOnlyPerturbedSplits) {
    CacheEnvGuard guard;
    const fs::path dir = scratch("smooth");
    Json doc = tiny_config(dir);
    doc["dataset"]["binarize"] = "threshold";
    std::ostringstream log;
    const PreparedData clean = prepare_data(parse_config(doc), log);
    doc["dataset"]["perturbation"] = {{"epsilon", 0.6}, {"smooth_test", false}};
    const PreparedData smooth = prepare_data(parse_config(doc), log);
    EXPECT_EQ(smooth.test.images, clean.test.images);
    EXPECT_NE(smooth.train.images, clean.train.images);
    EXPECT_EQ(smooth.train.labels, clean.train.labels);
    EXPECT_NE(smooth.key, clean.key);
}

TEST(Pipeline, SweepCoversTheGridAndResumes) {
    CacheEnvGuard guard;
    const fs::path dir = scratch("sweep");
    Json doc = tiny_config(dir);
    doc["sweep"] = {{"priors", {"standard", "vamp"}}, {"K", {2, 4}}, {"epsilon", {0.0, 0.3}}};
    doc["dataset"]["binarize"] = "threshold";
    const ExperimentConfig cfg = parse_config(doc);
    const auto cells = sweep_cells(cfg);
    ASSERT_EQ(cells.size(), 6u);
    EXPECT_EQ(cells[0].first, "standard_eps0_m0");
    EXPECT_EQ(cells[2].first, "vamp-K2_eps0_m0");
    EXPECT_EQ(cells[5].first, "vamp-K4_eps0.3_m0");

    std::ostringstream log;
    const Report first = run_sweep(cfg, log);
    std::set<std::string> runs;
    for (const auto& r : first.metrics) runs.insert(r.run);
    EXPECT_EQ(runs.size(), 6u);
    EXPECT_EQ(first.runs[0].artifacts["checkpoint"], "cells/standard_eps0_m0/checkpoint.pvck");

    // Drop one cell's report: only that cell is evaluated again.
    fs::remove(dir / "cells" / "vamp-K2_eps0_m0" / "report.json");
    const auto stamp = fs::last_write_time(dir / "cells" / "vamp-K4_eps0_m0" / "report.json");
    std::ostringstream again;
    const Report second = run_sweep(cfg, again);
    EXPECT_EQ(count(again.str(), "done, skipping"), 5u);
    EXPECT_EQ(count(again.str(), "train: "), 0u);  // checkpoint reused
    EXPECT_EQ(fs::last_write_time(dir / "cells" / "vamp-K4_eps0_m0" / "report.json"), stamp);
    EXPECT_EQ(second.metrics, first.metrics);

    // A changed cell config invalidates the finished reports.
    Json changed = doc;
    changed["eval"]["knn_k"] = 3;
    std::ostringstream third;
    run_sweep(parse_config(changed), third);
    EXPECT_EQ(count(third.str(), "done, skipping"), 0u);

    // A moved sweep directory still resumes.
    const fs::path moved = scratch("sweep_moved");
    fs::remove_all(moved);
    fs::copy(dir, moved, fs::copy_options::recursive);
    changed["output_dir"] = moved.string();
    std::ostringstream fourth;
    run_sweep(parse_config(changed), fourth);
    EXPECT_EQ(count(fourth.str(), "done, skipping"), 6u);

    run_report(cfg, log);
    EXPECT_TRUE(fs::exists(dir / "knn_vs_epsilon.svg"));
}

TEST(Pipeline, ThresholdsGateTheExitStatus) {
    CacheEnvGuard guard;
    const fs::path dir = scratch("thresholds");
    Json doc = tiny_config(dir);
    std::ostringstream log;
    ASSERT_EQ(run_command("train", parse_config(doc), log), kExitOk);
    doc["thresholds"] = {{{"metric", "knn_accuracy"}, {"min", 0.0}}};
    EXPECT_EQ(run_command("eval", parse_config(doc), log), kExitOk);
    doc["thresholds"] = {{{"metric", "knn_accuracy"}, {"min", 1.5}}};
    EXPECT_EQ(run_command("eval", parse_config(doc), log), kExitThreshold);
    doc["thresholds"] = {{{"metric", "no_such_metric"}, {"min", 0.0}}};
    EXPECT_EQ(run_command("report", parse_config(doc), log), kExitThreshold);
    EXPECT_THROW(run_command("fly", parse_config(doc), log), ConfigError);
}

#ifdef PROTOVAE_CLI_BINARY
TEST(Binary, ExitCodes) {
    CacheEnvGuard guard;
    const fs::path dir = scratch("binary");
    const fs::path cfg_path = dir / "config.json";
    write_text_file(cfg_path, tiny_config(dir / "run").dump());
    const std::string bin = PROTOVAE_CLI_BINARY;
    auto run = [&](const std::string& args) {
        const int status = std::system((bin + " " + args + " > " + (dir / "log.txt").string() + " 2>&1").c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    const std::string cfg = "--config " + cfg_path.string();
    EXPECT_EQ(run("eval " + cfg), 2);  // no checkpoint yet
    EXPECT_EQ(run("train " + cfg + " --set model.colour=1"), 1);
    EXPECT_NE(read_text_file(dir / "log.txt").find("model.colour"), std::string::npos);
    EXPECT_EQ(run("train " + cfg + " --set model.epochs=-1"), 1);
    EXPECT_EQ(run("train"), 1);
    EXPECT_EQ(run("train " + cfg), 0);
    EXPECT_EQ(run("eval " + cfg), 0);
    EXPECT_EQ(run("eval " + cfg + " --set 'thresholds=[{\"metric\":\"knn_accuracy\",\"min\":2}]'"), 3);
    EXPECT_EQ(run("report " + cfg + " --out " + (dir / "elsewhere").string()), 2);  // no report there
    EXPECT_EQ(run("report " + cfg), 0);
    EXPECT_TRUE(fs::exists(dir / "run" / "table.csv"));
}
#endif
