#include "protovae/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "protovae/error.hpp"

namespace protovae::cli {

namespace {

Json trace_json(const std::vector<model::EpochStats>& trace) {
    Json out = Json::array();
    for (const auto& s : trace) {
        out.push_back({{"epoch", s.epoch},
                       {"beta", s.beta},
                       {"reconstruction", s.mean.reconstruction},
                       {"prior_term", s.mean.prior_term},
                       {"entropy_term", s.mean.entropy_term},
                       {"elbo", s.mean.total}});
    }
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string k_field(const MetricRow& r) { return r.K ? std::to_string(*r.K) : ""; }

}  // namespace

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Json to_json(const Report& report) {
    Json runs = Json::array();
    for (const auto& r : report.runs) runs.push_back({{"name", r.name}, {"trace", trace_json(r.trace)}, {"artifacts", r.artifacts}});
    Json metrics = Json::array();
    for (const auto& m : report.metrics) {
        if (!std::isfinite(m.value)) throw NumericError("report: metric '" + m.metric + "' is not finite");
        metrics.push_back({{"metric", m.metric},
                           {"prior", m.prior},
                           {"K", m.K ? Json(*m.K) : Json(nullptr)},
                           {"epsilon", m.epsilon},
                           {"removed", m.removed},
                           {"split", m.split},
                           {"value", m.value},
                           {"run", m.run}});
    }
    return Json{{"format", kReportFormat},
                {"columns", {"metric", "prior", "K", "epsilon", "removed", "split", "value", "run"}},
                {"timings", "timings.json"},
                {"config", report.config},
                {"runs", runs},
                {"metrics", metrics}};
}

Report report_from_json(const Json& doc) {
    try {
        if (doc.at("format") != kReportFormat) throw ParseError("report: unsupported format");
        Report out;
        out.config = doc.at("config");
        for (const auto& r : doc.at("runs")) {
            RunRecord run;
            run.name = r.at("name").get<std::string>();
            run.artifacts = r.at("artifacts");
            for (const auto& s : r.at("trace")) {
                model::EpochStats e;
                e.epoch = s.at("epoch").get<std::size_t>();
                e.beta = s.at("beta").get<double>();
                e.mean.reconstruction = s.at("reconstruction").get<double>();
                e.mean.prior_term = s.at("prior_term").get<double>();
                e.mean.entropy_term = s.at("entropy_term").get<double>();
                e.mean.total = s.at("elbo").get<double>();
                run.trace.push_back(e);
            }
            out.runs.push_back(std::move(run));
        }
        for (const auto& m : doc.at("metrics")) {
            MetricRow row;
            row.metric = m.at("metric").get<std::string>();
            row.prior = m.at("prior").get<std::string>();
            if (!m.at("K").is_null()) row.K = m.at("K").get<std::size_t>();
            row.epsilon = m.at("epsilon").get<double>();
            row.removed = m.at("removed").get<std::size_t>();
            row.split = m.at("split").get<std::string>();
            row.value = m.at("value").get<double>();
            row.run = m.at("run").get<std::string>();
            out.metrics.push_back(std::move(row));
        }
        return out;
    } catch (const Json::exception& e) {
        throw ParseError(std::string("report: malformed document: ") + e.what());
    }
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
    std::string out = "metric,prior,K,epsilon,removed,split,value,run\n";
    for (const auto& r : rows) {
        out += csv_field(r.metric) + "," + csv_field(r.prior) + "," + k_field(r) + "," + format_number(r.epsilon) + "," +
               std::to_string(r.removed) + "," + csv_field(r.split) + "," + format_number(r.value) + "," +
               csv_field(r.run) + "\n";
    }
    return out;
}

Json pivot_table(const std::vector<MetricRow>& rows) {
    using Key = std::pair<std::string, std::string>;  // run, split
    std::vector<std::string> metric_names;
    std::vector<Key> order;
    std::map<Key, const MetricRow*> first;
    std::map<Key, std::map<std::string, double>> cells;
    for (const auto& r : rows) {
        if (std::find(metric_names.begin(), metric_names.end(), r.metric) == metric_names.end()) metric_names.push_back(r.metric);
        const Key key{r.run, r.split};
        if (!first.count(key)) {
            order.push_back(key);
            first[key] = &r;
        }
        cells[key][r.metric] = r.value;
    }
    Json columns = {"run", "prior", "K", "epsilon", "removed", "split"};
    for (const auto& m : metric_names) columns.push_back(m);
    Json out_rows = Json::array();
    for (const auto& key : order) {
        const MetricRow& f = *first[key];
        Json row = {f.run, f.prior, f.K ? Json(*f.K) : Json(nullptr), f.epsilon, f.removed, f.split};
        for (const auto& m : metric_names) {
            const auto it = cells[key].find(m);
            row.push_back(it == cells[key].end() ? Json(nullptr) : Json(it->second));
        }
        out_rows.push_back(std::move(row));
    }
    return {{"columns", columns}, {"rows", out_rows}};
}

std::string pivot_csv(const std::vector<MetricRow>& rows) {
    const Json table = pivot_table(rows);
    std::string out;
    for (std::size_t c = 0; c < table["columns"].size(); ++c) out += (c ? "," : "") + csv_field(table["columns"][c].get<std::string>());
    out += "\n";
    for (const auto& row : table["rows"]) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ",";
            const Json& v = row[c];
            if (v.is_string()) out += csv_field(v.get<std::string>());
            else if (v.is_number_float()) out += format_number(v.get<double>());
            else if (v.is_number()) out += std::to_string(v.get<std::size_t>());
        }
        out += "\n";
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_report(const std::filesystem::path& dir, const Report& report) {
    const std::string json = to_json(report).dump(2) + "\n";
    write_text_file(dir / "metrics.csv", metrics_csv(report.metrics));
    // report.json last: its presence marks a finished run.
    write_text_file(dir / "report.json", json);
}

Report read_report(const std::filesystem::path& path) {
    const Json doc = Json::parse(read_text_file(path), nullptr, false);
    if (doc.is_discarded()) throw ParseError("report: " + path.string() + " is not valid JSON");
    return report_from_json(doc);
}

}  // namespace protovae::cli
