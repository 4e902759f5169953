#include "fastturn/evalkit/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "fastturn/common.hpp"

namespace fastturn::evalkit {

using json = nlohmann::json;

ConfusionCounts confusion(const std::vector<data::TurnState>& predictions,
                          const std::vector<data::TurnState>& labels, data::TurnState positive_class) {
    if (predictions.empty() || predictions.size() != labels.size())
        throw std::invalid_argument("confusion: need equal non-empty prediction/label sequences");
    ConfusionCounts c;
    c.positive_class = positive_class;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool pred_pos = predictions[i] == positive_class;
        const bool label_pos = labels[i] == positive_class;
        if (pred_pos && label_pos)
            ++c.tp;
        else if (pred_pos && !label_pos)
            ++c.fp;
        else if (!pred_pos && label_pos)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

std::optional<double> accuracy(const ConfusionCounts& c) {
    const long denom = c.total();
    if (denom == 0) return std::nullopt;
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(denom);
}

std::optional<double> miss_rate(const ConfusionCounts& c) {
    const long denom = c.tp + c.fn;
    if (denom == 0) return std::nullopt;
    return static_cast<double>(c.fn) / static_cast<double>(denom);
}

std::optional<double> false_alarm(const ConfusionCounts& c) {
    const long denom = c.fp + c.tn;
    if (denom == 0) return std::nullopt;
    return static_cast<double>(c.fp) / static_cast<double>(denom);
}

long levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<long> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<long>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<long>(i);
        for (std::size_t j = 1; j <= m; ++j) {
            const long sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double edit_error_rate(const std::vector<int>& hypothesis, const std::vector<int>& reference) {
    if (reference.empty()) throw std::invalid_argument("edit_error_rate: empty reference");
    return static_cast<double>(levenshtein(hypothesis, reference)) / static_cast<double>(reference.size());
}

double corpus_error_rate(const std::vector<std::pair<std::vector<int>, std::vector<int>>>& hyp_ref_pairs) {
    long edits = 0, ref_len = 0;
    for (const auto& [hyp, ref] : hyp_ref_pairs) {
        edits += levenshtein(hyp, ref);
        ref_len += static_cast<long>(ref.size());
    }
    if (ref_len == 0) throw std::invalid_argument("corpus_error_rate: empty references");
    return static_cast<double>(edits) / static_cast<double>(ref_len);
}

std::string pct(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * ratio);
    return buf;
}

namespace {

json opt_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

std::optional<double> opt_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

} // namespace

std::string Report::to_json_text() const {
    json j;
    j["mode"] = mode;
    j["test_set"] = test_set;
    json cls = json::array();
    for (const auto& c : classes)
        cls.push_back({{"name", c.name},
                       {"acc", opt_json(c.acc)},
                       {"miss", opt_json(c.miss)},
                       {"fa", opt_json(c.fa)},
                       {"n", c.n}});
    j["classes"] = cls;
    j["overall_acc"] = overall_acc;
    j["mean_latency_ms"] = opt_json(mean_latency_ms);
    j["n_samples"] = n_samples;
    return j.dump(2);
}

Report Report::from_json_text(const std::string& text) {
    json j = json::parse(text);
    Report r;
    r.mode = j.at("mode").get<std::string>();
    r.test_set = j.at("test_set").get<std::string>();
    for (const auto& c : j.at("classes")) {
        ClassReport cr;
        cr.name = c.at("name").get<std::string>();
        cr.acc = opt_from(c.at("acc"));
        cr.miss = opt_from(c.at("miss"));
        cr.fa = opt_from(c.at("fa"));
        cr.n = c.at("n").get<long>();
        r.classes.push_back(std::move(cr));
    }
    r.overall_acc = j.at("overall_acc").get<double>();
    r.mean_latency_ms = opt_from(j.at("mean_latency_ms"));
    r.n_samples = j.at("n_samples").get<long>();
    return r;
}

std::string Report::render_table() const {
    auto cell = [](const std::optional<double>& v) { return v ? pct(*v) : std::string("n/a"); };
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "mode=%s  test_set=%s  n=%ld\n", mode.c_str(), test_set.c_str(),
                  n_samples);
    out += line;
    std::snprintf(line, sizeof(line), "%-12s %8s %8s %8s %8s\n", "class", "Acc", "Miss", "FA", "n");
    out += line;
    for (const auto& c : classes) {
        std::snprintf(line, sizeof(line), "%-12s %8s %8s %8s %8ld\n", c.name.c_str(), cell(c.acc).c_str(),
                      cell(c.miss).c_str(), cell(c.fa).c_str(), c.n);
        out += line;
    }
    std::snprintf(line, sizeof(line), "overall_acc %s", pct(overall_acc).c_str());
    out += line;
    if (mean_latency_ms) {
        std::snprintf(line, sizeof(line), "  mean_latency_ms %.2f", *mean_latency_ms);
        out += line;
    }
    out += "\n";
    return out;
}

void emit_report(const Report& report, const std::string& path_prefix) {
    if (report.classes.empty()) throw ConfigError("emit_report: missing class results");
    {
        std::ofstream out(path_prefix + ".json", std::ios::trunc);
        if (!out) throw IoError("cannot write report: " + path_prefix + ".json");
        out << report.to_json_text() << "\n";
    }
    {
        std::ofstream out(path_prefix + ".txt", std::ios::trunc);
        if (!out) throw IoError("cannot write report: " + path_prefix + ".txt");
        out << report.render_table();
    }
}

} // namespace fastturn::evalkit
