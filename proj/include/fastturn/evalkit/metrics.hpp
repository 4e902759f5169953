#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fastturn/data/turn_state.hpp"

namespace fastturn::evalkit {

struct ConfusionCounts {
    long tp = 0, tn = 0, fp = 0, fn = 0;
    data::TurnState positive_class = data::TurnState::Complete;
    long total() const { return tp + tn + fp + fn; }
};

// One-vs-rest counts for the given positive class.
ConfusionCounts confusion(const std::vector<data::TurnState>& predictions,
                          const std::vector<data::TurnState>& labels, data::TurnState positive_class);

// Eq.-style ratios; nullopt when the denominator is zero (never NaN).
std::optional<double> accuracy(const ConfusionCounts& c);
std::optional<double> miss_rate(const ConfusionCounts& c);
std::optional<double> false_alarm(const ConfusionCounts& c);

long levenshtein(const std::vector<int>& a, const std::vector<int>& b);

// Levenshtein(hyp, ref) / |ref|; unit cost for sub/ins/del; may exceed 1.
double edit_error_rate(const std::vector<int>& hypothesis, const std::vector<int>& reference);

// corpus-level rate: total edits / total reference length
double corpus_error_rate(const std::vector<std::pair<std::vector<int>, std::vector<int>>>& hyp_ref_pairs);

struct ClassReport {
    std::string name;
    std::optional<double> acc, miss, fa;
    long n = 0; // labeled positives
};

struct Report {
    std::string mode;
    std::string test_set;
    std::vector<ClassReport> classes;
    double overall_acc = 0.0; // 4-way multiclass accuracy
    std::optional<double> mean_latency_ms;
    long n_samples = 0;

    std::string to_json_text() const;
    static Report from_json_text(const std::string& text);
    // human-readable table, percentages with 2 decimals
    std::string render_table() const;
};

// JSON + text table side by side; files named <prefix>.json / <prefix>.txt.
void emit_report(const Report& report, const std::string& path_prefix);

// "80.00" formatting of a ratio as a percentage
std::string pct(double ratio);

} // namespace fastturn::evalkit
