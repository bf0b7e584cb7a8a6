#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cxrssl::eval {

/// Row-major (N, C) class scores with true labels.
struct PredictionSet {
    int num_classes = 0;
    std::vector<double> scores;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    double score(std::size_t i, int c) const { return scores[i * static_cast<std::size_t>(num_classes) + static_cast<std::size_t>(c)]; }
    /// Highest-scoring class; ties go to the lowest index.
    int predicted(std::size_t i) const;
    /// Throws DataError on size mismatch, non-finite scores or labels outside [0, C).
    void check() const;
};

double accuracy(const PredictionSet& preds);

/// Mann-Whitney probability that a random positive outranks a random negative, ties count 1/2.
/// Throws UndefinedMetricError unless both classes are present.
double auc_binary(const std::vector<double>& scores, const std::vector<int>& labels);

/// Binary sets: AUC of class 1's score. Multiclass: macro one-vs-rest mean over classes that
/// have both positives and negatives.
double auc(const PredictionSet& preds);

struct PrfResult {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate = false;  ///< some denominator was zero and its value reported as 0
};

/// One-vs-rest counts for `positive_class` on argmax predictions.
PrfResult precision_recall_f1(const PredictionSet& preds, int positive_class);

/// Binary: positive class 1. Multiclass: unweighted mean over classes.
PrfResult precision_recall_f1(const PredictionSet& preds);

struct MetricValue {
    double mean = 0.0;
    std::optional<double> std;

    friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

struct MetricsReport {
    MetricValue accuracy;
    MetricValue auc;
    MetricValue f1;
    MetricValue precision;
    MetricValue recall;
    bool degenerate = false;
    int n_folds = 0;
    std::vector<PrfResult> per_class;
    std::vector<MetricsReport> folds;
    nlohmann::json extra = nlohmann::json::object();
};

/// All five metrics on one prediction set. AUC is NaN-free: a single-class test set throws.
MetricsReport evaluate(const PredictionSet& preds);

/// Mean and population std of each metric over the fold results, keeping them in `folds`.
MetricsReport aggregate_folds(const std::vector<MetricsReport>& folds);

/// Runs `run(fold)` for each of k folds and aggregates.
MetricsReport cross_validate(const std::function<MetricsReport(int)>& run, int k);

/// "76.47" or "76.47±3.53" from a fraction, in percent with two decimals.
std::string format_percent(const MetricValue& v);
/// "0.9553" or "0.9553±0.0100" with four decimals.
std::string format_fraction(const MetricValue& v);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

/// Rows of a fixed-width text table; the first row is the header.
std::string render_table(const std::vector<std::vector<std::string>>& rows);

}  // namespace cxrssl::eval
