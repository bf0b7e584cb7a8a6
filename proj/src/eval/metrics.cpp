#include "cxrssl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cxrssl/errors.hpp"

namespace cxrssl::eval {

int PredictionSet::predicted(std::size_t i) const {
    int best = 0;
    for (int c = 1; c < num_classes; ++c) {
        if (score(i, c) > score(i, best)) best = c;
    }
    return best;
}

void PredictionSet::check() const {
    if (num_classes < 2) {
        throw DataError("prediction set needs at least two classes");
    }
    if (scores.size() != labels.size() * static_cast<std::size_t>(num_classes)) {
        throw DataError("prediction set: scores must be N x C");
    }
    for (const double s : scores) {
        if (!std::isfinite(s)) throw DataError("prediction set: non-finite score");
    }
    for (const int l : labels) {
        if (l < 0 || l >= num_classes) throw DataError("prediction set: label outside [0, C)");
    }
}

double accuracy(const PredictionSet& preds) {
    preds.check();
    if (preds.size() == 0) {
        throw UndefinedMetricError("accuracy of an empty prediction set");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        correct += preds.predicted(i) == preds.labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double auc_binary(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw DataError("auc_binary: scores and labels differ in length");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    // Midranks over tie groups, summed for positives.
    double rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) {
            if (labels[order[t]] == 1) {
                rank_sum += midrank;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw UndefinedMetricError("AUC needs both positive and negative examples");
    }
    const double np = static_cast<double>(positives);
    const double nn = static_cast<double>(negatives);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auc(const PredictionSet& preds) {
    preds.check();
    std::vector<double> column(preds.size());
    std::vector<int> binary(preds.size());
    auto one_vs_rest = [&](int c) {
        for (std::size_t i = 0; i < preds.size(); ++i) {
            column[i] = preds.score(i, c);
            binary[i] = preds.labels[i] == c ? 1 : 0;
        }
        return auc_binary(column, binary);
    };
    if (preds.num_classes == 2) {
        return one_vs_rest(1);
    }
    double sum = 0.0;
    int used = 0;
    for (int c = 0; c < preds.num_classes; ++c) {
        const auto n_pos = std::count(preds.labels.begin(), preds.labels.end(), c);
        if (n_pos == 0 || static_cast<std::size_t>(n_pos) == preds.size()) continue;
        sum += one_vs_rest(c);
        ++used;
    }
    if (used == 0) {
        throw UndefinedMetricError("multiclass AUC: no class has both positives and negatives");
    }
    return sum / used;
}

PrfResult precision_recall_f1(const PredictionSet& preds, int positive_class) {
    preds.check();
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool predicted = preds.predicted(i) == positive_class;
        const bool actual = preds.labels[i] == positive_class;
        tp += predicted && actual;
        fp += predicted && !actual;
        fn += !predicted && actual;
    }
    PrfResult r;
    if (tp + fp == 0) {
        r.degenerate = true;
    } else {
        r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    if (tp + fn == 0) {
        r.degenerate = true;
    } else {
        r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    if (r.precision + r.recall > 0.0) {
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    } else {
        r.degenerate = true;
    }
    return r;
}

PrfResult precision_recall_f1(const PredictionSet& preds) {
    if (preds.num_classes == 2) {
        return precision_recall_f1(preds, 1);
    }
    PrfResult mean;
    for (int c = 0; c < preds.num_classes; ++c) {
        const auto r = precision_recall_f1(preds, c);
        mean.precision += r.precision;
        mean.recall += r.recall;
        mean.f1 += r.f1;
        mean.degenerate = mean.degenerate || r.degenerate;
    }
    const double k = preds.num_classes;
    mean.precision /= k;
    mean.recall /= k;
    mean.f1 /= k;
    return mean;
}

MetricsReport evaluate(const PredictionSet& preds) {
    MetricsReport r;
    r.accuracy.mean = accuracy(preds);
    r.auc.mean = auc(preds);
    const auto prf = precision_recall_f1(preds);
    r.precision.mean = prf.precision;
    r.recall.mean = prf.recall;
    r.f1.mean = prf.f1;
    r.degenerate = prf.degenerate;
    r.n_folds = 1;
    for (int c = 0; c < preds.num_classes; ++c) {
        r.per_class.push_back(precision_recall_f1(preds, c));
    }
    return r;
}

namespace {

MetricValue mean_std(const std::vector<double>& values) {
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double sq = 0.0;
    for (const double v : values) sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / n)};
}

}  // namespace

MetricsReport aggregate_folds(const std::vector<MetricsReport>& folds) {
    if (folds.size() < 2) {
        throw ConfigError("cross-validation needs at least two folds");
    }
    auto collect = [&](auto member) {
        std::vector<double> values;
        for (const auto& f : folds) values.push_back((f.*member).mean);
        return mean_std(values);
    };
    MetricsReport r;
    r.accuracy = collect(&MetricsReport::accuracy);
    r.auc = collect(&MetricsReport::auc);
    r.f1 = collect(&MetricsReport::f1);
    r.precision = collect(&MetricsReport::precision);
    r.recall = collect(&MetricsReport::recall);
    r.degenerate = std::any_of(folds.begin(), folds.end(), [](const auto& f) { return f.degenerate; });
    r.n_folds = static_cast<int>(folds.size());
    r.folds = folds;
    return r;
}

MetricsReport cross_validate(const std::function<MetricsReport(int)>& run, int k) {
    if (k < 2) {
        throw ConfigError("cross-validation needs k >= 2");
    }
    std::vector<MetricsReport> folds;
    for (int f = 0; f < k; ++f) {
        folds.push_back(run(f));
    }
    return aggregate_folds(folds);
}

namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string s = buf;
    return s == "-0.00" || s == "-0.0000" ? s.substr(1) : s;
}

}  // namespace

std::string format_percent(const MetricValue& v) {
    std::string s = fixed(100.0 * v.mean, 2);
    if (v.std) s += "±" + fixed(100.0 * *v.std, 2);
    return s;
}

std::string format_fraction(const MetricValue& v) {
    std::string s = fixed(v.mean, 4);
    if (v.std) s += "±" + fixed(*v.std, 4);
    return s;
}

namespace {

nlohmann::json value_json(const MetricValue& v) {
    nlohmann::json j{{"mean", v.mean}};
    if (v.std) j["std"] = *v.std;
    return j;
}

MetricValue value_from(const nlohmann::json& j) {
    MetricValue v;
    v.mean = j.at("mean").get<double>();
    if (j.contains("std")) v.std = j.at("std").get<double>();
    return v;
}

}  // namespace

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json j{
        {"accuracy", value_json(r.accuracy)}, {"auc", value_json(r.auc)},       {"f1", value_json(r.f1)},
        {"precision", value_json(r.precision)}, {"recall", value_json(r.recall)}, {"degenerate", r.degenerate},
        {"n_folds", r.n_folds},
    };
    auto per_class = nlohmann::json::array();
    for (const auto& p : r.per_class) {
        per_class.push_back({{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}, {"degenerate", p.degenerate}});
    }
    j["per_class"] = per_class;
    auto folds = nlohmann::json::array();
    for (const auto& f : r.folds) folds.push_back(to_json(f));
    j["folds"] = folds;
    if (!r.extra.empty()) j["extra"] = r.extra;
    return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.accuracy = value_from(j.at("accuracy"));
    r.auc = value_from(j.at("auc"));
    r.f1 = value_from(j.at("f1"));
    r.precision = value_from(j.at("precision"));
    r.recall = value_from(j.at("recall"));
    r.degenerate = j.value("degenerate", false);
    r.n_folds = j.value("n_folds", 1);
    for (const auto& p : j.value("per_class", nlohmann::json::array())) {
        r.per_class.push_back({p.at("precision").get<double>(), p.at("recall").get<double>(), p.at("f1").get<double>(),
                               p.value("degenerate", false)});
    }
    for (const auto& f : j.value("folds", nlohmann::json::array())) r.folds.push_back(report_from_json(f));
    r.extra = j.value("extra", nlohmann::json::object());
    return r;
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
    auto display_width = [](const std::string& s) {
        // Count code points, not bytes ("±" is two bytes).
        return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char ch) { return (static_cast<unsigned char>(ch) & 0xC0) != 0x80; }));
    };
    std::vector<std::size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], display_width(row[c]));
    }
    std::string out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            out += rows[r][c];
            if (c + 1 < rows[r].size()) out += std::string(widths[c] - display_width(rows[r][c]) + 2, ' ');
        }
        out += '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (std::size_t c = 0; c < widths.size(); ++c) total += widths[c] + (c + 1 < widths.size() ? 2 : 0);
            out += std::string(total, '-') + '\n';
        }
    }
    return out;
}

}  // namespace cxrssl::eval
