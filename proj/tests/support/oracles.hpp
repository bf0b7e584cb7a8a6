#pragma once

// Scalar-loop reference implementations. They share no code with the library: plain loops
// over std::vector<double>, written from the textbook definitions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline std::vector<double> softmax(const std::vector<double>& x, double tau) {
    double mx = -INFINITY;
    for (double v : x) mx = std::max(mx, v / tau);
    std::vector<double> out(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] / tau - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

inline std::vector<double> log_softmax(const std::vector<double>& x, double tau) {
    double mx = -INFINITY;
    for (double v : x) mx = std::max(mx, v / tau);
    double sum = 0.0;
    for (double v : x) sum += std::exp(v / tau - mx);
    const double lse = mx + std::log(sum);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / tau - lse;
    return out;
}

inline double norm(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot / (norm(a) * norm(b));
}

/// 1/2 sum over the two (teacher view t, student view 1-t) pairings of the batch-mean
/// cross-entropy between the centered, sharpened teacher and the student.
inline double dino_loss(const Matrix& s1, const Matrix& s2, const Matrix& t1, const Matrix& t2,
                        const std::vector<double>& center, double tau_s, double tau_t) {
    const Matrix* student[2] = {&s1, &s2};
    const Matrix* teacher[2] = {&t1, &t2};
    double total = 0.0;
    for (int t = 0; t < 2; ++t) {
        double term = 0.0;
        const auto& tm = *teacher[t];
        const auto& sm = *student[1 - t];
        for (std::size_t b = 0; b < tm.size(); ++b) {
            std::vector<double> centered(tm[b].size());
            for (std::size_t k = 0; k < centered.size(); ++k) centered[k] = tm[b][k] - center[k];
            const auto p = softmax(centered, tau_t);
            const auto logq = log_softmax(sm[b], tau_s);
            for (std::size_t k = 0; k < p.size(); ++k) term -= p[k] * logq[k];
        }
        total += term / static_cast<double>(tm.size());
    }
    return total / 2.0;
}

/// NT-Xent: rows i and i+B are positives; all other rows except i are negatives.
inline double simclr_loss(const Matrix& z, double temperature) {
    const std::size_t n = z.size();
    const std::size_t b = n / 2;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t pos = (i + b) % n;
        double mx = -INFINITY;
        std::vector<double> sims(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sims[j] = cosine(z[i], z[j]) / temperature;
            mx = std::max(mx, sims[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sum += std::exp(sims[j] - mx);
        }
        total += -(sims[pos] - mx - std::log(sum));
    }
    return total / static_cast<double>(n);
}

/// Mean squared distance between unit-normalized rows.
inline double byol_term(const Matrix& p, const Matrix& z) {
    double total = 0.0;
    for (std::size_t b = 0; b < p.size(); ++b) {
        const double np = norm(p[b]);
        const double nz = norm(z[b]);
        for (std::size_t k = 0; k < p[b].size(); ++k) {
            const double d = p[b][k] / np - z[b][k] / nz;
            total += d * d;
        }
    }
    return total / static_cast<double>(p.size());
}

inline double byol_loss(const Matrix& p1, const Matrix& p2, const Matrix& z1, const Matrix& z2) {
    return (byol_term(p1, z2) + byol_term(p2, z1)) / 2.0;
}

inline double simsiam_loss(const Matrix& p1, const Matrix& p2, const Matrix& z1, const Matrix& z2) {
    double a = 0.0;
    double b = 0.0;
    for (std::size_t i = 0; i < p1.size(); ++i) {
        a -= cosine(p1[i], z2[i]);
        b -= cosine(p2[i], z1[i]);
    }
    const double n = static_cast<double>(p1.size());
    return (a / n + b / n) / 2.0;
}

// ---------------------------------------------------------------------------------------------
// Metrics

inline int argmax(const std::vector<double>& row) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(row.size()); ++c) {
        if (row[c] > row[best]) best = c;
    }
    return best;
}

struct Counts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;
};

inline Counts confusion(const Matrix& scores, const std::vector<int>& labels, int positive) {
    Counts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = argmax(scores[i]) == positive;
        const bool truth = labels[i] == positive;
        if (pred && truth) ++c.tp;
        if (pred && !truth) ++c.fp;
        if (!pred && truth) ++c.fn;
        if (!pred && !truth) ++c.tn;
    }
    return c;
}

inline long correct_count(const Matrix& scores, const std::vector<int>& labels) {
    long n = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) n += argmax(scores[i]) == labels[i] ? 1 : 0;
    return n;
}

/// Pairwise definition: fraction of (positive, negative) pairs ranked correctly, ties 1/2.
inline double auc_pairwise(const std::vector<double>& score, const std::vector<bool>& positive) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < score.size(); ++i) {
        if (!positive[i]) continue;
        for (std::size_t j = 0; j < score.size(); ++j) {
            if (positive[j]) continue;
            pairs += 1.0;
            if (score[i] > score[j]) wins += 1.0;
            else if (score[i] == score[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline Prf prf(const Counts& c) {
    Prf r;
    r.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    r.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

}  // namespace oracle
