#include "cxrssl/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "cxrssl/errors.hpp"
#include "cxrssl/rng.hpp"

namespace cxrssl::data {

std::string to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        case Split::unsplit: return "-";
    }
    return "-";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    if (name == "-" || name == "unsplit") return Split::unsplit;
    throw DataError("unknown split '" + std::string(name) + "'");
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].split == split) out.push_back(i);
    }
    return out;
}

bool DatasetManifest::labeled() const {
    return !records.empty() && std::all_of(records.begin(), records.end(), [](const Record& r) { return r.label.has_value(); });
}

namespace {

std::vector<std::string_view> split_on(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> words(std::string_view s) {
    std::istringstream in{std::string(s)};
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::string_view trim_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

}  // namespace

DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base, const std::string& source) {
    DatasetManifest m;
    m.root = base;
    std::map<std::string, int> class_index;
    std::set<std::string> seen;
    bool header = false;
    bool have_classes = false;
    int line_no = 0;
    for (auto raw : split_on(text, '\n')) {
        ++line_no;
        const auto line = trim_cr(raw);
        if (line.empty() || line.front() == '#') continue;
        if (!header) {
            if (line != kManifestHeader) {
                throw ParseError(source, line_no, "expected header '" + std::string(kManifestHeader) + "'");
            }
            header = true;
            continue;
        }
        if (line.starts_with("classes") && (line.size() == 7 || line[7] == ' ')) {
            if (have_classes || !m.records.empty()) {
                throw ParseError(source, line_no, "classes line must appear once, before records");
            }
            have_classes = true;
            m.class_names = words(line.substr(7));
            for (std::size_t i = 0; i < m.class_names.size(); ++i) {
                if (!class_index.emplace(m.class_names[i], static_cast<int>(i)).second) {
                    throw ParseError(source, line_no, "duplicate class name '" + m.class_names[i] + "'");
                }
            }
            continue;
        }
        if (line.starts_with("root ")) {
            if (!m.records.empty()) {
                throw ParseError(source, line_no, "root line must precede records");
            }
            const std::filesystem::path root{std::string(line.substr(5))};
            m.root = root.is_absolute() ? root : base / root;
            continue;
        }
        const auto fields = split_on(line, '\t');
        if (fields.size() > 3 || fields[0].empty()) {
            throw ParseError(source, line_no, "expected '<path>[\\t<label>[\\t<split>]]'");
        }
        Record r;
        r.path = std::string(fields[0]);
        if (fields.size() >= 2 && fields[1] != "-") {
            const auto it = class_index.find(std::string(fields[1]));
            if (it == class_index.end()) {
                throw ParseError(source, line_no, "unknown class label '" + std::string(fields[1]) + "'");
            }
            r.label = it->second;
        }
        if (fields.size() == 3) {
            try {
                r.split = parse_split(fields[2]);
            } catch (const DataError& e) {
                throw ParseError(source, line_no, e.what());
            }
        }
        if (!seen.insert(r.path).second) {
            throw ParseError(source, line_no, "duplicate path '" + r.path + "'");
        }
        m.records.push_back(std::move(r));
    }
    if (!header) {
        throw ParseError(source, line_no, "missing header '" + std::string(kManifestHeader) + "'");
    }
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open manifest '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto base = std::filesystem::absolute(path).parent_path();
    return parse_manifest(buf.str(), base, path.string());
}

std::string format_manifest(const DatasetManifest& m) {
    std::string out(kManifestHeader);
    out += "\nclasses";
    for (const auto& c : m.class_names) out += " " + c;
    out += "\n";
    if (!m.root.empty()) {
        out += "root " + m.root.string() + "\n";
    }
    for (const auto& r : m.records) {
        out += r.path;
        out += '\t';
        out += r.label ? m.class_names.at(static_cast<std::size_t>(*r.label)) : "-";
        out += '\t';
        out += to_string(r.split);
        out += '\n';
    }
    return out;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write manifest '" + path.string() + "'");
    }
    out << format_manifest(m);
}

// ---------------------------------------------------------------------------------------------
// Splits

namespace {

/// Largest-remainder rounding of `total * fractions`; ties go to the earlier entry.
std::vector<std::int64_t> apportion(std::int64_t total, const std::vector<double>& fractions) {
    std::vector<std::int64_t> counts(fractions.size());
    std::vector<std::pair<double, std::size_t>> rema;
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        const double exact = static_cast<double>(total) * fractions[i];
        counts[i] = static_cast<std::int64_t>(std::floor(exact + 1e-9));
        assigned += counts[i];
        rema.emplace_back(exact - static_cast<double>(counts[i]), i);
    }
    std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t j = 0; assigned < total; ++j, ++assigned) {
        ++counts[rema[j % rema.size()].second];
    }
    return counts;
}

/// Strata: one per class (in class order) plus one for unlabeled records.
std::vector<std::vector<std::size_t>> strata(const DatasetManifest& m) {
    std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(m.num_classes()) + 1);
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        const auto& r = m.records[i];
        groups[r.label ? static_cast<std::size_t>(*r.label) : groups.size() - 1].push_back(i);
    }
    return groups;
}

}  // namespace

std::pair<double, double> nested_fractions(double test_frac, double val_frac_of_train) {
    const double train_all = 1.0 - test_frac;
    return {train_all * (1.0 - val_frac_of_train), train_all * val_frac_of_train};
}

DatasetManifest split_holdout(const DatasetManifest& manifest, double train_frac, double val_frac, std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac < 1.0) || !(val_frac >= 0.0 && val_frac < 1.0) ||
        train_frac + val_frac > 1.0 + 1e-12) {
        throw ConfigError("split fractions must lie in (0, 1) and sum to at most 1");
    }
    const std::vector<double> fracs{train_frac, val_frac, std::max(0.0, 1.0 - train_frac - val_frac)};
    const std::array<Split, 3> kinds{Split::train, Split::val, Split::test};
    const auto n = static_cast<std::int64_t>(manifest.records.size());
    const auto totals = apportion(n, fracs);
    const auto nonempty = std::count_if(totals.begin(), totals.end(), [](auto t) { return t > 0; });

    auto groups = strata(manifest);
    std::vector<std::vector<std::int64_t>> quota;
    std::vector<std::int64_t> deficit = totals;
    std::vector<std::vector<double>> remainder;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto size = static_cast<std::int64_t>(groups[g].size());
        if (size > 0 && size < nonempty) {
            const std::string name = g < manifest.class_names.size() ? manifest.class_names[g] : std::string("(unlabeled)");
            throw DataError("class '" + name + "' has " + std::to_string(size) + " records, fewer than the " +
                            std::to_string(nonempty) + " splits requested");
        }
        std::vector<std::int64_t> q(3);
        std::vector<double> rem(3);
        for (std::size_t s = 0; s < 3; ++s) {
            const double exact = static_cast<double>(size) * static_cast<double>(totals[s]) / static_cast<double>(std::max<std::int64_t>(n, 1));
            q[s] = static_cast<std::int64_t>(std::floor(exact + 1e-9));
            rem[s] = exact - static_cast<double>(q[s]);
            deficit[s] -= q[s];
        }
        quota.push_back(q);
        remainder.push_back(rem);
    }
    // Hand out the leftover records one stratum at a time (largest leftover first) to the
    // splits with the largest outstanding deficit; each split gains at most one per stratum.
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), 0);
    auto leftover = [&](std::size_t g) {
        return static_cast<std::int64_t>(groups[g].size()) - std::accumulate(quota[g].begin(), quota[g].end(), std::int64_t{0});
    };
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return leftover(a) > leftover(b); });
    for (const auto g : order) {
        auto left = leftover(g);
        std::vector<std::size_t> splits{0, 1, 2};
        std::stable_sort(splits.begin(), splits.end(), [&](auto a, auto b) {
            if (deficit[a] != deficit[b]) return deficit[a] > deficit[b];
            return remainder[g][a] > remainder[g][b];
        });
        for (std::size_t j = 0; j < splits.size() && left > 0; ++j) {
            if (deficit[splits[j]] <= 0) break;
            ++quota[g][splits[j]];
            --deficit[splits[j]];
            --left;
        }
        if (left > 0) {
            throw DataError("split_holdout: cannot reconcile stratified counts");
        }
    }

    DatasetManifest out = manifest;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        Rng rng(derive_seed(seed, 0x5b11u, g));
        shuffle(std::span<std::size_t>(groups[g]), rng);
        std::size_t pos = 0;
        for (std::size_t s = 0; s < 3; ++s) {
            for (std::int64_t c = 0; c < quota[g][s]; ++c) {
                out.records[groups[g][pos++]].split = kinds[s];
            }
        }
    }
    return out;
}

std::vector<std::size_t> FoldAssignment::members(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldAssignment::complement(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] != fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldAssignment::sizes() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(k), 0);
    for (const int f : fold_of) ++out[static_cast<std::size_t>(f)];
    return out;
}

FoldAssignment split_kfold(const DatasetManifest& manifest, int k, std::uint64_t seed) {
    if (k < 2) {
        throw ConfigError("k-fold needs k >= 2");
    }
    if (static_cast<std::size_t>(k) > manifest.records.size()) {
        throw DataError("k-fold: k = " + std::to_string(k) + " exceeds the " + std::to_string(manifest.records.size()) +
                        " records");
    }
    auto groups = strata(manifest);
    FoldAssignment folds;
    folds.k = k;
    folds.fold_of.assign(manifest.records.size(), -1);
    std::size_t pos = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        Rng rng(derive_seed(seed, 0xf01du, g));
        shuffle(std::span<std::size_t>(groups[g]), rng);
        for (const auto idx : groups[g]) {
            folds.fold_of[idx] = static_cast<int>(pos++ % static_cast<std::size_t>(k));
        }
    }
    return folds;
}

}  // namespace cxrssl::data
