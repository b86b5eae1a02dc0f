#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace drift {

/// Timestamped, family-labeled feature vectors. Rows of `features` align
/// with `labels` and `timestamps`.
struct LabeledDataset {
    Eigen::MatrixXd features;                // n_samples x n_features
    std::vector<std::string> labels;         // family identifier per row
    std::vector<std::int64_t> timestamps;    // seconds since epoch
    std::vector<std::string> feature_names;

    Eigen::Index n() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }

    void validate() const {
        if (static_cast<Eigen::Index>(labels.size()) != n() ||
            static_cast<Eigen::Index>(timestamps.size()) != n())
            throw std::invalid_argument("dataset: labels/timestamps length mismatch");
        if (!features.allFinite())
            throw std::invalid_argument("dataset: non-finite feature value");
        for (const auto& l : labels)
            if (l.empty())
                throw std::invalid_argument("dataset: empty family identifier");
    }

    std::vector<std::string> family_names() const {
        std::set<std::string> s(labels.begin(), labels.end());
        return {s.begin(), s.end()};
    }

    std::size_t family_count(const std::string& family) const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), family));
    }
};

/// Column-selection produced by the variance filter.
struct FeatureMask {
    std::vector<int> kept_indices;  // strictly increasing
    double min_variance = 0.0;
};

struct DriftScenario {
    LabeledDataset train;         // holdout family removed
    LabeledDataset test_known;    // test split of the remaining families
    LabeledDataset test_unknown;  // every sample of the holdout family
    std::string holdout_family;
    bool single_family_train = false;  // degenerate scenario warning
};

struct SyntheticSpec {
    int n_families = 2;
    int dim = 2;
    int samples_per_family = 100;
    double centroid_separation = 10.0;  // in units of within-blob sigma
    int clusters_per_family = 1;

    void validate() const {
        if (n_families < 1 || dim < 1 || samples_per_family < 1 || clusters_per_family < 1)
            throw std::invalid_argument("synthetic spec: all counts must be >= 1");
        if (!(centroid_separation > 0.0))
            throw std::invalid_argument("synthetic spec: separation must be > 0");
    }
};

namespace detail {

inline double parse_feature(const std::string& tok, std::size_t line_no) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size() || !std::isfinite(v))
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": bad feature value '" + tok + "'");
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string tok;
    std::stringstream ss(line);
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace detail

/// CSV layout: header line, then `family,timestamp,feat...` per row.
inline LabeledDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    auto header = detail::split_csv_line(line);
    if (header.size() < 3)
        throw std::runtime_error(path + ": header must name family, timestamp and features");

    const std::size_t width = header.size() - 2;
    LabeledDataset ds;
    ds.feature_names.assign(header.begin() + 2, header.end());

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto toks = detail::split_csv_line(line);
        if (toks.size() != header.size())
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(header.size()) +
                                     " columns, got " + std::to_string(toks.size()));
        if (toks[0].empty())
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": missing family label");
        std::int64_t ts = 0;
        auto [p, ec] = std::from_chars(toks[1].data(), toks[1].data() + toks[1].size(), ts);
        if (ec != std::errc{} || p != toks[1].data() + toks[1].size())
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": bad timestamp '" + toks[1] + "'");
        std::vector<double> row(width);
        for (std::size_t j = 0; j < width; ++j) {
            try {
                row[j] = detail::parse_feature(toks[j + 2], line_no);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error(path + ": " + e.what());
            }
        }
        ds.labels.push_back(toks[0]);
        ds.timestamps.push_back(ts);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no data rows");

    ds.features.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j)
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    ds.validate();
    return ds;
}

inline void save_dataset(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    out << "family,timestamp";
    for (Eigen::Index j = 0; j < ds.dim(); ++j) {
        out << ',';
        if (j < static_cast<Eigen::Index>(ds.feature_names.size()))
            out << ds.feature_names[static_cast<std::size_t>(j)];
        else
            out << "f" << j;
    }
    out << '\n';
    char buf[64];
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        out << ds.labels[static_cast<std::size_t>(i)] << ','
            << ds.timestamps[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < ds.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.features(i, j));
            out << ',' << buf;
        }
        out << '\n';
    }
}

/// Population variance (divide by n), per column, double precision.
inline Eigen::VectorXd column_variances(const LabeledDataset& ds) {
    const auto n = static_cast<double>(ds.n());
    Eigen::RowVectorXd mean = ds.features.colwise().mean();
    return ((ds.features.rowwise() - mean).array().square().colwise().sum() / n)
        .matrix()
        .transpose();
}

inline FeatureMask fit_variance_mask(const LabeledDataset& ds, double min_variance) {
    if (ds.n() == 0) throw std::invalid_argument("fit_variance_mask: empty dataset");
    if (min_variance < 0.0) throw std::invalid_argument("fit_variance_mask: min_variance < 0");
    Eigen::VectorXd var = column_variances(ds);
    FeatureMask mask;
    mask.min_variance = min_variance;
    for (Eigen::Index j = 0; j < var.size(); ++j)
        if (var(j) >= min_variance) mask.kept_indices.push_back(static_cast<int>(j));
    if (mask.kept_indices.empty())
        throw std::runtime_error("fit_variance_mask: no column reaches the variance threshold");
    return mask;
}

inline LabeledDataset apply_mask(const LabeledDataset& ds, const FeatureMask& mask) {
    LabeledDataset out;
    out.labels = ds.labels;
    out.timestamps = ds.timestamps;
    out.features.resize(ds.n(), static_cast<Eigen::Index>(mask.kept_indices.size()));
    for (std::size_t j = 0; j < mask.kept_indices.size(); ++j) {
        const int col = mask.kept_indices[j];
        if (col < 0 || col >= ds.dim())
            throw std::out_of_range("apply_mask: column index " + std::to_string(col) +
                                    " out of range for width " + std::to_string(ds.dim()));
        out.features.col(static_cast<Eigen::Index>(j)) = ds.features.col(col);
        if (col < static_cast<int>(ds.feature_names.size()))
            out.feature_names.push_back(ds.feature_names[static_cast<std::size_t>(col)]);
    }
    return out;
}

inline void save_mask(const FeatureMask& mask, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write mask file: " + path);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", mask.min_variance);
    out << "min_variance=" << buf << '\n';
    for (int idx : mask.kept_indices) out << idx << '\n';
}

inline FeatureMask load_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mask file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("min_variance=", 0) != 0)
        throw std::runtime_error(path + ": first line must be min_variance=<value>");
    FeatureMask mask;
    mask.min_variance = std::stod(line.substr(13));
    int prev = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int idx = std::stoi(line);
        if (idx <= prev)
            throw std::runtime_error(path + ": indices must be strictly increasing");
        mask.kept_indices.push_back(idx);
        prev = idx;
    }
    if (mask.kept_indices.empty()) throw std::runtime_error(path + ": no kept columns");
    return mask;
}

inline LabeledDataset select_rows(const LabeledDataset& ds, const std::vector<Eigen::Index>& rows) {
    LabeledDataset out;
    out.feature_names = ds.feature_names;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), ds.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(rows[i]);
        out.labels.push_back(ds.labels[static_cast<std::size_t>(rows[i])]);
        out.timestamps.push_back(ds.timestamps[static_cast<std::size_t>(rows[i])]);
    }
    return out;
}

/// Sorts ascending by timestamp (stable, so ties keep original row order)
/// and takes the first ceil(train_fraction * n) samples as train.
inline std::pair<LabeledDataset, LabeledDataset> temporal_split(const LabeledDataset& ds,
                                                                double train_fraction) {
    if (ds.n() == 0) throw std::invalid_argument("temporal_split: empty dataset");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("temporal_split: train_fraction must be in (0,1)");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(ds.n()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return ds.timestamps[static_cast<std::size_t>(a)] <
               ds.timestamps[static_cast<std::size_t>(b)];
    });

    const auto n_train = static_cast<std::size_t>(
        std::ceil(train_fraction * static_cast<double>(ds.n())));
    std::vector<Eigen::Index> train_rows(order.begin(), order.begin() + static_cast<long>(n_train));
    std::vector<Eigen::Index> test_rows(order.begin() + static_cast<long>(n_train), order.end());
    return {select_rows(ds, train_rows), select_rows(ds, test_rows)};
}

inline DriftScenario build_drift_scenario(const LabeledDataset& train,
                                          const LabeledDataset& test,
                                          const std::string& holdout_family) {
    auto has = [&](const LabeledDataset& d) {
        return std::find(d.labels.begin(), d.labels.end(), holdout_family) != d.labels.end();
    };
    if (!has(train) && !has(test)) {
        std::set<std::string> fams(train.labels.begin(), train.labels.end());
        fams.insert(test.labels.begin(), test.labels.end());
        std::string avail;
        for (const auto& f : fams) avail += (avail.empty() ? "" : ", ") + f;
        throw std::invalid_argument("build_drift_scenario: unknown family '" + holdout_family +
                                    "' (available: " + avail + ")");
    }

    DriftScenario sc;
    sc.holdout_family = holdout_family;

    std::vector<Eigen::Index> keep_train, unk_train, keep_test, unk_test;
    for (Eigen::Index i = 0; i < train.n(); ++i)
        (train.labels[static_cast<std::size_t>(i)] == holdout_family ? unk_train : keep_train)
            .push_back(i);
    for (Eigen::Index i = 0; i < test.n(); ++i)
        (test.labels[static_cast<std::size_t>(i)] == holdout_family ? unk_test : keep_test)
            .push_back(i);

    sc.train = select_rows(train, keep_train);
    sc.test_known = select_rows(test, keep_test);

    // Holdout rows from both splits are pooled into test_unknown.
    LabeledDataset unk_a = select_rows(train, unk_train);
    LabeledDataset unk_b = select_rows(test, unk_test);
    sc.test_unknown = unk_a;
    sc.test_unknown.features.conservativeResize(unk_a.n() + unk_b.n(), train.dim());
    sc.test_unknown.features.bottomRows(unk_b.n()) = unk_b.features;
    sc.test_unknown.labels.insert(sc.test_unknown.labels.end(), unk_b.labels.begin(),
                                  unk_b.labels.end());
    sc.test_unknown.timestamps.insert(sc.test_unknown.timestamps.end(), unk_b.timestamps.begin(),
                                      unk_b.timestamps.end());

    sc.single_family_train = sc.train.family_names().size() == 1;
    return sc;
}

/// Isotropic unit-sigma Gaussian blobs around centroids placed at pairwise
/// distance >= spec.centroid_separation. Rows come out sorted by timestamp.
inline LabeledDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    const int total_clusters = spec.n_families * spec.clusters_per_family;

    std::vector<Eigen::VectorXd> centroids;
    bool placed = false;
    for (int attempt = 0; attempt < 10 && !placed; ++attempt) {
        centroids.clear();
        const double side = spec.centroid_separation *
                            (attempt + 2) *
                            std::max(2.0, std::pow(static_cast<double>(total_clusters),
                                                   1.0 / spec.dim) + 1.0);
        std::uniform_real_distribution<double> unif(0.0, side);
        placed = true;
        for (int c = 0; c < total_clusters && placed; ++c) {
            bool ok = false;
            for (int t = 0; t < 500 && !ok; ++t) {
                Eigen::VectorXd cand(spec.dim);
                for (int j = 0; j < spec.dim; ++j) cand(j) = unif(rng);
                ok = true;
                for (const auto& existing : centroids)
                    if ((cand - existing).norm() < spec.centroid_separation) {
                        ok = false;
                        break;
                    }
                if (ok) centroids.push_back(cand);
            }
            if (!ok) placed = false;
        }
    }
    if (!placed)
        throw std::runtime_error("generate_synthetic: could not place centroids at separation " +
                                 std::to_string(spec.centroid_separation));

    const int n_total = spec.n_families * spec.samples_per_family;
    LabeledDataset ds;
    ds.features.resize(n_total, spec.dim);
    ds.labels.resize(static_cast<std::size_t>(n_total));
    ds.timestamps.resize(static_cast<std::size_t>(n_total));
    for (int j = 0; j < spec.dim; ++j) ds.feature_names.push_back("f" + std::to_string(j));

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> ts_dist(0, 1'000'000);
    Eigen::Index row = 0;
    for (int f = 0; f < spec.n_families; ++f) {
        const std::string name = "family_" + std::to_string(f);
        for (int s = 0; s < spec.samples_per_family; ++s) {
            // samples round-robin over the family's blobs
            const int blob = f * spec.clusters_per_family + s % spec.clusters_per_family;
            for (int j = 0; j < spec.dim; ++j)
                ds.features(row, j) = centroids[static_cast<std::size_t>(blob)](j) + gauss(rng);
            ds.labels[static_cast<std::size_t>(row)] = name;
            ds.timestamps[static_cast<std::size_t>(row)] = ts_dist(rng);
            ++row;
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n_total));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return ds.timestamps[static_cast<std::size_t>(a)] <
               ds.timestamps[static_cast<std::size_t>(b)];
    });
    return select_rows(ds, order);
}

}  // namespace drift
