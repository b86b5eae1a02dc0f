#pragma once

#include "drift/dataset.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace drift {

inline constexpr int kNoise = -1;

struct ClusterAssignment {
    std::vector<int> labels;  // cluster id >= 0, or kNoise
    double eps = 0.0;
    int min_pts = 0;

    int cluster_count() const {
        int mx = -1;
        for (int l : labels) mx = std::max(mx, l);
        return mx + 1;
    }
    std::size_t noise_count() const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNoise));
    }
};

struct ClusterSummary {
    std::string family;
    int cluster_id = 0;
    Eigen::VectorXd centroid;
    double threshold = 0.0;       // Euclidean radius to the furthest member
    std::size_t member_count = 0;
    std::size_t noise_excluded = 0;  // noise points in this family's DBSCAN run
    double eps = 0.0;
    int min_pts = 0;
    double median_distance = 0.0;  // member-to-centroid distance stats for the
    double mad_distance = 0.0;     // MAD threshold baseline
};

/// Frozen per-family cluster model: centroids plus rejection radii.
struct FamilyModel {
    std::vector<ClusterSummary> clusters;
    int latent_dim = 0;
    std::uint64_t network_hash = 0;
    std::vector<std::string> warnings;
};

/// Classic DBSCAN, Euclidean distance, closed neighborhoods (d <= eps). A
/// core point counts itself among its min_pts neighbors. Scan order is
/// ascending point index, so border points join the first cluster that
/// reaches them.
inline ClusterAssignment dbscan(const Eigen::MatrixXd& points, double eps, int min_pts) {
    if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be > 0");
    if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
    if (points.rows() < 1) throw std::invalid_argument("dbscan: empty input");
    if (!points.allFinite()) throw std::invalid_argument("dbscan: non-finite coordinates");

    const Eigen::Index n = points.rows();
    const double eps_sq = eps * eps;
    auto neighbors_of = [&](Eigen::Index i) {
        std::vector<Eigen::Index> nb;
        for (Eigen::Index j = 0; j < n; ++j)
            if ((points.row(i) - points.row(j)).squaredNorm() <= eps_sq) nb.push_back(j);
        return nb;
    };

    ClusterAssignment out;
    out.eps = eps;
    out.min_pts = min_pts;
    out.labels.assign(static_cast<std::size_t>(n), kNoise);
    std::vector<bool> visited(static_cast<std::size_t>(n), false);

    int next_cluster = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (visited[static_cast<std::size_t>(i)]) continue;
        visited[static_cast<std::size_t>(i)] = true;
        auto nb = neighbors_of(i);
        if (static_cast<int>(nb.size()) < min_pts) continue;  // noise unless reached later

        const int cid = next_cluster++;
        out.labels[static_cast<std::size_t>(i)] = cid;
        std::deque<Eigen::Index> seeds(nb.begin(), nb.end());
        while (!seeds.empty()) {
            const Eigen::Index q = seeds.front();
            seeds.pop_front();
            if (out.labels[static_cast<std::size_t>(q)] == kNoise)
                out.labels[static_cast<std::size_t>(q)] = cid;  // border or newly reached
            if (visited[static_cast<std::size_t>(q)]) continue;
            visited[static_cast<std::size_t>(q)] = true;
            auto qnb = neighbors_of(q);
            if (static_cast<int>(qnb.size()) >= min_pts)
                seeds.insert(seeds.end(), qnb.begin(), qnb.end());
        }
    }
    return out;
}

/// minPts heuristic: twice the latent dimensionality, clamped to
/// [4, class_size/2]; small classes (< 8) get the floor of 4.
inline int estimate_min_pts(int latent_dim, int class_size) {
    if (latent_dim < 1 || class_size < 1)
        throw std::invalid_argument("estimate_min_pts: arguments must be positive");
    if (class_size < 8) return 4;
    return std::clamp(2 * latent_dim, 4, class_size / 2);
}

/// k-distance elbow: sort every point's distance to its k-th nearest
/// neighbor descending and return the value at the index of maximum
/// perpendicular distance from the chord joining the curve's endpoints.
inline double estimate_eps(const Eigen::MatrixXd& points, int k,
                           std::vector<std::string>* warnings = nullptr) {
    const Eigen::Index n = points.rows();
    if (k < 1 || n <= k) throw std::invalid_argument("estimate_eps: need n > k >= 1");

    std::vector<double> kdist(static_cast<std::size_t>(n));
    std::vector<double> d(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j)
            d[static_cast<std::size_t>(j)] = (points.row(i) - points.row(j)).norm();
        std::nth_element(d.begin(), d.begin() + k, d.end());
        kdist[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(k)];  // self is rank 0
    }
    std::sort(kdist.begin(), kdist.end(), std::greater<double>());

    if (kdist.front() <= 0.0) {
        if (warnings)
            warnings->push_back("estimate_eps: all k-distances are zero (coincident data)");
        return 1024.0 * std::numeric_limits<double>::epsilon();
    }

    // discrete elbow: farthest point from the chord (0, y0) -- (n-1, y_last)
    const double x1 = 0.0, y1 = kdist.front();
    const double x2 = static_cast<double>(n - 1), y2 = kdist.back();
    const double dx = x2 - x1, dy = y2 - y1;
    const double norm = std::sqrt(dx * dx + dy * dy);
    std::size_t best = 0;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < kdist.size(); ++i) {
        const double dist =
            std::abs(dy * (static_cast<double>(i) - x1) - dx * (kdist[i] - y1)) / norm;
        if (dist > best_dist) {
            best_dist = dist;
            best = i;
        }
    }

    double eps = kdist[best];
    if (eps <= 0.0) {
        // elbow landed in a run of zeros; back off to the smallest positive value
        for (auto it = kdist.rbegin(); it != kdist.rend(); ++it)
            if (*it > 0.0) {
                eps = *it;
                break;
            }
    }
    return eps;
}

inline Eigen::VectorXd compute_centroid(const Eigen::MatrixXd& members) {
    if (members.rows() < 1) throw std::invalid_argument("compute_centroid: empty cluster");
    return members.colwise().mean().transpose();
}

inline double compute_threshold(const Eigen::MatrixXd& members, const Eigen::VectorXd& centroid) {
    if (members.rows() < 1) throw std::invalid_argument("compute_threshold: empty cluster");
    double worst = 0.0;
    for (Eigen::Index i = 0; i < members.rows(); ++i)
        worst = std::max(worst, (members.row(i).transpose() - centroid).norm());
    return worst;
}

namespace detail {

inline void distance_stats(const std::vector<double>& distances, double& median, double& mad) {
    std::vector<double> v = distances;
    auto med_of = [](std::vector<double>& x) {
        std::sort(x.begin(), x.end());
        const std::size_t n = x.size();
        return n % 2 == 1 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
    };
    median = med_of(v);
    std::vector<double> dev;
    dev.reserve(v.size());
    for (double d : distances) dev.push_back(std::abs(d - median));
    mad = med_of(dev);
}

}  // namespace detail

/// Clusters each family independently (minPts heuristic + k-distance eps),
/// drops noise, and records per-cluster centroid, radius and distance
/// statistics. A family whose DBSCAN run yields no cluster falls back to
/// one cluster over all of its points.
inline FamilyModel build_family_model(const Eigen::MatrixXd& embeddings,
                                      const std::vector<std::string>& labels, int latent_dim,
                                      std::vector<std::vector<double>>* member_distances = nullptr) {
    if (embeddings.rows() < 1) throw std::invalid_argument("build_family_model: empty embeddings");
    if (static_cast<Eigen::Index>(labels.size()) != embeddings.rows())
        throw std::invalid_argument("build_family_model: labels do not align with rows");
    if (embeddings.cols() != latent_dim)
        throw std::invalid_argument("build_family_model: embedding width != latent_dim");

    std::map<std::string, std::vector<Eigen::Index>> by_family;
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i)
        by_family[labels[static_cast<std::size_t>(i)]].push_back(i);

    FamilyModel fm;
    fm.latent_dim = latent_dim;
    if (member_distances) member_distances->clear();

    for (const auto& [family, rows] : by_family) {
        Eigen::MatrixXd pts(static_cast<Eigen::Index>(rows.size()), latent_dim);
        for (std::size_t i = 0; i < rows.size(); ++i)
            pts.row(static_cast<Eigen::Index>(i)) = embeddings.row(rows[i]);

        const int min_pts = estimate_min_pts(latent_dim, static_cast<int>(rows.size()));
        const int k = min_pts - 1;

        std::vector<std::vector<Eigen::Index>> member_sets;  // per cluster, local indices
        double eps = 0.0;
        std::size_t noise = 0;
        if (pts.rows() > k) {
            eps = estimate_eps(pts, k, &fm.warnings);
            ClusterAssignment asg = dbscan(pts, eps, min_pts);
            member_sets.resize(static_cast<std::size_t>(asg.cluster_count()));
            for (std::size_t i = 0; i < asg.labels.size(); ++i) {
                if (asg.labels[i] == kNoise)
                    ++noise;
                else
                    member_sets[static_cast<std::size_t>(asg.labels[i])].push_back(
                        static_cast<Eigen::Index>(i));
            }
        }
        if (member_sets.empty()) {
            fm.warnings.push_back("family '" + family +
                                  "': DBSCAN found no cluster, using all points as one cluster");
            member_sets.emplace_back();
            for (Eigen::Index i = 0; i < pts.rows(); ++i) member_sets[0].push_back(i);
            noise = 0;
        }

        for (std::size_t cid = 0; cid < member_sets.size(); ++cid) {
            Eigen::MatrixXd members(static_cast<Eigen::Index>(member_sets[cid].size()), latent_dim);
            for (std::size_t i = 0; i < member_sets[cid].size(); ++i)
                members.row(static_cast<Eigen::Index>(i)) = pts.row(member_sets[cid][i]);

            ClusterSummary cs;
            cs.family = family;
            cs.cluster_id = static_cast<int>(cid);
            cs.centroid = compute_centroid(members);
            cs.threshold = compute_threshold(members, cs.centroid);
            cs.member_count = member_sets[cid].size();
            cs.noise_excluded = noise;
            cs.eps = eps;
            cs.min_pts = min_pts;

            std::vector<double> dists;
            dists.reserve(cs.member_count);
            for (Eigen::Index i = 0; i < members.rows(); ++i)
                dists.push_back((members.row(i).transpose() - cs.centroid).norm());
            detail::distance_stats(dists, cs.median_distance, cs.mad_distance);
            if (member_distances) member_distances->push_back(std::move(dists));
            fm.clusters.push_back(std::move(cs));
        }
    }
    return fm;
}

}  // namespace drift
