#pragma once

#include "drift/cluster.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace drift {

enum class Verdict { Known, Drift };

inline const char* to_string(Verdict v) { return v == Verdict::Known ? "KNOWN" : "DRIFT"; }

/// Per-sample decision with its nearest-centroid evidence. The nearest
/// fields are populated even for DRIFT verdicts so drifting samples can be
/// ranked by deviation.
struct DetectionVerdict {
    Verdict verdict = Verdict::Drift;
    std::string nearest_family;
    int nearest_cluster_id = 0;
    double distance = 0.0;
    double threshold_used = 0.0;
};

/// Per-cluster MAD-based thresholds: median + coefficient * MAD over the
/// cluster's member-to-centroid distances.
struct MadModel {
    struct Entry {
        double median = 0.0;
        double mad = 0.0;
        double threshold = 0.0;
    };
    std::vector<Entry> clusters;  // aligned with FamilyModel::clusters
    double coefficient = 3.5;
};

struct NearestCentroid {
    std::size_t cluster_index = 0;  // into FamilyModel::clusters
    std::string family;
    int cluster_id = 0;
    double distance = 0.0;
};

/// Argmin of Euclidean distance over all clusters; ties break by
/// (family name ascending, cluster id ascending).
inline NearestCentroid nearest_centroid(const FamilyModel& fm, const Eigen::VectorXd& embedding) {
    if (fm.clusters.empty()) throw std::invalid_argument("nearest_centroid: empty family model");
    if (embedding.size() != fm.latent_dim)
        throw std::invalid_argument("nearest_centroid: embedding width mismatch");

    NearestCentroid best;
    bool first = true;
    for (std::size_t i = 0; i < fm.clusters.size(); ++i) {
        const auto& c = fm.clusters[i];
        const double d = (embedding - c.centroid).norm();
        const bool better =
            first || d < best.distance ||
            (d == best.distance && (c.family < best.family ||
                                    (c.family == best.family && c.cluster_id < best.cluster_id)));
        if (better) {
            best = {i, c.family, c.cluster_id, d};
            first = false;
        }
    }
    return best;
}

/// KNOWN iff the distance to the nearest centroid is within that cluster's
/// radius (closed ball), otherwise DRIFT.
inline DetectionVerdict classify(const FamilyModel& fm, const Eigen::VectorXd& embedding) {
    const NearestCentroid nc = nearest_centroid(fm, embedding);
    DetectionVerdict v;
    v.nearest_family = nc.family;
    v.nearest_cluster_id = nc.cluster_id;
    v.distance = nc.distance;
    v.threshold_used = fm.clusters[nc.cluster_index].threshold;
    v.verdict = nc.distance <= v.threshold_used ? Verdict::Known : Verdict::Drift;
    return v;
}

/// MAD = median(|X_i - median(X)|); even-length medians average the two
/// central order statistics.
inline MadModel mad_fit(const std::vector<std::vector<double>>& per_cluster_distances,
                        double coefficient) {
    if (!(coefficient > 0.0)) throw std::invalid_argument("mad_fit: coefficient must be > 0");
    MadModel mm;
    mm.coefficient = coefficient;
    for (const auto& dists : per_cluster_distances) {
        if (dists.empty()) throw std::invalid_argument("mad_fit: empty distance set");
        MadModel::Entry e;
        detail::distance_stats(dists, e.median, e.mad);
        e.threshold = e.median + coefficient * e.mad;
        mm.clusters.push_back(e);
    }
    return mm;
}

/// Rebuilds MAD thresholds from the distance statistics frozen into a
/// FamilyModel at clustering time.
inline MadModel mad_from_family_model(const FamilyModel& fm, double coefficient) {
    if (!(coefficient > 0.0))
        throw std::invalid_argument("mad_from_family_model: coefficient must be > 0");
    MadModel mm;
    mm.coefficient = coefficient;
    for (const auto& c : fm.clusters)
        mm.clusters.push_back({c.median_distance, c.mad_distance,
                               c.median_distance + coefficient * c.mad_distance});
    return mm;
}

inline DetectionVerdict classify_mad(const FamilyModel& fm, const MadModel& mad,
                                     const Eigen::VectorXd& embedding) {
    if (mad.clusters.size() != fm.clusters.size())
        throw std::invalid_argument("classify_mad: MAD model does not align with family model");
    const NearestCentroid nc = nearest_centroid(fm, embedding);
    DetectionVerdict v;
    v.nearest_family = nc.family;
    v.nearest_cluster_id = nc.cluster_id;
    v.distance = nc.distance;
    v.threshold_used = mad.clusters[nc.cluster_index].threshold;
    v.verdict = nc.distance <= v.threshold_used ? Verdict::Known : Verdict::Drift;
    return v;
}

}  // namespace drift
