#pragma once

#include "drift/cluster.hpp"
#include "drift/dataset.hpp"
#include "drift/detect.hpp"
#include "drift/metric.hpp"
#include "drift/serialize.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace drift {

/// Confusion counts where positive = drifting (unknown-family) sample
/// flagged DRIFT.
struct DriftMetrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    double precision() const {
        return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    double recall() const {
        return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    double f1() const {
        const double p = precision(), r = recall();
        return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
    std::size_t total() const { return tp + fp + tn + fn; }

    DriftMetrics& operator+=(const DriftMetrics& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }
};

inline DriftMetrics score_drift(const std::vector<DetectionVerdict>& verdicts,
                                const std::vector<bool>& is_unknown) {
    if (verdicts.size() != is_unknown.size())
        throw std::invalid_argument("score_drift: verdicts and truth lengths differ");
    DriftMetrics m;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        const bool flagged = verdicts[i].verdict == Verdict::Drift;
        if (flagged && is_unknown[i]) ++m.tp;
        else if (flagged && !is_unknown[i]) ++m.fp;
        else if (!flagged && is_unknown[i]) ++m.fn;
        else ++m.tn;
    }
    return m;
}

struct ScenarioResult {
    std::string holdout_family;
    std::size_t n_known = 0;
    std::size_t n_unknown = 0;
    DriftMetrics dbscan;
    DriftMetrics mad;
};

struct EvalReport {
    std::vector<ScenarioResult> scenarios;  // ordered: unknown count desc, then name
    DriftMetrics overall_dbscan;            // pooled confusion counts
    DriftMetrics overall_mad;
    std::vector<std::pair<std::string, std::string>> config;
};

struct EvalConfig {
    double min_variance = 0.0;
    double train_fraction = 0.8;
    TrainConfig train;  // empty layer_dims -> auto: {masked width, 1024, 256, 32}
    double mad_coefficient = 3.5;
};

/// Runs one drift scenario end to end: train the triplet autoencoder on
/// the scenario's train split, cluster its latent space, then classify the
/// pooled test set under both threshold rules.
inline ScenarioResult run_scenario(const DriftScenario& sc, const TrainConfig& train_cfg,
                                   double mad_coefficient, TrainedModel* model_out = nullptr,
                                   FamilyModel* fm_out = nullptr) {
    TrainedModel model = train_triplet(sc.train, train_cfg);
    Eigen::MatrixXd train_emb = embed(model, sc.train);

    std::vector<std::vector<double>> member_distances;
    FamilyModel fm = build_family_model(train_emb, sc.train.labels, model.network.latent_dim(),
                                        &member_distances);
    fm.network_hash = network_hash(model.network);
    MadModel mad = mad_fit(member_distances, mad_coefficient);

    ScenarioResult res;
    res.holdout_family = sc.holdout_family;
    res.n_known = static_cast<std::size_t>(sc.test_known.n());
    res.n_unknown = static_cast<std::size_t>(sc.test_unknown.n());

    std::vector<DetectionVerdict> v_dbscan, v_mad;
    std::vector<bool> truth;
    auto classify_all = [&](const LabeledDataset& ds, bool unknown) {
        if (ds.n() == 0) return;
        Eigen::MatrixXd emb = embed(model, ds);
        for (Eigen::Index i = 0; i < emb.rows(); ++i) {
            const Eigen::VectorXd e = emb.row(i).transpose();
            v_dbscan.push_back(classify(fm, e));
            v_mad.push_back(classify_mad(fm, mad, e));
            truth.push_back(unknown);
        }
    };
    classify_all(sc.test_known, false);
    classify_all(sc.test_unknown, true);

    res.dbscan = score_drift(v_dbscan, truth);
    res.mad = score_drift(v_mad, truth);
    if (model_out) *model_out = std::move(model);
    if (fm_out) *fm_out = std::move(fm);
    return res;
}

/// Leave-one-family-out protocol: one scenario (and one freshly trained
/// network) per family, scored with truth = membership in the held-out
/// family. Deterministic per (dataset, config, seed).
inline EvalReport run_leave_one_out(const LabeledDataset& raw, const EvalConfig& cfg,
                                    std::string* model_bytes_out = nullptr) {
    FeatureMask mask = fit_variance_mask(raw, cfg.min_variance);
    LabeledDataset masked = apply_mask(raw, mask);
    auto [train, test] = temporal_split(masked, cfg.train_fraction);

    const auto families = masked.family_names();
    if (families.size() < 2)
        throw std::invalid_argument("run_leave_one_out: need at least 2 families");

    TrainConfig train_cfg = cfg.train;
    if (train_cfg.layer_dims.empty())
        train_cfg.layer_dims = {static_cast<int>(masked.dim()), 1024, 256, 32};
    train_cfg.layer_dims.front() = static_cast<int>(masked.dim());

    EvalReport report;
    std::ostringstream model_bytes;
    for (const auto& family : families) {
        DriftScenario sc = build_drift_scenario(train, test, family);
        TrainConfig scenario_cfg = train_cfg;
        TrainedModel model;
        report.scenarios.push_back(run_scenario(sc, scenario_cfg, cfg.mad_coefficient,
                                                model_bytes_out ? &model : nullptr));
        report.overall_dbscan += report.scenarios.back().dbscan;
        report.overall_mad += report.scenarios.back().mad;
        if (model_bytes_out) serialize_model(model, model_bytes);
    }
    if (model_bytes_out) *model_bytes_out = model_bytes.str();

    std::sort(report.scenarios.begin(), report.scenarios.end(),
              [](const ScenarioResult& a, const ScenarioResult& b) {
                  if (a.n_unknown != b.n_unknown) return a.n_unknown > b.n_unknown;
                  return a.holdout_family < b.holdout_family;
              });

    report.config = config_echo(train_cfg, "triplet");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", cfg.min_variance);
    report.config.emplace_back("min_variance", buf);
    std::snprintf(buf, sizeof(buf), "%.17g", cfg.train_fraction);
    report.config.emplace_back("train_fraction", buf);
    std::snprintf(buf, sizeof(buf), "%.17g", cfg.mad_coefficient);
    report.config.emplace_back("mad_coefficient", buf);
    return report;
}

enum class ReportFormat { Table, Csv };

/// Renders per-scenario rows plus an overall row from pooled counts.
inline std::string report_render(const EvalReport& report, ReportFormat format) {
    std::ostringstream out;
    char buf[64];
    auto f = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        return std::string(buf);
    };

    if (format == ReportFormat::Csv) {
        for (const auto& [k, v] : report.config) out << "# " << k << '=' << v << '\n';
        out << "family,n_known,n_unknown,"
               "tp_dbscan,fp_dbscan,tn_dbscan,fn_dbscan,precision_dbscan,recall_dbscan,f1_dbscan,"
               "tp_mad,fp_mad,tn_mad,fn_mad,precision_mad,recall_mad,f1_mad\n";
        auto row = [&](const std::string& name, std::size_t nk, std::size_t nu,
                       const DriftMetrics& d, const DriftMetrics& m) {
            out << name << ',' << nk << ',' << nu << ',' << d.tp << ',' << d.fp << ',' << d.tn
                << ',' << d.fn << ',' << f(d.precision()) << ',' << f(d.recall()) << ','
                << f(d.f1()) << ',' << m.tp << ',' << m.fp << ',' << m.tn << ',' << m.fn << ','
                << f(m.precision()) << ',' << f(m.recall()) << ',' << f(m.f1()) << '\n';
        };
        std::size_t nk = 0, nu = 0;
        for (const auto& s : report.scenarios) {
            row(s.holdout_family, s.n_known, s.n_unknown, s.dbscan, s.mad);
            nk += s.n_known;
            nu += s.n_unknown;
        }
        row("overall", nk, nu, report.overall_dbscan, report.overall_mad);
        return out.str();
    }

    auto line = [&](const std::string& a, const std::string& b, const std::string& c,
                    const std::string& d, const std::string& e) {
        char row[160];
        std::snprintf(row, sizeof(row), "%-18s %10s %12s %10s %12s\n", a.c_str(), b.c_str(),
                      c.c_str(), d.c_str(), e.c_str());
        out << row;
    };
    line("Family", "Known", "Unknown", "F1 (MAD)", "F1 (DBSCAN)");
    std::size_t nk = 0, nu = 0;
    for (const auto& s : report.scenarios) {
        line(s.holdout_family, std::to_string(s.n_known), std::to_string(s.n_unknown),
             f(s.mad.f1()), f(s.dbscan.f1()));
        nk += s.n_known;
        nu += s.n_unknown;
    }
    line("Overall", std::to_string(nk), std::to_string(nu), f(report.overall_mad.f1()),
         f(report.overall_dbscan.f1()));
    return out.str();
}

/// Verdict CSV used by the detect subcommand.
inline std::string render_verdicts(const std::vector<DetectionVerdict>& verdicts) {
    std::ostringstream out;
    out << "sample_index,verdict,nearest_family,nearest_cluster,distance,threshold\n";
    char buf[64];
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        const auto& v = verdicts[i];
        out << i << ',' << to_string(v.verdict) << ',' << v.nearest_family << ','
            << v.nearest_cluster_id;
        std::snprintf(buf, sizeof(buf), "%.12g", v.distance);
        out << ',' << buf;
        std::snprintf(buf, sizeof(buf), "%.12g", v.threshold_used);
        out << ',' << buf << '\n';
    }
    return out.str();
}

}  // namespace drift
