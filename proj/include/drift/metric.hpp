#pragma once

#include "drift/dataset.hpp"
#include "drift/network.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace drift {

/// (anchor, positive, negative) sample indices. Anchor and positive share a
/// family, the negative comes from a different one.
struct Triplet {
    Eigen::Index anchor_idx;
    Eigen::Index positive_idx;
    Eigen::Index negative_idx;
};

struct TrainConfig {
    std::vector<int> layer_dims;   // encoder dims including input width
    double margin = 1.0;           // triplet margin alpha
    double triplet_weight = 1.0;   // lambda in L_mse + lambda * L_triplet
    int epochs = 100;
    int batch_size = 64;
    int triplets_per_epoch = 0;    // 0 -> n_train
    double learning_rate = 1e-3;
    std::uint64_t seed = 42;

    void validate() const {
        if (!(margin > 0.0) || !std::isfinite(margin))
            throw std::invalid_argument("config: margin must be finite and > 0");
        if (triplet_weight < 0.0)
            throw std::invalid_argument("config: triplet weight must be >= 0");
        if (epochs < 1 || batch_size < 1 || triplets_per_epoch < 0)
            throw std::invalid_argument("config: counts must be positive");
    }
};

struct LossPoint {
    int epoch;
    double reconstruction_loss;
    double triplet_loss;
};

struct TrainedModel {
    NetworkParams network;
    FeatureMask feature_mask;
    TrainConfig config;
    std::string mode;  // "vanilla" or "triplet"
    std::vector<LossPoint> curve;
};

namespace detail {

struct FamilyIndex {
    std::vector<std::string> names;                  // sorted ascending
    std::vector<std::vector<Eigen::Index>> members;  // aligned with names

    explicit FamilyIndex(const LabeledDataset& ds) {
        std::map<std::string, std::vector<Eigen::Index>> by_family;
        for (Eigen::Index i = 0; i < ds.n(); ++i)
            by_family[ds.labels[static_cast<std::size_t>(i)]].push_back(i);
        for (auto& [name, idx] : by_family) {
            names.push_back(name);
            members.push_back(std::move(idx));
        }
    }
};

/// Maps rank r over the complement of `excluded` (sorted ascending) to an
/// absolute sample index.
inline Eigen::Index nth_outside(const std::vector<Eigen::Index>& excluded, Eigen::Index r) {
    Eigen::Index ans = r;
    for (Eigen::Index e : excluded) {
        if (e <= ans)
            ++ans;
        else
            break;
    }
    return ans;
}

inline std::vector<Triplet> sample_triplets_rng(const LabeledDataset& ds, int count,
                                                std::mt19937_64& rng) {
    const FamilyIndex fam(ds);
    if (fam.names.size() < 2)
        throw std::invalid_argument("sample_triplets: need at least 2 families");

    std::uniform_int_distribution<std::size_t> pick_family(0, fam.names.size() - 1);
    std::vector<Triplet> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) {
        std::size_t f = 0;
        bool found = false;
        for (int retry = 0; retry < 256 && !found; ++retry) {
            f = pick_family(rng);
            found = fam.members[f].size() >= 2;
        }
        if (!found)
            throw std::runtime_error("sample_triplets: no anchor family with >= 2 samples");
        const auto& members = fam.members[f];

        std::uniform_int_distribution<std::size_t> pick_anchor(0, members.size() - 1);
        const std::size_t a = pick_anchor(rng);
        std::uniform_int_distribution<std::size_t> pick_pos(0, members.size() - 2);
        std::size_t p = pick_pos(rng);
        if (p >= a) ++p;  // positive uniform within class, excluding the anchor

        const Eigen::Index n_others = ds.n() - static_cast<Eigen::Index>(members.size());
        std::uniform_int_distribution<Eigen::Index> pick_neg(0, n_others - 1);
        const Eigen::Index neg = nth_outside(members, pick_neg(rng));
        out.push_back({members[a], members[p], neg});
    }
    return out;
}

}  // namespace detail

/// Random triplet mining: anchor class uniform over families, anchor and
/// positive uniform within the class, negative uniform over all samples of
/// other classes. Deterministic per seed.
inline std::vector<Triplet> sample_triplets(const LabeledDataset& ds, int count,
                                            std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return detail::sample_triplets_rng(ds, count, rng);
}

/// Hinge loss max{0, D(a,p) - D(a,n) + margin} with D the squared Euclidean
/// distance between embeddings. Subgradient at the hinge boundary is zero.
struct TripletLossResult {
    double loss;
    Eigen::VectorXd grad_anchor, grad_positive, grad_negative;
};

inline TripletLossResult triplet_loss(const Eigen::VectorXd& emb_a, const Eigen::VectorXd& emb_p,
                                      const Eigen::VectorXd& emb_n, double margin) {
    if (emb_a.size() != emb_p.size() || emb_a.size() != emb_n.size())
        throw std::invalid_argument("triplet_loss: embedding width mismatch");
    if (!(margin > 0.0)) throw std::invalid_argument("triplet_loss: margin must be > 0");

    const Eigen::VectorXd ap = emb_a - emb_p;
    const Eigen::VectorXd an = emb_a - emb_n;
    const double hinge = ap.squaredNorm() - an.squaredNorm() + margin;
    TripletLossResult r;
    if (hinge > 0.0) {
        r.loss = hinge;
        r.grad_anchor = 2.0 * (emb_n - emb_p);
        r.grad_positive = -2.0 * ap;
        r.grad_negative = 2.0 * an;
    } else {
        r.loss = 0.0;
        r.grad_anchor = Eigen::VectorXd::Zero(emb_a.size());
        r.grad_positive = Eigen::VectorXd::Zero(emb_a.size());
        r.grad_negative = Eigen::VectorXd::Zero(emb_a.size());
    }
    return r;
}

struct BatchTripletLossResult {
    double loss;  // arithmetic mean over triplets
    std::vector<std::array<Eigen::VectorXd, 3>> grads;  // per triplet, scaled 1/N
};

inline BatchTripletLossResult batch_triplet_loss(
    const std::vector<std::array<Eigen::VectorXd, 3>>& embeddings, double margin) {
    if (embeddings.empty()) throw std::invalid_argument("batch_triplet_loss: empty batch");
    const double inv_n = 1.0 / static_cast<double>(embeddings.size());
    BatchTripletLossResult out;
    out.loss = 0.0;
    for (const auto& e : embeddings) {
        auto r = triplet_loss(e[0], e[1], e[2], margin);
        out.loss += r.loss * inv_n;
        out.grads.push_back({r.grad_anchor * inv_n, r.grad_positive * inv_n,
                             r.grad_negative * inv_n});
    }
    return out;
}

/// One evaluation of L_mse + lambda * L_triplet over a stacked batch, with
/// optional parameter gradients. `row_triplets` index rows of `batch`; the
/// MSE term averages over every batch row.
struct CompositeLossResult {
    double total = 0.0;
    double reconstruction = 0.0;
    double triplet = 0.0;
};

inline CompositeLossResult composite_loss(const NetworkParams& net, const Eigen::MatrixXd& batch,
                                          const std::vector<std::array<Eigen::Index, 3>>& row_triplets,
                                          double margin, double lambda, ParamGrads* grads = nullptr) {
    ActivationTrace tr = forward(net, batch);
    CompositeLossResult res;

    auto [mse, mse_grad] = mse_loss(tr.reconstruction(), batch);
    res.reconstruction = mse;

    Eigen::MatrixXd bottleneck_grad;
    if (!row_triplets.empty()) {
        const Eigen::MatrixXd& z = tr.bottleneck();
        std::vector<std::array<Eigen::VectorXd, 3>> embs;
        embs.reserve(row_triplets.size());
        for (const auto& t : row_triplets)
            embs.push_back({z.row(t[0]).transpose(), z.row(t[1]).transpose(),
                            z.row(t[2]).transpose()});
        auto bt = batch_triplet_loss(embs, margin);
        res.triplet = bt.loss;
        if (grads && lambda != 0.0) {
            bottleneck_grad = Eigen::MatrixXd::Zero(batch.rows(), net.latent_dim());
            for (std::size_t i = 0; i < row_triplets.size(); ++i)
                for (int k = 0; k < 3; ++k)
                    bottleneck_grad.row(row_triplets[i][static_cast<std::size_t>(k)]) +=
                        lambda * bt.grads[i][static_cast<std::size_t>(k)].transpose();
        }
    }

    res.total = res.reconstruction + lambda * res.triplet;
    if (grads) *grads = backward(net, tr, bottleneck_grad, mse_grad);
    return res;
}

namespace detail {

inline TrainedModel train_impl(const LabeledDataset& train, const TrainConfig& cfg,
                               const FeatureMask& mask, bool use_triplet) {
    cfg.validate();
    if (cfg.layer_dims.size() < 2)
        throw std::invalid_argument("train: config must name encoder dims");
    if (train.dim() != cfg.layer_dims.front())
        throw std::invalid_argument("train: dataset width " + std::to_string(train.dim()) +
                                    " != configured input dim " +
                                    std::to_string(cfg.layer_dims.front()));
    if (use_triplet && FamilyIndex(train).names.size() < 2)
        throw std::invalid_argument("train: triplet objective needs >= 2 families");

    TrainedModel model;
    model.network = init_network(cfg.layer_dims, cfg.seed);
    model.feature_mask = mask;
    model.config = cfg;
    model.mode = use_triplet ? "triplet" : "vanilla";

    AdamState adam = init_adam(model.network, cfg.learning_rate);
    std::mt19937_64 rng(cfg.seed);
    const int per_epoch = cfg.triplets_per_epoch > 0 ? cfg.triplets_per_epoch
                                                     : static_cast<int>(train.n());

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto triplets = sample_triplets_rng(train, per_epoch, rng);
        double recon_sum = 0.0, triplet_sum = 0.0;
        std::size_t rows_seen = 0, triplets_seen = 0;

        for (std::size_t start = 0; start < triplets.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t b =
                std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                      triplets.size() - start);
            // stacked layout: anchors [0,b), positives [b,2b), negatives [2b,3b)
            Eigen::MatrixXd batch(static_cast<Eigen::Index>(3 * b), train.dim());
            std::vector<std::array<Eigen::Index, 3>> rows;
            rows.reserve(b);
            for (std::size_t i = 0; i < b; ++i) {
                const Triplet& t = triplets[start + i];
                const auto ia = static_cast<Eigen::Index>(i);
                batch.row(ia) = train.features.row(t.anchor_idx);
                batch.row(ia + static_cast<Eigen::Index>(b)) =
                    train.features.row(t.positive_idx);
                batch.row(ia + static_cast<Eigen::Index>(2 * b)) =
                    train.features.row(t.negative_idx);
                rows.push_back({ia, ia + static_cast<Eigen::Index>(b),
                                ia + static_cast<Eigen::Index>(2 * b)});
            }

            ParamGrads grads;
            const double lambda = use_triplet ? cfg.triplet_weight : 0.0;
            CompositeLossResult loss = composite_loss(
                model.network, batch, use_triplet ? rows : std::vector<std::array<Eigen::Index, 3>>{},
                cfg.margin, lambda, &grads);
            if (!std::isfinite(loss.total))
                throw std::runtime_error("train: loss diverged at epoch " +
                                         std::to_string(epoch));
            adam_step(model.network, grads, adam);

            recon_sum += loss.reconstruction * static_cast<double>(3 * b);
            triplet_sum += loss.triplet * static_cast<double>(b);
            rows_seen += 3 * b;
            triplets_seen += b;
        }

        model.curve.push_back({epoch, recon_sum / static_cast<double>(rows_seen),
                               use_triplet ? triplet_sum / static_cast<double>(triplets_seen)
                                           : 0.0});
    }
    return model;
}

}  // namespace detail

inline FeatureMask identity_mask(Eigen::Index width) {
    FeatureMask mask;
    mask.min_variance = 0.0;
    for (Eigen::Index j = 0; j < width; ++j) mask.kept_indices.push_back(static_cast<int>(j));
    return mask;
}

/// Reconstruction-only training; the triplet weight is ignored but the
/// batch schedule (taken from triplet sampling) matches train_triplet.
inline TrainedModel train_vanilla(const LabeledDataset& train, const TrainConfig& cfg,
                                  const FeatureMask* mask = nullptr) {
    return detail::train_impl(train, cfg, mask ? *mask : identity_mask(train.dim()), false);
}

/// Combined objective L_mse + lambda * L_triplet; the triplet gradient
/// enters at the bottleneck, reconstruction at the output.
inline TrainedModel train_triplet(const LabeledDataset& train, const TrainConfig& cfg,
                                  const FeatureMask* mask = nullptr) {
    return detail::train_impl(train, cfg, mask ? *mask : identity_mask(train.dim()), true);
}

/// Bottleneck activations, one row per sample. Accepts raw-width data (the
/// stored mask is applied) or already-masked data.
inline Eigen::MatrixXd embed(const TrainedModel& model, const LabeledDataset& ds) {
    const Eigen::MatrixXd* feats = &ds.features;
    LabeledDataset masked;
    if (ds.dim() != model.network.input_dim()) {
        masked = apply_mask(ds, model.feature_mask);
        if (masked.dim() != model.network.input_dim())
            throw std::invalid_argument("embed: dataset width does not match mask/network");
        feats = &masked.features;
    }
    ActivationTrace tr = forward(model.network, *feats);
    return tr.bottleneck();
}

/// Convenience wrapper: grad_check on the combined objective realized by
/// composite_loss over a stacked batch.
inline double grad_check_composite(const NetworkParams& net, const Eigen::MatrixXd& batch,
                                   const std::vector<std::array<Eigen::Index, 3>>& row_triplets,
                                   double margin, double lambda, double step = 1e-5) {
    ParamGrads analytic;
    composite_loss(net, batch, row_triplets, margin, lambda, &analytic);
    auto objective = [&](const NetworkParams& p) {
        return composite_loss(p, batch, row_triplets, margin, lambda).total;
    };
    return grad_check(net, objective, analytic, step);
}

}  // namespace drift
