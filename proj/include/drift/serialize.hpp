#pragma once

#include "drift/cluster.hpp"
#include "drift/metric.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace drift {

struct CorruptFileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VersionMismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct HashMismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace io {

static_assert(std::endian::native == std::endian::little,
              "serialized containers assume a little-endian host");

inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr std::uint32_t kFamilyModelVersion = 1;
inline constexpr char kModelMagic[8] = {'D', 'R', 'I', 'F', 'T', 'A', 'E', '\0'};
inline constexpr char kFamilyMagic[8] = {'D', 'R', 'I', 'F', 'T', 'F', 'M', '\0'};

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw CorruptFileError("truncated container");
    return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
    const auto len = get<std::uint32_t>(in);
    if (len > (1u << 20)) throw CorruptFileError("implausible string length");
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw CorruptFileError("truncated container");
    return s;
}

inline void put_doubles(std::ostream& out, const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void get_doubles(std::istream& in, double* p, std::size_t n) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw CorruptFileError("truncated container");
}

}  // namespace io

/// FNV-1a over the layer dims and raw parameter bytes; identifies the
/// network a FamilyModel was built from.
inline std::uint64_t network_hash(const NetworkParams& net) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (int d : net.encoder_dims) mix(&d, sizeof(d));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        mix(net.weights[l].data(), static_cast<std::size_t>(net.weights[l].size()) * sizeof(double));
        mix(net.biases[l].data(), static_cast<std::size_t>(net.biases[l].size()) * sizeof(double));
    }
    return h;
}

inline std::vector<std::pair<std::string, std::string>> config_echo(const TrainConfig& cfg,
                                                                    const std::string& mode) {
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::string dims;
    for (std::size_t i = 0; i < cfg.layer_dims.size(); ++i)
        dims += (i ? "," : "") + std::to_string(cfg.layer_dims[i]);
    return {
        {"mode", mode},
        {"dims", dims},
        {"margin", fmt(cfg.margin)},
        {"lambda", fmt(cfg.triplet_weight)},
        {"epochs", std::to_string(cfg.epochs)},
        {"batch_size", std::to_string(cfg.batch_size)},
        {"triplets_per_epoch", std::to_string(cfg.triplets_per_epoch)},
        {"learning_rate", fmt(cfg.learning_rate)},
        {"seed", std::to_string(cfg.seed)},
    };
}

inline void serialize_model(const TrainedModel& model, std::ostream& out) {
    out.write(io::kModelMagic, 8);
    io::put<std::uint32_t>(out, io::kModelVersion);

    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.network.encoder_dims.size()));
    for (int d : model.network.encoder_dims) io::put<std::int32_t>(out, d);

    // activation tag per stacked layer
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.network.total_layers()));
    for (std::size_t l = 0; l < model.network.total_layers(); ++l)
        io::put_string(out, model.network.layer_is_linear(l) ? "identity" : "relu");

    io::put<std::uint64_t>(out, model.network.parameter_count());
    for (std::size_t l = 0; l < model.network.total_layers(); ++l) {
        io::put_doubles(out, model.network.weights[l].data(),
                        static_cast<std::size_t>(model.network.weights[l].size()));
        io::put_doubles(out, model.network.biases[l].data(),
                        static_cast<std::size_t>(model.network.biases[l].size()));
    }

    io::put<double>(out, model.feature_mask.min_variance);
    io::put<std::uint64_t>(out, model.feature_mask.kept_indices.size());
    for (int idx : model.feature_mask.kept_indices) io::put<std::int32_t>(out, idx);

    const auto echo = config_echo(model.config, model.mode);
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(echo.size()));
    for (const auto& [k, v] : echo) {
        io::put_string(out, k);
        io::put_string(out, v);
    }

    io::put<std::uint64_t>(out, model.curve.size());
    for (const auto& p : model.curve) {
        io::put<std::int32_t>(out, p.epoch);
        io::put<double>(out, p.reconstruction_loss);
        io::put<double>(out, p.triplet_loss);
    }
}

inline void serialize_model(const TrainedModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    serialize_model(model, out);
}

inline TrainedModel deserialize_model(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, io::kModelMagic, 8) != 0)
        throw CorruptFileError("not a network model container");
    const auto version = io::get<std::uint32_t>(in);
    if (version != io::kModelVersion)
        throw VersionMismatchError("unsupported model version " + std::to_string(version));

    TrainedModel model;
    const auto n_dims = io::get<std::uint32_t>(in);
    if (n_dims < 2 || n_dims > 64) throw CorruptFileError("implausible layer count");
    std::vector<int> dims;
    for (std::uint32_t i = 0; i < n_dims; ++i) dims.push_back(io::get<std::int32_t>(in));
    model.network = init_network(dims, 0);  // shapes only; parameters overwritten below

    const auto n_tags = io::get<std::uint32_t>(in);
    if (n_tags != model.network.total_layers()) throw CorruptFileError("activation tag count");
    for (std::uint32_t l = 0; l < n_tags; ++l) {
        const std::string tag = io::get_string(in);
        const std::string expect = model.network.layer_is_linear(l) ? "identity" : "relu";
        if (tag != expect) throw CorruptFileError("unexpected activation tag '" + tag + "'");
    }

    const auto n_params = io::get<std::uint64_t>(in);
    if (n_params != model.network.parameter_count())
        throw CorruptFileError("parameter count does not match dims");
    for (std::size_t l = 0; l < model.network.total_layers(); ++l) {
        io::get_doubles(in, model.network.weights[l].data(),
                        static_cast<std::size_t>(model.network.weights[l].size()));
        io::get_doubles(in, model.network.biases[l].data(),
                        static_cast<std::size_t>(model.network.biases[l].size()));
    }

    model.feature_mask.min_variance = io::get<double>(in);
    const auto n_kept = io::get<std::uint64_t>(in);
    if (n_kept > (1ull << 24)) throw CorruptFileError("implausible mask size");
    for (std::uint64_t i = 0; i < n_kept; ++i)
        model.feature_mask.kept_indices.push_back(io::get<std::int32_t>(in));

    const auto n_echo = io::get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_echo; ++i) {
        const std::string key = io::get_string(in);
        const std::string val = io::get_string(in);
        if (key == "mode") model.mode = val;
        else if (key == "margin") model.config.margin = std::stod(val);
        else if (key == "lambda") model.config.triplet_weight = std::stod(val);
        else if (key == "epochs") model.config.epochs = std::stoi(val);
        else if (key == "batch_size") model.config.batch_size = std::stoi(val);
        else if (key == "triplets_per_epoch") model.config.triplets_per_epoch = std::stoi(val);
        else if (key == "learning_rate") model.config.learning_rate = std::stod(val);
        else if (key == "seed") model.config.seed = std::stoull(val);
    }
    model.config.layer_dims = dims;

    const auto n_curve = io::get<std::uint64_t>(in);
    if (n_curve > (1ull << 24)) throw CorruptFileError("implausible curve length");
    for (std::uint64_t i = 0; i < n_curve; ++i) {
        LossPoint p;
        p.epoch = io::get<std::int32_t>(in);
        p.reconstruction_loss = io::get<double>(in);
        p.triplet_loss = io::get<double>(in);
        model.curve.push_back(p);
    }
    return model;
}

inline TrainedModel deserialize_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    return deserialize_model(in);
}

inline void serialize_family_model(const FamilyModel& fm, std::ostream& out) {
    out.write(io::kFamilyMagic, 8);
    io::put<std::uint32_t>(out, io::kFamilyModelVersion);
    io::put<std::int32_t>(out, fm.latent_dim);
    io::put<std::uint64_t>(out, fm.network_hash);

    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(fm.warnings.size()));
    for (const auto& w : fm.warnings) io::put_string(out, w);

    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(fm.clusters.size()));
    for (const auto& c : fm.clusters) {
        io::put_string(out, c.family);
        io::put<std::int32_t>(out, c.cluster_id);
        io::put_doubles(out, c.centroid.data(), static_cast<std::size_t>(c.centroid.size()));
        io::put<double>(out, c.threshold);
        io::put<std::uint64_t>(out, c.member_count);
        io::put<std::uint64_t>(out, c.noise_excluded);
        io::put<double>(out, c.eps);
        io::put<std::int32_t>(out, c.min_pts);
        io::put<double>(out, c.median_distance);
        io::put<double>(out, c.mad_distance);
    }
}

inline void serialize_family_model(const FamilyModel& fm, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write family model file: " + path);
    serialize_family_model(fm, out);
}

inline FamilyModel deserialize_family_model(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, io::kFamilyMagic, 8) != 0)
        throw CorruptFileError("not a family model container");
    const auto version = io::get<std::uint32_t>(in);
    if (version != io::kFamilyModelVersion)
        throw VersionMismatchError("unsupported family model version " + std::to_string(version));

    FamilyModel fm;
    fm.latent_dim = io::get<std::int32_t>(in);
    if (fm.latent_dim < 1 || fm.latent_dim > (1 << 20))
        throw CorruptFileError("implausible latent dim");
    fm.network_hash = io::get<std::uint64_t>(in);

    const auto n_warn = io::get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_warn; ++i) fm.warnings.push_back(io::get_string(in));

    const auto n_clusters = io::get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_clusters; ++i) {
        ClusterSummary c;
        c.family = io::get_string(in);
        c.cluster_id = io::get<std::int32_t>(in);
        c.centroid.resize(fm.latent_dim);
        io::get_doubles(in, c.centroid.data(), static_cast<std::size_t>(fm.latent_dim));
        c.threshold = io::get<double>(in);
        c.member_count = io::get<std::uint64_t>(in);
        c.noise_excluded = io::get<std::uint64_t>(in);
        c.eps = io::get<double>(in);
        c.min_pts = io::get<std::int32_t>(in);
        c.median_distance = io::get<double>(in);
        c.mad_distance = io::get<double>(in);
        fm.clusters.push_back(std::move(c));
    }
    return fm;
}

inline FamilyModel deserialize_family_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open family model file: " + path);
    return deserialize_family_model(in);
}

/// A FamilyModel must only be used with the network it was built from.
inline void verify_provenance(const TrainedModel& model, const FamilyModel& fm) {
    if (fm.network_hash != network_hash(model.network))
        throw HashMismatchError("family model was built from a different network model");
}

}  // namespace drift
