// Command-line front end for the drift-detection toolkit: dataset prep,
// synthetic data, training, clustering, detection and the full
// leave-one-family-out evaluation.

#include "drift/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace {

std::vector<int> parse_dims(const std::string& s) {
    std::vector<int> dims;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) dims.push_back(std::stoi(tok));
    return dims;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Malware family drift detection toolkit"};
    app.require_subcommand(1);

    // prep
    std::string prep_input, prep_out_dir;
    double prep_min_variance = 0.0, prep_fraction = 0.8;
    auto* prep = app.add_subcommand("prep", "Variance-filter and temporally split a dataset");
    prep->add_option("--input", prep_input)->required();
    prep->add_option("--min-variance", prep_min_variance);
    prep->add_option("--train-fraction", prep_fraction);
    prep->add_option("--out-dir", prep_out_dir)->required();

    // synth
    drift::SyntheticSpec synth_spec;
    std::uint64_t synth_seed = 42;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic blob dataset");
    synth->add_option("--families", synth_spec.n_families);
    synth->add_option("--dim", synth_spec.dim);
    synth->add_option("--per-family", synth_spec.samples_per_family);
    synth->add_option("--separation", synth_spec.centroid_separation);
    synth->add_option("--clusters-per-family", synth_spec.clusters_per_family);
    synth->add_option("--seed", synth_seed);
    synth->add_option("--out", synth_out)->required();

    // train
    std::string train_input, train_mask, train_mode = "triplet", train_dims, train_out,
                train_curve;
    drift::TrainConfig train_cfg;
    auto* train = app.add_subcommand("train", "Train a vanilla or triplet autoencoder");
    train->add_option("--input", train_input)->required();
    train->add_option("--mask", train_mask);
    train->add_option("--mode", train_mode)->check(CLI::IsMember({"vanilla", "triplet"}));
    train->add_option("--margin", train_cfg.margin);
    train->add_option("--lambda", train_cfg.triplet_weight);
    train->add_option("--epochs", train_cfg.epochs);
    train->add_option("--batch", train_cfg.batch_size);
    train->add_option("--triplets-per-epoch", train_cfg.triplets_per_epoch);
    train->add_option("--lr", train_cfg.learning_rate);
    train->add_option("--seed", train_cfg.seed);
    train->add_option("--dims", train_dims, "comma-separated encoder dims, e.g. 1376,1024,256,32");
    train->add_option("--out", train_out)->required();
    train->add_option("--curve", train_curve, "loss curve CSV (default: <out>.curve.csv)");

    // cluster
    std::string cl_model, cl_input, cl_out;
    bool cl_report = false;
    auto* cluster = app.add_subcommand("cluster", "Cluster the latent space into a family model");
    cluster->add_option("--model", cl_model)->required();
    cluster->add_option("--input", cl_input)->required();
    cluster->add_option("--out", cl_out)->required();
    cluster->add_flag("--report", cl_report, "print one line per cluster");

    // detect
    std::string det_model, det_family_model, det_input, det_mode = "dbscan", det_out;
    double det_mad_coeff = 3.5;
    auto* detect = app.add_subcommand("detect", "Classify samples as a known family or DRIFT");
    detect->add_option("--model", det_model)->required();
    detect->add_option("--family-model", det_family_model)->required();
    detect->add_option("--input", det_input)->required();
    detect->add_option("--threshold-mode", det_mode)->check(CLI::IsMember({"dbscan", "mad"}));
    detect->add_option("--mad-coefficient", det_mad_coeff);
    detect->add_option("--out", det_out)->required();

    // eval
    std::string eval_input, eval_dims = "auto", eval_out, eval_render;
    drift::EvalConfig eval_cfg;
    auto* eval = app.add_subcommand("eval", "Run the leave-one-family-out drift evaluation");
    eval->add_option("--input", eval_input)->required();
    eval->add_option("--min-variance", eval_cfg.min_variance);
    eval->add_option("--train-fraction", eval_cfg.train_fraction);
    eval->add_option("--dims", eval_dims, "'auto' or comma-separated encoder dims");
    eval->add_option("--margin", eval_cfg.train.margin);
    eval->add_option("--lambda", eval_cfg.train.triplet_weight);
    eval->add_option("--epochs", eval_cfg.train.epochs);
    eval->add_option("--batch", eval_cfg.train.batch_size);
    eval->add_option("--lr", eval_cfg.train.learning_rate);
    eval->add_option("--seed", eval_cfg.train.seed);
    eval->add_option("--mad-coefficient", eval_cfg.mad_coefficient);
    eval->add_option("--out", eval_out)->required();
    eval->add_option("--render", eval_render)->check(CLI::IsMember({"table", "csv"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*prep) {
            auto ds = drift::load_dataset(prep_input);
            auto mask = drift::fit_variance_mask(ds, prep_min_variance);
            auto masked = drift::apply_mask(ds, mask);
            auto [tr, te] = drift::temporal_split(masked, prep_fraction);
            fs::create_directories(prep_out_dir);
            drift::save_mask(mask, prep_out_dir + "/mask.txt");
            drift::save_dataset(tr, prep_out_dir + "/train.csv");
            drift::save_dataset(te, prep_out_dir + "/test.csv");
            std::cout << "kept " << mask.kept_indices.size() << "/" << ds.dim()
                      << " features; train " << tr.n() << ", test " << te.n() << "\n";
        } else if (*synth) {
            auto ds = drift::generate_synthetic(synth_spec, synth_seed);
            drift::save_dataset(ds, synth_out);
            std::cout << "wrote " << ds.n() << " samples (" << synth_spec.n_families
                      << " families, dim " << synth_spec.dim << ") to " << synth_out << "\n";
        } else if (*train) {
            auto ds = drift::load_dataset(train_input);
            drift::FeatureMask mask;
            if (!train_mask.empty()) {
                mask = drift::load_mask(train_mask);
                ds = drift::apply_mask(ds, mask);
            } else {
                mask = drift::identity_mask(ds.dim());
            }
            train_cfg.layer_dims = train_dims.empty()
                                       ? std::vector<int>{static_cast<int>(ds.dim()), 1024, 256, 32}
                                       : parse_dims(train_dims);
            auto model = train_mode == "vanilla" ? drift::train_vanilla(ds, train_cfg, &mask)
                                                 : drift::train_triplet(ds, train_cfg, &mask);
            drift::serialize_model(model, train_out);
            std::ostringstream curve;
            curve << "epoch,recon_loss,triplet_loss\n";
            char buf[64];
            for (const auto& p : model.curve) {
                std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g", p.epoch,
                              p.reconstruction_loss, p.triplet_loss);
                curve << buf << '\n';
            }
            write_text(train_curve.empty() ? train_out + ".curve.csv" : train_curve, curve.str());
            std::cout << "trained " << model.mode << " model, final recon loss "
                      << model.curve.back().reconstruction_loss << "\n";
        } else if (*cluster) {
            auto model = drift::deserialize_model(cl_model);
            auto ds = drift::load_dataset(cl_input);
            Eigen::MatrixXd emb = drift::embed(model, ds);
            auto fm = drift::build_family_model(emb, ds.labels, model.network.latent_dim());
            fm.network_hash = drift::network_hash(model.network);
            drift::serialize_family_model(fm, cl_out);
            for (const auto& w : fm.warnings) std::cerr << "warning: " << w << "\n";
            if (cl_report) {
                for (const auto& c : fm.clusters)
                    std::cout << c.family << " cluster " << c.cluster_id << ": " << c.member_count
                              << " members, threshold " << c.threshold << ", noise excluded "
                              << c.noise_excluded << " (eps " << c.eps << ", minPts " << c.min_pts
                              << ")\n";
            }
            std::cout << "wrote " << fm.clusters.size() << " clusters to " << cl_out << "\n";
        } else if (*detect) {
            auto model = drift::deserialize_model(det_model);
            auto fm = drift::deserialize_family_model(det_family_model);
            drift::verify_provenance(model, fm);
            auto ds = drift::load_dataset(det_input);
            Eigen::MatrixXd emb = drift::embed(model, ds);
            std::vector<drift::DetectionVerdict> verdicts;
            if (det_mode == "mad") {
                auto mad = drift::mad_from_family_model(fm, det_mad_coeff);
                for (Eigen::Index i = 0; i < emb.rows(); ++i)
                    verdicts.push_back(drift::classify_mad(fm, mad, emb.row(i).transpose()));
            } else {
                for (Eigen::Index i = 0; i < emb.rows(); ++i)
                    verdicts.push_back(drift::classify(fm, emb.row(i).transpose()));
            }
            write_text(det_out, drift::render_verdicts(verdicts));
            const auto drifting = std::count_if(verdicts.begin(), verdicts.end(), [](auto& v) {
                return v.verdict == drift::Verdict::Drift;
            });
            std::cout << drifting << "/" << verdicts.size() << " samples flagged DRIFT\n";
        } else if (*eval) {
            auto ds = drift::load_dataset(eval_input);
            if (eval_dims != "auto") eval_cfg.train.layer_dims = parse_dims(eval_dims);
            auto report = drift::run_leave_one_out(ds, eval_cfg);
            write_text(eval_out, drift::report_render(report, drift::ReportFormat::Csv));
            if (eval_render == "table")
                std::cout << drift::report_render(report, drift::ReportFormat::Table);
            else if (eval_render == "csv")
                std::cout << drift::report_render(report, drift::ReportFormat::Csv);
            std::cout << "overall DBSCAN F1 " << report.overall_dbscan.f1() << ", MAD F1 "
                      << report.overall_mad.f1() << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
