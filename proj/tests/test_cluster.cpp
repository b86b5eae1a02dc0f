#include "drift/cluster.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace drift;

namespace {

Eigen::MatrixXd random_blobby(std::mt19937_64& rng, int n, int dim) {
    std::uniform_int_distribution<int> n_blobs(1, 4);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> center(-10.0, 10.0);
    std::uniform_real_distribution<double> unif(-12.0, 12.0);
    const int blobs = n_blobs(rng);
    Eigen::MatrixXd pts(n, dim);
    for (int i = 0; i < n; ++i) {
        if (i % 5 == 4) {  // scattered background points
            for (int j = 0; j < dim; ++j) pts(i, j) = unif(rng);
        } else {
            const int b = i % blobs;
            std::mt19937_64 center_rng(static_cast<std::uint64_t>(b) * 977 + 13);
            for (int j = 0; j < dim; ++j) {
                std::uniform_real_distribution<double> c(-10.0, 10.0);
                pts(i, j) = c(center_rng) + gauss(rng);
            }
        }
    }
    return pts;
}

}  // namespace

TEST_CASE("dbscan trivial geometries") {
    SECTION("coincident points form one cluster with no noise") {
        Eigen::MatrixXd pts = Eigen::MatrixXd::Ones(10, 2);
        auto asg = dbscan(pts, 0.1, 5);
        CHECK(asg.cluster_count() == 1);
        CHECK(asg.noise_count() == 0);
    }
    SECTION("isolated points are all noise") {
        Eigen::MatrixXd pts(3, 2);
        pts << 0, 0, 100, 0, 0, 100;
        auto asg = dbscan(pts, 1.0, 2);
        CHECK(asg.cluster_count() == 0);
        CHECK(asg.noise_count() == 3);
    }
    SECTION("input validation") {
        Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(2, 2);
        CHECK_THROWS(dbscan(pts, 0.0, 2));
        CHECK_THROWS(dbscan(pts, 1.0, 0));
        pts(0, 0) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS(dbscan(pts, 1.0, 2));
    }
}

TEST_CASE("dbscan agrees with the brute-force reference on random data") {
    std::mt19937_64 rng(1234);
    int checked = 0, ambiguous = 0;
    for (int trial = 0; trial < 25; ++trial) {
        std::uniform_int_distribution<int> n_dist(20, 120), dim_dist(2, 4), mp_dist(2, 8);
        std::uniform_real_distribution<double> eps_dist(0.5, 3.0);
        const int n = n_dist(rng), dim = dim_dist(rng);
        Eigen::MatrixXd pts = random_blobby(rng, n, dim);
        const double eps = eps_dist(rng);
        const int min_pts = mp_dist(rng);

        auto reference = oracles::brute_dbscan(pts, eps, min_pts);
        if (reference.has_ambiguity) {
            ++ambiguous;
            continue;
        }
        auto asg = dbscan(pts, eps, min_pts);
        CHECK(oracles::canonicalize(asg.labels) == oracles::canonicalize(reference.labels));
        ++checked;
    }
    CHECK(checked > 15);
}

TEST_CASE("dbscan partition is invariant to row permutation") {
    std::mt19937_64 rng(55);
    Eigen::MatrixXd pts = random_blobby(rng, 80, 3);
    auto reference = oracles::brute_dbscan(pts, 1.5, 4);
    if (!reference.has_ambiguity) {
        auto base = dbscan(pts, 1.5, 4);
        std::vector<int> perm(80);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Eigen::MatrixXd shuffled(80, 3);
        for (int i = 0; i < 80; ++i) shuffled.row(i) = pts.row(perm[i]);
        auto permuted = dbscan(shuffled, 1.5, 4);
        // undo the permutation and compare as partitions
        std::vector<int> unpermuted(80);
        for (int i = 0; i < 80; ++i) unpermuted[perm[i]] = permuted.labels[i];
        CHECK(oracles::canonicalize(base.labels).size() == 80);
        // noise sets must match exactly; clusters up to relabeling
        std::vector<int> a = base.labels, b = unpermuted;
        std::map<int, int> forward;
        bool same = true;
        for (int i = 0; i < 80; ++i) {
            if ((a[i] < 0) != (b[i] < 0)) same = false;
            if (a[i] >= 0) {
                auto it = forward.find(a[i]);
                if (it == forward.end())
                    forward[a[i]] = b[i];
                else if (it->second != b[i])
                    same = false;
            }
        }
        CHECK(same);
    }
}

TEST_CASE("estimate_min_pts follows the 2x dim heuristic with clamps") {
    CHECK(estimate_min_pts(32, 925) == 64);
    CHECK(estimate_min_pts(32, 100) == 50);  // upper clamp at class_size/2
    CHECK(estimate_min_pts(2, 100000) == 4);  // lower clamp
    CHECK(estimate_min_pts(3, 7) == 4);       // tiny class floor
    CHECK_THROWS(estimate_min_pts(0, 5));
    CHECK_THROWS(estimate_min_pts(5, 0));
}

TEST_CASE("estimate_eps separates two tight blobs") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> gauss(0.0, 0.1);
    Eigen::MatrixXd pts(100, 2);
    for (int i = 0; i < 100; ++i) {
        pts(i, 0) = (i < 50 ? 0.0 : 100.0) + gauss(rng);
        pts(i, 1) = gauss(rng);
    }
    const int min_pts = estimate_min_pts(2, 100);
    const double eps = estimate_eps(pts, min_pts - 1);
    CHECK(eps > 0.0);
    CHECK(eps < 100.0);
    auto asg = dbscan(pts, eps, min_pts);
    // The chosen eps must keep the two blobs apart: at least two clusters,
    // none spanning both blobs, and the two largest covering nearly all points.
    REQUIRE(asg.cluster_count() >= 2);
    std::vector<int> sizes(static_cast<std::size_t>(asg.cluster_count()), 0);
    for (int i = 0; i < 100; ++i) {
        const int c = asg.labels[static_cast<std::size_t>(i)];
        if (c == kNoise) continue;
        ++sizes[static_cast<std::size_t>(c)];
        for (int j = 0; j < 100; ++j)
            if (asg.labels[static_cast<std::size_t>(j)] == c)
                CHECK((i < 50) == (j < 50));  // clusters never mix blobs
    }
    std::sort(sizes.rbegin(), sizes.rend());
    CHECK(sizes[0] + sizes[1] >= 70);  // fringe points may fall to noise
    CHECK(asg.noise_count() < 30);
}

TEST_CASE("estimate_eps stays total on degenerate curves") {
    SECTION("fully coincident data falls back with a warning") {
        Eigen::MatrixXd pts = Eigen::MatrixXd::Ones(10, 2);
        std::vector<std::string> warnings;
        const double eps = estimate_eps(pts, 3, &warnings);
        CHECK(eps > 0.0);
        CHECK(eps < 1e-10);
        CHECK_FALSE(warnings.empty());
    }
    SECTION("uniform grid still yields a positive eps and a deterministic partition") {
        Eigen::MatrixXd pts(36, 2);
        for (int i = 0; i < 36; ++i) {
            pts(i, 0) = i % 6;
            pts(i, 1) = i / 6;
        }
        const double eps = estimate_eps(pts, 3);
        CHECK(eps > 0.0);
        auto a = dbscan(pts, eps, 4);
        auto b = dbscan(pts, eps, 4);
        CHECK(a.labels == b.labels);
    }
    SECTION("monotone k-distance curve picks an endpoint-adjacent elbow") {
        // 1-D points with growing gaps give a near-linear 1-NN distance curve
        Eigen::MatrixXd pts(20, 1);
        double x = 0.0;
        for (int i = 0; i < 20; ++i) {
            pts(i, 0) = x;
            x += 1.0 + 0.5 * i;
        }
        CHECK(estimate_eps(pts, 1) > 0.0);
    }
    SECTION("preconditions") {
        Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(3, 1);
        CHECK_THROWS(estimate_eps(pts, 3));
        CHECK_THROWS(estimate_eps(pts, 0));
    }
}

TEST_CASE("centroid and threshold against naive oracles") {
    SECTION("hand cases") {
        Eigen::MatrixXd one(1, 2);
        one << 3, 4;
        CHECK(compute_centroid(one) == one.row(0).transpose());
        CHECK(compute_threshold(one, one.row(0).transpose()) == 0.0);

        Eigen::MatrixXd pair(2, 2);
        pair << 0, 0, 2, 0;
        Eigen::VectorXd mid = compute_centroid(pair);
        CHECK(mid(0) == 1.0);
        CHECK(mid(1) == 0.0);
        CHECK(compute_threshold(pair, mid) == 1.0);

        CHECK_THROWS(compute_centroid(Eigen::MatrixXd(0, 2)));
        CHECK_THROWS(compute_threshold(Eigen::MatrixXd(0, 2), mid));
    }
    SECTION("random points match the independent summation oracle") {
        std::mt19937_64 rng(77);
        std::normal_distribution<double> gauss;
        Eigen::MatrixXd pts(500, 5);
        for (Eigen::Index i = 0; i < pts.size(); ++i) *(pts.data() + i) = gauss(rng);

        Eigen::VectorXd c = compute_centroid(pts.topRows(100));
        Eigen::VectorXd naive = oracles::naive_mean(pts.topRows(100));
        CHECK((c - naive).lpNorm<Eigen::Infinity>() < 1e-12);

        const double t = compute_threshold(pts, c);
        CHECK_THAT(t, Catch::Matchers::WithinAbs(oracles::naive_max_distance(pts, c), 1e-12));
    }
}

TEST_CASE("build_family_model splits a family with two sub-blobs") {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> gauss;
    const int per_blob = 200;
    Eigen::MatrixXd emb(2 * per_blob, 3);
    std::vector<std::string> labels;
    for (int i = 0; i < 2 * per_blob; ++i) {
        emb(i, 0) = (i < per_blob ? 0.0 : 20.0) + gauss(rng);
        emb(i, 1) = gauss(rng);
        emb(i, 2) = gauss(rng);
        labels.push_back("fam");
    }

    auto fm = build_family_model(emb, labels, 3);
    CHECK(fm.clusters.size() == 2);

    double sub_mean = 0.0;
    std::size_t members = 0;
    for (const auto& c : fm.clusters) {
        CHECK(c.family == "fam");
        CHECK(c.threshold >= 0.0);
        sub_mean += c.median_distance * static_cast<double>(c.member_count);
        members += c.member_count;
    }
    sub_mean /= static_cast<double>(members);

    Eigen::VectorXd forced = compute_centroid(emb);
    double forced_mean = 0.0;
    for (Eigen::Index i = 0; i < emb.rows(); ++i)
        forced_mean += (emb.row(i).transpose() - forced).norm();
    forced_mean /= static_cast<double>(emb.rows());
    CHECK(sub_mean < forced_mean);
}

TEST_CASE("build_family_model falls back to one cluster for sparse families") {
    // 3 points is below the k = min_pts - 1 floor needed for eps estimation,
    // so density clustering cannot run and the whole family becomes one cluster.
    Eigen::MatrixXd emb(3, 2);
    emb << 0, 0, 100, 0, 0, 100;
    std::vector<std::string> labels(3, "sparse");
    auto fm = build_family_model(emb, labels, 2);
    REQUIRE(fm.clusters.size() == 1);
    CHECK(fm.clusters[0].member_count == 3);
    CHECK(fm.clusters[0].noise_excluded == 0);
    CHECK_FALSE(fm.warnings.empty());
}

TEST_CASE("every family contributes at least one cluster") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd emb(60, 3);
    std::vector<std::string> labels;
    for (int i = 0; i < 60; ++i) {
        const int f = i % 3;
        for (int j = 0; j < 3; ++j) emb(i, j) = f * 15.0 + gauss(rng);
        labels.push_back("f" + std::to_string(f));
    }
    auto fm = build_family_model(emb, labels, 3);
    std::set<std::string> seen;
    for (const auto& c : fm.clusters) {
        seen.insert(c.family);
        // every member lies inside the closed threshold ball by construction
        CHECK(c.member_count >= 1);
    }
    CHECK(seen.size() == 3);
}

TEST_CASE("noise points influence neither centroid nor threshold") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> gauss(0.0, 0.3);
    Eigen::MatrixXd blob(40, 2);
    for (Eigen::Index i = 0; i < blob.size(); ++i) *(blob.data() + i) = gauss(rng);

    const double eps = 1.0;
    const int min_pts = 4;
    auto base = dbscan(blob, eps, min_pts);
    REQUIRE(base.cluster_count() == 1);
    Eigen::VectorXd base_centroid = compute_centroid(blob);

    Eigen::MatrixXd with_noise(43, 2);
    with_noise.topRows(40) = blob;
    with_noise.row(40) << 500, 500;
    with_noise.row(41) << -700, 300;
    with_noise.row(42) << 0, -900;
    auto noisy = dbscan(with_noise, eps, min_pts);
    REQUIRE(noisy.cluster_count() == 1);
    for (int i = 40; i < 43; ++i) REQUIRE(noisy.labels[i] == kNoise);

    std::vector<Eigen::Index> members;
    for (int i = 0; i < 43; ++i)
        if (noisy.labels[i] == 0) members.push_back(i);
    Eigen::MatrixXd member_pts(static_cast<Eigen::Index>(members.size()), 2);
    for (std::size_t i = 0; i < members.size(); ++i)
        member_pts.row(static_cast<Eigen::Index>(i)) = with_noise.row(members[i]);

    CHECK(compute_centroid(member_pts) == base_centroid);
    CHECK(compute_threshold(member_pts, base_centroid) ==
          compute_threshold(blob, base_centroid));
}
