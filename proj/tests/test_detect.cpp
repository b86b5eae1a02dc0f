#include "drift/detect.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace drift;

namespace {

FamilyModel two_cluster_model() {
    FamilyModel fm;
    fm.latent_dim = 2;
    ClusterSummary a;
    a.family = "alpha";
    a.cluster_id = 0;
    a.centroid = Eigen::Vector2d(0, 0);
    a.threshold = 2.0;
    a.member_count = 10;
    a.median_distance = 1.0;
    a.mad_distance = 0.5;
    ClusterSummary b;
    b.family = "beta";
    b.cluster_id = 0;
    b.centroid = Eigen::Vector2d(10, 0);
    b.threshold = 3.0;
    b.member_count = 10;
    b.median_distance = 1.5;
    b.mad_distance = 0.25;
    fm.clusters = {a, b};
    return fm;
}

FamilyModel random_model(std::mt19937_64& rng, int n_clusters, int dim) {
    std::uniform_int_distribution<int> coord(-50, 50);
    std::uniform_int_distribution<int> radius(1, 20);
    FamilyModel fm;
    fm.latent_dim = dim;
    for (int i = 0; i < n_clusters; ++i) {
        ClusterSummary c;
        c.family = "f" + std::to_string(i % 3);
        c.cluster_id = i / 3;
        c.centroid = Eigen::VectorXd::NullaryExpr(
            dim, [&] { return static_cast<double>(coord(rng)); });
        c.threshold = radius(rng);
        c.member_count = 5;
        c.median_distance = c.threshold / 2.0;
        c.mad_distance = c.threshold / 8.0;
        fm.clusters.push_back(c);
    }
    return fm;
}

}  // namespace

TEST_CASE("nearest_centroid geometry and errors") {
    auto fm = two_cluster_model();
    SECTION("query at a centroid") {
        auto nc = nearest_centroid(fm, Eigen::Vector2d(0, 0));
        CHECK(nc.family == "alpha");
        CHECK(nc.distance == 0.0);
    }
    SECTION("query between centroids") {
        auto nc = nearest_centroid(fm, Eigen::Vector2d(1, 0));
        CHECK(nc.family == "alpha");
        CHECK(nc.distance == 1.0);
    }
    SECTION("ties break by family name then cluster id") {
        auto nc = nearest_centroid(fm, Eigen::Vector2d(5, 0));  // equidistant
        CHECK(nc.family == "alpha");
    }
    SECTION("errors") {
        CHECK_THROWS(nearest_centroid(fm, Eigen::Vector3d(0, 0, 0)));
        CHECK_THROWS(nearest_centroid(FamilyModel{}, Eigen::Vector2d(0, 0)));
    }
}

TEST_CASE("nearest_centroid matches the linear-scan oracle on random queries") {
    std::mt19937_64 rng(45);
    auto fm = random_model(rng, 12, 4);
    std::vector<Eigen::VectorXd> centroids;
    for (const auto& c : fm.clusters) centroids.push_back(c.centroid);

    std::normal_distribution<double> gauss(0.0, 30.0);
    for (int q = 0; q < 1000; ++q) {
        Eigen::VectorXd query = Eigen::VectorXd::NullaryExpr(4, [&] { return gauss(rng); });
        auto nc = nearest_centroid(fm, query);
        auto [idx, dist] = oracles::naive_nearest(centroids, query);
        CHECK(nc.cluster_index == idx);
        CHECK_THAT(nc.distance, Catch::Matchers::WithinAbs(dist, 1e-12));
    }
}

TEST_CASE("classify uses a closed ball around the nearest centroid") {
    auto fm = two_cluster_model();
    CHECK(classify(fm, Eigen::Vector2d(0, 0)).verdict == Verdict::Known);
    CHECK(classify(fm, Eigen::Vector2d(0, 2)).verdict == Verdict::Known);  // exactly on radius
    CHECK(classify(fm, Eigen::Vector2d(0, 2.0000001)).verdict == Verdict::Drift);

    auto far = classify(fm, Eigen::Vector2d(5, 50));
    CHECK(far.verdict == Verdict::Drift);
    CHECK(!far.nearest_family.empty());  // evidence populated even for drift
    CHECK(far.distance > far.threshold_used);
}

TEST_CASE("mad_fit hand evaluations") {
    auto mm = mad_fit({{1, 2, 3, 4, 5}}, 2.0);
    REQUIRE(mm.clusters.size() == 1);
    CHECK(mm.clusters[0].median == 3.0);
    CHECK(mm.clusters[0].mad == 1.0);
    CHECK(mm.clusters[0].threshold == 5.0);

    auto constant = mad_fit({{2, 2, 2}}, 10.0);
    CHECK(constant.clusters[0].mad == 0.0);
    CHECK(constant.clusters[0].threshold == 2.0);

    auto singleton = mad_fit({{7}}, 3.0);
    CHECK(singleton.clusters[0].median == 7.0);
    CHECK(singleton.clusters[0].threshold == 7.0);

    // even-length median averages the central order statistics
    auto even = mad_fit({{1, 2, 3, 4}}, 1.0);
    CHECK(even.clusters[0].median == 2.5);

    CHECK_THROWS(mad_fit({{}}, 1.0));
    CHECK_THROWS(mad_fit({{1.0}}, -1.0));
}

TEST_CASE("classify_mad shares the argmin with classify") {
    auto fm = two_cluster_model();
    auto mad_loose = mad_from_family_model(fm, 1e9);
    auto mad_tight = mad_from_family_model(fm, 1e-9);

    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss(0.0, 10.0);
    for (int q = 0; q < 200; ++q) {
        Eigen::Vector2d query(gauss(rng), gauss(rng));
        auto v = classify(fm, query);
        auto vm = classify_mad(fm, mad_loose, query);
        CHECK(vm.verdict == Verdict::Known);  // unbounded threshold
        CHECK(vm.nearest_family == v.nearest_family);
        CHECK(vm.distance == v.distance);
    }

    // tight threshold: anything beyond the median distance drifts
    auto beyond = classify_mad(fm, mad_tight, Eigen::Vector2d(0, 1.5));
    CHECK(beyond.verdict == Verdict::Drift);

    MadModel misaligned;
    misaligned.clusters.resize(1);
    CHECK_THROWS(classify_mad(fm, misaligned, Eigen::Vector2d(0, 0)));
}

TEST_CASE("raising a threshold never flips KNOWN to DRIFT") {
    std::mt19937_64 rng(88);
    std::normal_distribution<double> gauss(0.0, 40.0);
    for (int trial = 0; trial < 300; ++trial) {
        auto fm = random_model(rng, 8, 3);
        Eigen::VectorXd query = Eigen::VectorXd::NullaryExpr(3, [&] { return gauss(rng); });
        auto before = classify(fm, query);
        for (auto& c : fm.clusters) c.threshold += 5.0;
        auto after = classify(fm, query);
        if (before.verdict == Verdict::Known) CHECK(after.verdict == Verdict::Known);
    }
}

TEST_CASE("argmin is invariant under squaring the distance") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> gauss(0.0, 30.0);
    auto fm = random_model(rng, 10, 5);
    for (int q = 0; q < 500; ++q) {
        Eigen::VectorXd query = Eigen::VectorXd::NullaryExpr(5, [&] { return gauss(rng); });
        auto nc = nearest_centroid(fm, query);
        std::size_t best_sq = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < fm.clusters.size(); ++i) {
            const double d2 = (query - fm.clusters[i].centroid).squaredNorm();
            if (d2 < best) {
                best = d2;
                best_sq = i;
            }
        }
        CHECK(nc.cluster_index == best_sq);
    }
}

TEST_CASE("translation invariance of nearest-centroid evidence") {
    std::mt19937_64 rng(61);
    std::normal_distribution<double> gauss(0.0, 20.0);
    auto fm = random_model(rng, 6, 3);
    for (int q = 0; q < 200; ++q) {
        Eigen::VectorXd query = Eigen::VectorXd::NullaryExpr(3, [&] { return gauss(rng); });
        Eigen::VectorXd shift = Eigen::VectorXd::NullaryExpr(3, [&] { return gauss(rng); });
        auto before = classify(fm, query);
        auto shifted = fm;
        for (auto& c : shifted.clusters) c.centroid += shift;
        auto after = classify(shifted, query + shift);
        CHECK(after.nearest_family == before.nearest_family);
        CHECK_THAT(after.distance, Catch::Matchers::WithinAbs(before.distance, 1e-9));
        CHECK(after.verdict == before.verdict);
    }
}
