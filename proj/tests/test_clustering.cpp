#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "invseq/clustering.hpp"
#include "invseq/textio.hpp"
#include "oracles.hpp"
#include "planted.hpp"

using namespace invseq;
using namespace invseq::dtwc;

namespace {

TrialSeries random_series(std::mt19937_64& rng, std::size_t channels, std::size_t len, int id = 0) {
    TrialSeries s;
    s.id = id;
    s.frames = random_uniform(rng, {channels, len}, -2, 2);
    return s;
}

DistanceMatrix random_distance_matrix(std::mt19937_64& rng, std::size_t n) {
    DistanceMatrix dm;
    dm.d = Tensor({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        dm.ids.push_back(static_cast<int>(i));
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = uniform(rng, 0.1, 5.0);
            dm.d.at(i, j) = v;
            dm.d.at(j, i) = v;
        }
    }
    return dm;
}

}  // namespace

TEST_CASE("dtw: distance to itself is zero") {
    auto rng = make_rng(1);
    for (int it = 0; it < 10; ++it) {
        TrialSeries s = random_series(rng, 3, 8);
        CHECK(dtw_distance(s, s) == 0.0);
    }
}

TEST_CASE("dtw: two length-1 series reduce to the Euclidean frame distance") {
    TrialSeries a, b;
    a.frames = Tensor::matrix(2, 1, {1.0, 2.0});
    b.frames = Tensor::matrix(2, 1, {4.0, 6.0});
    CHECK(dtw_distance(a, b) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("dtw: matches brute-force path enumeration for short series") {
    auto rng = make_rng(2);
    for (int it = 0; it < 60; ++it) {
        std::size_t ch = 1 + static_cast<std::size_t>(it % 3);
        std::size_t la = 1 + static_cast<std::size_t>(uniform(rng, 0, 5.999));
        std::size_t lb = 1 + static_cast<std::size_t>(uniform(rng, 0, 5.999));
        TrialSeries a = random_series(rng, ch, la);
        TrialSeries b = random_series(rng, ch, lb, 1);
        double dp = dtw_distance(a, b);
        double brute = oracle::dtw_brute_force(a.frames, b.frames);
        CHECK(std::abs(dp - brute) <= 1e-9);
    }
}

TEST_CASE("dtw: symmetric and non-negative, channel mismatch raises") {
    auto rng = make_rng(3);
    for (int it = 0; it < 20; ++it) {
        TrialSeries a = random_series(rng, 2, 7);
        TrialSeries b = random_series(rng, 2, 9, 1);
        double ab = dtw_distance(a, b);
        CHECK(ab >= 0.0);
        CHECK(ab == dtw_distance(b, a));
    }
    TrialSeries a = random_series(rng, 2, 5);
    TrialSeries c = random_series(rng, 3, 5, 1);
    CHECK_THROWS_AS(dtw_distance(a, c), DimensionError);
}

TEST_CASE("pairwise_dtw: identical trials give the zero matrix; matrix equals its transpose") {
    auto rng = make_rng(4);
    TrialSeries s = random_series(rng, 2, 10);
    TrialSeries s2 = s;
    s2.id = 1;
    auto dm = pairwise_dtw({s, s2});
    CHECK(dm.at(0, 1) == 0.0);
    CHECK(dm.at(0, 0) == 0.0);

    std::vector<TrialSeries> trials;
    for (int i = 0; i < 6; ++i) trials.push_back(random_series(rng, 3, 8 + i, i));
    auto m = pairwise_dtw(trials);
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j) CHECK(m.at(i, j) == m.at(j, i));
}

TEST_CASE("pairwise_dtw: parallel and serial computation produce identical matrices") {
    auto rng = make_rng(5);
    std::vector<TrialSeries> trials;
    for (int i = 0; i < 9; ++i) trials.push_back(random_series(rng, 2, 12 + (i % 4), i));
    auto serial = pairwise_dtw(trials, 0, 1);
    auto parallel = pairwise_dtw(trials, 0, 4);
    CHECK(serial.d == parallel.d);
}

TEST_CASE("cluster: k = n makes every trial its own medoid with zero inertia") {
    auto rng = make_rng(6);
    auto dm = random_distance_matrix(rng, 7);
    auto a = cluster(dm, 7, 5, 1);
    CHECK(a.inertia == 0.0);
    std::set<std::size_t> medoids(a.medoids.begin(), a.medoids.end());
    CHECK(medoids.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) CHECK(a.medoids[static_cast<std::size_t>(a.labels[i])] == i);
}

TEST_CASE("cluster: k = 1 picks the trial minimizing total distance") {
    auto rng = make_rng(7);
    auto dm = random_distance_matrix(rng, 8);
    auto a = cluster(dm, 1, 3, 9);
    REQUIRE(a.medoids.size() == 1);
    double best_total = std::numeric_limits<double>::infinity();
    std::size_t best = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < 8; ++j) total += dm.at(i, j);
        if (total < best_total) {
            best_total = total;
            best = i;
        }
    }
    CHECK(a.medoids[0] == best);
}

TEST_CASE("cluster: recovers three planted techniques (ARI >= 0.9 in at least 9/10 seeds)") {
    std::vector<int> truth;
    auto series = planted::make_series(3, 6, 2, 40, 0.08, 555, &truth);
    auto dm = pairwise_dtw(series);
    CHECK(planted::within_between_ratio(dm, truth) < 0.3);
    int hits = 0;
    for (int seed = 0; seed < 10; ++seed) {
        auto a = cluster(dm, 3, 10, static_cast<std::uint64_t>(seed));
        if (adjusted_rand_index(a.labels, truth) >= 0.9) hits++;
    }
    CHECK(hits >= 9);
}

TEST_CASE("cluster: k > n raises config error; same seed is deterministic") {
    auto rng = make_rng(8);
    auto dm = random_distance_matrix(rng, 5);
    CHECK_THROWS_AS(cluster(dm, 6, 3, 1), ConfigError);
    auto a = cluster(dm, 2, 5, 77);
    auto b = cluster(dm, 2, 5, 77);
    CHECK(a.labels == b.labels);
    CHECK(a.medoids == b.medoids);
    CHECK(a.inertia == b.inertia);
}

TEST_CASE("inertia: trivial cases and loop-oracle agreement") {
    auto rng = make_rng(9);
    auto dm = random_distance_matrix(rng, 9);
    auto all = cluster(dm, 9, 2, 1);
    CHECK(inertia(dm, all) == 0.0);

    // single cluster of two trials at distance d: the medoid contributes 0
    DistanceMatrix two;
    two.ids = {0, 1};
    two.d = Tensor::matrix(2, 2, {0.0, 3.5, 3.5, 0.0});
    auto one = cluster(two, 1, 2, 1);
    CHECK(inertia(two, one) == doctest::Approx(3.5 * 3.5).epsilon(1e-15));

    for (int seed = 0; seed < 5; ++seed) {
        auto a = cluster(dm, 3, 4, static_cast<std::uint64_t>(seed));
        CHECK(inertia(dm, a) ==
              doctest::Approx(oracle::inertia(dm.d, a.labels, a.medoids)).epsilon(1e-12));
        CHECK(a.inertia == doctest::Approx(inertia(dm, a)).epsilon(1e-12));
    }
}

TEST_CASE("silhouette: tight far-apart clusters approach 1") {
    // two clusters, within-distance 0.01, between-distance 10
    std::size_t n = 8;
    DistanceMatrix dm;
    dm.d = Tensor({n, n});
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        dm.ids.push_back(static_cast<int>(i));
        labels[i] = i < 4 ? 0 : 1;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            dm.d.at(i, j) = labels[i] == (j < 4 ? 0 : 1) ? 0.01 : 10.0;
        }
    }
    auto res = silhouette_mean(dm, labels);
    CHECK(res.mean > 0.9);
}

TEST_CASE("silhouette: mutually equidistant points score zero") {
    std::size_t n = 6;
    DistanceMatrix dm;
    dm.d = Tensor({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        dm.ids.push_back(static_cast<int>(i));
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) dm.d.at(i, j) = 2.0;
    }
    std::vector<int> labels = {0, 0, 1, 1, 2, 2};
    auto res = silhouette_mean(dm, labels);
    for (double d : res.terms.d) CHECK(d == 0.0);
    CHECK(res.mean == 0.0);
}

TEST_CASE("silhouette: matches the per-point loop oracle; k < 2 raises") {
    auto rng = make_rng(10);
    for (int it = 0; it < 10; ++it) {
        auto dm = random_distance_matrix(rng, 10);
        std::vector<int> labels;
        for (std::size_t i = 0; i < 10; ++i)
            labels.push_back(static_cast<int>(uniform(rng, 0, 2.999)));
        if (std::set<int>(labels.begin(), labels.end()).size() < 2) continue;
        auto res = silhouette_mean(dm, labels);
        CHECK(res.mean == doctest::Approx(oracle::silhouette_mean(dm.d, labels)).epsilon(1e-12));
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(res.terms.d[i] ==
                  doctest::Approx(oracle::silhouette_point(dm.d, labels, i)).epsilon(1e-12));
            CHECK(res.terms.d[i] >= -1.0);
            CHECK(res.terms.d[i] <= 1.0);
        }
    }
    DistanceMatrix dm = random_distance_matrix(rng, 4);
    CHECK_THROWS_AS(silhouette_mean(dm, std::vector<int>{1, 1, 1, 1}), ConfigError);
}

TEST_CASE("silhouette and inertia are invariant to cluster relabeling") {
    auto rng = make_rng(11);
    auto dm = random_distance_matrix(rng, 8);
    auto a = cluster(dm, 3, 5, 3);
    // permute labels 0->2, 1->0, 2->1 and medoids accordingly
    std::vector<int> perm = {2, 0, 1};
    ClusterAssignment b = a;
    for (auto& l : b.labels) l = perm[static_cast<std::size_t>(l)];
    b.medoids = {a.medoids[1], a.medoids[2], a.medoids[0]};
    CHECK(silhouette_mean(dm, b.labels).mean ==
          doctest::Approx(silhouette_mean(dm, a.labels).mean).epsilon(1e-15));
    CHECK(inertia(dm, b) == doctest::Approx(inertia(dm, a)).epsilon(1e-15));
}

TEST_CASE("select_k: finds three planted techniques in at least 8/10 seeds") {
    std::vector<int> truth;
    auto series = planted::make_series(3, 6, 2, 40, 0.08, 777, &truth);
    auto dm = pairwise_dtw(series);
    int hits = 0;
    for (int seed = 0; seed < 10; ++seed) {
        auto sel = select_k(dm, 2, 8, 10, static_cast<std::uint64_t>(seed));
        if (sel.chosen_k == 3) hits++;
    }
    CHECK(hits >= 8);
}

TEST_CASE("select_k: curves cover the range, inertia is non-increasing, ties pick smaller k") {
    std::vector<int> truth;
    auto series = planted::make_series(2, 5, 2, 30, 0.1, 88, &truth);
    auto dm = pairwise_dtw(series);
    auto sel = select_k(dm, 2, 7, 5, 1);
    CHECK(sel.ks.size() == 6);
    CHECK(sel.inertia_curve.size() == 6);
    CHECK(sel.silhouette_curve.size() == 6);
    for (std::size_t i = 0; i + 1 < sel.inertia_curve.size(); ++i)
        CHECK(sel.inertia_curve[i + 1] <= sel.inertia_curve[i] + 1e-12);

    CHECK(choose_k_index({0.5, 0.7, 0.7, 0.3}) == 1);
    CHECK(choose_k_index({0.9, 0.9, 0.9}) == 0);

    CHECK_THROWS_AS(select_k(dm, 1, 5, 3, 1), ConfigError);
    CHECK_THROWS_AS(select_k(dm, 5, 4, 3, 1), ConfigError);
}

TEST_CASE("adjusted_rand_index: identity, permutation invariance, hand-computed value") {
    std::vector<int> a = {0, 0, 1, 1, 2, 2};
    CHECK(adjusted_rand_index(a, a) == doctest::Approx(1.0));
    std::vector<int> renamed = {2, 2, 0, 0, 1, 1};
    CHECK(adjusted_rand_index(a, renamed) == doctest::Approx(1.0));
    // contingency arithmetic done by hand for this pair
    std::vector<int> x = {0, 0, 0, 1, 1, 1};
    std::vector<int> y = {0, 0, 1, 1, 2, 2};
    CHECK(adjusted_rand_index(x, y) == doctest::Approx(0.8 / 3.3).epsilon(1e-12));
}

TEST_CASE("technique label file round-trips") {
    auto rng = make_rng(12);
    auto dm = random_distance_matrix(rng, 6);
    auto a = cluster(dm, 2, 4, 5);
    TechniqueLabels labels = labels_from(dm, a);
    auto path = (std::filesystem::temp_directory_path() / "invseq_labels_test.txt").string();
    write_file(path, serialize_labels(labels));
    TechniqueLabels back = parse_labels(path);
    CHECK(back.k == labels.k);
    CHECK(back.labels == labels.labels);
    CHECK(back.mean_silhouette == labels.mean_silhouette);
    CHECK(back.inertia == labels.inertia);
    for (const auto& [id, l] : labels.labels) CHECK(back.label_of(id) == l);
}
