#include "hybridaug/error.hpp"
#include "hybridaug/manifold.hpp"
#include "hybridaug/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace hybridaug;

namespace {

FeatureVector fv(std::vector<double> v, std::string id = {}) { return {std::move(v), std::move(id)}; }

Embedding make_embedding(const std::vector<std::pair<double, double>>& pts) {
    Embedding e;
    for (std::size_t k = 0; k < pts.size(); ++k) e.points.push_back({pts[k].first, pts[k].second, "p" + std::to_string(k), Origin::Real, {}});
    return e;
}

double row_perplexity(const std::vector<double>& sq, double sigma) {
    std::vector<double> w;
    double z = 0;
    for (double d : sq) z += w.emplace_back(std::exp(-d / (2 * sigma * sigma)));
    double h = 0;
    for (double v : w) {
        const double p = v / z;
        if (p > 0) h -= p * std::log2(p);
    }
    return std::exp2(h);
}

std::vector<FeatureVector> random_features(Rng& rng, std::size_t n, std::size_t d) {
    std::vector<FeatureVector> out;
    for (std::size_t i = 0; i < n; ++i) {
        FeatureVector f;
        for (std::size_t k = 0; k < d; ++k) f.values.push_back(rng.normal(0, 1));
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace

TEST_CASE("extract_features") {
    const auto f = extract_features(Raster(2, 2, 1, std::vector<std::uint8_t>{0, 255, 0, 255}), 2, "a");
    CHECK(f.values == std::vector<double>{0, 1, 0, 1});
    CHECK(f.source_id == "a");

    std::vector<FeatureVector> one = {extract_features(Raster(10, 10, 1, 100), 4)};
    center_features(one);
    for (double v : one[0].values) CHECK(v == 0.0);

    const Raster img(12, 12, 3, 40);
    CHECK(extract_features(img, 4).values == extract_features(img, 4).values);
    CHECK(extract_features(img, 4).values.size() == 16);
    CHECK_THROWS_AS(extract_features(img, 1), InvalidArgument);

    std::vector<FeatureVector> bad = {fv({1, 2}), fv({1})};
    CHECK_THROWS_AS(squared_distance_matrix(bad), InvalidArgument);
    std::vector<FeatureVector> nan = {fv({1, NAN}), fv({1, 2})};
    CHECK_THROWS_AS(squared_distance_matrix(nan), InvalidArgument);
}

TEST_CASE("conditional affinities") {
    SUBCASE("equilateral triangle is uniform with perplexity 2") {
        const double h = std::sqrt(3.0) / 2;
        std::vector<FeatureVector> x = {fv({0, 0}), fv({1, 0}), fv({0.5, h})};
        const auto c = conditional_affinities(x, 2.0);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) CHECK(c.at(i, j) == doctest::Approx(i == j ? 0.0 : 0.5).epsilon(1e-12));
    }
    SUBCASE("collinear 0, 1, 3 at perplexity 1.5 against a dense grid scan") {
        std::vector<FeatureVector> x = {fv({0}), fv({1}), fv({3})};
        const auto c = conditional_affinities(x, 1.5);
        const std::vector<std::vector<double>> sq = {{1, 9}, {1, 4}, {9, 4}};
        for (std::size_t i = 0; i < 3; ++i) {
            CAPTURE(i);
            double best = 0, best_err = 1e9;
            for (double s = 0.01; s < 10.0; s += 1e-3) {
                const double err = std::abs(row_perplexity(sq[i], s) - 1.5);
                if (err < best_err) best_err = err, best = s;
            }
            for (double s = best - 2e-3; s < best + 2e-3; s += 1e-7) {
                const double err = std::abs(row_perplexity(sq[i], s) - 1.5);
                if (err < best_err) best_err = err, best = s;
            }
            CHECK(std::abs(c.sigma[i] - best) < 1e-4);
            CHECK(std::abs(c.perplexity[i] - 1.5) < 1e-5);
            CHECK(c.status[i] == RowStatus::Calibrated);
        }
    }
    SUBCASE("coincident points fall back to uniform rows") {
        std::vector<FeatureVector> x = {fv({0, 0}), fv({0, 0}), fv({1, 0}), fv({0, 2})};
        const auto c = conditional_affinities(x, 2.0);
        for (std::size_t i : {0u, 1u}) {
            CHECK(c.status[i] == RowStatus::Duplicate);
            for (std::size_t j = 0; j < 4; ++j) CHECK(c.at(i, j) == doctest::Approx(i == j ? 0.0 : 1.0 / 3));
        }
        CHECK(c.status[2] == RowStatus::Calibrated);
    }
    SUBCASE("random data hits the target on every row") {
        Rng rng(4);
        for (std::size_t n : {10u, 40u, 120u}) {
            const auto x = random_features(rng, n, 6);
            for (double perp : {2.0, 5.0, 30.0}) {
                if (perp >= n - 1) continue;
                const auto c = conditional_affinities(x, perp);
                for (std::size_t i = 0; i < n; ++i) {
                    CHECK(std::abs(c.perplexity[i] - perp) <= kPerplexityTolerance);
                    double sum = 0;
                    for (std::size_t j = 0; j < n; ++j) sum += c.at(i, j);
                    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
                    CHECK(c.at(i, i) == 0.0);
                }
            }
        }
    }
    SUBCASE("preconditions") {
        std::vector<FeatureVector> two = {fv({0}), fv({1})};
        CHECK_THROWS_AS(conditional_affinities(two, 1.5), InvalidArgument);
        std::vector<FeatureVector> x = {fv({0}), fv({1}), fv({3})};
        CHECK_THROWS_AS(conditional_affinities(x, 3.0), InvalidArgument);
        CHECK_THROWS_AS(conditional_affinities(x, 0.5), InvalidArgument);
    }
}

TEST_CASE("symmetrize") {
    const auto two = symmetrize(std::vector<double>{0, 1, 1, 0}, 2);
    CHECK(two.at(0, 1) == doctest::Approx(0.5));
    CHECK(two.at(1, 0) == doctest::Approx(0.5));

    const auto tri = symmetrize(std::vector<double>{0, .5, .5, .5, 0, .5, .5, .5, 0}, 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(tri.at(i, j) == doctest::Approx(i == j ? 0.0 : 1.0 / 6).epsilon(1e-12));

    Rng rng(8);
    const auto x = random_features(rng, 30, 4);
    const auto P = symmetrize(conditional_affinities(x, 7).p, 30);
    double sum = 0;
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t j = 0; j < 30; ++j) {
            CHECK(P.at(i, j) == P.at(j, i));
            CHECK(P.at(i, j) >= 0);
            if (i != j) CHECK(P.at(i, j) >= kProbabilityFloor * 0.99);
            sum += P.at(i, j);
        }
    for (std::size_t i = 0; i < 30; ++i) CHECK(P.at(i, i) == 0.0);
    CHECK(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("low-dimensional affinities") {
    const auto q2 = low_dim_affinities(make_embedding({{0, 0}, {7, -3}}));
    CHECK(q2[1] == doctest::Approx(0.5));
    CHECK(q2[2] == doctest::Approx(0.5));

    const double h = std::sqrt(3.0) / 2;
    const auto qt = low_dim_affinities(make_embedding({{0, 0}, {1, 0}, {0.5, h}}));
    for (int k : {1, 2, 3, 5, 6, 7}) CHECK(qt[k] == doctest::Approx(1.0 / 6).epsilon(1e-12));

    // Kernel values 1/2, 1/10, 1/5; Z sums both orders: 1.6.
    const auto q = low_dim_affinities(make_embedding({{0, 0}, {1, 0}, {3, 0}}));
    const double z = 2 * (0.5 + 0.1 + 0.2);
    CHECK(std::abs(q[0 * 3 + 1] - 0.5 / z) < 1e-12);
    CHECK(std::abs(q[0 * 3 + 2] - 0.1 / z) < 1e-12);
    CHECK(std::abs(q[1 * 3 + 2] - 0.2 / z) < 1e-12);
    CHECK(q[0] == 0.0);
    CHECK(std::abs(std::accumulate(q.begin(), q.end(), 0.0) - 1.0) < 1e-9);
}

TEST_CASE("gradient") {
    SUBCASE("P equal to Q gives zero gradient") {
        const AffinityMatrix P(2, {0, 0.5, 0.5, 0});
        for (const auto& g : gradient(P, make_embedding({{0.3, 1}, {-2, 5}}))) {
            CHECK(g.x == doctest::Approx(0.0));
            CHECK(g.y == doctest::Approx(0.0));
        }
    }
    Rng rng(12);
    const std::size_t n = 10;
    const auto x = random_features(rng, n, 5);
    const auto P = symmetrize(conditional_affinities(x, 4).p, n);
    Embedding Y;
    for (std::size_t i = 0; i < n; ++i) Y.points.push_back({rng.normal(0, 1), rng.normal(0, 1), {}, Origin::Real, {}});

    SUBCASE("central finite differences of the cost") {
        const auto g = gradient(P, Y);
        const double h = 1e-5;
        double worst = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (int axis = 0; axis < 2; ++axis) {
                Embedding plus = Y, minus = Y;
                (axis ? plus.points[i].y : plus.points[i].x) += h;
                (axis ? minus.points[i].y : minus.points[i].x) -= h;
                const double fd = (kl_cost(P, plus) - kl_cost(P, minus)) / (2 * h);
                const double an = axis ? g[i].y : g[i].x;
                worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8}));
            }
        CHECK(worst < 1e-4);
    }
    SUBCASE("translation invariance") {
        Embedding shifted = Y;
        for (auto& p : shifted.points) p.x += 3.25, p.y -= 1.5;
        const auto a = gradient(P, Y);
        const auto b = gradient(P, shifted);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(a[i].x == doctest::Approx(b[i].x).epsilon(1e-9));
            CHECK(a[i].y == doctest::Approx(b[i].y).epsilon(1e-9));
        }
    }
    SUBCASE("exaggeration scales only P") {
        const auto a = gradient(P, Y, 1.0);
        const auto b = gradient(P, Y, 4.0);
        CHECK_FALSE(a[0].x == b[0].x);
    }
    CHECK_THROWS_AS(gradient(P, make_embedding({{0, 0}, {1, 1}})), InvalidArgument);
}

TEST_CASE("embed") {
    Rng rng(30);
    const auto x = random_features(rng, 25, 6);
    TsneConfig cfg;
    cfg.perplexity = 5;
    cfg.iterations = 300;
    cfg.seed = 9;

    SUBCASE("deterministic under a fixed seed") {
        const auto a = embed(x, cfg);
        const auto b = embed(x, cfg);
        CHECK(a.embedding == b.embedding);
        CHECK(a.final_kl == b.final_kl);
        cfg.seed = 10;
        CHECK_FALSE(embed(x, cfg).embedding == a.embedding);
        CHECK(a.final_kl < a.initial_kl);
        for (const auto& p : a.embedding.points) {
            CHECK(std::isfinite(p.x));
            CHECK(std::isfinite(p.y));
        }
    }
    SUBCASE("tags are carried onto points") {
        std::vector<PointTag> tags;
        for (std::size_t i = 0; i < x.size(); ++i)
            tags.push_back({"id" + std::to_string(i), i % 2 ? Origin::Generated : Origin::Real, "crack"});
        const auto r = embed(x, cfg, tags);
        CHECK(r.embedding.points[3].source_id == "id3");
        CHECK(r.embedding.points[3].origin == Origin::Generated);
        CHECK(r.embedding.points[3].category == "crack");
        std::vector<PointTag> short_tags(tags.begin(), tags.begin() + 3);
        CHECK_THROWS_AS(embed(x, cfg, short_tags), InvalidArgument);
    }
    SUBCASE("perplexity is clamped to n - 1") {
        cfg.perplexity = 30;
        const auto r = embed(x, cfg);
        CHECK(r.perplexity == 24);
    }
    SUBCASE("symmetric triangle stays symmetric") {
        const double h = std::sqrt(3.0) / 2;
        std::vector<FeatureVector> tri = {fv({0, 0}), fv({1, 0}), fv({0.5, h})};
        TsneConfig tc;
        tc.perplexity = 1.5;
        double spread = 0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            tc.seed = seed;
            const auto pts = embed(tri, tc).embedding.points;
            const double d01 = std::hypot(pts[0].x - pts[1].x, pts[0].y - pts[1].y);
            const double d02 = std::hypot(pts[0].x - pts[2].x, pts[0].y - pts[2].y);
            const double d12 = std::hypot(pts[1].x - pts[2].x, pts[1].y - pts[2].y);
            const double mean = (d01 + d02 + d12) / 3;
            spread += std::max({std::abs(d01 - mean), std::abs(d02 - mean), std::abs(d12 - mean)}) / mean;
        }
        CHECK(spread / 10 < 0.05);
    }
    SUBCASE("config validation") {
        TsneConfig bad = cfg;
        bad.iterations = 0;
        CHECK_THROWS_AS(embed(x, bad), InvalidArgument);
        bad = cfg;
        bad.learning_rate = 0;
        CHECK_THROWS_AS(embed(x, bad), InvalidArgument);
        bad = cfg;
        bad.final_momentum = 1.0;
        CHECK_THROWS_AS(embed(x, bad), InvalidArgument);
        std::vector<FeatureVector> two = {fv({0}), fv({1})};
        CHECK_THROWS_AS(embed(two, cfg), InvalidArgument);
    }
}

TEST_CASE("embedding json and matrix csv") {
    Embedding e = make_embedding({{0.5, -1.25}, {3, 4}});
    e.points[1].origin = Origin::Generated;
    e.points[1].category = "crack";
    const auto j = embedding_to_json(e);
    REQUIRE(j.size() == 2);
    CHECK(j[1].at("id") == "p1");
    CHECK(j[1].at("origin") == "generated");
    CHECK(embedding_from_json(j) == e);
    CHECK_THROWS_AS(embedding_from_json(nlohmann::json::object()), SchemaError);
    CHECK_THROWS_AS(origin_from_string("imagined"), SchemaError);

    std::ostringstream csv;
    write_matrix_csv(csv, std::vector<double>{0, 0.5, 0.5, 0}, 2);
    CHECK(csv.str() == "0,0.5\n0.5,0\n");
}
