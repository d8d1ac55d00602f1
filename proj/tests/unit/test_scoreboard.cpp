#include "hybridaug/error.hpp"
#include "hybridaug/rng.hpp"
#include "hybridaug/scoreboard.hpp"
#include "published.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace hybridaug;
using testing::kPanels;

namespace {

double pct(std::optional<double> v) { return round_half_up(v.value() * 100.0, 2); }

std::vector<std::string> repeat(std::initializer_list<std::pair<std::string, int>> runs) {
    std::vector<std::string> out;
    for (const auto& [label, n] : runs) out.insert(out.end(), n, label);
    return out;
}

}  // namespace

TEST_CASE("tally") {
    const std::vector<std::string> labels = {"crack", "blob", "free"};
    const std::vector<std::string> t = {"crack", "blob", "free", "free"};
    const auto diag = tally(t, t, labels);
    CHECK(diag.at(0, 0) == 1);
    CHECK(diag.at(2, 2) == 2);
    CHECK(diag.total() == 4);
    CHECK(diag.at(0, 1) == 0);

    CHECK(tally({}, {}, labels).total() == 0);
    const std::vector<std::string> shorter = {"crack"};
    CHECK_THROWS_AS(tally(t, shorter, labels), InvalidArgument);
    const std::vector<std::string> odd = {"crack", "blob", "free", "rust"};
    CHECK_THROWS_AS(tally(t, odd, labels), InvalidArgument);

    // 50 defect + 800 free samples giving TP=43, FN=7, FP=1, TN=799.
    const std::vector<std::string> bl = {"blowhole", "free"};
    const auto truth = repeat({{"blowhole", 43}, {"blowhole", 7}, {"free", 1}, {"free", 799}});
    const auto pred = repeat({{"blowhole", 43}, {"free", 7}, {"blowhole", 1}, {"free", 799}});
    CHECK(tally(truth, pred, bl) == ConfusionMatrix::binary(43, 7, 1, 799, "blowhole", "free"));

    SUBCASE("pair order does not matter") {
        Rng rng(3);
        std::vector<std::size_t> order(truth.size());
        std::iota(order.begin(), order.end(), 0);
        for (int k = 0; k < 5; ++k) {
            std::shuffle(order.begin(), order.end(), std::mt19937_64(rng.uniform_int(0, 1000)));
            std::vector<std::string> ts, ps;
            for (auto i : order) ts.push_back(truth[i]), ps.push_back(pred[i]);
            CHECK(tally(ts, ps, bl) == tally(truth, pred, bl));
        }
    }
}

TEST_CASE("binary metrics") {
    const auto b = binary_metrics(ConfusionMatrix::binary(43, 7, 1, 799));
    CHECK(pct(b.recall) == 86.00);
    CHECK(pct(b.precision) == 97.73);
    CHECK(pct(b.f1) == 91.49);
    CHECK(pct(b.accuracy) == doctest::Approx(99.06));

    const auto c = binary_metrics(ConfusionMatrix::binary(19, 1, 6, 794));
    CHECK(pct(c.recall) == 95.00);
    CHECK(pct(c.precision) == 76.00);
    CHECK(pct(c.f1) == 84.44);

    const auto empty = binary_metrics(ConfusionMatrix::binary(0, 0, 0, 10));
    CHECK_FALSE(empty.recall);
    CHECK_FALSE(empty.precision);
    CHECK_FALSE(empty.f1);
    CHECK(empty.accuracy == 1.0);

    // Positive label given by index.
    const ConfusionMatrix swapped({"free", "defect"}, {799, 1, 7, 43});
    CHECK(pct(binary_metrics(swapped, 1).f1) == 91.49);
    CHECK_THROWS_AS(binary_metrics(ConfusionMatrix({"a", "b", "c"})), InvalidArgument);
}

TEST_CASE("published panels that reproduce") {
    // Panels whose printed values follow from their counts.
    for (const auto& p : kPanels) {
        CAPTURE(p.category);
        CAPTURE(p.images);
        const auto r = binary_metrics(ConfusionMatrix::binary(p.counts.tp, p.counts.fn, p.counts.fp, p.counts.tn));
        const bool known_mismatch = (p.category == "fray" && (p.images == 5 || p.images == 15)) ||
                                    (p.category == "uneven" && p.images == 2);
        if (known_mismatch) continue;
        CHECK(std::abs(pct(r.recall) - p.printed.recall) <= 0.01 + 1e-9);
        CHECK(std::abs(pct(r.precision) - p.printed.precision) <= 0.01 + 1e-9);
        CHECK(std::abs(pct(r.f1) - p.printed.f1) <= 0.01 + 1e-9);
    }
}

TEST_CASE("panels whose printed scores contradict their counts") {
    // Values computed by hand from the counts.
    const auto fray5 = binary_metrics(ConfusionMatrix::binary(7, 13, 17, 783));
    CHECK(pct(fray5.recall) == 35.00);    // 7/20
    CHECK(pct(fray5.precision) == 29.17); // 7/24
    CHECK(pct(fray5.f1) == 31.82);        // 14/44
    const auto fray15 = binary_metrics(ConfusionMatrix::binary(11, 1, 1, 799));
    CHECK(pct(fray15.f1) == 91.67);       // printed 91.69
    const auto uneven2 = binary_metrics(ConfusionMatrix::binary(12, 18, 19, 769));
    CHECK(pct(uneven2.precision) == 38.71); // printed 38.17; 12/31
}

TEST_CASE("f1 identity on published mean rows") {
    for (const auto* rows : {&testing::kPooledRows, &testing::kMacroRows})
        for (const auto& row : *rows) {
            CAPTURE(row.method);
            CAPTURE(row.images);
            const double f1 = *f1_score(row.recall, row.precision);
            if (row.method == "hybrid") CHECK(std::abs(round_half_up(f1, 2) - row.f1) <= 0.01 + 1e-9);
        }
    CHECK(round_half_up(*f1_score(75.03, 62.29), 2) == 68.07);
    CHECK(round_half_up(*f1_score(52.82, 71.43), 2) == 60.73);
}

TEST_CASE("f1 properties") {
    Rng rng(6);
    for (int k = 0; k < 200; ++k) {
        const double r = rng.uniform(0, 1), p = rng.uniform(0, 1);
        CHECK(*f1_score(r, p) == *f1_score(p, r));
        CHECK(*f1_score(r, r) == doctest::Approx(r));
        CHECK(*f1_score(r, p) <= std::max(r, p) + 1e-15);
        CHECK(*f1_score(r, p) >= std::min(r, p) - 1e-15);
    }
    CHECK_FALSE(f1_score(0.0, 0.0));
    CHECK_FALSE(f1_score(std::nullopt, 0.5));
}

TEST_CASE("multiclass metrics") {
    const std::vector<std::string> labels = {"blowhole", "break", "crack", "fray", "uneven", "free"};
    SUBCASE("perfect predictions") {
        const auto t = repeat({{"blowhole", 5}, {"break", 3}, {"crack", 2}, {"fray", 1}, {"uneven", 4}, {"free", 9}});
        const auto cm = tally(t, t, labels);
        const auto macro = multiclass_metrics(cm, MetricsMode::PerClassMacro);
        CHECK(pct(macro.mean_recall) == 100.00);
        CHECK(pct(macro.mean_precision) == 100.00);
        CHECK(pct(macro.f1) == 100.00);
        const auto pooled = multiclass_metrics(cm, MetricsMode::PooledBinary);
        CHECK(pct(pooled.f1) == 100.00);
    }
    SUBCASE("pooled collapses defect classes") {
        // crack predicted as blob still counts as a detected defect.
        const std::vector<std::string> l3 = {"crack", "blob", "free"};
        const std::vector<std::string> t = {"crack", "crack", "blob", "free", "free"};
        const std::vector<std::string> p = {"blob", "free", "blob", "crack", "free"};
        const auto r = multiclass_metrics(tally(t, p, l3), MetricsMode::PooledBinary);
        CHECK(*r.recall == doctest::Approx(2.0 / 3));
        CHECK(*r.precision == doctest::Approx(2.0 / 3));
        const auto m = multiclass_metrics(tally(t, p, l3), MetricsMode::PerClassMacro);
        REQUIRE(m.per_class.size() == 3);
        CHECK(*m.per_class[0].recall == 0.0);
        CHECK(*m.per_class[1].recall == 1.0);
        CHECK(*m.per_class[1].precision == 0.5);
        CHECK(*m.mean_recall == doctest::Approx((0.0 + 1.0 + 0.5) / 3));
        CHECK(*m.f1 == doctest::Approx(*f1_score(m.mean_recall, m.mean_precision)));
        CHECK_THROWS_AS(multiclass_metrics(tally(t, p, l3), MetricsMode::PooledBinary, "none"), InvalidArgument);
    }
    SUBCASE("invariant under relabeling of non-positive classes") {
        Rng rng(10);
        std::vector<std::string> t, p;
        for (int k = 0; k < 300; ++k) {
            t.push_back(labels[rng.index(labels.size())]);
            p.push_back(rng.uniform(0, 1) < 0.6 ? t.back() : labels[rng.index(labels.size())]);
        }
        std::vector<std::string> permuted = labels;
        std::reverse(permuted.begin(), permuted.end() - 1);
        for (auto mode : {MetricsMode::PooledBinary, MetricsMode::PerClassMacro}) {
            const auto a = multiclass_metrics(tally(t, p, labels), mode);
            const auto b = multiclass_metrics(tally(t, p, permuted), mode);
            CHECK(*a.f1 == doctest::Approx(*b.f1).epsilon(1e-14));
            CHECK(*a.accuracy == *b.accuracy);
        }
    }
}

TEST_CASE("formatting") {
    CHECK(format_percent(0.9148936170212766) == "91.49");
    CHECK(format_percent(std::nullopt) == "—");
    CHECK(format_percent(1.0) == "100.00");
    CHECK(format_percent(0.0) == "0.00");
    CHECK(round_half_up(0.125, 2) == 0.13);
    CHECK(round_half_up(1.005, 2) == 1.01);
    CHECK(round_half_up(71.875, 2) == 71.88);
    CHECK(round_half_up(2.5, 0) == 3.0);

    const auto r = binary_metrics(ConfusionMatrix::binary(43, 7, 1, 799, "blowhole", "free"));
    const auto f = format_report(r);
    CHECK(f.text.find("91.49") != std::string::npos);
    CHECK(f.text.find("blowhole") != std::string::npos);
    CHECK(f.record.at("f1").get<double>() == 91.49);
    CHECK(f.record.at("mode") == "binary");

    const auto absent = format_report(binary_metrics(ConfusionMatrix::binary(0, 0, 0, 5)));
    CHECK(absent.record.at("recall").is_null());
    CHECK(absent.text.find("—") != std::string::npos);
}

TEST_CASE("predictions csv") {
    const auto p = parse_predictions_csv("pred,id,truth\nfree,a,crack\n\"crack\",\"b,1\",crack\n");
    CHECK(p.ids == std::vector<std::string>{"a", "b,1"});
    CHECK(p.truth == std::vector<std::string>{"crack", "crack"});
    CHECK(p.pred == std::vector<std::string>{"free", "crack"});
    CHECK(parse_predictions_csv("id,truth,pred\r\nx,a,b\r\n").pred == std::vector<std::string>{"b"});
    CHECK_THROWS_AS(parse_predictions_csv("id,truth\nx,a\n"), SchemaError);
    CHECK_THROWS_AS(parse_predictions_csv("id,truth,pred\nx,a\n"), SchemaError);
    CHECK_THROWS_AS(read_predictions_csv("/nonexistent/p.csv"), IoError);
}
