#include <doctest.h>

#include <random>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "vseg/postprocess.hpp"

using namespace vseg;

namespace {

Array2D random_masks(std::int64_t w, std::mt19937_64& rng) {
    // Few distinct levels so ties occur often.
    std::uniform_int_distribution<int> level(0, 3);
    std::bernoulli_distribution bg_heavy(0.5);
    Array2D a(6, w);
    for (std::int64_t t = 0; t < w; ++t)
        for (int c = 0; c < 6; ++c) a(c, t) = level(rng) + (c == 5 && bg_heavy(rng) ? 2 : 0);
    return a;
}

// One row per class; the class code of each sample is given by `labels` (5 = BG).
Array2D masks_from_labels(const std::vector<int>& labels) {
    Array2D a = Array2D::Zero(6, Eigen::Index(labels.size()));
    for (std::size_t t = 0; t < labels.size(); ++t) a(labels[t], Eigen::Index(t)) = 1.0;
    return a;
}

std::vector<int> runs(std::initializer_list<std::pair<int, int>> parts) {
    std::vector<int> out;
    for (auto [label, len] : parts) out.insert(out.end(), std::size_t(len), label);
    return out;
}

}  // namespace

TEST_CASE("postprocessing matches the brute-force oracle") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 300; ++k) {
        const Array2D a = random_masks(64, rng);
        const auto got = run_postprocessing(TimeMaskSet(a), {0, 0});
        const auto want = oracle::postprocess(a);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].start_sample() == want[i].start);
            CHECK(got[i].end_sample() == want[i].end);
            CHECK(label_code(got[i].assigned()) == want[i].label);
            for (std::size_t c = 0; c < 5; ++c) CHECK(got[i].class_proportions()[c] == want[i].proportions[c]);
        }
    }
}

TEST_CASE("ties resolve to the lowest class code") {
    const auto sat = saturate(TimeMaskSet(Array2D::Zero(6, 10)));
    for (auto l : sat) CHECK(l == ClassLabel::VT);
    const auto events = run_postprocessing(TimeMaskSet(Array2D::Zero(6, 10)));
    REQUIRE(events.size() == 1);
    CHECK(events[0].start_sample() == 0);
    CHECK(events[0].end_sample() == 10);
    Array2D a = Array2D::Zero(6, 3);
    a(2, 1) = 0.5;
    a(5, 1) = 0.5;
    CHECK(saturate(TimeMaskSet(a))[1] == ClassLabel::TR);
}

TEST_CASE("binary saturation is one-hot") {
    std::mt19937_64 rng(1);
    const Array2D b = binary_saturation(TimeMaskSet(random_masks(50, rng)));
    for (Eigen::Index t = 0; t < 50; ++t) CHECK(b.col(t).sum() == 1.0);
}

TEST_CASE("class assignment votes over non-background samples") {
    const auto labels = runs({{5, 5}, {0, 6}, {5, 2}, {1, 4}, {5, 3}});
    const Array2D bin = binary_saturation(TimeMaskSet(masks_from_labels(labels)));
    const auto d = assign_class(bin, {5, 17});
    CHECK(d.assigned() == ClassLabel::VT);
    CHECK(d.class_proportions()[0] == doctest::Approx(0.6));
    CHECK(d.class_proportions()[1] == doctest::Approx(0.4));
    CHECK_THROWS_AS(assign_class(bin, {0, 5}), DomainError);
}

TEST_CASE("same-class neighbours closer than merge_gap are merged") {
    const auto labels = runs({{5, 10}, {0, 20}, {5, 50}, {0, 20}, {5, 100}, {0, 5}, {5, 10}});
    const TimeMaskSet tm(masks_from_labels(labels));
    const auto merged = run_postprocessing(tm, {0, 100});
    REQUIRE(merged.size() == 2);
    CHECK(merged[0].start_sample() == 10);
    CHECK(merged[0].end_sample() == 100);
    CHECK(merged[0].class_proportions()[0] == 1.0);
    CHECK(merged[1].start_sample() == 200);
    // A gap equal to merge_gap keeps events apart.
    CHECK(run_postprocessing(tm, {0, 50}).size() == 3);
    CHECK(run_postprocessing(tm, {0, 51}).size() == 2);
}

TEST_CASE("different classes are never merged") {
    const auto labels = runs({{0, 20}, {5, 3}, {2, 20}});
    CHECK(run_postprocessing(TimeMaskSet(masks_from_labels(labels)), {0, 100}).size() == 2);
}

TEST_CASE("short events are dropped after merging") {
    const auto labels = runs({{5, 10}, {3, 8}, {5, 4}, {3, 8}, {5, 30}, {4, 10}, {5, 10}});
    const TimeMaskSet tm(masks_from_labels(labels));
    const auto out = run_postprocessing(tm, {15, 10});
    REQUIRE(out.size() == 1);
    CHECK(out[0].assigned() == ClassLabel::AV);
    CHECK(out[0].length() == 20);
}

TEST_CASE("time mask validation") {
    CHECK_THROWS_AS(TimeMaskSet(Array2D::Zero(5, 10)), DomainError);
    Array2D a = Array2D::Zero(6, 4);
    a(1, 1) = -0.1;
    CHECK_THROWS_AS(TimeMaskSet{a}, DomainError);
}

TEST_CASE("event table rows") {
    const EventDetection d(100, 250, {0.0, 0.8, 0.2, 0.0, 0.0});
    std::ostringstream out;
    write_jsonl(out, {"w1", d, 100.0, 1.7e9});
    const auto j = nlohmann::json::parse(out.str());
    CHECK(j["window_id"] == "w1");
    CHECK(j["class"] == "LP");
    CHECK(j["start_sample"] == 100);
    CHECK(j["start_utc"] == "2023-11-14T22:13:21.000Z");
    CHECK(j["end_utc"] == "2023-11-14T22:13:22.500Z");
    CHECK(j["proportions"].size() == 5);

    std::ostringstream plain;
    write_jsonl(plain, {"w1", d, 100.0, 0.0});
    CHECK_FALSE(nlohmann::json::parse(plain.str()).contains("start_utc"));

    std::ostringstream csv;
    write_csv_header(csv);
    write_csv(csv, {"w1", d, 100.0, 0.0});
    CHECK(csv.str().find("w1,100,250,,,LP,0,0.80000000000000004") != std::string::npos);
}

TEST_CASE("utc formatting") {
    CHECK(format_utc(0.0) == "1970-01-01T00:00:00.000Z");
    CHECK(format_utc(1.9996) == "1970-01-01T00:00:02.000Z");
    CHECK(format_utc(86400.25) == "1970-01-02T00:00:00.250Z");
}
