#include "spdmotion/metrics.hpp"

#include "metrics_oracle.hpp"
#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

using namespace spdmotion;

namespace {

namespace oracle = metrics_oracle;

std::vector<Segment> random_segments(Rng& rng, long total, int max_count, int n_classes) {
    std::vector<Segment> out;
    long cursor = static_cast<long>(rng.index(20));
    const int count = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(max_count)));
    for (int i = 0; i < count && cursor + 5 < total; ++i) {
        const long len = 5 + static_cast<long>(rng.index(40));
        const long end = std::min(total, cursor + len);
        out.push_back({cursor, end, static_cast<int>(rng.index(static_cast<std::uint64_t>(n_classes)))});
        cursor = end + static_cast<long>(rng.index(25));
    }
    return out;
}

}  // namespace

TEST_CASE("jaccard_index") {
    const std::vector<Segment> gt{{0, 100, 0}};

    SECTION("identical lists score 1") {
        CHECK(jaccard_index(gt, gt) == 1.0);
    }

    SECTION("disjoint predictions score 0") {
        CHECK(jaccard_index({{200, 300, 0}}, gt) == 0.0);
    }

    SECTION("half-overlap worked example: 50/150") {
        CHECK(jaccard_index({{50, 150, 0}}, gt) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    }

    SECTION("class mismatch does not match") {
        CHECK(jaccard_index({{0, 100, 1}}, gt) == 0.0);
    }

    SECTION("empty ground truth is an error") {
        CHECK_THROWS_AS(jaccard_index(gt, {}), std::invalid_argument);
    }
}

TEST_CASE("f1_score") {
    SECTION("exact matches score 1") {
        const std::vector<Segment> gt{{0, 50, 0}, {100, 150, 1}};
        CHECK(f1_score(gt, gt) == 1.0);
    }

    SECTION("no predictions scores 0") {
        CHECK(f1_score({}, {{0, 50, 0}}) == 0.0);
    }

    SECTION("one true positive plus one spurious prediction: F1 = 0.5") {
        const std::vector<Segment> gt{{0, 50, 0}, {100, 150, 1}};
        const std::vector<Segment> pred{{0, 50, 0}, {300, 350, 0}};
        CHECK(f1_score(pred, gt) == Catch::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("sl_el_scores") {
    const std::vector<Segment> gt{{0, 100, 0}};

    SECTION("perfect boundaries") {
        const auto [sl, el] = sl_el_scores(gt, gt);
        CHECK(sl == 1.0);
        CHECK(el == 1.0);
    }

    SECTION("ten percent boundary offsets") {
        const auto [sl, el] = sl_el_scores({{10, 90, 0}}, gt);
        CHECK(sl == Catch::Approx(0.9).epsilon(1e-12));
        CHECK(el == Catch::Approx(0.9).epsilon(1e-12));
    }

    SECTION("unmatched ground truth contributes zero") {
        const auto [sl, el] = sl_el_scores({}, gt);
        CHECK(sl == 0.0);
        CHECK(el == 0.0);
    }

    SECTION("zero-length ground truth is rejected") {
        CHECK_THROWS_AS(sl_el_scores({}, {{5, 5, 0}}), std::invalid_argument);
    }
}

TEST_CASE("detection_rate_fp") {
    SECTION("all matched, none spurious") {
        const std::vector<Segment> gt{{0, 50, 0}};
        const auto [dr, fp] = detection_rate_fp(gt, gt);
        CHECK(dr == 1.0);
        CHECK(fp == 0.0);
    }

    SECTION("no predictions") {
        const auto [dr, fp] = detection_rate_fp({}, {{0, 50, 0}});
        CHECK(dr == 0.0);
        CHECK(fp == 0.0);
    }

    SECTION("two of three detected, one spurious of three predictions") {
        const std::vector<Segment> gt{{0, 50, 0}, {100, 150, 1}, {200, 250, 2}};
        const std::vector<Segment> pred{{0, 50, 0}, {100, 150, 1}, {400, 450, 0}};
        const auto [dr, fp] = detection_rate_fp(pred, gt);
        CHECK(dr == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(fp == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("frame_accuracy") {
    CHECK(frame_accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(frame_accuracy({0, 0, 1, 1}, {1, 1, 0, 0}) == 0.0);
    CHECK_THROWS_AS(frame_accuracy({1}, {1, 2}), std::invalid_argument);

    SECTION("matches a counting loop on random labelings") {
        Rng rng(163);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<int> a, b;
            const int n = 1 + static_cast<int>(rng.index(60));
            for (int i = 0; i < n; ++i) {
                a.push_back(static_cast<int>(rng.index(3)));
                b.push_back(static_cast<int>(rng.index(3)));
            }
            long hits = 0;
            for (int i = 0; i < n; ++i)
                if (a[static_cast<std::size_t>(i)] == b[static_cast<std::size_t>(i)]) ++hits;
            CHECK(frame_accuracy(a, b) ==
                  Catch::Approx(static_cast<double>(hits) / n).epsilon(1e-15));
        }
    }
}

TEST_CASE("metrics agree with the independent frame-set oracle") {
    Rng rng(167);
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<Segment> gt = random_segments(rng, 300, 5, 3);
        if (gt.empty()) continue;
        const std::vector<Segment> pred = random_segments(rng, 300, 6, 3);

        CHECK(jaccard_index(pred, gt) == Catch::Approx(oracle::jaccard(pred, gt)).margin(1e-12));

        const auto matches = oracle::match(pred, gt, 0.5);
        const double tp = static_cast<double>(matches.size());
        double expected_f1 = 0.0;
        if (!pred.empty()) {
            const double precision = tp / static_cast<double>(pred.size());
            const double recall = tp / static_cast<double>(gt.size());
            expected_f1 =
                precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
        }
        CHECK(f1_score(pred, gt) == Catch::Approx(expected_f1).margin(1e-12));

        const auto [dr, fp] = detection_rate_fp(pred, gt);
        CHECK(dr == Catch::Approx(tp / static_cast<double>(gt.size())).margin(1e-12));
        const double expected_fp =
            pred.empty() ? 0.0
                         : (static_cast<double>(pred.size()) - tp) / static_cast<double>(pred.size());
        CHECK(fp == Catch::Approx(expected_fp).margin(1e-12));

        double esl = 0.0, eel = 0.0;
        for (const auto& [p, g] : matches) {
            const double len = static_cast<double>(gt[g].end - gt[g].start);
            esl += std::max(0.0, 1.0 - std::abs(static_cast<double>(pred[p].start - gt[g].start)) / len);
            eel += std::max(0.0, 1.0 - std::abs(static_cast<double>(pred[p].end - gt[g].end)) / len);
        }
        const auto [sl, el] = sl_el_scores(pred, gt);
        CHECK(sl == Catch::Approx(esl / static_cast<double>(gt.size())).margin(1e-12));
        CHECK(el == Catch::Approx(eel / static_cast<double>(gt.size())).margin(1e-12));
        CHECK(sl >= 0.0);
        CHECK(sl <= 1.0);
        CHECK(el >= 0.0);
        CHECK(el <= 1.0);
    }
}

TEST_CASE("metrics are invariant to segment list order") {
    Rng rng(173);
    const std::vector<Segment> gt = random_segments(rng, 300, 5, 3);
    std::vector<Segment> pred = random_segments(rng, 300, 6, 3);
    REQUIRE(!gt.empty());

    const double j = jaccard_index(pred, gt);
    const double f = f1_score(pred, gt);
    const auto [sl, el] = sl_el_scores(pred, gt);

    std::vector<Segment> pred_rev(pred.rbegin(), pred.rend());
    std::vector<Segment> gt_rev(gt.rbegin(), gt.rend());
    CHECK(jaccard_index(pred_rev, gt_rev) == Catch::Approx(j).margin(1e-14));
    CHECK(f1_score(pred_rev, gt_rev) == Catch::Approx(f).margin(1e-14));
    const auto [sl2, el2] = sl_el_scores(pred_rev, gt_rev);
    CHECK(sl2 == Catch::Approx(sl).margin(1e-14));
    CHECK(el2 == Catch::Approx(el).margin(1e-14));
}

TEST_CASE("replacing a spurious prediction with a correct one never hurts") {
    const std::vector<Segment> gt{{0, 50, 0}, {100, 150, 1}};
    const std::vector<Segment> with_spurious{{0, 50, 0}, {300, 340, 1}};
    const std::vector<Segment> with_correct{{0, 50, 0}, {100, 150, 1}};

    CHECK(f1_score(with_correct, gt) >= f1_score(with_spurious, gt));
    CHECK(detection_rate_fp(with_correct, gt).first >= detection_rate_fp(with_spurious, gt).first);
}

TEST_CASE("jaccard is symmetric on exact-match configurations") {
    Rng rng(179);
    const std::vector<Segment> segs = random_segments(rng, 300, 5, 3);
    REQUIRE(!segs.empty());
    CHECK(jaccard_index(segs, segs) == 1.0);
}

TEST_CASE("report_from_events assembles every metric") {
    Annotations truth;
    truth.class_names = {"a", "b"};
    truth.total_frames = 200;
    truth.segments = {{20, 80, 0}, {120, 180, 1}};

    std::vector<DetectorEvent> events;
    // two perfect segment completions
    events.push_back({EventKind::segment_complete, 90,
                      nlohmann::json{{"start", 20},
                                     {"end", 80},
                                     {"state", 1},
                                     {"discarded", false},
                                     {"class_id", 0},
                                     {"class_name", "a"}}});
    events.push_back({EventKind::segment_complete, 190,
                      nlohmann::json{{"start", 120},
                                     {"end", 180},
                                     {"state", 1},
                                     {"discarded", false},
                                     {"class_id", 1},
                                     {"class_name", "b"}}});
    // four state samples, three correct
    auto sample = [](long end, int state) {
        return DetectorEvent{EventKind::state_sample, end,
                             nlohmann::json{{"state", state},
                                            {"window_start", end - 10},
                                            {"window_end", end}}};
    };
    events.push_back(sample(10, 0));
    events.push_back(sample(50, 1));
    events.push_back(sample(100, 0));
    events.push_back(sample(150, 0));  // wrong: inside segment b

    const MetricsReport r = report_from_events(events, truth, DetectorMode::binary);
    CHECK(r.jaccard == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK(r.sl_score == 1.0);
    CHECK(r.el_score == 1.0);
    CHECK(r.detection_rate == 1.0);
    CHECK(r.fp_rate == 0.0);
    CHECK(r.prediction_accuracy == 1.0);
    CHECK(r.detection_accuracy == Catch::Approx(0.75).epsilon(1e-12));

    SECTION("json report carries the protocol definitions") {
        const nlohmann::json j = report_to_json(r);
        CHECK(j.contains("definitions"));
        CHECK(j.at("f1").get<double>() == 1.0);
    }
}

TEST_CASE("run_sweep") {
    Annotations truth;
    truth.class_names = {"a"};
    truth.total_frames = 100;
    truth.segments = {{10, 60, 0}};
    SkeletonSequence seq;
    seq.capture_rate = 30.0;
    seq.layout = JointLayout{2, LayoutKind::custom, {}};
    seq.frames.assign(100, Frame::Zero(2, 3));

    const std::vector<std::pair<SkeletonSequence, Annotations>> streams{{seq, truth}};

    SECTION("single grid point gives a single row") {
        const std::vector<SweepPoint> grid{{12, 3, std::nullopt}};
        const auto cells = run_sweep(grid, streams, DetectorMode::binary,
                                     [&](const SweepPoint&, const SkeletonSequence&) {
                                         std::vector<DetectorEvent> ev;
                                         ev.push_back({EventKind::segment_complete, 70,
                                                       nlohmann::json{{"start", 10},
                                                                      {"end", 60},
                                                                      {"state", 1},
                                                                      {"discarded", false},
                                                                      {"class_id", 0}}});
                                         return ev;
                                     });
        REQUIRE(cells.size() == 1);
        CHECK(cells[0].ok);
        CHECK(cells[0].report.f1 == 1.0);
        const std::string csv = sweep_csv(cells);
        CHECK(csv.find("ws,te,deadline_s,jaccard,f1") == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);  // header + one row
    }

    SECTION("a failing cell records its error and the sweep continues") {
        const std::vector<SweepPoint> grid{{12, 3, std::nullopt}, {14, 3, std::nullopt}};
        const auto cells = run_sweep(grid, streams, DetectorMode::binary,
                                     [&](const SweepPoint& p, const SkeletonSequence&)
                                         -> std::vector<DetectorEvent> {
                                         if (p.ws == 12) throw std::runtime_error("cell failure");
                                         return {};
                                     });
        REQUIRE(cells.size() == 2);
        CHECK_FALSE(cells[0].ok);
        CHECK(cells[0].error == "cell failure");
        CHECK(cells[1].ok);
    }
}
