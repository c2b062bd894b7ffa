#include "spdmotion/synthetic.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <vector>

using namespace spdmotion;

TEST_CASE("gen_synthetic is reproducible per seed and salt") {
    SyntheticSpec spec;
    spec.seed = 42;
    const SyntheticStream a = gen_synthetic(spec, 3);
    const SyntheticStream b = gen_synthetic(spec, 3);
    REQUIRE(a.seq.length() == b.seq.length());
    for (std::size_t t = 0; t < a.seq.frames.size(); ++t)
        CHECK((a.seq.frames[t] - b.seq.frames[t]).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(a.truth.segments.size() == b.truth.segments.size());
    for (std::size_t i = 0; i < a.truth.segments.size(); ++i) {
        CHECK(a.truth.segments[i].start == b.truth.segments[i].start);
        CHECK(a.truth.segments[i].end == b.truth.segments[i].end);
        CHECK(a.truth.segments[i].class_id == b.truth.segments[i].class_id);
    }

    const SyntheticStream c = gen_synthetic(spec, 4);
    CHECK(c.seq.length() != a.seq.length());
}

TEST_CASE("annotations are valid and cover the motion portions") {
    SyntheticSpec spec;
    spec.seed = 7;
    spec.segments_per_stream = 5;
    const SyntheticStream s = gen_synthetic(spec, 0);
    s.truth.validate();
    CHECK(s.truth.total_frames == s.seq.length());
    CHECK(s.truth.segments.size() == 5);

    // idle and motion segments alternate and tile the stream: every frame is
    // either inside a segment or in a gap between/around them
    long covered = 0;
    for (const Segment& seg : s.truth.segments) covered += seg.end - seg.start;
    CHECK(covered < s.truth.total_frames);  // the gaps are real idle frames
}

TEST_CASE("zero-gap mode emits back-to-back motions") {
    SyntheticSpec spec;
    spec.seed = 9;
    spec.idle_min_s = 0.0;
    spec.idle_max_s = 0.0;
    spec.segments_per_stream = 4;
    const SyntheticStream s = gen_synthetic(spec, 0);
    REQUIRE(s.truth.segments.size() == 4);
    CHECK(s.truth.segments.front().start == 0);
    CHECK(s.truth.segments.back().end == s.truth.total_frames);
    for (std::size_t i = 0; i + 1 < s.truth.segments.size(); ++i)
        CHECK(s.truth.segments[i].end == s.truth.segments[i + 1].start);
}

TEST_CASE("classes are separable by 1-NN on raw flattened windows") {
    SyntheticSpec spec;
    spec.seed = 77;
    spec.noise = 0.0;
    spec.segments_per_stream = 8;

    // labeled ws-frame windows drawn from inside motion segments
    const int ws = 20;
    std::vector<std::vector<double>> train_x, test_x;
    std::vector<int> train_y, test_y;
    for (std::uint64_t salt = 0; salt < 4; ++salt) {
        const SyntheticStream s = gen_synthetic(spec, salt);
        for (const Segment& seg : s.truth.segments) {
            if (seg.end - seg.start < ws + 2) continue;
            for (long start : {seg.start, (seg.start + seg.end) / 2 - ws / 2}) {
                std::vector<double> flat;
                for (long t = start; t < start + ws; ++t) {
                    const Frame& f = s.seq.frames[static_cast<std::size_t>(t)];
                    for (int j = 0; j < f.rows(); ++j)
                        for (int c = 0; c < 3; ++c) flat.push_back(f(j, c));
                }
                if (salt < 3) {
                    train_x.push_back(std::move(flat));
                    train_y.push_back(seg.class_id);
                } else {
                    test_x.push_back(std::move(flat));
                    test_y.push_back(seg.class_id);
                }
            }
        }
    }
    REQUIRE(!train_x.empty());
    REQUIRE(!test_x.empty());

    int hits = 0;
    for (std::size_t i = 0; i < test_x.size(); ++i) {
        double best = 1e300;
        int label = -1;
        for (std::size_t k = 0; k < train_x.size(); ++k) {
            double d = 0.0;
            for (std::size_t v = 0; v < test_x[i].size(); ++v) {
                const double diff = test_x[i][v] - train_x[k][v];
                d += diff * diff;
            }
            if (d < best) {
                best = d;
                label = train_y[k];
            }
        }
        if (label == test_y[i]) ++hits;
    }
    const double accuracy = static_cast<double>(hits) / static_cast<double>(test_x.size());
    CHECK(accuracy > 0.9);
}

TEST_CASE("invalid specs are rejected") {
    SyntheticSpec spec;
    spec.n_classes = 1;
    CHECK_THROWS_AS(gen_synthetic(spec, 0), std::invalid_argument);
    spec.n_classes = 4;
    spec.action_min_s = 0.0;
    CHECK_THROWS_AS(gen_synthetic(spec, 0), std::invalid_argument);
}
