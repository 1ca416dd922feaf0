#include <doctest.h>

#include <random>
#include <sstream>

#include "vseg/binio.hpp"
#include "vseg/pipeline.hpp"

using namespace vseg;

namespace {

// Marks pixels above a threshold as VT (or LP for negative values), the rest as BG.
class ThresholdSegmenter final : public Segmenter {
public:
    MaskStack segment(const Array2D& image) const override {
        MaskStack m(static_cast<std::size_t>(image.rows()));
        for (Eigen::Index i = 0; i < image.size(); ++i) {
            const double v = image.data()[i];
            const std::size_t c = v > 0.5 ? 0 : v < -0.5 ? 1 : 5;
            m[c].data()[i] = 1.0;
        }
        return m;
    }
};

ChainConfig raw_chain() {
    ChainConfig c;
    c.bandpass = false;
    c.normalize = false;
    c.post.merge_gap = 0;
    return c;
}

Array2D record_with_bursts(std::size_t s, std::size_t len, std::vector<std::tuple<int, int, double>> bursts) {
    Array2D x = Array2D::Zero(s, len);
    for (auto [a, b, v] : bursts) x.middleCols(a, b - a).setConstant(v);
    return x;
}

}  // namespace

TEST_CASE("one burst gives one detection across overlapping windows") {
    const FoldGeometry g(4, 256);
    const ThresholdSegmenter seg;
    StreamConfig cfg;
    cfg.chain = raw_chain();
    const WindowBatch rec(record_with_bursts(4, 4096, {{1000, 1300, 1.0}}), {});
    StreamStats stats;
    const auto out = run_stream(rec, seg, g, cfg, &stats);
    REQUIRE(out.size() == 1);
    CHECK(out[0].start_sample() == 1000);
    CHECK(out[0].end_sample() == 1300);
    CHECK(out[0].assigned() == ClassLabel::VT);
    CHECK(stats.windows == (4096 - 256) / 128 + 1);
    CHECK(stats.samples == 4096);
    CHECK(stats.seconds > 0.0);
}

TEST_CASE("quiet stream yields nothing") {
    const FoldGeometry g(4, 256);
    const ThresholdSegmenter seg;
    StreamConfig cfg;
    cfg.chain = raw_chain();
    CHECK(run_stream(WindowBatch(Array2D::Zero(4, 3000), {}), seg, g, cfg).empty());
}

TEST_CASE("chunked pushes match a single push") {
    const FoldGeometry g(4, 256);
    const ThresholdSegmenter seg;
    StreamConfig cfg;
    cfg.chain = raw_chain();
    cfg.hop = 100;
    const Array2D x = record_with_bursts(4, 5000, {{10, 90, 1.0}, {700, 1500, -1.0}, {1490, 1600, 1.0}, {4950, 5000, 1.0}});
    const auto whole = run_stream(WindowBatch(x, {}), seg, g, cfg);

    std::mt19937_64 rng(4);
    std::uniform_int_distribution<Eigen::Index> chunk(1, 700);
    StreamDetector det(seg, g, cfg, 100.0);
    std::vector<EventDetection> pieces;
    for (Eigen::Index at = 0; at < x.cols();) {
        const Eigen::Index k = std::min(chunk(rng), x.cols() - at);
        det.push(x.middleCols(at, k));
        const auto got = det.drain();
        pieces.insert(pieces.end(), got.begin(), got.end());
        at += k;
    }
    const auto tail = det.finish();
    pieces.insert(pieces.end(), tail.begin(), tail.end());
    CHECK(pieces == whole);
    for (std::size_t i = 1; i < pieces.size(); ++i) CHECK(pieces[i - 1].start_sample() <= pieces[i].start_sample());
    // The tail burst is only covered by the end-aligned flush window.
    CHECK(whole.back().end_sample() == 5000);
}

TEST_CASE("hop equal to W is independent window processing") {
    const FoldGeometry g(4, 256);
    const ThresholdSegmenter seg;
    StreamConfig cfg;
    cfg.chain = raw_chain();
    cfg.hop = 256;
    const Array2D x = record_with_bursts(4, 2048, {{100, 300, 1.0}, {600, 700, -1.0}, {1000, 1100, 1.0}});
    std::vector<EventDetection> manual;
    for (Eigen::Index o = 0; o + 256 <= 2048; o += 256)
        for (const auto& d : detect_window(WindowBatch(x.middleCols(o, 256), {}), g, seg, cfg.chain))
            manual.push_back(d.shifted(o));
    CHECK(run_stream(WindowBatch(x, {}), seg, g, cfg) == merge_overlapping(manual));
}

TEST_CASE("merging overlapping detections") {
    std::vector<EventDetection> d{EventDetection(0, 100, {1, 0, 0, 0, 0}), EventDetection(50, 150, {0.6, 0.4, 0, 0, 0}),
                                  EventDetection(150, 200, {1, 0, 0, 0, 0}), EventDetection(60, 90, {0, 1, 0, 0, 0})};
    const auto m = merge_overlapping(d);
    REQUIRE(m.size() == 2);
    CHECK(m[0].start_sample() == 0);
    CHECK(m[0].end_sample() == 200);  // touching spans join
    CHECK(m[0].class_proportions()[0] == doctest::Approx((150 * 0.8 + 50 * 1.0) / 200));
    CHECK(m[1].assigned() == ClassLabel::LP);
    CHECK(merge_overlapping({EventDetection(0, 10, {1, 0, 0, 0, 0}), EventDetection(11, 20, {1, 0, 0, 0, 0})}).size() ==
          2);
    CHECK(merge_overlapping(m) == m);

    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> pos(0, 500), len(1, 80), cls(0, 4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<EventDetection> r;
        for (int k = 0; k < 20; ++k) {
            const int s = pos(rng);
            std::array<double, 5> p{};
            p[std::size_t(cls(rng))] = 1.0;
            r.emplace_back(s, s + len(rng), p);
        }
        const auto once = merge_overlapping(r);
        CHECK(merge_overlapping(once) == once);
    }
}

TEST_CASE("stream errors") {
    const FoldGeometry g(4, 256);
    const ThresholdSegmenter seg;
    StreamDetector det(seg, g, {}, 100.0);
    det.push(Array2D::Zero(4, 10));
    CHECK_THROWS_WITH_AS(det.push(Array2D::Zero(3, 10)), doctest::Contains("channel count changed"), DomainError);
    StreamConfig bad;
    bad.hop = 300;
    CHECK_THROWS_AS(StreamDetector(seg, g, bad, 100.0), DomainError);
}

TEST_CASE("raw stream input") {
    binio::Writer w;
    for (int t = 0; t < 5; ++t)
        for (int c = 0; c < 3; ++c) w.put<float>(float(10 * c + t));
    std::stringstream in("{\"S\": 3, \"sample_rate\": 50, \"start_epoch\": 12.5}\n" + w.bytes());
    const auto h = read_stream_header(in);
    CHECK(h.channels == 3);
    CHECK(h.sample_rate_hz == 50.0);
    CHECK(h.start_epoch_s == 12.5);
    const auto a = read_stream_frames(in, 3, 2);
    REQUIRE(a.cols() == 2);
    CHECK(a(2, 1) == 21.0);
    const auto b = read_stream_frames(in, 3, 10);
    REQUIRE(b.cols() == 3);
    CHECK(b(1, 2) == 14.0);
    CHECK(read_stream_frames(in, 3, 10).cols() == 0);

    std::stringstream bad("not json\n");
    CHECK_THROWS_AS(read_stream_header(bad), FormatError);
    std::stringstream partial("{\"S\": 2}\n" + std::string(6, '\0'));
    read_stream_header(partial);
    CHECK_THROWS_AS(read_stream_frames(partial, 2, 4), FormatError);
}
