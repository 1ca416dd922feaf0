// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any failed.
// The scaled end-to-end model is reused by the noise, flexibility and streaming checks.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vseg/eval.hpp"
#include "vseg/fold.hpp"
#include "vseg/pipeline.hpp"
#include "vseg/postprocess.hpp"
#include "vseg/synth.hpp"

using namespace vseg;

namespace {

int failures = 0;

void verdict(const char* name, bool pass, const std::string& detail) {
    std::printf("%s  %-26s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

template <class... A>
std::string fmt(const char* f, A... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

class Timer {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// Scaled experiment settings. Window 8 x 512 at 100 Hz, N = 64.
constexpr std::size_t kStations = 8, kWindow = 512;
constexpr std::size_t kTrainPerClass = 200, kTestPerClass = 50;
constexpr std::uint64_t kTrainSeed = 1, kTestSeed = 2, kModelSeed = 3;
const ToyUNetSpec kSpec{3, 8, 1, 6, 1};

// Larger batches put every class in every step, which keeps batch Dice from suppressing absent classes.
TrainConfig scaled_train_config() {
    TrainConfig c;
    c.epochs = 25;
    c.lr_max = 1e-3;
    c.lr_min = 1e-5;
    c.anneal_period_epochs = 25;
    c.batch_size = 40;
    c.seed = 5;
    return c;
}

void fold_bijection() {
    const Timer timer;
    std::size_t geometries = 0, mismatches = 0;
    for (std::size_t n = 1; n <= 16; ++n)
        for (std::size_t s = 1; s <= n; ++s) {
            if (n % s != 0) continue;
            const FoldGeometry g(s, n * n / s);
            ++geometries;
            // Sample values encode their own (channel, time) so the image is an index map.
            Array2D in(s, g.w());
            for (std::size_t c = 0; c < s; ++c)
                for (std::size_t t = 0; t < g.w(); ++t) in(c, t) = double(c * g.w() + t);
            const Array2D image = fold(in, g);
            if (image != oracle::fold(in, s, g.w())) ++mismatches;
            for (std::size_t c = 0; c < s; ++c)
                for (std::size_t t = 0; t < g.w(); ++t)
                    if (image(g.image_row(c, t), g.image_col(t)) != in(c, t)) ++mismatches;
            if (unfold_to_channels(image, g) != in) ++mismatches;
        }
    const FoldGeometry big(8, 8192);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z;
    std::size_t trials = 0;
    Array2D x(8, 8192);
    for (; trials < 1000; ++trials) {
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
        if (unfold_to_channels(fold(x, big), big) != x) ++mismatches;
    }
    const double t = timer.seconds();
    verdict("fold_bijection", mismatches == 0 && t < 10.0,
            fmt("%zu geometries with n<=16, %zu round trips at 8x8192, %zu mismatches, %.2f s", geometries, trials,
                mismatches, t));
}

void fold_geometry() {
    const bool sizes = geometry(8, 8192).n() == 256 && geometry(8, 2048).n() == 128 && geometry(8, 512).n() == 64;
    auto named = [](std::size_t s, std::size_t w, const char* needle) {
        try {
            geometry(s, w);
        } catch (const DomainError& e) {
            return std::string(e.what()).find(needle) != std::string::npos;
        }
        return false;
    };
    const bool errors = named(8, 1000, "must be an integer") && named(8, 2, "must be divisible by S") &&
                        named(0, 64, "must be positive");
    verdict("fold_geometry", sizes && errors,
            fmt("8x8192->%zu 8x2048->%zu 8x512->%zu, invalid cases %s", geometry(8, 8192).n(), geometry(8, 2048).n(),
                geometry(8, 512).n(), errors ? "rejected by name" : "NOT rejected as expected"));
}

void dice_oracle() {
    const Timer timer;
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> side(2, 24);
    std::bernoulli_distribution bit(0.3);
    const double smoothing = 1e-6;
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const std::size_t n = side(rng);
        MaskStack a(n), b(n);
        for (std::size_t c = 0; c < kNumClasses; ++c)
            for (Eigen::Index i = 0; i < a[c].size(); ++i) {
                a[c].data()[i] = bit(rng) ? 1.0 : 0.0;
                b[c].data()[i] = bit(rng) ? 1.0 : 0.0;
            }
        worst = std::max(worst, std::abs(dice_loss(a, b, smoothing) - oracle::dice(a, b, smoothing)));
    }
    const double t = timer.seconds();
    verdict("dice_oracle", worst <= 1e-9 && t < 5.0, fmt("1000 pairs, max |diff| %.2e, %.2f s", worst, t));
}

void gradient_check() {
    const Timer timer;
    const UNet net = oracle::jittered(UNet({1, 2, 1, 6, 2}, 17), 1);
    const auto r = oracle::gradient_check(net, oracle::random_batch(2, 8, 5), 1e-5);
    const double t = timer.seconds();
    verdict("gradient_check", r.checked == net.parameter_count() && r.max_rel_error <= 1e-4 && t < 60.0,
            fmt("%zu parameters, max relative error %.2e (parameter %zu), %.2f s", r.checked, r.max_rel_error, r.worst,
                t));
}

void postprocess_oracle() {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> level(0, 3);
    std::bernoulli_distribution bg_heavy(0.5);
    std::size_t mismatches = 0, events = 0;
    for (int k = 0; k < 1000; ++k) {
        // Few distinct levels so ties are common.
        Array2D a(6, 64);
        for (Eigen::Index t = 0; t < 64; ++t)
            for (int c = 0; c < 6; ++c) a(c, t) = level(rng) + (c == 5 && bg_heavy(rng) ? 2 : 0);
        const auto got = run_postprocessing(TimeMaskSet(a), {0, 0});
        const auto want = oracle::postprocess(a);
        events += want.size();
        bool same = got.size() == want.size();
        for (std::size_t i = 0; same && i < got.size(); ++i) {
            same = got[i].start_sample() == want[i].start && got[i].end_sample() == want[i].end &&
                   label_code(got[i].assigned()) == want[i].label;
            for (std::size_t c = 0; c < 5; ++c) same = same && got[i].class_proportions()[c] == want[i].proportions[c];
        }
        if (!same) ++mismatches;
    }
    verdict("postprocess_oracle", mismatches == 0,
            fmt("1000 random 6x64 inputs, %zu events, %zu mismatching inputs", events, mismatches));
}

struct Scaled {
    UNet model;
    std::vector<LabeledWindow> test;
    EvalReport report;
};

Scaled scaled_end_to_end() {
    const Timer timer;
    const FoldGeometry g(kStations, kWindow);
    const auto profiles = default_profiles(double(kWindow) / 100.0);
    SynthConfig sc;
    // Event windows only; BG is learned from the samples around each event.
    sc.count_per_class = kTrainPerClass;
    sc.seed = kTrainSeed;
    const auto train_set = synth_corpus(profiles, sc, g);
    sc.count_per_class = kTestPerClass;
    sc.seed = kTestSeed;
    sc.id_prefix = "test";
    auto test_set = synth_corpus(profiles, sc, g);

    UNet net(kSpec, kModelSeed);
    const TrainConfig tc = scaled_train_config();
    const auto data = make_training_set(train_set, g, ChainConfig{});
    const auto trace = train(net, data, tc);
    const double train_s = timer.seconds();
    const EvalReport r = evaluate(test_set, g, net, EvalConfig{});
    const double t = timer.seconds();
    std::string per_class;
    for (std::size_t c = 0; c < kNumEventClasses; ++c)
        per_class += fmt(" %s=%.2f", std::string(label_name(label_from_code(int(c)))).c_str(), r.per_class_f1[c]);
    verdict("scaled_end_to_end", r.macro_f1 >= 0.85 && r.mean_iou >= 0.70 && tc.epochs <= 100 && t <= 900.0,
            fmt("macro-F1 %.3f (>=0.85), mean IoU %.3f (>=0.70), %d epochs, final loss %.4f, train %.0f s, total %.0f s "
                "(<=900);%s",
                r.macro_f1, r.mean_iou, tc.epochs, trace.loss_trace.back(), train_s, t, per_class.c_str()));
    return Scaled{std::move(net), std::move(test_set), r};
}

void noise_sweep_check(const Scaled& s) {
    const Timer timer;
    const FoldGeometry g(kStations, kWindow);
    const auto reports = noise_sweep(s.test, g, s.model, EvalConfig{}, 77);
    const EvalReport& lo = reports.front();
    const EvalReport& hi = reports.back();
    // Relative drop from the cleanest to the noisiest set.
    auto drop = [](double clean, double noisy) { return clean > 0.0 ? (clean - noisy) / clean : 0.0; };
    const double f1_drop = drop(hi.macro_f1, lo.macro_f1), iou_drop = drop(hi.mean_iou, lo.mean_iou);
    const bool pass = reports.size() == 16 && lo.axis && lo.axis->value == -5.0 && hi.axis->value == 10.0 &&
                      hi.macro_f1 > lo.macro_f1 && iou_drop <= f1_drop;
    verdict("noise_sweep", pass,
            fmt("%zu reports; F1 %.3f @-5 dB -> %.3f @+10 dB (drop %.1f%%), IoU %.3f -> %.3f (drop %.1f%%), %.0f s",
                reports.size(), lo.macro_f1, hi.macro_f1, 100 * f1_drop, lo.mean_iou, hi.mean_iou, 100 * iou_drop,
                timer.seconds()));
}

void flex_sizes() {
    auto counts = [](std::initializer_list<std::size_t> per) {
        std::array<std::size_t, kNumClasses> c{};
        std::size_t i = 0;
        for (auto v : per) c[i++] = v;
        return c;
    };
    const std::vector<double> f{0.01, 0.05, 0.10, 0.20};
    const auto a = flex_split_sizes(counts({1516}), f);
    const auto b = flex_split_sizes(counts({6663}), f);
    const auto c = flex_split_sizes(counts({2298, 2081, 2833}), f);
    using V = std::vector<std::size_t>;
    const bool pass = a.finetune == V{15, 76, 152, 304} && b.finetune == V{66, 333, 667, 1334} &&
                      c.finetune == V{71, 360, 721, 1444};
    auto show = [](const FlexSizes& s) {
        return fmt("test %zu ft %zu/%zu/%zu/%zu", s.test, s.finetune[0], s.finetune[1], s.finetune[2], s.finetune[3]);
    };
    verdict("flex_split_sizes", pass,
            "1516: " + show(a) + "; 6663: " + show(b) + "; 7212 (2298/2081/2833): " + show(c));
}

void flex_protocol(const Scaled& s) {
    const Timer timer;
    const FoldGeometry g(kStations, kWindow);
    // A second volcano: every band scaled by 0.7, so each class sits roughly where its lower neighbour was.
    SynthConfig sc;
    sc.count_per_class = 100;
    sc.seed = 41;
    sc.id_prefix = "v2";
    const auto corpus = synth_corpus(shift_bands(default_profiles(double(kWindow) / 100.0), 0.7), sc, g);
    FlexConfig cfg;
    cfg.train = scaled_train_config();
    cfg.train.epochs = 15;
    cfg.train.anneal_period_epochs = 15;
    cfg.train.lr_max = 3e-4;
    cfg.train.lr_min = 3e-6;
    cfg.train.batch_size = 8;
    cfg.trace_every = 0;
    cfg.seed = 9;
    const FlexResult r = flexibility_protocol(s.model, corpus, g, cfg);
    std::string line = fmt("corpus %zu, test %zu; macro-F1 by fraction:", corpus.size(), r.sizes.test);
    for (std::size_t i = 0; i < cfg.fractions.size(); ++i)
        line += fmt(" %.0f%%(%zu)=%.3f", 100 * cfg.fractions[i], r.sizes.finetune[i], r.reports[i].macro_f1);
    verdict("flex_zero_shot_vs_20pct", r.reports.front().macro_f1 <= r.reports.back().macro_f1,
            line + fmt(", %.0f s", timer.seconds()));
}

void streaming(const Scaled& s) {
    const FoldGeometry g(kStations, kWindow);
    // One long record: the test windows laid end to end.
    const std::size_t count = 100;
    Array2D record(kStations, Eigen::Index(count * kWindow));
    for (std::size_t i = 0; i < count; ++i)
        record.middleCols(Eigen::Index(i * kWindow), kWindow) = s.test[i % s.test.size()].window.samples();
    StreamConfig cfg;
    cfg.threads = 1;
    StreamStats stats;
    const auto out = run_stream(WindowBatch(record, {}), s.model, g, cfg, &stats);
    verdict("streaming_throughput", stats.realtime_factor() >= 100.0,
            fmt("%llu samples/channel in %llu windows, %.2f s, %.0f samples/s per channel = %.0fx real time, %zu events",
                (unsigned long long)stats.samples, (unsigned long long)stats.windows, stats.seconds,
                stats.samples_per_second(), stats.realtime_factor(), out.size()));
}

}  // namespace

int main() {
    fold_bijection();
    fold_geometry();
    dice_oracle();
    gradient_check();
    postprocess_oracle();
    flex_sizes();
    const auto scaled = scaled_end_to_end();
    noise_sweep_check(scaled);
    flex_protocol(scaled);
    streaming(scaled);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
