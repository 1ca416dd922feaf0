#include "vseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "vseg/parallel.hpp"

namespace vseg {

namespace {

std::vector<Span> span_union(const std::vector<EventDetection>& detections) {
    std::vector<Span> spans;
    for (const auto& d : detections) spans.push_back({d.start_sample(), d.end_sample()});
    std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.start < b.start; });
    std::vector<Span> out;
    for (const auto& s : spans) {
        if (!out.empty() && s.start <= out.back().end)
            out.back().end = std::max(out.back().end, s.end);
        else
            out.push_back(s);
    }
    return out;
}

std::int64_t overlap(std::int64_t a0, std::int64_t a1, std::int64_t b0, std::int64_t b1) {
    return std::max<std::int64_t>(0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

double event_iou(const std::vector<EventDetection>& detections, const EventAnnotation& truth) {
    const auto spans = span_union(detections);
    if (spans.empty()) return 0.0;
    std::int64_t inter = 0, predicted = 0;
    for (const auto& s : spans) {
        predicted += s.length();
        inter += overlap(s.start, s.end, truth.start_sample, truth.end_sample);
    }
    const std::int64_t uni = predicted + static_cast<std::int64_t>(truth.length()) - inter;
    return uni == 0 ? 0.0 : double(inter) / double(uni);
}

double mean_iou(std::span<const double> ious) {
    if (ious.empty()) throw DomainError("mean IoU needs at least one event");
    return std::accumulate(ious.begin(), ious.end(), 0.0) / double(ious.size());
}

WindowOutcome classify_window(const std::vector<EventDetection>& detections,
                              const std::optional<EventAnnotation>& truth) {
    WindowOutcome out;
    std::int64_t best = 0;
    for (const auto& d : detections) {
        const std::int64_t ov =
            truth ? overlap(d.start_sample(), d.end_sample(), truth->start_sample, truth->end_sample) : 0;
        if (ov == 0) {
            out.false_positives.push_back(d.assigned());
        } else if (ov > best) {
            best = ov;
            out.predicted = d.assigned();
        }
    }
    return out;
}

EvalReport f1_report(std::span<const WindowResult> results) {
    EvalReport r;
    std::vector<double> ious;
    for (const auto& res : results) {
        const auto outcome = classify_window(res.detections, res.truth);
        const ClassLabel truth = res.truth_label();
        for (ClassLabel fp : outcome.false_positives) ++r.fp[label_code(fp)];
        ClassLabel column = ClassLabel::BG;
        if (res.truth) {
            const auto t = static_cast<std::size_t>(label_code(truth));
            r.present[t] = true;
            ++r.n_events;
            ious.push_back(event_iou(res.detections, *res.truth));
            if (outcome.predicted == truth) {
                ++r.tp[t];
            } else {
                ++r.fn[t];
                if (outcome.predicted) ++r.fp[label_code(*outcome.predicted)];
            }
            if (outcome.predicted) column = *outcome.predicted;
        } else if (!res.detections.empty()) {
            // Background window: the longest spurious detection stands for the window.
            const auto longest = std::max_element(res.detections.begin(), res.detections.end(),
                                                  [](const auto& a, const auto& b) { return a.length() < b.length(); });
            column = longest->assigned();
        }
        ++r.confusion[label_code(truth)][label_code(column)];
        ++r.n_windows;
    }
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < kNumEventClasses; ++c) {
        const double tp = double(r.tp[c]);
        r.precision[c] = r.tp[c] + r.fp[c] == 0 ? 0.0 : tp / double(r.tp[c] + r.fp[c]);
        r.recall[c] = r.tp[c] + r.fn[c] == 0 ? 0.0 : tp / double(r.tp[c] + r.fn[c]);
        const double pr = r.precision[c] + r.recall[c];
        r.per_class_f1[c] = pr == 0.0 ? 0.0 : 2.0 * r.precision[c] * r.recall[c] / pr;
        if (r.present[c]) {
            sum += r.per_class_f1[c];
            ++present;
        }
    }
    r.macro_f1 = present == 0 ? 0.0 : sum / double(present);
    r.mean_iou = ious.empty() ? 0.0 : mean_iou(ious);
    return r;
}

WindowBatch add_noise(const WindowBatch& window, const NoiseSpec& spec) {
    if (window.all_zero()) throw DomainError("cannot set an SNR on an all-zero window");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    Array2D x = window.samples();
    const double ratio = std::pow(10.0, spec.snr_db / 10.0);
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
        if (window.channel_is_zero(static_cast<std::size_t>(c))) continue;
        const double power = x.row(c).squaredNorm() / double(x.cols());
        const double sigma = std::sqrt(power / ratio);
        for (Eigen::Index t = 0; t < x.cols(); ++t) x(c, t) += sigma * unit(rng);
    }
    return window.with_samples(std::move(x));
}

std::vector<double> snr_grid() {
    std::vector<double> grid;
    for (int db = -5; db <= 10; ++db) grid.push_back(db);
    return grid;
}

MaskProvider model_masks(const Segmenter& segmenter, const FoldGeometry& geom, const ChainConfig& chain) {
    return [&segmenter, geom, chain](const LabeledWindow& lw, std::size_t) {
        return segmenter.segment(prepare_image(lw.window, geom, chain));
    };
}

MaskProvider oracle_masks(const FoldGeometry& geom) {
    return [geom](const LabeledWindow& lw, std::size_t) { return make_target(lw, geom); };
}

MaskProvider imported_masks(const std::string& dir) {
    return [dir](const LabeledWindow& lw, std::size_t) {
        const auto path = std::filesystem::path(dir) / (lw.window.window_id() + ".vsgm");
        if (!std::filesystem::exists(path)) throw FormatError("missing mask file " + path.string());
        return import_masks(path).masks;
    };
}

std::vector<WindowResult> evaluate_windows(std::span<const LabeledWindow> windows, const FoldGeometry& geom,
                                           const MaskProvider& masks, const EvalConfig& cfg) {
    std::vector<WindowResult> results(windows.size());
    parallel_for(windows.size(), cfg.threads, [&](std::size_t i) {
        const auto& lw = windows[i];
        if (lw.annotations.size() > 1) throw DomainError("window " + lw.window.window_id() + " has several events");
        const MaskStack m = masks(lw, i);
        if (m.n() != geom.n()) throw DomainError("mask size does not match the geometry");
        WindowResult& r = results[i];
        r.window_id = lw.window.window_id();
        if (!lw.annotations.empty()) r.truth = lw.annotations.front();
        r.detections = run_postprocessing(unfold_masks(m, geom), cfg.chain.post);
    });
    return results;
}

EvalReport evaluate(std::span<const LabeledWindow> windows, const FoldGeometry& geom, const Segmenter& segmenter,
                    const EvalConfig& cfg) {
    const auto results = evaluate_windows(windows, geom, model_masks(segmenter, geom, cfg.chain), cfg);
    return f1_report(results);
}

std::vector<EvalReport> noise_sweep(std::span<const LabeledWindow> windows, const FoldGeometry& geom,
                                    const Segmenter& segmenter, const EvalConfig& cfg, std::uint64_t seed) {
    std::vector<EvalReport> reports;
    const auto grid = snr_grid();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double snr = grid[k];
        const auto provider = [&](const LabeledWindow& lw, std::size_t i) {
            std::seed_seq seq{seed, std::uint64_t{k}, std::uint64_t{i}};
            std::uint64_t noise_seed = 0;
            seq.generate(reinterpret_cast<std::uint32_t*>(&noise_seed),
                         reinterpret_cast<std::uint32_t*>(&noise_seed) + 2);
            const WindowBatch noisy = add_noise(lw.window, {snr, noise_seed});
            return segmenter.segment(prepare_image(noisy, geom, cfg.chain));
        };
        auto report = f1_report(evaluate_windows(windows, geom, provider, cfg));
        report.axis = AxisTag{"snr_db", snr};
        reports.push_back(std::move(report));
    }
    return reports;
}

std::vector<TrainSample> make_training_set(std::span<const LabeledWindow> windows, const FoldGeometry& geom,
                                           const ChainConfig& chain, int threads) {
    std::vector<TrainSample> out(windows.size());
    parallel_for(windows.size(), threads, [&](std::size_t i) {
        out[i] = {prepare_image(windows[i].window, geom, chain), make_target(windows[i], geom)};
    });
    return out;
}

std::size_t flex_test_size(std::size_t n) { return n == 0 ? 0 : 4 * (n - 1) / 5; }

FlexSizes flex_split_sizes(const std::array<std::size_t, kNumClasses>& class_counts,
                           std::span<const double> fractions) {
    FlexSizes s;
    const std::size_t n = std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0});
    if (n == 0) throw DomainError("flexibility corpus is empty");
    s.test = flex_test_size(n);
    s.train_side = n - s.test;

    // Largest remainder; equal remainders go to the lower class code.
    std::array<std::size_t, kNumClasses> rem{};
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        s.train_side_per_class[c] = s.train_side * class_counts[c] / n;
        rem[c] = s.train_side * class_counts[c] % n;
        assigned += s.train_side_per_class[c];
    }
    std::array<std::size_t, kNumClasses> order{};
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; assigned < s.train_side; ++k, ++assigned) ++s.train_side_per_class[order[k]];

    for (double f : fractions) {
        const auto bp = std::llround(f * 10000.0);
        if (bp < 0 || bp > 2000)
            throw DomainError("fine-tune fraction " + std::to_string(f) + " exceeds the 20% train side");
        std::array<std::size_t, kNumClasses> per{};
        std::size_t total = 0;
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            per[c] = s.train_side_per_class[c] * static_cast<std::size_t>(bp) / 2000;
            total += per[c];
        }
        s.finetune.push_back(total);
        s.finetune_per_class.push_back(per);
    }
    return s;
}

FlexSplit flex_split(std::span<const LabeledWindow> corpus, std::span<const double> fractions, std::uint64_t seed) {
    std::array<std::vector<std::size_t>, kNumClasses> members;
    for (std::size_t i = 0; i < corpus.size(); ++i) members[label_code(corpus[i].label())].push_back(i);
    std::array<std::size_t, kNumClasses> counts{};
    for (std::size_t c = 0; c < kNumClasses; ++c) counts[c] = members[c].size();

    FlexSplit split;
    split.sizes = flex_split_sizes(counts, fractions);
    std::mt19937_64 rng(seed);
    for (auto& m : members) std::shuffle(m.begin(), m.end(), rng);
    for (std::size_t c = 0; c < kNumClasses; ++c)
        split.test.insert(split.test.end(), members[c].begin() + static_cast<std::ptrdiff_t>(split.sizes.train_side_per_class[c]),
                          members[c].end());
    std::sort(split.test.begin(), split.test.end());
    for (const auto& per : split.sizes.finetune_per_class) {
        std::vector<std::size_t> subset;
        for (std::size_t c = 0; c < kNumClasses; ++c)
            subset.insert(subset.end(), members[c].begin(), members[c].begin() + static_cast<std::ptrdiff_t>(per[c]));
        split.finetune.push_back(std::move(subset));
    }
    return split;
}

FlexResult flexibility_protocol(const UNet& base, std::span<const LabeledWindow> corpus, const FoldGeometry& geom,
                                const FlexConfig& cfg) {
    const FlexSplit split = flex_split(corpus, cfg.fractions, cfg.seed);
    std::vector<LabeledWindow> test;
    for (std::size_t i : split.test) test.push_back(corpus[i]);

    FlexResult result;
    result.sizes = split.sizes;
    for (std::size_t k = 0; k < cfg.fractions.size(); ++k) {
        const auto& subset = split.finetune[k];
        std::vector<FlexTracePoint> trace;
        EvalReport report;
        if (subset.empty()) {
            report = evaluate(test, geom, base, cfg.eval);
        } else {
            std::vector<LabeledWindow> tune;
            for (std::size_t i : subset) tune.push_back(corpus[i]);
            const auto samples = make_training_set(tune, geom, cfg.eval.chain, cfg.eval.threads);
            UNet model = base;
            train(model, samples, cfg.train, [&](int epoch, double loss, const UNet& m) {
                FlexTracePoint p{epoch, loss, {}, {}};
                if (cfg.trace_every > 0 && (epoch + 1) % cfg.trace_every == 0) {
                    const auto r = evaluate(test, geom, m, cfg.eval);
                    p.macro_f1 = r.macro_f1;
                    p.mean_iou = r.mean_iou;
                }
                trace.push_back(p);
            });
            report = evaluate(test, geom, model, cfg.eval);
        }
        report.axis = AxisTag{"finetune_fraction", cfg.fractions[k]};
        result.reports.push_back(std::move(report));
        result.traces.push_back(std::move(trace));
    }
    return result;
}

namespace {

nlohmann::ordered_json report_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    if (r.axis) j[r.axis->name] = r.axis->value;
    j["macro_f1"] = r.macro_f1;
    j["mean_iou"] = r.mean_iou;
    j["n_events"] = r.n_events;
    j["n_windows"] = r.n_windows;
    nlohmann::ordered_json per;
    for (std::size_t c = 0; c < kNumEventClasses; ++c) {
        const std::string name(label_name(label_from_code(static_cast<int>(c))));
        per[name] = {{"f1", r.per_class_f1[c]}, {"precision", r.precision[c]}, {"recall", r.recall[c]},
                     {"tp", r.tp[c]}, {"fp", r.fp[c]}, {"fn", r.fn[c]}, {"present", r.present[c]}};
    }
    j["per_class"] = per;
    j["confusion"] = r.confusion;
    return j;
}

std::string axis_cell(const EvalReport& r) {
    if (!r.axis) return "";
    std::ostringstream s;
    s << r.axis->value;
    return s.str();
}

}  // namespace

void write_report_json(std::ostream& out, const EvalReport& report) { out << report_json(report).dump(2) << '\n'; }

void write_reports_json(std::ostream& out, std::span<const EvalReport> reports) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    out << arr.dump(2) << '\n';
}

void write_reports_csv(std::ostream& out, std::span<const EvalReport> reports) {
    out << "axis_name,axis,macro_f1,mean_iou,n_events";
    for (std::size_t c = 0; c < kNumEventClasses; ++c) out << ",f1_" << label_name(label_from_code(static_cast<int>(c)));
    out << '\n';
    for (const auto& r : reports) {
        out << (r.axis ? r.axis->name : "") << ',' << axis_cell(r) << ',' << r.macro_f1 << ',' << r.mean_iou << ','
            << r.n_events;
        for (double f : r.per_class_f1) out << ',' << f;
        out << '\n';
    }
}

void write_sweep_csv(std::ostream& out, std::span<const EvalReport> reports) {
    out << "axis,macro_f1,mean_iou\n";
    for (const auto& r : reports) out << axis_cell(r) << ',' << r.macro_f1 << ',' << r.mean_iou << '\n';
}

void write_traces_csv(std::ostream& out, std::span<const double> fractions,
                      std::span<const std::vector<FlexTracePoint>> traces) {
    out << "fraction,epoch,loss,macro_f1,mean_iou\n";
    for (std::size_t k = 0; k < traces.size(); ++k)
        for (const auto& p : traces[k]) {
            out << fractions[k] << ',' << p.epoch << ',' << p.loss << ',';
            if (p.macro_f1) out << *p.macro_f1;
            out << ',';
            if (p.mean_iou) out << *p.mean_iou;
            out << '\n';
        }
}

}  // namespace vseg
