#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vseg/dataset.hpp"
#include "vseg/pipeline.hpp"
#include "vseg/train.hpp"
#include "vseg/unet.hpp"

namespace vseg {

/// |union(detections) & truth| / |union(detections) | truth| on the sample axis; 0 without detections.
double event_iou(const std::vector<EventDetection>& detections, const EventAnnotation& truth);

/// Arithmetic mean; DomainError when empty.
double mean_iou(std::span<const double> ious);

/// Detections of one window against its (at most one) ground-truth event.
struct WindowResult {
    std::string window_id;
    std::optional<EventAnnotation> truth;  // empty for background windows
    std::vector<EventDetection> detections;

    ClassLabel truth_label() const { return truth ? truth->label : ClassLabel::BG; }
};

struct WindowOutcome {
    /// Class of the detection overlapping the truth most (ties to the earliest);
    /// empty when the event was missed or the window has no event.
    std::optional<ClassLabel> predicted;
    /// Classes of detections that overlap nothing true, one entry each.
    std::vector<ClassLabel> false_positives;
};

/// Max-overlap matching. Overlapping detections other than the winner are ignored.
WindowOutcome classify_window(const std::vector<EventDetection>& detections,
                              const std::optional<EventAnnotation>& truth);

struct AxisTag {
    std::string name;  // snr_db, finetune_fraction, window_size
    double value = 0.0;
};

struct EvalReport {
    std::array<double, kNumEventClasses> per_class_f1{};
    std::array<double, kNumEventClasses> precision{};
    std::array<double, kNumEventClasses> recall{};
    std::array<std::size_t, kNumEventClasses> tp{}, fp{}, fn{};
    std::array<bool, kNumEventClasses> present{};  // class occurs in the truth
    double macro_f1 = 0.0;                          // mean over present classes
    double mean_iou = 0.0;
    /// Rows: truth class, columns: predicted (BG column = missed). One entry per window.
    std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};
    std::size_t n_events = 0;
    std::size_t n_windows = 0;
    std::optional<AxisTag> axis;
};

EvalReport f1_report(std::span<const WindowResult> results);

struct NoiseSpec {
    double snr_db = 0.0;
    std::uint64_t seed = 0;
};

/// White Gaussian noise per non-zero channel at that channel's own power / 10^(snr/10).
WindowBatch add_noise(const WindowBatch& window, const NoiseSpec& spec);

/// The sweep grid: -5, -4, ..., 10 dB.
std::vector<double> snr_grid();

/// Produces masks for window `index` of the evaluated set.
using MaskProvider = std::function<MaskStack(const LabeledWindow& window, std::size_t index)>;

MaskProvider model_masks(const Segmenter& segmenter, const FoldGeometry& geom, const ChainConfig& chain);
/// Ground-truth targets used as predictions.
MaskProvider oracle_masks(const FoldGeometry& geom);
/// <dir>/<window_id>.vsgm produced by an external model.
MaskProvider imported_masks(const std::string& dir);

struct EvalConfig {
    ChainConfig chain;
    int threads = 1;
};

std::vector<WindowResult> evaluate_windows(std::span<const LabeledWindow> windows, const FoldGeometry& geom,
                                           const MaskProvider& masks, const EvalConfig& cfg);

EvalReport evaluate(std::span<const LabeledWindow> windows, const FoldGeometry& geom, const Segmenter& segmenter,
                    const EvalConfig& cfg);

/// One report per grid SNR; the segmenter is only read.
std::vector<EvalReport> noise_sweep(std::span<const LabeledWindow> windows, const FoldGeometry& geom,
                                    const Segmenter& segmenter, const EvalConfig& cfg, std::uint64_t seed);

/// Preprocessed images and targets for training.
std::vector<TrainSample> make_training_set(std::span<const LabeledWindow> windows, const FoldGeometry& geom,
                                           const ChainConfig& chain, int threads = 1);

inline const std::vector<double> kFlexFractions = {0.0, 0.01, 0.05, 0.10, 0.20};

/// Test side of an n-window corpus: floor(4 (n - 1) / 5).
std::size_t flex_test_size(std::size_t n);

struct FlexSizes {
    std::size_t test = 0;
    std::size_t train_side = 0;
    std::array<std::size_t, kNumClasses> train_side_per_class{};
    std::vector<std::size_t> finetune;  // per fraction
    std::vector<std::array<std::size_t, kNumClasses>> finetune_per_class;
};

/// Split arithmetic for a corpus with the given per-class counts. The train side is
/// apportioned over classes by largest remainder; a fraction f of the corpus draws
/// floor(T_c * f / 0.2) windows of class c. Fractions above 0.2 are a DomainError.
FlexSizes flex_split_sizes(const std::array<std::size_t, kNumClasses>& class_counts,
                           std::span<const double> fractions);

struct FlexSplit {
    FlexSizes sizes;
    std::vector<std::size_t> test;                   // indices into the corpus
    std::vector<std::vector<std::size_t>> finetune;  // per fraction, nested
};

FlexSplit flex_split(std::span<const LabeledWindow> corpus, std::span<const double> fractions, std::uint64_t seed);

struct FlexTracePoint {
    int epoch = 0;
    double loss = 0.0;
    std::optional<double> macro_f1;
    std::optional<double> mean_iou;
};

struct FlexConfig {
    std::vector<double> fractions = kFlexFractions;
    TrainConfig train;
    EvalConfig eval;
    int trace_every = 1;  // evaluate the test side every k epochs; 0 = loss only
    std::uint64_t seed = 0;
};

struct FlexResult {
    FlexSizes sizes;
    std::vector<EvalReport> reports;                  // per fraction
    std::vector<std::vector<FlexTracePoint>> traces;  // per fraction, empty for zero-shot
};

/// Zero-shot evaluation plus fine-tuning of a fresh copy of `base` per fraction.
FlexResult flexibility_protocol(const UNet& base, std::span<const LabeledWindow> corpus, const FoldGeometry& geom,
                                const FlexConfig& cfg);

void write_report_json(std::ostream& out, const EvalReport& report);
void write_reports_json(std::ostream& out, std::span<const EvalReport> reports);
/// One row per report with per-class F1 and the axis column.
void write_reports_csv(std::ostream& out, std::span<const EvalReport> reports);
/// axis, macro_f1, mean_iou
void write_sweep_csv(std::ostream& out, std::span<const EvalReport> reports);
void write_traces_csv(std::ostream& out, std::span<const double> fractions,
                      std::span<const std::vector<FlexTracePoint>> traces);

}  // namespace vseg
