#include "vseg/core.hpp"

#include <cmath>
#include <numeric>

namespace vseg {

namespace {
constexpr std::array<std::string_view, kNumClasses> kNames = {"VT", "LP", "TR", "AV", "IC", "BG"};
}

ClassLabel label_from_code(int code) {
    if (code < 0 || code >= static_cast<int>(kNumClasses))
        throw DomainError("class code out of range 0..5: " + std::to_string(code));
    return static_cast<ClassLabel>(code);
}

std::string_view label_name(ClassLabel label) { return kNames.at(static_cast<std::size_t>(label)); }

ClassLabel label_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kNames.size(); ++i)
        if (kNames[i] == name) return static_cast<ClassLabel>(i);
    // IQ is the alternative spelling for ice-quakes.
    if (name == "IQ") return ClassLabel::IC;
    throw DomainError("unknown class name: " + std::string(name));
}

WindowBatch::WindowBatch(Array2D samples, std::vector<std::string> station_ids, double sample_rate_hz,
                         std::string window_id, double start_epoch_s)
    : samples_(std::move(samples)),
      station_ids_(std::move(station_ids)),
      sample_rate_hz_(sample_rate_hz),
      window_id_(std::move(window_id)),
      start_epoch_s_(start_epoch_s) {
    if (samples_.rows() < 1 || samples_.cols() < 1)
        throw DomainError("window must have at least one station and one sample");
    if (station_ids_.empty()) station_ids_.resize(static_cast<std::size_t>(samples_.rows()));
    if (station_ids_.size() != static_cast<std::size_t>(samples_.rows()))
        throw DomainError("station_ids size " + std::to_string(station_ids_.size()) + " does not match " +
                          std::to_string(samples_.rows()) + " sample rows");
    if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_))
        throw DomainError("sample rate must be positive");
}

bool WindowBatch::all_zero() const { return (samples_.array() == 0.0).all(); }

bool WindowBatch::channel_is_zero(std::size_t row) const {
    return (samples_.row(static_cast<Eigen::Index>(row)).array() == 0.0).all();
}

WindowBatch WindowBatch::with_samples(Array2D samples) const {
    if (samples.rows() != samples_.rows() || samples.cols() != samples_.cols())
        throw DomainError("replacement samples change the window shape");
    WindowBatch out = *this;
    out.samples_ = std::move(samples);
    return out;
}

WindowBatch WindowBatch::with_id(std::string window_id) const {
    WindowBatch out = *this;
    out.window_id_ = std::move(window_id);
    return out;
}

void validate_annotations(const std::vector<EventAnnotation>& annotations, std::size_t w) {
    std::uint32_t previous_end = 0;
    for (const auto& a : annotations) {
        if (a.label == ClassLabel::BG) throw DomainError("annotation label must not be BG");
        if (a.start_sample >= a.end_sample) throw DomainError("annotation has start >= end");
        if (a.end_sample > w) throw DomainError("annotation extends past the window");
        if (a.start_sample < previous_end) throw DomainError("annotations overlap or are unsorted");
        previous_end = a.end_sample;
    }
}

EventDetection::EventDetection(std::int64_t start_sample, std::int64_t end_sample,
                               std::array<double, kNumEventClasses> class_proportions)
    : start_(start_sample), end_(end_sample), proportions_(class_proportions) {
    if (start_ >= end_) throw DomainError("detection has start >= end");
    double total = 0.0;
    for (double p : proportions_) {
        if (!(p >= 0.0)) throw DomainError("class proportions must be non-negative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DomainError("class proportions must sum to 1");
    assigned_ = static_cast<ClassLabel>(argmax_lowest(proportions_));
}

EventDetection EventDetection::shifted(std::int64_t offset) const {
    return EventDetection(start_ + offset, end_ + offset, proportions_);
}

}  // namespace vseg
