#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace vseg {

/// Dense row-major real array used for waveforms, images and masks.
using Array2D = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when an argument violates an operation's precondition.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an on-disk file does not match its format.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Codes are part of every file format; never reorder.
enum class ClassLabel : std::uint8_t { VT = 0, LP = 1, TR = 2, AV = 3, IC = 4, BG = 5 };

inline constexpr std::size_t kNumClasses = 6;
inline constexpr std::size_t kNumEventClasses = 5;

inline constexpr std::array<ClassLabel, kNumClasses> kAllLabels = {
    ClassLabel::VT, ClassLabel::LP, ClassLabel::TR, ClassLabel::AV, ClassLabel::IC, ClassLabel::BG};

constexpr int label_code(ClassLabel label) { return static_cast<int>(label); }
ClassLabel label_from_code(int code);
std::string_view label_name(ClassLabel label);
ClassLabel label_from_name(std::string_view name);
constexpr bool is_event(ClassLabel label) { return label != ClassLabel::BG; }

/// S stations x W samples of one analysis window.
class WindowBatch {
public:
    WindowBatch() = default;
    WindowBatch(Array2D samples, std::vector<std::string> station_ids, double sample_rate_hz = 100.0,
                std::string window_id = {}, double start_epoch_s = 0.0);

    const Array2D& samples() const { return samples_; }
    const std::vector<std::string>& station_ids() const { return station_ids_; }
    double sample_rate_hz() const { return sample_rate_hz_; }
    const std::string& window_id() const { return window_id_; }
    /// Zero when the absolute start time is unknown.
    double start_epoch_s() const { return start_epoch_s_; }

    std::size_t stations() const { return static_cast<std::size_t>(samples_.rows()); }
    std::size_t length() const { return static_cast<std::size_t>(samples_.cols()); }
    bool all_zero() const;
    bool channel_is_zero(std::size_t row) const;

    /// Copy with new samples; shape must match.
    WindowBatch with_samples(Array2D samples) const;
    WindowBatch with_id(std::string window_id) const;

private:
    Array2D samples_;
    std::vector<std::string> station_ids_;
    double sample_rate_hz_ = 100.0;
    std::string window_id_;
    double start_epoch_s_ = 0.0;
};

/// Ground-truth event on [start_sample, end_sample).
struct EventAnnotation {
    std::uint32_t start_sample = 0;
    std::uint32_t end_sample = 0;
    ClassLabel label = ClassLabel::VT;

    std::size_t length() const { return end_sample - start_sample; }
    bool operator==(const EventAnnotation&) const = default;
};

/// Throws DomainError unless annotations are valid, sorted and disjoint within [0, w].
void validate_annotations(const std::vector<EventAnnotation>& annotations, std::size_t w);

/// One detected event. class_proportions is indexed by event-class code (VT..IC).
class EventDetection {
public:
    EventDetection(std::int64_t start_sample, std::int64_t end_sample,
                   std::array<double, kNumEventClasses> class_proportions);

    std::int64_t start_sample() const { return start_; }
    std::int64_t end_sample() const { return end_; }
    std::int64_t length() const { return end_ - start_; }
    ClassLabel assigned() const { return assigned_; }
    const std::array<double, kNumEventClasses>& class_proportions() const { return proportions_; }

    /// Same proportions, different extent (used when shifting to absolute time).
    EventDetection shifted(std::int64_t offset) const;

    bool operator==(const EventDetection&) const = default;

private:
    std::int64_t start_;
    std::int64_t end_;
    std::array<double, kNumEventClasses> proportions_;
    ClassLabel assigned_;
};

/// Argmax with ties to the lowest index.
template <typename Range>
std::size_t argmax_lowest(const Range& values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < std::size(values); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

}  // namespace vseg
