#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vseg/core.hpp"

namespace vseg {

/// Six unfolded class time arrays (rows in class-code order), values >= 0.
class TimeMaskSet {
public:
    explicit TimeMaskSet(Array2D arrays);
    const Array2D& arrays() const { return arrays_; }
    std::size_t length() const { return static_cast<std::size_t>(arrays_.cols()); }

private:
    Array2D arrays_;
};

/// Half-open sample range.
struct Span {
    std::int64_t start = 0;
    std::int64_t end = 0;
    std::int64_t length() const { return end - start; }
    bool operator==(const Span&) const = default;
};

struct PostprocessConfig {
    std::int64_t min_len = 0;
    std::int64_t merge_gap = 100;
};

/// Per-sample winning class (ties to the lowest code).
std::vector<ClassLabel> saturate(const TimeMaskSet& tm);

/// One-hot 6 x W form of saturate().
Array2D binary_saturation(const TimeMaskSet& tm);

/// Maximal runs where the BG row is 0.
std::vector<Span> detect_events(const Array2D& binary);

/// Majority vote of non-BG classes over the span; proportions over non-BG samples only.
/// A span without any non-BG sample is a DomainError.
EventDetection assign_class(const Array2D& binary, Span span);

/// Saturation, detection and class assignment, then merging of same-class
/// neighbours closer than merge_gap and removal of events shorter than min_len.
std::vector<EventDetection> run_postprocessing(const TimeMaskSet& tm, const PostprocessConfig& cfg = {});

/// Event-table row.
struct DetectionRecord {
    std::string window_id;
    EventDetection detection;
    double sample_rate_hz = 100.0;
    double start_epoch_s = 0.0;  // epoch of sample 0; 0 means unknown
};

std::string format_utc(double epoch_seconds);
void write_jsonl(std::ostream& out, const DetectionRecord& record);
void write_csv_header(std::ostream& out);
void write_csv(std::ostream& out, const DetectionRecord& record);

}  // namespace vseg
