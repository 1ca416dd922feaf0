#pragma once

#include <chrono>
#include <cstdint>
#include <istream>
#include <vector>

#include "vseg/dsp.hpp"
#include "vseg/fold.hpp"
#include "vseg/postprocess.hpp"
#include "vseg/segmenter.hpp"

namespace vseg {

/// Per-window processing around the segmenter.
struct ChainConfig {
    dsp::BandpassSpec band;
    bool bandpass = true;
    bool normalize = true;
    PostprocessConfig post;
};

WindowBatch preprocess(const WindowBatch& window, const ChainConfig& cfg);

/// preprocess + fold; the segmenter input for a raw window.
Array2D prepare_image(const WindowBatch& window, const FoldGeometry& geom, const ChainConfig& cfg);

/// Unfold every class mask to a time array.
TimeMaskSet unfold_masks(const MaskStack& masks, const FoldGeometry& geom);

/// Full chain for one window; detections are window-relative.
std::vector<EventDetection> detect_window(const WindowBatch& window, const FoldGeometry& geom,
                                          const Segmenter& segmenter, const ChainConfig& cfg);

/// Merges same-class detections whose spans overlap or touch; result sorted by (start, class).
/// Idempotent. Proportions of merged events are length-weighted.
std::vector<EventDetection> merge_overlapping(std::vector<EventDetection> detections);

struct StreamConfig {
    std::size_t hop = 0;  // 0: W/2
    ChainConfig chain;
    int threads = 1;
};

struct StreamStats {
    std::uint64_t samples = 0;  // per channel, consumed
    std::uint64_t windows = 0;
    double seconds = 0.0;       // wall time spent processing
    double sample_rate_hz = 100.0;

    /// Per-channel samples processed per wall-clock second.
    double samples_per_second() const { return seconds > 0.0 ? double(samples) / seconds : 0.0; }
    double realtime_factor() const { return samples_per_second() / sample_rate_hz; }
};

/// Sliding-window detector over a continuous S-channel feed. Windows start
/// every `hop` samples; detections come out in absolute sample time ordered by start.
class StreamDetector {
public:
    StreamDetector(const Segmenter& segmenter, FoldGeometry geom, StreamConfig cfg, double sample_rate_hz);

    /// Appends S x k samples. Throws DomainError if the channel count changes.
    void push(const Array2D& frames);
    /// Detections that can no longer change.
    std::vector<EventDetection> drain();
    /// Processes a last end-aligned window if the tail was not covered and returns the rest.
    std::vector<EventDetection> finish();

    const StreamStats& stats() const { return stats_; }
    std::size_t hop() const { return hop_; }

private:
    void process_ready(bool flush);
    void absorb(std::vector<EventDetection> detections, std::int64_t frontier);

    const Segmenter& segmenter_;
    FoldGeometry geom_;
    StreamConfig cfg_;
    std::size_t hop_;
    double sample_rate_hz_;

    std::vector<std::vector<double>> buffer_;  // one row per channel, trimmed as windows advance
    std::int64_t buffer_origin_ = 0;           // absolute index of buffer_[c][0]
    std::int64_t received_ = 0;
    std::int64_t next_window_ = 0;
    std::int64_t last_window_end_ = 0;
    std::vector<EventDetection> pending_;
    std::vector<EventDetection> ready_;
    StreamStats stats_;
};

/// Convenience: whole record through a StreamDetector.
std::vector<EventDetection> run_stream(const WindowBatch& record, const Segmenter& segmenter, const FoldGeometry& geom,
                                       const StreamConfig& cfg, StreamStats* stats = nullptr);

struct RawStreamHeader {
    std::size_t channels = 0;
    double sample_rate_hz = 100.0;
    double start_epoch_s = 0.0;
};

/// Parses the one-line JSON header ({"S": 8, "sample_rate": 100, "start_epoch": ...}).
RawStreamHeader read_stream_header(std::istream& in);

/// Reads up to max_frames interleaved little-endian f32 frames; returns S x k (k may be 0 at EOF).
Array2D read_stream_frames(std::istream& in, std::size_t channels, std::size_t max_frames);

}  // namespace vseg
