#include "vseg/pipeline.hpp"

#include <algorithm>
#include <string>

#include <json.hpp>

#include "vseg/binio.hpp"
#include "vseg/parallel.hpp"

namespace vseg {

WindowBatch preprocess(const WindowBatch& window, const ChainConfig& cfg) {
    WindowBatch out = cfg.bandpass ? dsp::bandpass(window, cfg.band) : window;
    return cfg.normalize ? dsp::normalize_max_abs(out) : out;
}

Array2D prepare_image(const WindowBatch& window, const FoldGeometry& geom, const ChainConfig& cfg) {
    return fold(preprocess(window, cfg).samples(), geom);
}

TimeMaskSet unfold_masks(const MaskStack& masks, const FoldGeometry& geom) {
    Array2D arrays(static_cast<Eigen::Index>(kNumClasses), static_cast<Eigen::Index>(geom.w()));
    for (std::size_t c = 0; c < kNumClasses; ++c)
        arrays.row(static_cast<Eigen::Index>(c)) = unfold_to_time(masks[c], geom);
    return TimeMaskSet(std::move(arrays));
}

std::vector<EventDetection> detect_window(const WindowBatch& window, const FoldGeometry& geom,
                                          const Segmenter& segmenter, const ChainConfig& cfg) {
    const MaskStack masks = segmenter.segment(prepare_image(window, geom, cfg));
    return run_postprocessing(unfold_masks(masks, geom), cfg.post);
}

std::vector<EventDetection> merge_overlapping(std::vector<EventDetection> detections) {
    std::stable_sort(detections.begin(), detections.end(), [](const auto& a, const auto& b) {
        if (a.assigned() != b.assigned()) return a.assigned() < b.assigned();
        return a.start_sample() < b.start_sample();
    });
    std::vector<EventDetection> merged;
    for (const auto& d : detections) {
        if (!merged.empty()) {
            auto& last = merged.back();
            if (last.assigned() == d.assigned() && d.start_sample() <= last.end_sample()) {
                const double la = double(last.length()), lb = double(d.length());
                std::array<double, kNumEventClasses> p{};
                double total = 0.0;
                for (std::size_t c = 0; c < kNumEventClasses; ++c) {
                    p[c] = (la * last.class_proportions()[c] + lb * d.class_proportions()[c]) / (la + lb);
                    total += p[c];
                }
                for (double& v : p) v /= total;
                last = EventDetection(last.start_sample(), std::max(last.end_sample(), d.end_sample()), p);
                continue;
            }
        }
        merged.push_back(d);
    }
    std::stable_sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
        if (a.start_sample() != b.start_sample()) return a.start_sample() < b.start_sample();
        return a.assigned() < b.assigned();
    });
    return merged;
}

StreamDetector::StreamDetector(const Segmenter& segmenter, FoldGeometry geom, StreamConfig cfg, double sample_rate_hz)
    : segmenter_(segmenter),
      geom_(geom),
      cfg_(std::move(cfg)),
      hop_(cfg_.hop == 0 ? std::max<std::size_t>(1, geom.w() / 2) : cfg_.hop),
      sample_rate_hz_(sample_rate_hz),
      buffer_(geom.s()) {
    if (hop_ > geom_.w()) throw DomainError("hop must not exceed the window length");
    if (!(sample_rate_hz > 0.0)) throw DomainError("sample rate must be positive");
    stats_.sample_rate_hz = sample_rate_hz;
}

void StreamDetector::push(const Array2D& frames) {
    if (static_cast<std::size_t>(frames.rows()) != geom_.s())
        throw DomainError("stream channel count changed from " + std::to_string(geom_.s()) + " to " +
                          std::to_string(frames.rows()));
    for (std::size_t c = 0; c < buffer_.size(); ++c) {
        const auto row = frames.row(static_cast<Eigen::Index>(c));
        buffer_[c].insert(buffer_[c].end(), row.begin(), row.end());
    }
    received_ += frames.cols();
    process_ready(false);
}

void StreamDetector::process_ready(bool flush) {
    const auto w = static_cast<std::int64_t>(geom_.w());
    std::vector<std::int64_t> offsets;
    while (next_window_ + w <= received_) {
        offsets.push_back(next_window_);
        next_window_ += static_cast<std::int64_t>(hop_);
    }
    if (flush && received_ >= w && last_window_end_ < received_ &&
        (offsets.empty() || offsets.back() + w < received_))
        offsets.push_back(received_ - w);
    if (offsets.empty()) return;

    const auto started = std::chrono::steady_clock::now();
    std::vector<std::vector<EventDetection>> results(offsets.size());
    parallel_for(offsets.size(), cfg_.threads, [&](std::size_t i) {
        Array2D x(static_cast<Eigen::Index>(geom_.s()), w);
        for (std::size_t c = 0; c < buffer_.size(); ++c)
            for (std::int64_t t = 0; t < w; ++t)
                x(static_cast<Eigen::Index>(c), t) = buffer_[c][static_cast<std::size_t>(offsets[i] - buffer_origin_ + t)];
        WindowBatch window(std::move(x), {}, sample_rate_hz_);
        auto dets = detect_window(window, geom_, segmenter_, cfg_.chain);
        for (auto& d : dets) d = d.shifted(offsets[i]);
        results[i] = std::move(dets);
    });
    for (std::size_t i = 0; i < results.size(); ++i)
        absorb(std::move(results[i]), i + 1 < offsets.size() ? std::min(offsets[i + 1], next_window_) : next_window_);
    stats_.windows += offsets.size();
    last_window_end_ = std::max(last_window_end_, offsets.back() + w);

    // Keep from the next window start, and always the last W samples for the flush window.
    const std::int64_t keep_from = std::min(next_window_, std::max<std::int64_t>(0, received_ - w));
    if (keep_from > buffer_origin_) {
        for (auto& row : buffer_) row.erase(row.begin(), row.begin() + (keep_from - buffer_origin_));
        buffer_origin_ = keep_from;
    }
    stats_.samples = static_cast<std::uint64_t>(last_window_end_);
    stats_.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
}

void StreamDetector::absorb(std::vector<EventDetection> detections, std::int64_t frontier) {
    pending_.insert(pending_.end(), detections.begin(), detections.end());
    pending_ = merge_overlapping(std::move(pending_));
    // Windows still to come start at or after `frontier`; a detection ending exactly
    // there could still touch one of theirs.
    std::size_t done = 0;
    while (done < pending_.size() && pending_[done].end_sample() < frontier) ++done;
    ready_.insert(ready_.end(), pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(done));
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(done));
}

std::vector<EventDetection> StreamDetector::drain() { return std::exchange(ready_, {}); }

std::vector<EventDetection> StreamDetector::finish() {
    process_ready(true);
    ready_.insert(ready_.end(), pending_.begin(), pending_.end());
    pending_.clear();
    return drain();
}

std::vector<EventDetection> run_stream(const WindowBatch& record, const Segmenter& segmenter, const FoldGeometry& geom,
                                       const StreamConfig& cfg, StreamStats* stats) {
    StreamDetector detector(segmenter, geom, cfg, record.sample_rate_hz());
    detector.push(record.samples());
    auto out = detector.finish();
    if (stats != nullptr) *stats = detector.stats();
    return out;
}

RawStreamHeader read_stream_header(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("stream: missing JSON header line");
    try {
        const auto j = nlohmann::json::parse(line);
        RawStreamHeader h;
        h.channels = j.at("S").get<std::size_t>();
        h.sample_rate_hz = j.value("sample_rate", 100.0);
        h.start_epoch_s = j.value("start_epoch", 0.0);
        if (h.channels == 0) throw FormatError("S must be positive");
        return h;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("stream: bad header: ") + e.what());
    }
}

Array2D read_stream_frames(std::istream& in, std::size_t channels, std::size_t max_frames) {
    std::string bytes(channels * max_frames * sizeof(float), '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    const std::size_t frames = got / (channels * sizeof(float));
    if (got % (channels * sizeof(float)) != 0 && in.eof())
        throw FormatError("stream: truncated frame at end of input");
    bytes.resize(frames * channels * sizeof(float));
    binio::Reader r(std::move(bytes), "stream");
    Array2D out(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(frames));
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t c = 0; c < channels; ++c)
            out(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = r.get<float>("frame");
    return out;
}

}  // namespace vseg
