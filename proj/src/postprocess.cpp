#include "vseg/postprocess.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace vseg {

namespace {
constexpr auto kBgRow = static_cast<Eigen::Index>(ClassLabel::BG);
}

TimeMaskSet::TimeMaskSet(Array2D arrays) : arrays_(std::move(arrays)) {
    if (arrays_.rows() != static_cast<Eigen::Index>(kNumClasses))
        throw DomainError("time mask set needs exactly 6 arrays");
    if (!(arrays_.array() >= 0.0).all()) throw DomainError("time mask values must be non-negative");
}

std::vector<ClassLabel> saturate(const TimeMaskSet& tm) {
    const auto& a = tm.arrays();
    std::vector<ClassLabel> out(tm.length());
    for (Eigen::Index t = 0; t < a.cols(); ++t) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < a.rows(); ++c)
            if (a(c, t) > a(best, t)) best = c;
        out[static_cast<std::size_t>(t)] = static_cast<ClassLabel>(best);
    }
    return out;
}

Array2D binary_saturation(const TimeMaskSet& tm) {
    const auto labels = saturate(tm);
    Array2D out = Array2D::Zero(static_cast<Eigen::Index>(kNumClasses), static_cast<Eigen::Index>(labels.size()));
    for (std::size_t t = 0; t < labels.size(); ++t) out(label_code(labels[t]), static_cast<Eigen::Index>(t)) = 1.0;
    return out;
}

std::vector<Span> detect_events(const Array2D& binary) {
    if (binary.rows() != static_cast<Eigen::Index>(kNumClasses)) throw DomainError("binary masks need 6 rows");
    std::vector<Span> spans;
    std::int64_t start = -1;
    const std::int64_t w = binary.cols();
    for (std::int64_t t = 0; t < w; ++t) {
        const bool in_event = binary(kBgRow, t) == 0.0;
        if (in_event && start < 0) start = t;
        if (!in_event && start >= 0) {
            spans.push_back({start, t});
            start = -1;
        }
    }
    if (start >= 0) spans.push_back({start, w});
    return spans;
}

EventDetection assign_class(const Array2D& binary, Span span) {
    if (span.start < 0 || span.end > binary.cols() || span.start >= span.end)
        throw DomainError("span lies outside the window");
    std::array<double, kNumEventClasses> counts{};
    for (std::int64_t t = span.start; t < span.end; ++t)
        for (std::size_t c = 0; c < kNumEventClasses; ++c) counts[c] += binary(static_cast<Eigen::Index>(c), t);
    double total = 0.0;
    for (double v : counts) total += v;
    if (total <= 0.0) throw DomainError("span contains no event samples");
    for (double& v : counts) v /= total;
    return EventDetection(span.start, span.end, counts);
}

std::vector<EventDetection> run_postprocessing(const TimeMaskSet& tm, const PostprocessConfig& cfg) {
    const Array2D binary = binary_saturation(tm);
    std::vector<EventDetection> events;
    for (const Span& s : detect_events(binary)) {
        EventDetection det = assign_class(binary, s);
        if (!events.empty()) {
            const auto& last = events.back();
            if (last.assigned() == det.assigned() && det.start_sample() - last.end_sample() < cfg.merge_gap) {
                det = assign_class(binary, {last.start_sample(), det.end_sample()});
                events.back() = det;
                continue;
            }
        }
        events.push_back(det);
    }
    std::erase_if(events, [&](const EventDetection& e) { return e.length() < cfg.min_len; });
    return events;
}

std::string format_utc(double epoch_seconds) {
    const double whole = std::floor(epoch_seconds);
    auto millis = static_cast<int>(std::llround((epoch_seconds - whole) * 1000.0));
    auto secs = static_cast<std::time_t>(whole);
    if (millis == 1000) {
        millis = 0;
        ++secs;
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << millis << 'Z';
    return out.str();
}

namespace {

nlohmann::ordered_json record_json(const DetectionRecord& r) {
    const auto& d = r.detection;
    nlohmann::ordered_json j;
    j["window_id"] = r.window_id;
    j["start_sample"] = d.start_sample();
    j["end_sample"] = d.end_sample();
    if (r.start_epoch_s != 0.0) {
        j["start_utc"] = format_utc(r.start_epoch_s + static_cast<double>(d.start_sample()) / r.sample_rate_hz);
        j["end_utc"] = format_utc(r.start_epoch_s + static_cast<double>(d.end_sample()) / r.sample_rate_hz);
    }
    j["class"] = label_name(d.assigned());
    j["proportions"] = d.class_proportions();
    return j;
}

}  // namespace

void write_jsonl(std::ostream& out, const DetectionRecord& record) { out << record_json(record).dump() << '\n'; }

void write_csv_header(std::ostream& out) {
    out << "window_id,start_sample,end_sample,start_utc,end_utc,class,p_VT,p_LP,p_TR,p_AV,p_IC\n";
}

void write_csv(std::ostream& out, const DetectionRecord& record) {
    const auto j = record_json(record);
    out << record.window_id << ',' << record.detection.start_sample() << ',' << record.detection.end_sample() << ','
        << j.value("start_utc", "") << ',' << j.value("end_utc", "") << ',' << label_name(record.detection.assigned());
    out << std::setprecision(17);
    for (double p : record.detection.class_proportions()) out << ',' << p;
    out << '\n';
}

}  // namespace vseg
