#include "vseg/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include <json.hpp>

#include "vseg/binio.hpp"

namespace vseg {

std::vector<std::pair<std::int64_t, std::int64_t>> feasible_offsets(std::int64_t trace_len,
                                                                    const std::vector<CatalogEvent>& catalog,
                                                                    std::size_t index, std::int64_t w) {
    const auto& ev = catalog.at(index);
    std::int64_t lo = 0, hi = trace_len - w;
    if (ev.end - ev.start <= w) {
        lo = std::max(lo, ev.end - w);
        hi = std::min(hi, ev.start);
    } else {
        lo = std::max(lo, ev.start);
        hi = std::min(hi, ev.end - w);
    }
    std::vector<std::pair<std::int64_t, std::int64_t>> ranges;  // inclusive
    if (lo > hi) return ranges;
    ranges.emplace_back(lo, hi);
    for (std::size_t j = 0; j < catalog.size(); ++j) {
        if (j == index) continue;
        // The window [o, o+w) meets event j iff o in [start - w + 1, end - 1].
        const std::int64_t bad_lo = catalog[j].start - w + 1, bad_hi = catalog[j].end - 1;
        std::vector<std::pair<std::int64_t, std::int64_t>> next;
        for (auto [a, b] : ranges) {
            if (bad_hi < a || bad_lo > b) {
                next.emplace_back(a, b);
                continue;
            }
            if (a < bad_lo) next.emplace_back(a, bad_lo - 1);
            if (bad_hi < b) next.emplace_back(bad_hi + 1, b);
        }
        ranges = std::move(next);
        if (ranges.empty()) break;
    }
    return ranges;
}

std::vector<LabeledWindow> extract_windows(const WindowBatch& trace, const std::vector<CatalogEvent>& catalog,
                                           std::size_t w, std::uint64_t seed) {
    const auto trace_len = static_cast<std::int64_t>(trace.length());
    const auto win = static_cast<std::int64_t>(w);
    for (const auto& ev : catalog)
        if (ev.start < 0 || ev.end > trace_len || ev.start >= ev.end || ev.label == ClassLabel::BG)
            throw DomainError("catalog event outside the trace or malformed");

    std::mt19937_64 rng(seed);
    std::vector<LabeledWindow> out;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        const auto ranges = feasible_offsets(trace_len, catalog, i, win);
        std::int64_t total = 0;
        for (auto [a, b] : ranges) total += b - a + 1;
        if (total == 0) continue;
        std::int64_t pick = std::uniform_int_distribution<std::int64_t>(0, total - 1)(rng);
        std::int64_t offset = 0;
        for (auto [a, b] : ranges) {
            if (pick <= b - a) {
                offset = a + pick;
                break;
            }
            pick -= b - a + 1;
        }
        const auto& ev = catalog[i];
        Array2D samples = trace.samples().middleCols(offset, win);
        const double epoch =
            trace.start_epoch_s() == 0.0 ? 0.0 : trace.start_epoch_s() + double(offset) / trace.sample_rate_hz();
        LabeledWindow lw{WindowBatch(std::move(samples), trace.station_ids(), trace.sample_rate_hz(),
                                     trace.window_id() + "_" + std::to_string(i), epoch),
                         {EventAnnotation{static_cast<std::uint32_t>(std::max<std::int64_t>(ev.start - offset, 0)),
                                          static_cast<std::uint32_t>(std::min<std::int64_t>(ev.end - offset, win)),
                                          ev.label}}};
        out.push_back(std::move(lw));
    }
    return out;
}

MaskStack make_target(const LabeledWindow& lw, const FoldGeometry& geom) {
    if (lw.window.stations() != geom.s() || lw.window.length() != geom.w())
        throw DomainError("window shape does not match the fold geometry");
    validate_annotations(lw.annotations, geom.w());
    const auto s = static_cast<Eigen::Index>(geom.s());
    const auto w = static_cast<Eigen::Index>(geom.w());
    std::array<Array2D, kNumClasses> planes;
    Array2D bg = Array2D::Ones(s, w);
    for (std::size_t c = 0; c < kNumEventClasses; ++c) {
        Array2D rows = Array2D::Zero(s, w);
        for (const auto& a : lw.annotations)
            if (static_cast<std::size_t>(a.label) == c) {
                rows.middleCols(a.start_sample, a.length()).setOnes();
                bg.middleCols(a.start_sample, a.length()).setZero();
            }
        planes[c] = fold(rows, geom);
    }
    planes[static_cast<std::size_t>(ClassLabel::BG)] = fold(bg, geom);
    return MaskStack(std::move(planes));
}

LabeledWindow permute_stations(const LabeledWindow& lw, const std::vector<std::size_t>& perm) {
    const auto s = lw.window.stations();
    if (perm.size() != s) throw DomainError("permutation size does not match the station count");
    std::vector<bool> seen(s, false);
    Array2D samples(lw.window.samples().rows(), lw.window.samples().cols());
    std::vector<std::string> ids(s);
    for (std::size_t c = 0; c < s; ++c) {
        if (perm[c] >= s || seen[perm[c]]) throw DomainError("not a permutation");
        seen[perm[c]] = true;
        samples.row(static_cast<Eigen::Index>(c)) = lw.window.samples().row(static_cast<Eigen::Index>(perm[c]));
        ids[c] = lw.window.station_ids()[perm[c]];
    }
    return {WindowBatch(std::move(samples), std::move(ids), lw.window.sample_rate_hz(), lw.window.window_id(),
                        lw.window.start_epoch_s()),
            lw.annotations};
}

LabeledWindow augment_shuffle_stations(const LabeledWindow& lw, std::uint64_t seed) {
    std::vector<std::size_t> perm(lw.window.stations());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    return permute_stations(lw, perm);
}

std::vector<LabeledWindow> balance_classes(const std::vector<LabeledWindow>& pool, std::size_t per_class,
                                           std::uint64_t seed) {
    std::map<ClassLabel, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < pool.size(); ++i) by_class[pool[i].label()].push_back(i);
    for (std::size_t c = 0; c < kNumEventClasses; ++c)
        if (by_class[static_cast<ClassLabel>(c)].empty())
            throw DomainError("class " + std::string(label_name(static_cast<ClassLabel>(c))) +
                              " has no windows to balance");
    if (by_class[ClassLabel::BG].empty()) by_class.erase(ClassLabel::BG);

    std::mt19937_64 rng(seed);
    std::vector<LabeledWindow> out;
    for (auto& [label, members] : by_class) {
        if (members.size() >= per_class) {
            std::shuffle(members.begin(), members.end(), rng);
            members.resize(per_class);
            std::sort(members.begin(), members.end());
            for (auto i : members) out.push_back(pool[i]);
            continue;
        }
        for (auto i : members) out.push_back(pool[i]);
        std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
        for (std::size_t k = 0; k < per_class - members.size(); ++k) {
            const auto& source = pool[members[pick(rng)]];
            auto copy = augment_shuffle_stations(source, rng());
            copy.window = copy.window.with_id(source.window.window_id() + "_aug" + std::to_string(k));
            out.push_back(std::move(copy));
        }
    }
    return out;
}

namespace {
constexpr std::string_view kWindowMagic = "VSGD";
constexpr std::uint8_t kWindowVersion = 1;
}  // namespace

void write_window_file(const std::filesystem::path& path, const LabeledWindow& lw) {
    const auto& win = lw.window;
    validate_annotations(lw.annotations, win.length());
    binio::Writer w;
    w.put_bytes(kWindowMagic);
    w.put<std::uint8_t>(kWindowVersion);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(win.stations()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(win.length()));
    w.put<double>(win.sample_rate_hz());
    w.put<double>(win.start_epoch_s());
    w.put<std::uint16_t>(static_cast<std::uint16_t>(lw.annotations.size()));
    for (const auto& a : lw.annotations) {
        w.put<std::uint32_t>(a.start_sample);
        w.put<std::uint32_t>(a.end_sample);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(a.label));
    }
    const auto& x = win.samples();
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c) w.put<float>(static_cast<float>(x(r, c)));
    w.save(path);
}

LabeledWindow read_window_file(const std::filesystem::path& path) {
    binio::Reader r(binio::read_file(path), path.string());
    if (r.get_bytes(4, "magic") != kWindowMagic) r.fail("not a VSGD file");
    const auto version = r.get<std::uint8_t>("version");
    if (version != kWindowVersion) r.fail("unsupported VSGD version " + std::to_string(version));
    const auto s = r.get<std::uint16_t>("S");
    const auto w = r.get<std::uint32_t>("W");
    const auto rate = r.get<double>("sample_rate");
    const auto epoch = r.get<double>("start_epoch_seconds");
    const auto count = r.get<std::uint16_t>("annotation count");
    if (s == 0 || w == 0) r.fail("empty window shape");
    std::vector<EventAnnotation> annotations;
    for (std::uint16_t i = 0; i < count; ++i) {
        EventAnnotation a;
        a.start_sample = r.get<std::uint32_t>("annotation start");
        a.end_sample = r.get<std::uint32_t>("annotation end");
        const auto code = r.get<std::uint8_t>("annotation class");
        if (code >= kNumClasses) r.fail("annotation class code " + std::to_string(code) + " out of range");
        a.label = static_cast<ClassLabel>(code);
        annotations.push_back(a);
    }
    try {
        validate_annotations(annotations, w);
    } catch (const DomainError& e) {
        r.fail(e.what());
    }
    const std::size_t payload = std::size_t{s} * w * sizeof(float);
    r.require(payload, "samples");
    if (r.remaining() != payload) r.fail("trailing bytes after samples (shape mismatch)");
    Array2D x(s, w);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = r.get<float>("sample");
    try {
        return {WindowBatch(std::move(x), {}, rate, path.stem().string(), epoch), std::move(annotations)};
    } catch (const DomainError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        j["window_id"] = e.window_id;
        j["path"] = e.path;
        j["class"] = label_name(e.label);
        j["volcano"] = e.volcano;
        j["split"] = e.split;
        j["station_ids"] = e.station_ids;
        out << j.dump() << '\n';
    }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open manifest: " + path.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ManifestEntry e;
            e.window_id = j.at("window_id").get<std::string>();
            e.path = j.at("path").get<std::string>();
            e.label = label_from_name(j.at("class").get<std::string>());
            e.volcano = j.value("volcano", "");
            e.split = j.value("split", "");
            e.station_ids = j.value("station_ids", std::vector<std::string>{});
            entries.push_back(std::move(e));
        } catch (const std::exception& ex) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return entries;
}

std::vector<LabeledWindow> load_split(const std::filesystem::path& manifest, const std::string& split) {
    const auto base = manifest.parent_path();
    std::vector<LabeledWindow> out;
    for (const auto& e : read_manifest(manifest)) {
        if (!split.empty() && e.split != split) continue;
        auto lw = read_window_file(base / e.path);
        auto ids = e.station_ids;
        if (ids.empty()) ids.resize(lw.window.stations());
        lw.window = WindowBatch(lw.window.samples(), std::move(ids), lw.window.sample_rate_hz(), e.window_id,
                                lw.window.start_epoch_s());
        out.push_back(std::move(lw));
    }
    return out;
}

std::vector<ManifestEntry> store_windows(const std::filesystem::path& dir, const std::vector<LabeledWindow>& windows,
                                         const std::string& volcano, const std::string& split,
                                         const std::string& subdir) {
    std::filesystem::create_directories(dir / subdir);
    std::vector<ManifestEntry> entries;
    for (const auto& lw : windows) {
        const std::string rel = subdir + "/" + lw.window.window_id() + ".vsgd";
        write_window_file(dir / rel, lw);
        entries.push_back({lw.window.window_id(), rel, lw.label(), volcano, split, lw.window.station_ids()});
    }
    return entries;
}

}  // namespace vseg
