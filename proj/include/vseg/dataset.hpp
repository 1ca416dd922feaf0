#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vseg/core.hpp"
#include "vseg/fold.hpp"
#include "vseg/segmenter.hpp"

namespace vseg {

struct LabeledWindow {
    WindowBatch window;
    std::vector<EventAnnotation> annotations;

    /// Label of the single annotation, BG for event-free windows.
    ClassLabel label() const { return annotations.empty() ? ClassLabel::BG : annotations.front().label; }
};

/// Catalog entry in samples of the continuous trace.
struct CatalogEvent {
    std::int64_t start = 0;
    std::int64_t end = 0;  // exclusive
    ClassLabel label = ClassLabel::VT;
};

/// Offsets o at which trace[o, o+w) holds catalog event `index` (whole if it
/// fits, else the window lies inside it) and touches no other event.
std::vector<std::pair<std::int64_t, std::int64_t>> feasible_offsets(std::int64_t trace_len,
                                                                    const std::vector<CatalogEvent>& catalog,
                                                                    std::size_t index, std::int64_t w);

/// One window per catalog event with a feasible placement, offset uniform over
/// the feasible set. Events with no isolated placement are skipped.
std::vector<LabeledWindow> extract_windows(const WindowBatch& trace, const std::vector<CatalogEvent>& catalog,
                                           std::size_t w, std::uint64_t seed);

/// Class time arrays (BG = 1 outside annotations) replicated over S channels and folded.
MaskStack make_target(const LabeledWindow& lw, const FoldGeometry& geom);

/// Row c of the result is row perm[c] of the input.
LabeledWindow permute_stations(const LabeledWindow& lw, const std::vector<std::size_t>& perm);
LabeledWindow augment_shuffle_stations(const LabeledWindow& lw, std::uint64_t seed);

/// Exactly per_class windows for every event class (and for BG when the pool has
/// BG windows): surplus is subsampled without replacement, shortfalls are topped
/// up with station-shuffled copies.
std::vector<LabeledWindow> balance_classes(const std::vector<LabeledWindow>& pool, std::size_t per_class,
                                           std::uint64_t seed);

// VSGD: "VSGD", u8 version=1, u16 S, u32 W, f64 sample_rate, f64 start_epoch_seconds,
// u16 annotation count, (u32 start, u32 end, u8 class) each, then S*W f32 LE row-major.
void write_window_file(const std::filesystem::path& path, const LabeledWindow& lw);
/// Window id defaults to the file stem; station ids come from the manifest.
LabeledWindow read_window_file(const std::filesystem::path& path);

struct ManifestEntry {
    std::string window_id;
    std::string path;  // relative to the manifest directory
    ClassLabel label = ClassLabel::BG;
    std::string volcano;
    std::string split;
    std::vector<std::string> station_ids;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Loads every entry (optionally one split) with station ids and window id applied.
std::vector<LabeledWindow> load_split(const std::filesystem::path& manifest, const std::string& split = {});

/// Writes windows as <dir>/<window_id>.vsgd and returns their manifest rows.
std::vector<ManifestEntry> store_windows(const std::filesystem::path& dir, const std::vector<LabeledWindow>& windows,
                                         const std::string& volcano, const std::string& split,
                                         const std::string& subdir = "windows");

}  // namespace vseg
