#pragma once

#include <cstdint>
#include <vector>

#include "vseg/dataset.hpp"

namespace vseg {

enum class Envelope { Impulsive, Emergent, Sustained };

struct SynthClassProfile {
    ClassLabel label = ClassLabel::VT;
    double duration_mean_s = 1.0;
    double duration_jitter = 0.25;  // relative half-width of the uniform duration draw
    double band_low_hz = 1.0;
    double band_high_hz = 10.0;
    Envelope envelope = Envelope::Impulsive;
    double station_decay = 0.15;  // amplitude = exp(-decay * station rank)
};

/// Reference window length for the catalogue mean durations (8192 samples at 100 Hz).
inline constexpr double kReferenceWindowSeconds = 81.92;

/// Five event profiles with mean durations 16/29/71/36/7 s scaled by
/// window_seconds / 81.92. Tremor is sustained and always fills the window.
std::vector<SynthClassProfile> default_profiles(double window_seconds);

/// Same profiles with every band edge multiplied by `factor` (a "different volcano").
std::vector<SynthClassProfile> shift_bands(std::vector<SynthClassProfile> profiles, double factor);

struct SynthConfig {
    std::size_t count_per_class = 10;
    std::size_t background_windows = 0;  // noise-only windows
    double noise_floor = 0.02;           // background sigma relative to the event peak
    std::size_t min_active_stations = 0;  // 0: half of S
    double sample_rate_hz = 100.0;
    std::string id_prefix = "syn";
    std::uint64_t seed = 0;
};

/// Envelope value at relative position u in [0, 1) of an event lasting duration_s.
double envelope_value(Envelope shape, double u, double duration_s);

/// Noise-free event waveform for one station (length = duration in samples).
std::vector<double> synth_event_signal(const SynthClassProfile& profile, double duration_s, double sample_rate_hz,
                                       std::uint64_t seed);

/// Deterministic labelled corpus: count_per_class windows per profile, then the
/// background windows. Absent stations are trailing all-zero rows.
std::vector<LabeledWindow> synth_corpus(const std::vector<SynthClassProfile>& profiles, const SynthConfig& cfg,
                                        const FoldGeometry& geom);

}  // namespace vseg
