#include "vseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace vseg {

std::vector<SynthClassProfile> default_profiles(double window_seconds) {
    const double scale = window_seconds / kReferenceWindowSeconds;
    return {
        {ClassLabel::VT, 16.0 * scale, 0.25, 8.5, 13.0, Envelope::Impulsive, 0.15},
        {ClassLabel::LP, 29.0 * scale, 0.25, 1.2, 2.2, Envelope::Emergent, 0.15},
        {ClassLabel::TR, 71.0 * scale, 0.25, 2.2, 3.6, Envelope::Sustained, 0.10},
        {ClassLabel::AV, 36.0 * scale, 0.25, 3.6, 5.6, Envelope::Emergent, 0.30},
        {ClassLabel::IC, 7.0 * scale, 0.25, 5.6, 8.5, Envelope::Impulsive, 0.30},
    };
}

std::vector<SynthClassProfile> shift_bands(std::vector<SynthClassProfile> profiles, double factor) {
    for (auto& p : profiles) {
        p.band_low_hz *= factor;
        p.band_high_hz *= factor;
    }
    return profiles;
}

double envelope_value(Envelope shape, double u, double duration_s) {
    if (u < 0.0 || u >= 1.0) return 0.0;
    const double t = u * duration_s;
    if (shape == Envelope::Sustained) return 0.8 + 0.2 * std::sin(2.0 * std::numbers::pi * 0.3 * t);
    // Short linear fade so the support ends sharply at the annotated end.
    const double taper = std::min(0.1, 0.1 * duration_s);
    const double fade = std::min(1.0, (1.0 - u) * duration_s / taper);
    if (shape == Envelope::Impulsive) return std::min(1.0, u / 0.04) * std::exp(-2.5 * u) * fade;
    return std::min(1.0, u / 0.35) * (1.0 - 0.6 * u) * fade;
}

std::vector<double> synth_event_signal(const SynthClassProfile& profile, double duration_s, double fs,
                                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto len = static_cast<std::size_t>(std::llround(duration_s * fs));
    const double margin = std::min(1.0 / duration_s, (profile.band_high_hz - profile.band_low_hz) / 4.0);
    std::uniform_real_distribution<double> freq(profile.band_low_hz + margin, profile.band_high_hz - margin);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> amp(0.5, 1.0);

    constexpr int kComponents = 6;
    std::array<double, kComponents> f{}, ph{}, a{};
    for (int k = 0; k < kComponents; ++k) {
        f[k] = freq(rng);
        ph[k] = phase(rng);
        a[k] = amp(rng);
    }
    std::vector<double> carrier(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
        const double t = double(i) / fs;
        for (int k = 0; k < kComponents; ++k) carrier[i] += a[k] * std::sin(2.0 * std::numbers::pi * f[k] * t + ph[k]);
    }
    double peak = 0.0;
    for (double v : carrier) peak = std::max(peak, std::abs(v));
    if (peak == 0.0) peak = 1.0;
    for (std::size_t i = 0; i < len; ++i)
        carrier[i] = carrier[i] / peak * envelope_value(profile.envelope, double(i) / double(len), duration_s);
    return carrier;
}

namespace {

LabeledWindow synth_window(const SynthClassProfile* profile, const SynthConfig& cfg, const FoldGeometry& geom,
                           std::uint64_t seed, const std::string& id) {
    std::mt19937_64 rng(seed);
    const auto s = geom.s();
    const auto w = static_cast<std::int64_t>(geom.w());
    const std::size_t min_active = cfg.min_active_stations == 0 ? std::max<std::size_t>(1, s / 2)
                                                                : std::min(cfg.min_active_stations, s);
    const auto active = std::uniform_int_distribution<std::size_t>(min_active, s)(rng);
    std::normal_distribution<double> noise(0.0, cfg.noise_floor);

    Array2D x = Array2D::Zero(static_cast<Eigen::Index>(s), w);
    for (std::size_t c = 0; c < active; ++c)
        for (std::int64_t t = 0; t < w; ++t) x(static_cast<Eigen::Index>(c), t) = noise(rng);

    std::vector<EventAnnotation> annotations;
    if (profile != nullptr) {
        const double window_s = double(w) / cfg.sample_rate_hz;
        std::int64_t start = 0, len = w;
        double duration = window_s;
        if (profile->envelope != Envelope::Sustained) {
            duration = profile->duration_mean_s *
                       (1.0 + profile->duration_jitter * std::uniform_real_distribution<double>(-1.0, 1.0)(rng));
            len = std::clamp<std::int64_t>(std::llround(duration * cfg.sample_rate_hz), 1, w);
            duration = double(len) / cfg.sample_rate_hz;
            start = std::uniform_int_distribution<std::int64_t>(0, w - len)(rng);
        }
        for (std::size_t c = 0; c < active; ++c) {
            const double gain = std::exp(-profile->station_decay * double(c));
            const auto signal = synth_event_signal(*profile, duration, cfg.sample_rate_hz, rng());
            for (std::int64_t i = 0; i < len; ++i)
                x(static_cast<Eigen::Index>(c), start + i) += gain * signal[static_cast<std::size_t>(i)];
        }
        annotations.push_back({static_cast<std::uint32_t>(start), static_cast<std::uint32_t>(start + len),
                               profile->label});
    }
    std::vector<std::string> ids(s);
    for (std::size_t c = 0; c < active; ++c) ids[c] = "ST" + std::to_string(c + 1);
    return {WindowBatch(std::move(x), std::move(ids), cfg.sample_rate_hz, id), std::move(annotations)};
}

}  // namespace

std::vector<LabeledWindow> synth_corpus(const std::vector<SynthClassProfile>& profiles, const SynthConfig& cfg,
                                        const FoldGeometry& geom) {
    std::array<bool, kNumEventClasses> covered{};
    const double window_s = double(geom.w()) / cfg.sample_rate_hz;
    for (const auto& p : profiles) {
        if (p.label == ClassLabel::BG) throw DomainError("profiles must describe event classes");
        covered[static_cast<std::size_t>(p.label)] = true;
        if (!(p.duration_mean_s > 0.0)) throw DomainError("profile duration must be positive");
        if (!(p.band_low_hz > 0.0) || !(p.band_high_hz > p.band_low_hz) ||
            !(p.band_high_hz < cfg.sample_rate_hz / 2.0))
            throw DomainError("profile band must lie within (0, Nyquist)");
        if (p.envelope != Envelope::Sustained && p.duration_mean_s * (1.0 + p.duration_jitter) > window_s)
            throw DomainError("profile " + std::string(label_name(p.label)) + " duration does not fit a " +
                              std::to_string(window_s) + " s window");
    }
    if (!std::all_of(covered.begin(), covered.end(), [](bool b) { return b; }))
        throw DomainError("profiles must cover all five event classes");
    if (!(cfg.noise_floor >= 0.0)) throw DomainError("noise floor must be non-negative");

    std::vector<LabeledWindow> out;
    for (const auto& p : profiles)
        for (std::size_t i = 0; i < cfg.count_per_class; ++i) {
            std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(label_code(p.label)) + 1, std::uint64_t{i}};
            std::uint64_t window_seed = 0;
            seq.generate(reinterpret_cast<std::uint32_t*>(&window_seed),
                         reinterpret_cast<std::uint32_t*>(&window_seed) + 2);
            out.push_back(synth_window(&p, cfg, geom, window_seed,
                                       cfg.id_prefix + "_" + std::string(label_name(p.label)) + "_" +
                                           std::to_string(i)));
        }
    for (std::size_t i = 0; i < cfg.background_windows; ++i) {
        std::seed_seq seq{cfg.seed, std::uint64_t{99}, std::uint64_t{i}};
        std::uint64_t window_seed = 0;
        seq.generate(reinterpret_cast<std::uint32_t*>(&window_seed),
                     reinterpret_cast<std::uint32_t*>(&window_seed) + 2);
        out.push_back(synth_window(nullptr, cfg, geom, window_seed, cfg.id_prefix + "_BG_" + std::to_string(i)));
    }
    return out;
}

}  // namespace vseg
