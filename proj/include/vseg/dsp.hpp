#pragma once

#include <array>
#include <complex>
#include <vector>

#include "vseg/core.hpp"

namespace vseg::dsp {

struct BandpassSpec {
    double low_hz = 1.0;
    double high_hz = 15.0;
    int order = 4;
    bool zero_phase = true;

    /// Throws DomainError unless 0 < low < high < fs/2 and order is in 1..12.
    void validate(double sample_rate_hz) const;
};

/// Normalized biquad, a0 == 1.
struct Biquad {
    std::array<double, 3> b{};
    std::array<double, 3> a{1.0, 0.0, 0.0};
};

/// Digital Butterworth bandpass as `order` second-order sections
/// (bilinear transform with prewarped band edges, unit gain at band centre).
std::vector<Biquad> design_butterworth_bandpass(const BandpassSpec& spec, double sample_rate_hz);

/// Complex response of a section cascade at frequency f.
std::complex<double> frequency_response(const std::vector<Biquad>& sections, double freq_hz, double sample_rate_hz);

/// Filters each non-zero channel independently; zero channels stay zero.
WindowBatch bandpass(const WindowBatch& window, const BandpassSpec& spec);

/// Single-channel kernel behind bandpass().
std::vector<double> filter_channel(const std::vector<Biquad>& sections, const std::vector<double>& x, bool zero_phase,
                                   std::size_t pad_len);

/// Divides every sample by the global max |amplitude|; all-zero input is returned unchanged.
WindowBatch normalize_max_abs(const WindowBatch& window);

}  // namespace vseg::dsp
