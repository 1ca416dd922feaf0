#include "vseg/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace vseg::dsp {

using cplx = std::complex<double>;

void BandpassSpec::validate(double sample_rate_hz) const {
    const double nyquist = sample_rate_hz / 2.0;
    if (!(low_hz > 0.0) || !(high_hz > low_hz) || !(high_hz < nyquist))
        throw DomainError("invalid band edges: need 0 < low (" + std::to_string(low_hz) + ") < high (" +
                          std::to_string(high_hz) + ") < Nyquist (" + std::to_string(nyquist) + ")");
    if (order < 1 || order > 12) throw DomainError("Butterworth order must be in 1..12");
}

namespace {

Biquad section_from_poles(cplx p1, cplx p2) {
    Biquad s;
    // Zeros of a bandpass after the bilinear map sit at z = +1 and z = -1.
    s.b = {1.0, 0.0, -1.0};
    s.a = {1.0, -(p1 + p2).real(), (p1 * p2).real()};
    return s;
}

cplx section_response(const Biquad& s, cplx z_inv) {
    const cplx num = s.b[0] + z_inv * (s.b[1] + z_inv * s.b[2]);
    const cplx den = s.a[0] + z_inv * (s.a[1] + z_inv * s.a[2]);
    return num / den;
}

}  // namespace

std::vector<Biquad> design_butterworth_bandpass(const BandpassSpec& spec, double fs) {
    spec.validate(fs);
    const int n = spec.order;
    const double fs2 = 2.0 * fs;
    const double w_low = fs2 * std::tan(std::numbers::pi * spec.low_hz / fs);
    const double w_high = fs2 * std::tan(std::numbers::pi * spec.high_hz / fs);
    const double bw = w_high - w_low;
    const double w0 = std::sqrt(w_low * w_high);

    std::vector<cplx> complex_poles;  // upper half plane only
    std::vector<double> real_poles;
    for (int k = 0; k < n; ++k) {
        const cplx proto = std::polar(1.0, std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n));
        const cplx half = proto * bw / 2.0;
        const cplx root = std::sqrt(half * half - w0 * w0);
        for (const cplx analog : {half + root, half - root}) {
            const cplx z = (fs2 + analog) / (fs2 - analog);
            if (std::abs(z.imag()) < 1e-12 * std::max(1.0, std::abs(z)))
                real_poles.push_back(z.real());
            else if (z.imag() > 0)
                complex_poles.push_back(z);
        }
    }
    std::sort(real_poles.begin(), real_poles.end());

    std::vector<Biquad> sections;
    for (const cplx& z : complex_poles) sections.push_back(section_from_poles(z, std::conj(z)));
    for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2)
        sections.push_back(section_from_poles(real_poles[i], real_poles[i + 1]));
    if (sections.size() != static_cast<std::size_t>(n))
        throw DomainError("bandpass design produced an unpaired pole; try an even order");

    // Unit magnitude at the (prewarped) geometric centre of the band.
    const double centre = 2.0 * std::atan(w0 / fs2);
    const cplx z_inv = std::polar(1.0, -centre);
    for (auto& s : sections) {
        const double g = 1.0 / std::abs(section_response(s, z_inv));
        for (double& b : s.b) b *= g;
    }
    return sections;
}

cplx frequency_response(const std::vector<Biquad>& sections, double freq_hz, double fs) {
    const cplx z_inv = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / fs);
    cplx h = 1.0;
    for (const auto& s : sections) h *= section_response(s, z_inv);
    return h;
}

namespace {

// Transposed direct form II, starting from the steady state for input level x0.
void sos_filter(const std::vector<Biquad>& sections, std::vector<double>& x) {
    if (x.empty()) return;
    double level = x.front();
    for (const auto& s : sections) {
        const double gain = (s.b[0] + s.b[1] + s.b[2]) / (s.a[0] + s.a[1] + s.a[2]);
        const double y0 = gain * level;
        double z1 = y0 - s.b[0] * level;
        double z2 = s.b[2] * level - s.a[2] * y0;
        for (double& v : x) {
            const double in = v;
            const double y = s.b[0] * in + z1;
            z1 = s.b[1] * in - s.a[1] * y + z2;
            z2 = s.b[2] * in - s.a[2] * y;
            v = y;
        }
        level = y0;
    }
}

}  // namespace

std::vector<double> filter_channel(const std::vector<Biquad>& sections, const std::vector<double>& x, bool zero_phase,
                                   std::size_t pad_len) {
    if (x.empty()) return {};
    pad_len = std::min(pad_len, x.size() - 1);
    // Odd reflection about both end points.
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * pad_len);
    for (std::size_t i = pad_len; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad_len; ++i) ext.push_back(2.0 * x.back() - x[x.size() - 1 - i]);

    sos_filter(sections, ext);
    if (zero_phase) {
        std::reverse(ext.begin(), ext.end());
        sos_filter(sections, ext);
        std::reverse(ext.begin(), ext.end());
    }
    return {ext.begin() + static_cast<std::ptrdiff_t>(pad_len),
            ext.begin() + static_cast<std::ptrdiff_t>(pad_len + x.size())};
}

WindowBatch bandpass(const WindowBatch& window, const BandpassSpec& spec) {
    const double fs = window.sample_rate_hz();
    const auto sections = design_butterworth_bandpass(spec, fs);
    // Three periods of the low corner, enough for the slowest pole to settle.
    const auto pad_len = static_cast<std::size_t>(std::ceil(3.0 * fs / spec.low_hz));

    Array2D out = window.samples();
    std::vector<double> row(window.length());
    for (Eigen::Index c = 0; c < out.rows(); ++c) {
        if (window.channel_is_zero(static_cast<std::size_t>(c))) continue;
        for (std::size_t t = 0; t < row.size(); ++t) row[t] = out(c, static_cast<Eigen::Index>(t));
        const auto filtered = filter_channel(sections, row, spec.zero_phase, pad_len);
        for (std::size_t t = 0; t < row.size(); ++t) out(c, static_cast<Eigen::Index>(t)) = filtered[t];
    }
    return window.with_samples(std::move(out));
}

WindowBatch normalize_max_abs(const WindowBatch& window) {
    const double peak = window.samples().cwiseAbs().maxCoeff();
    if (peak == 0.0) return window;
    return window.with_samples(window.samples() / peak);
}

}  // namespace vseg::dsp
