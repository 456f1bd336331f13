#include "fmtrojan/sidechannel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>
#include <numbers>

namespace fmtrojan::sca {

namespace {

// FFTW's planner is not thread-safe.
std::mutex planner_mutex;

std::vector<double> centered_window(std::span<const double> series, std::size_t window_len,
                                    std::size_t offset, double &energy) {
    if (window_len < 2 || !std::has_single_bit(window_len))
        throw AnalysisError("spectrum window must be a power of two >= 2, got " +
                            std::to_string(window_len));
    if (offset + window_len > series.size())
        throw AnalysisError("spectrum window [" + std::to_string(offset) + ", " +
                            std::to_string(offset + window_len) + ") exceeds the series (" +
                            std::to_string(series.size()) + " samples)");
    std::vector<double> x(series.begin() + static_cast<std::ptrdiff_t>(offset),
                          series.begin() + static_cast<std::ptrdiff_t>(offset + window_len));
    double mean = 0.0;
    for (double v : x)
        mean += v;
    mean /= static_cast<double>(window_len);
    energy = 0.0;
    for (double &v : x) {
        v -= mean;
        energy += v * v;
    }
    return x;
}

Spectrum make_spectrum(std::size_t window_len, double energy) {
    Spectrum sp;
    sp.window_len = window_len;
    sp.energy = energy;
    sp.magnitudes.assign(window_len / 2 + 1, 0.0);
    sp.bin_freqs.resize(window_len / 2 + 1);
    for (std::size_t k = 0; k < sp.bin_freqs.size(); ++k)
        sp.bin_freqs[k] = static_cast<double>(k) / static_cast<double>(window_len);
    return sp;
}

} // namespace

Spectrum spectrum(std::span<const double> series, std::size_t window_len, std::size_t offset) {
    double energy = 0.0;
    std::vector<double> x = centered_window(series, window_len, offset, energy);
    Spectrum sp = make_spectrum(window_len, energy);

    const std::size_t bins = window_len / 2 + 1;
    auto *out = static_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * bins));
    if (!out)
        throw std::bad_alloc();
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(window_len), x.data(), out, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    for (std::size_t k = 0; k < bins; ++k)
        sp.magnitudes[k] = std::hypot(out[k][0], out[k][1]);
    {
        std::lock_guard lock(planner_mutex);
        fftw_destroy_plan(plan);
    }
    fftw_free(out);
    return sp;
}

std::size_t dominant_bin(const Spectrum &sp) {
    if (sp.magnitudes.size() < 2)
        throw AnalysisError("spectrum has no non-DC bins");
    std::size_t best = 1;
    for (std::size_t k = 2; k < sp.magnitudes.size(); ++k)
        if (sp.magnitudes[k] > sp.magnitudes[best] * (1.0 + 1e-9))
            best = k;
    return best;
}

std::vector<double> detect_fm_peaks(const Spectrum &sp, double threshold_ratio) {
    if (threshold_ratio <= 0.0 || threshold_ratio > 1.0)
        throw AnalysisError("peak threshold ratio must be in (0, 1]");
    const double top = sp.magnitudes.at(dominant_bin(sp));
    std::vector<double> peaks;
    if (top <= 0.0)
        return peaks;
    for (std::size_t k = 1; k < sp.magnitudes.size(); ++k)
        if (sp.magnitudes[k] >= threshold_ratio * top * (1.0 - 1e-9))
            peaks.push_back(sp.bin_freqs[k]);
    return peaks;
}

std::vector<double> to_series(std::span<const std::uint8_t> bits) {
    return {bits.begin(), bits.end()};
}

namespace reference {

Spectrum spectrum(std::span<const double> series, std::size_t window_len, std::size_t offset) {
    double energy = 0.0;
    const std::vector<double> x = centered_window(series, window_len, offset, energy);
    Spectrum sp = make_spectrum(window_len, energy);
    const double n = static_cast<double>(window_len);
    for (std::size_t k = 0; k < sp.magnitudes.size(); ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t t = 0; t < window_len; ++t) {
            // Reduce k*t mod N first so the phase stays accurate for long windows.
            const double phase = -2.0 * std::numbers::pi *
                                 static_cast<double>((k * t) % window_len) / n;
            acc += x[t] * std::polar(1.0, phase);
        }
        sp.magnitudes[k] = std::abs(acc);
    }
    return sp;
}

} // namespace reference

} // namespace fmtrojan::sca
