#include "fmtrojan/sidechannel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace fmtrojan::sca {

double PowerWeights::of(DriverKind kind) const {
    switch (kind) {
    case DriverKind::Lut: return lut;
    case DriverKind::FlipFlop: return ff;
    case DriverKind::Port: return port;
    case DriverKind::Constant: return constant;
    }
    return 0.0;
}

namespace {

void check_inputs(const Trace &trace, std::span<const NetId> scope, Window window) {
    if (scope.empty())
        throw AnalysisError("power scope is empty");
    for (NetId n : scope)
        if (!n.valid() || n.index >= trace.net_count())
            throw AnalysisError("power scope references an unknown net");
    if (window.empty() || window.end > trace.cycles())
        throw AnalysisError("power window is empty or exceeds the trace");
}

} // namespace

PowerTrace power_trace(const Trace &trace, std::span<const NetId> scope, const PowerWeights &weights) {
    return power_trace(trace, scope, weights, Window{0, trace.cycles()});
}

PowerTrace power_trace(const Trace &trace, std::span<const NetId> scope, const PowerWeights &weights,
                       Window window) {
    check_inputs(trace, scope, window);
    PowerTrace pt;
    pt.first_cycle = window.begin;
    pt.scope_size = scope.size();
    pt.dynamic.assign(window.size(), 0.0);
    pt.leakage.assign(window.size(), 0.0);

    std::vector<double> w(scope.size());
    for (std::size_t i = 0; i < scope.size(); ++i)
        w[i] = weights.of(trace.net(scope[i]).driver);

    // Each thread owns a block of 64-cycle words, so accumulation is race-free.
    const std::size_t first_word = window.begin / 64, last_word = (window.end - 1) / 64;
    const auto words = static_cast<std::ptrdiff_t>(last_word - first_word + 1);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < words; ++k) {
        const std::size_t word = first_word + static_cast<std::size_t>(k);
        const std::size_t base = word * 64;
        for (std::size_t i = 0; i < scope.size(); ++i) {
            const auto row = trace.row(scope[i]);
            const std::uint64_t cur = row[word];
            // Bit t holds the value at cycle t-1 (cycle 0 compares with itself).
            const std::uint64_t prev = (cur << 1) | (word > 0 ? row[word - 1] >> 63 : cur & 1u);
            std::uint64_t toggles = cur ^ prev;
            std::uint64_t high = cur;
            while (toggles) {
                const unsigned b = static_cast<unsigned>(std::countr_zero(toggles));
                toggles &= toggles - 1;
                const std::size_t t = base + b;
                if (t >= window.begin && t < window.end)
                    pt.dynamic[t - window.begin] += w[i];
            }
            while (high) {
                const unsigned b = static_cast<unsigned>(std::countr_zero(high));
                high &= high - 1;
                const std::size_t t = base + b;
                if (t >= window.begin && t < window.end)
                    pt.leakage[t - window.begin] += w[i];
            }
        }
    }
    return pt;
}

SeriesStats series_stats(std::span<const double> series) {
    SeriesStats s;
    if (series.empty())
        return s;
    double sum = 0.0;
    s.min = s.max = series[0];
    for (double v : series) {
        sum += v;
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
    }
    s.mean = sum / static_cast<double>(series.size());
    double acc = 0.0;
    for (double v : series)
        acc += (v - s.mean) * (v - s.mean);
    s.variance = acc / static_cast<double>(series.size());
    return s;
}

PowerStats power_stats(const PowerTrace &pt, unsigned period) {
    if (period == 0)
        throw AnalysisError("period must be positive");
    if (pt.size() % period != 0)
        throw AnalysisError("period " + std::to_string(period) + " does not divide the trace length " +
                            std::to_string(pt.size()));
    PowerStats st;
    st.period = period;
    st.dynamic = series_stats(pt.dynamic);
    st.leakage = series_stats(pt.leakage);
    for (std::size_t p = 0; p + period <= pt.size(); p += period) {
        double d = 0.0, l = 0.0;
        for (std::size_t t = p; t < p + period; ++t) {
            d += pt.dynamic[t];
            l += pt.leakage[t];
        }
        st.dynamic_period_sums.push_back(d);
        st.leakage_period_sums.push_back(l);
    }
    return st;
}

std::vector<double> period_sums(const PowerTrace &pt, unsigned length, std::size_t start_cycle,
                                std::size_t n_bits) {
    if (start_cycle < pt.first_cycle ||
        start_cycle - pt.first_cycle + n_bits * length > pt.size())
        throw AnalysisError("power trace does not cover " + std::to_string(n_bits) +
                            " periods from cycle " + std::to_string(start_cycle));
    std::vector<double> sums(n_bits, 0.0);
    const std::size_t base = start_cycle - pt.first_cycle;
    for (std::size_t k = 0; k < n_bits; ++k)
        for (std::size_t t = 0; t < length; ++t)
            sums[k] += pt.dynamic[base + k * length + t];
    return sums;
}

std::vector<std::uint8_t> attacker_demodulate(const PowerTrace &pt, unsigned length,
                                              std::size_t start_cycle, std::size_t n_bits,
                                              double threshold) {
    const auto sums = period_sums(pt, length, start_cycle, n_bits);
    std::vector<std::uint8_t> bits(n_bits);
    for (std::size_t k = 0; k < n_bits; ++k)
        bits[k] = sums[k] > threshold;
    return bits;
}

double bit_accuracy(std::span<const std::uint8_t> got, std::span<const std::uint8_t> want) {
    if (got.size() != want.size() || got.empty())
        throw AnalysisError("bit strings must be non-empty and equally long");
    std::size_t ok = 0;
    for (std::size_t i = 0; i < got.size(); ++i)
        ok += (got[i] != 0) == (want[i] != 0);
    return static_cast<double>(ok) / static_cast<double>(got.size());
}

double mode_threshold(unsigned length, bool mode2) {
    // Steady-state per-period stage-net toggles of one FM CSR: 2L (bit 0) or 4L (bit 1).
    const double mid = 3.0 * length;
    return mode2 ? 2.0 * mid : mid;
}

namespace reference {

PowerTrace power_trace(const Trace &trace, std::span<const NetId> scope, const PowerWeights &weights,
                       Window window) {
    check_inputs(trace, scope, window);
    PowerTrace pt;
    pt.first_cycle = window.begin;
    pt.scope_size = scope.size();
    for (std::size_t t = window.begin; t < window.end; ++t) {
        double dyn = 0.0, leak = 0.0;
        for (NetId n : scope) {
            const double w = weights.of(trace.net(n).driver);
            if (t > 0 && trace.at(n, t) != trace.at(n, t - 1))
                dyn += w;
            if (trace.at(n, t))
                leak += w;
        }
        pt.dynamic.push_back(dyn);
        pt.leakage.push_back(leak);
    }
    return pt;
}

} // namespace reference

} // namespace fmtrojan::sca
