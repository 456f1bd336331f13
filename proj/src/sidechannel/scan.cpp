#include "fmtrojan/sidechannel.hpp"

#include <bit>

namespace fmtrojan::sca {

namespace {

void check_window(const Trace &trace, Window window) {
    if (window.empty())
        throw AnalysisError("analysis window is empty");
    if (window.end > trace.cycles())
        throw AnalysisError("analysis window [" + std::to_string(window.begin) + ", " +
                            std::to_string(window.end) + ") exceeds the trace (" +
                            std::to_string(trace.cycles()) + " cycles)");
}

void check_scope(const Trace &trace, std::span<const NetId> scope) {
    for (NetId n : scope)
        if (!n.valid() || n.index >= trace.net_count())
            throw AnalysisError("scope references an unknown net");
}

// Mask of window bits inside word w.
std::uint64_t word_mask(Window window, std::size_t w) {
    const std::size_t lo = w * 64, hi = lo + 64;
    const std::size_t b = std::max(window.begin, lo), e = std::min(window.end, hi);
    if (b >= e)
        return 0;
    const unsigned width = static_cast<unsigned>(e - b);
    const std::uint64_t ones = width == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
    return ones << (b - lo);
}

} // namespace

std::vector<NetId> default_scope(const Trace &trace) {
    std::vector<NetId> scope;
    for (std::size_t i = 0; i < trace.net_count(); ++i) {
        const DriverKind k = trace.nets()[i].driver;
        if (k == DriverKind::Lut || k == DriverKind::FlipFlop)
            scope.emplace_back(static_cast<std::uint32_t>(i));
    }
    return scope;
}

UciReport uci_scan(const Trace &trace, Window window) {
    return uci_scan(trace, window, default_scope(trace));
}

UciReport uci_scan(const Trace &trace, Window window, std::span<const NetId> scope) {
    check_window(trace, window);
    check_scope(trace, scope);
    const std::size_t first_word = window.begin / 64, last_word = (window.end - 1) / 64;
    const auto n = static_cast<std::ptrdiff_t>(scope.size());
    std::vector<std::size_t> ones(scope.size(), 0);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto row = trace.row(scope[i]);
        std::size_t count = 0;
        for (std::size_t w = first_word; w <= last_word; ++w)
            count += std::popcount(row[w] & word_mask(window, w));
        ones[i] = count;
    }

    UciReport report;
    report.window = window;
    report.scope.assign(scope.begin(), scope.end());
    report.duty_cycles.resize(scope.size());
    const double len = static_cast<double>(window.size());
    for (std::size_t i = 0; i < scope.size(); ++i) {
        report.duty_cycles[i] = static_cast<double>(ones[i]) / len;
        if (ones[i] == 0 || ones[i] == window.size()) {
            report.constant_nets.push_back({scope[i], ones[i] != 0});
            report.suspicious.push_back(trace.net(scope[i]).name);
        }
    }
    return report;
}

PairReport pair_scan(const Trace &trace, Window window) {
    return pair_scan(trace, window, default_scope(trace));
}

PairReport pair_scan(const Trace &trace, Window window, std::span<const NetId> scope) {
    check_window(trace, window);
    check_scope(trace, scope);
    const std::size_t first_word = window.begin / 64, last_word = (window.end - 1) / 64;
    const auto n = static_cast<std::ptrdiff_t>(scope.size());
    std::vector<std::vector<std::pair<NetId, NetId>>> equal(scope.size()), compl_(scope.size());

#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto a = trace.row(scope[i]);
        for (std::ptrdiff_t j = i + 1; j < n; ++j) {
            const auto b = trace.row(scope[j]);
            bool eq = true, cp = true;
            for (std::size_t w = first_word; w <= last_word && (eq || cp); ++w) {
                const std::uint64_t m = word_mask(window, w);
                const std::uint64_t diff = (a[w] ^ b[w]) & m;
                eq = eq && diff == 0;
                cp = cp && diff == m;
            }
            auto ordered = scope[i] < scope[j] ? std::pair{scope[i], scope[j]} : std::pair{scope[j], scope[i]};
            if (eq)
                equal[i].push_back(ordered);
            else if (cp)
                compl_[i].push_back(ordered);
        }
    }

    PairReport report;
    report.window = window;
    for (std::size_t i = 0; i < scope.size(); ++i) {
        report.equal_pairs.insert(report.equal_pairs.end(), equal[i].begin(), equal[i].end());
        report.complement_pairs.insert(report.complement_pairs.end(), compl_[i].begin(), compl_[i].end());
    }
    return report;
}

namespace reference {

UciReport uci_scan(const Trace &trace, Window window, std::span<const NetId> scope) {
    check_window(trace, window);
    UciReport report;
    report.window = window;
    report.scope.assign(scope.begin(), scope.end());
    for (NetId net : scope) {
        std::size_t ones = 0;
        for (std::size_t t = window.begin; t < window.end; ++t)
            ones += trace.at(net, t);
        report.duty_cycles.push_back(static_cast<double>(ones) / static_cast<double>(window.size()));
        bool constant = true;
        for (std::size_t t = window.begin + 1; t < window.end; ++t)
            if (trace.at(net, t) != trace.at(net, window.begin))
                constant = false;
        if (constant) {
            report.constant_nets.push_back({net, trace.at(net, window.begin)});
            report.suspicious.push_back(trace.net(net).name);
        }
    }
    return report;
}

PairReport pair_scan(const Trace &trace, Window window, std::span<const NetId> scope) {
    check_window(trace, window);
    PairReport report;
    report.window = window;
    for (std::size_t i = 0; i < scope.size(); ++i) {
        for (std::size_t j = i + 1; j < scope.size(); ++j) {
            bool eq = true, cp = true;
            for (std::size_t t = window.begin; t < window.end; ++t) {
                const bool x = trace.at(scope[i], t), y = trace.at(scope[j], t);
                eq = eq && x == y;
                cp = cp && x != y;
            }
            auto ordered = scope[i] < scope[j] ? std::pair{scope[i], scope[j]} : std::pair{scope[j], scope[i]};
            if (eq)
                report.equal_pairs.push_back(ordered);
            else if (cp)
                report.complement_pairs.push_back(ordered);
        }
    }
    return report;
}

} // namespace reference

} // namespace fmtrojan::sca
