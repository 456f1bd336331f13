#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include <algorithm>
#include <cmath>

using namespace fmtrojan;
using namespace testsupport;
using trojan::PayloadMode;

namespace {

constexpr unsigned L8 = 8;

bool contains(const std::vector<double> &v, double x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

template <class T>
bool has_pair(const std::vector<std::pair<NetId, NetId>> &pairs, T x, T y) {
    const auto p = x < y ? std::pair{x, y} : std::pair{y, x};
    return std::find(pairs.begin(), pairs.end(), p) != pairs.end();
}

// Two converters held at 0 and 1 after reset.
struct TwoTaps {
    Netlist nl;
    fm::FmSync sync;
    fm::FmSignal zero, one;
    Trace tr;
    explicit TwoTaps(unsigned L, std::size_t n) {
        sync = fm::build_sync(nl, L);
        zero = fm::build_std_to_fm(nl, nl.add_input("Z"), sync);
        one = fm::build_std_to_fm(nl, nl.add_input("O"), sync);
        tr = simulate(nl, held(n, {{"Z", false}, {"O", true}}), n);
    }
};

} // namespace

TEST_CASE("uci scan examples") {
    SUBCASE("FM OR gate has no constant nets") {
        Netlist nl;
        const auto sync = fm::build_sync(nl, L8);
        const fm::FmSignal ins[] = {fm::build_std_to_fm(nl, nl.add_input("X"), sync),
                                    fm::build_std_to_fm(nl, nl.add_input("Y"), sync)};
        fm::build_fm_gate(nl, TruthTable::or_n(2), ins, sync);
        for (unsigned v = 0; v < 4; ++v) {
            const Trace tr = simulate(nl, held(12 * L8, {{"X", v & 1u}, {"Y", (v & 2u) != 0}}), 12 * L8);
            const auto rep = sca::uci_scan(tr, Window{L8 + 1, 10 * L8});
            CHECK(rep.suspicious.empty());
            CHECK(rep.constant_nets.empty());
        }
    }
    SUBCASE("buffer of a constant input is flagged with its value") {
        Netlist nl;
        const NetId buf = nl.add_lut({nl.add_input("a")}, TruthTable::identity(), "buf");
        Stimulus s(50);
        s.hold("a", true);
        const Trace tr = simulate(nl, s, 50);
        const auto rep = sca::uci_scan(tr, Window{0, 50});
        REQUIRE(rep.constant_nets.size() == 1);
        CHECK(rep.constant_nets[0].net == buf);
        CHECK(rep.constant_nets[0].value);
        CHECK(rep.suspicious == std::vector<std::string>{"buf"});
    }
    SUBCASE("default scope leaves out ports and ties") {
        Netlist nl;
        const NetId a = nl.add_input("a");
        nl.add_lut({a, nl.constant(true)}, TruthTable::and_n(2), "g");
        Stimulus s(10);
        s.hold("a", false);
        const Trace tr = simulate(nl, s, 10);
        const auto scope = sca::default_scope(tr);
        CHECK(scope.size() == 1);
        CHECK_THROWS_AS(sca::uci_scan(tr, Window{4, 4}), sca::AnalysisError);
        CHECK_THROWS_AS(sca::uci_scan(tr, Window{4, 11}), sca::AnalysisError);
    }
}

TEST_CASE("uci scan agrees with a brute-force scan") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const Trace tr = synthetic_trace(64, 300, seed);
        const auto scope = all_nets(64);
        for (Window w : {Window{0, 300}, Window{3, 70}, Window{64, 128}, Window{100, 101}}) {
            const auto rep = sca::uci_scan(tr, w, scope);
            std::vector<NetId> flagged;
            for (const auto &c : rep.constant_nets) {
                flagged.push_back(c.net);
                CHECK(tr.at(c.net, w.begin) == c.value);
            }
            for (std::size_t i = 0; i < scope.size(); ++i) {
                bool constant = true;
                std::size_t ones = 0;
                for (std::size_t t = w.begin; t < w.end; ++t) {
                    constant = constant && tr.at(scope[i], t) == tr.at(scope[i], w.begin);
                    ones += tr.at(scope[i], t);
                }
                const double duty = static_cast<double>(ones) / w.size();
                CHECK(rep.duty_cycles[i] == doctest::Approx(duty).epsilon(1e-12));
                CHECK(constant == (std::find(flagged.begin(), flagged.end(), scope[i]) != flagged.end()));
                CHECK(constant == (duty == 0.0 || duty == 1.0));
            }
            const auto ref = sca::reference::uci_scan(tr, w, scope);
            CHECK(ref.suspicious == rep.suspicious);
        }
    }
}

TEST_CASE("pair scan examples") {
    Netlist nl;
    const auto sync = fm::build_sync(nl, L8);
    const auto x = fm::build_std_to_fm(nl, nl.add_input("X"), sync);
    const auto y = fm::build_std_to_fm(nl, nl.add_input("Y"), sync);
    const NetId copy = nl.add_lut({x.data_tap}, TruthTable::identity(), "copy");
    const auto quad = trojan::build_concealed(nl, x, sync);
    const std::size_t n = 20 * L8;
    const Trace tr = simulate(nl, held(n, {{"X", false}, {"Y", true}}), n);
    const auto rep = sca::pair_scan(tr, Window{2 * L8 + 1, n});
    CHECK(has_pair(rep.equal_pairs, x.data_tap, copy));
    for (unsigned st = 1; st <= L8; ++st)
        CHECK(has_pair(rep.complement_pairs, quad.a.csr.stage(st), quad.c.stage(st)));
    // different bits: neither relation between the two data taps
    CHECK_FALSE(has_pair(rep.equal_pairs, x.data_tap, y.data_tap));
    CHECK_FALSE(has_pair(rep.complement_pairs, x.data_tap, y.data_tap));
    for (const auto &[a, b] : rep.equal_pairs)
        CHECK(a < b);
}

TEST_CASE("pair scan agrees with a brute-force scan") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const Trace tr = synthetic_trace(64, 200, seed + 10);
        const auto scope = all_nets(64);
        const Window w{5, 190};
        const auto rep = sca::pair_scan(tr, w, scope);
        for (std::uint32_t i = 0; i < 64; ++i)
            for (std::uint32_t j = i + 1; j < 64; ++j) {
                bool eq = true, comp = true;
                for (std::size_t t = w.begin; t < w.end; ++t) {
                    eq = eq && tr.at(NetId{i}, t) == tr.at(NetId{j}, t);
                    comp = comp && tr.at(NetId{i}, t) != tr.at(NetId{j}, t);
                }
                CHECK(eq == has_pair(rep.equal_pairs, NetId{i}, NetId{j}));
                CHECK(comp == has_pair(rep.complement_pairs, NetId{i}, NetId{j}));
            }
        const auto ref = sca::reference::pair_scan(tr, w, scope);
        CHECK(ref.equal_pairs == rep.equal_pairs);
        CHECK(ref.complement_pairs == rep.complement_pairs);
    }
}

TEST_CASE("power traces") {
    SUBCASE("quad stage nets: 12 toggles and 16 ones per cycle") {
        Netlist nl;
        const auto sync = fm::build_sync(nl, L8);
        const auto quad = trojan::build_concealed(nl, fm::build_std_to_fm(nl, nl.add_input("R"), sync), sync);
        Stimulus s(400);
        s.standard_reset();
        s.set("R", random_bits(400, 8));
        const Trace tr = simulate(nl, s, 400);
        const auto pt = sca::power_trace(tr, quad.stage_nets(), {}, Window{2, 400});
        CHECK(pt.first_cycle == 2);
        CHECK(pt.size() == 398);
        for (std::size_t i = 0; i < pt.size(); ++i) {
            CHECK(pt.dynamic[i] == 12.0);
            CHECK(pt.leakage[i] == 16.0);
        }
    }
    SUBCASE("no activity gives a zero dynamic series") {
        Netlist nl;
        const NetId g = nl.add_lut({nl.add_input("a")}, TruthTable::inverter());
        Stimulus s(100);
        s.hold("a", false);
        const Trace tr = simulate(nl, s, 100);
        const NetId scope[] = {g};
        const auto pt = sca::power_trace(tr, scope);
        CHECK(std::all_of(pt.dynamic.begin(), pt.dynamic.end(), [](double d) { return d == 0.0; }));
        CHECK(std::all_of(pt.leakage.begin(), pt.leakage.end(), [](double d) { return d == 1.0; }));
        CHECK_THROWS_AS(sca::power_trace(tr, std::span<const NetId>{}), sca::AnalysisError);
        const NetId bad[] = {NetId{77}};
        CHECK_THROWS_AS(sca::power_trace(tr, bad), sca::AnalysisError);
    }
    SUBCASE("weights by driver kind") {
        const Trace tr = TwoTaps(L8, 64).tr;
        const auto scope = sca::default_scope(tr);
        sca::PowerWeights w;
        w.ff = 2.0;
        w.lut = 0.5;
        const auto unit = sca::power_trace(tr, scope), weighted = sca::power_trace(tr, scope, w);
        const auto ref = sca::reference::power_trace(tr, scope, w, Window{0, 64});
        CHECK(weighted.dynamic == ref.dynamic);
        CHECK(weighted.leakage == ref.leakage);
        CHECK(unit.dynamic != weighted.dynamic);
    }
    SUBCASE("fast and reference kernels agree on synthetic traces") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const Trace tr = synthetic_trace(50, 333, seed);
            const auto scope = all_nets(50);
            for (Window w : {Window{0, 333}, Window{1, 65}, Window{63, 200}}) {
                const auto a = sca::power_trace(tr, scope, {}, w);
                const auto b = sca::reference::power_trace(tr, scope, {}, w);
                CHECK(a.dynamic == b.dynamic);
                CHECK(a.leakage == b.leakage);
            }
        }
    }
}

TEST_CASE("power statistics") {
    SUBCASE("constant series has zero variance") {
        const std::vector<double> c(64, 3.0);
        const auto s = sca::series_stats(c);
        CHECK(s.mean == 3.0);
        CHECK(s.variance == 0.0);
        CHECK(s.min == 3.0);
        CHECK(s.max == 3.0);
    }
    SUBCASE("mode 1 with random bits is bimodal per period") {
        PayloadRig rig(random_bits(64, 2), PayloadMode::Mode1);
        const auto r = rig.run();
        sca::PowerTrace pt = sca::power_trace(r.trace, rig.carrier.stage_nets(), {},
                                              Window{r.first_bit, r.first_bit + 64 * L8});
        const auto st = sca::power_stats(pt, L8);
        REQUIRE(st.dynamic_period_sums.size() == 64);
        std::size_t low = 0, high = 0;
        for (double s : st.dynamic_period_sums) {
            CHECK((s <= 17.0 || s >= 31.0));
            (s < 24 ? low : high)++;
        }
        CHECK(low > 10);
        CHECK(high > 10);
        CHECK(st.dynamic.variance > 0.0);
        pt.dynamic.pop_back();
        pt.leakage.pop_back();
        CHECK_THROWS_AS(sca::power_stats(pt, L8), sca::AnalysisError);
    }
}

TEST_CASE("spectrum of FM taps") {
    for (unsigned L : {4u, 8u}) {
        const std::size_t n = 2 * L + 1 + 1024;
        const TwoTaps taps(L, n);
        const Window w{2 * std::size_t{L} + 1, n};
        for (auto [fm_sig, bit] : {std::pair{taps.zero, 0}, std::pair{taps.one, 1}}) {
            const double f = (bit ? 2.0 : 1.0) / L;
            const NetId scope[] = {fm_sig.data_tap};
            const auto toggles = sca::power_trace(taps.tr, scope, {}, w).dynamic;
            const auto sp = sca::spectrum(toggles, 1024);
            CHECK(sp.magnitudes.size() == 513);
            // An L=4 FM 1 tap toggles every cycle, so its toggle series is flat.
            if (L == 8) {
                CHECK(sp.bin_freqs[sca::dominant_bin(sp)] == f);
                const double top = sp.magnitudes[sca::dominant_bin(sp)];
                for (std::size_t k = 1; k < sp.magnitudes.size(); ++k)
                    if (sp.bin_freqs[k] != f)
                        CHECK(sp.magnitudes[k] < top);
            }

            // raw waveform: line spectrum whose lowest line is the FM frequency
            const auto raw = sca::power_trace(taps.tr, scope, {}, w).leakage;
            const auto rs = sca::spectrum(raw, 1024);
            double max = 0.0;
            for (double m : rs.magnitudes)
                max = std::max(max, m);
            std::size_t first = 0;
            for (std::size_t k = 1; k < rs.magnitudes.size() && !first; ++k)
                if (rs.magnitudes[k] > 1e-9 * max)
                    first = k;
            CHECK(rs.bin_freqs[first] == f);
        }
    }
}

TEST_CASE("spectrum basics") {
    SUBCASE("constant series has no energy") {
        const std::vector<double> c(256, 7.0);
        const auto sp = sca::spectrum(c, 256);
        for (double m : sp.magnitudes)
            CHECK(m <= 1e-9);
        CHECK(sca::detect_fm_peaks(sp, 0.5).empty());
    }
    SUBCASE("square waves peak at 1/P") {
        for (unsigned P : {4u, 8u, 16u}) {
            std::vector<double> sq(256);
            for (std::size_t t = 0; t < sq.size(); ++t)
                sq[t] = (t % P) < P / 2;
            const auto sp = sca::spectrum(sq, 256);
            CHECK(sp.bin_freqs[sca::dominant_bin(sp)] == 1.0 / P);
        }
    }
    SUBCASE("FFTW and the direct DFT agree; Parseval holds") {
        std::mt19937_64 rng(4);
        for (std::size_t n : {2u, 8u, 64u, 512u}) {
            std::vector<double> x(n + 3);
            for (double &v : x)
                v = std::normal_distribution<double>(0.0, 3.0)(rng);
            const auto fast = sca::spectrum(x, n, 3), slow = sca::reference::spectrum(x, n, 3);
            double top = 0.0;
            for (double m : slow.magnitudes)
                top = std::max(top, m);
            for (std::size_t k = 0; k < fast.magnitudes.size(); ++k)
                CHECK(std::abs(fast.magnitudes[k] - slow.magnitudes[k]) <= 1e-9 * top);
            double parseval = 0.0;
            for (std::size_t k = 0; k < fast.magnitudes.size(); ++k) {
                const double m2 = fast.magnitudes[k] * fast.magnitudes[k];
                parseval += (k == 0 || k == n / 2) ? m2 : 2.0 * m2;
            }
            parseval /= static_cast<double>(n);
            CHECK(std::abs(parseval - fast.energy) <= 1e-9 * fast.energy);
        }
    }
    SUBCASE("bad windows are rejected") {
        const std::vector<double> x(100, 1.0);
        CHECK_THROWS_AS(sca::spectrum(x, 96), sca::AnalysisError);
        CHECK_THROWS_AS(sca::spectrum(x, 1), sca::AnalysisError);
        CHECK_THROWS_AS(sca::spectrum(x, 128), sca::AnalysisError);
        CHECK_THROWS_AS(sca::spectrum(x, 64, 40), sca::AnalysisError);
        const auto sp = sca::spectrum(x, 64);
        CHECK_THROWS_AS(sca::detect_fm_peaks(sp, 0.0), sca::AnalysisError);
        CHECK_THROWS_AS(sca::detect_fm_peaks(sp, 1.5), sca::AnalysisError);
    }
}

TEST_CASE("peak detection separates plain FM logic from a concealed quad") {
    Netlist nl;
    const auto sync = fm::build_sync(nl, L8);
    std::vector<fm::FmSignal> plain;
    for (int i = 0; i < 3; ++i)
        plain.push_back(fm::build_std_to_fm(nl, nl.add_input("P" + std::to_string(i)), sync));
    const auto quad = trojan::build_concealed(nl, fm::build_std_to_fm(nl, nl.add_input("R"), sync), sync);
    const std::size_t n = 2048 + 64;
    Stimulus s = held(n, {{"P0", false}, {"P1", true}, {"P2", false}});
    s.set("R", random_bits(n, 3));
    const Trace tr = simulate(nl, s, n);
    const Window w{33, 33 + 2048};

    std::vector<NetId> taps;
    for (const auto &f : plain)
        taps.push_back(f.data_tap);
    const auto open = sca::spectrum(sca::power_trace(tr, taps, {}, w).dynamic, 2048);
    const auto peaks = sca::detect_fm_peaks(open, 0.5);
    CHECK((contains(peaks, 0.125) || contains(peaks, 0.25)));

    const auto hidden = sca::spectrum(sca::power_trace(tr, quad.stage_nets(), {}, w).dynamic, 2048);
    CHECK(sca::detect_fm_peaks(hidden, 0.5).empty());
    const auto hidden_static = sca::spectrum(sca::power_trace(tr, quad.stage_nets(), {}, w).leakage, 2048);
    CHECK(sca::detect_fm_peaks(hidden_static, 0.5).empty());
}

TEST_CASE("attacker demodulation") {
    SUBCASE("1011 with the derived thresholds") {
        for (auto [mode, thr] : {std::pair{PayloadMode::Mode1, 24.0}, std::pair{PayloadMode::Mode2, 48.0}}) {
            PayloadRig rig({1, 0, 1, 1}, mode);
            const auto r = rig.run();
            CHECK(sca::mode_threshold(L8, mode == PayloadMode::Mode2) == thr);
            CHECK(sca::attacker_demodulate(r.power, L8, r.first_bit, 4, thr) == rig.secret);
        }
    }
    SUBCASE("a concealed carrier gives the same reading every period") {
        PayloadRig rig(random_bits(32, 6), PayloadMode::Concealed);
        const auto r = rig.run();
        const auto bits = sca::attacker_demodulate(r.power, L8, r.first_bit, 32, 24);
        CHECK(std::all_of(bits.begin(), bits.end(), [&](std::uint8_t b) { return b == bits[0]; }));
        const auto sums = sca::period_sums(r.power, L8, r.first_bit, 32);
        CHECK(std::all_of(sums.begin(), sums.end(), [](double s) { return s == 96.0; }));
    }
    SUBCASE("100 random 64-bit secrets in both modes") {
        for (bool mode2 : {false, true}) {
            unsigned exact = 0;
            for (std::uint64_t i = 0; i < 100; ++i) {
                PayloadRig rig(random_bits(64, 1000 + i), mode2 ? PayloadMode::Mode2 : PayloadMode::Mode1);
                const auto r = rig.run(8 + i % 64);
                exact += sca::attacker_demodulate(r.power, L8, r.first_bit, 64,
                                                  sca::mode_threshold(L8, mode2)) == rig.secret;
            }
            CHECK(exact == 100);
        }
    }
    SUBCASE("short traces are rejected") {
        PayloadRig rig({1, 0}, PayloadMode::Mode1);
        const auto r = rig.run();
        CHECK_THROWS_AS(sca::period_sums(r.power, L8, r.first_bit, 1000), sca::AnalysisError);
        const std::vector<std::uint8_t> a{1, 0}, b{1};
        CHECK_THROWS_AS(sca::bit_accuracy(a, b), sca::AnalysisError);
        CHECK(sca::bit_accuracy(a, std::vector<std::uint8_t>{1, 1}) == 0.5);
    }
}

TEST_CASE("jammer construction") {
    Netlist nl;
    const auto sync = fm::build_sync(nl, L8);
    CHECK_THROWS_AS(sca::build_jammer(nl, sync, 0, 1), sca::AnalysisError);
    const auto jam = sca::build_jammer(nl, sync, 4, 99);
    CHECK(jam.csrs.size() == 8);
    CHECK(jam.lfsr_seeds.size() == 4);
    CHECK(jam.stage_nets().size() == 8 * L8);

    const std::size_t n = 4096 + 64;
    const Trace tr = simulate(nl, held(n), n);
    // values are redrawn: both bits appear on every CSR, and the jammer never idles
    for (const auto &f : jam.csrs) {
        unsigned ones = 0, total = 0;
        for (std::size_t s = 2 * L8 + 1; s < n; s += L8, ++total)
            ones += fm::fm_decode(tr, f, s).value;
        CHECK(ones > total / 4);
        CHECK(ones < 3 * total / 4);
    }
    CHECK(sca::uci_scan(tr, Window{2, n}).constant_nets.empty());

    const auto taps = jam.data_taps();
    const auto sp = sca::spectrum(sca::power_trace(tr, taps, {}, Window{64, 64 + 4096}).leakage, 4096);
    // Markers and data bits of phase-aligned CSRs partly cancel at 1/8: about
    // a third of the 1/4 line.
    const auto peaks = sca::detect_fm_peaks(sp, 0.25);
    CHECK(contains(peaks, 0.125));
    CHECK(contains(peaks, 0.25));
}

TEST_CASE("jamming model") {
    CHECK(sca::jammed_accuracy_model(4) == doctest::Approx(0.63672).epsilon(1e-4));
    CHECK(sca::jammed_accuracy_model(1) == doctest::Approx(0.75));
    double prev = 1.0;
    for (unsigned k = 1; k <= 16; ++k) {
        const double a = sca::jammed_accuracy_model(k);
        CHECK(a < prev);
        prev = a;
    }
    CHECK(sca::jammed_threshold(L8, 4) == 24.0 + 6.0 * 8 * 4);
    CHECK(sca::jammed_threshold(L8, 0) == sca::mode_threshold(L8, false));
}

TEST_CASE("attacker accuracy does not grow with more jammer pairs") {
    const auto secret = random_bits(256, 2024);
    const unsigned seeds = 12;
    std::vector<double> mean;
    for (unsigned k : {0u, 1u, 2u, 4u, 8u}) {
        double acc = 0.0;
        for (unsigned s = 0; s < seeds; ++s) {
            PayloadRig rig(secret, PayloadMode::Mode1);
            std::vector<NetId> scope = rig.carrier.stage_nets();
            if (k > 0) {
                const auto jam = sca::build_jammer(rig.nl, rig.sync, k, 500 + s);
                const auto extra = jam.stage_nets();
                scope.insert(scope.end(), extra.begin(), extra.end());
            }
            const auto r = rig.run();
            const auto pt = sca::power_trace(r.trace, scope);
            const auto bits = sca::attacker_demodulate(pt, L8, r.first_bit, secret.size(),
                                                       sca::jammed_threshold(L8, k));
            acc += sca::bit_accuracy(bits, secret);
        }
        mean.push_back(acc / seeds);
    }
    MESSAGE("mean accuracy for k = 0,1,2,4,8: " << mean[0] << " " << mean[1] << " " << mean[2]
                                                << " " << mean[3] << " " << mean[4]);
    CHECK(mean[0] == 1.0);
    for (std::size_t i = 1; i < mean.size(); ++i)
        CHECK(mean[i] <= mean[i - 1]);
    CHECK(mean[3] <= 0.65);
}
