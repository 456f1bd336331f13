#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include <sstream>

using namespace fmtrojan;
using namespace testsupport;

TEST_CASE("truth tables replicate across unused inputs") {
    const auto x = TruthTable::xor_n(2);
    CHECK(x.function_bits() == 0b0110);
    for (unsigned idx = 0; idx < 64; ++idx)
        CHECK(x.eval(idx) == (((idx & 1u) ^ ((idx >> 1) & 1u)) != 0));
    CHECK(TruthTable::and_n(3).function_bits() == 0x80);
    CHECK(TruthTable::or_n(2).function_bits() == 0b1110);
    CHECK(TruthTable::identity().complement() == TruthTable::inverter());
    CHECK(TruthTable::from_bits(2, 0).is_constant());
    CHECK(TruthTable::from_bits(2, 0xf).is_constant());
    CHECK_FALSE(x.is_constant());
    CHECK_THROWS_AS(TruthTable::from_bits(7, 1), NetlistError);
}

TEST_CASE("netlist construction") {
    Netlist nl;
    const NetId a = nl.add_input("a"), b = nl.add_input("b");
    CHECK(a != b);
    CHECK_THROWS_AS(nl.add_input("a"), NetlistError);
    CHECK(nl.constant(true) == nl.constant(true));
    CHECK(nl.constant(false) != nl.constant(true));

    SUBCASE("xor and buffer luts compute their functions") {
        const NetId x = nl.add_lut({a, b}, TruthTable::xor_n(2), "x");
        const NetId buf = nl.add_lut({a}, TruthTable::identity(), "buf");
        for (unsigned v = 0; v < 4; ++v) {
            Simulator sim(nl);
            sim.set_input(a, v & 1u);
            sim.set_input(b, v & 2u);
            sim.evaluate();
            CHECK(sim.value(x) == (((v & 1u) != 0) != ((v & 2u) != 0)));
            CHECK(sim.value(buf) == ((v & 1u) != 0));
        }
    }
    SUBCASE("seven inputs do not fit one lut") {
        std::vector<NetId> ins(7, a);
        CHECK_THROWS_AS(nl.add_lut(ins, TruthTable::and_n(6)), NetlistError);
    }
    SUBCASE("arity mismatch") {
        CHECK_THROWS_AS(nl.add_lut({a, b}, TruthTable::and_n(3)), NetlistError);
    }
    SUBCASE("undriven input") {
        CHECK_THROWS_AS(nl.add_lut({a, NetId{}}, TruthTable::and_n(2)), NetlistError);
        CHECK_THROWS_AS(nl.add_lut({a, NetId{999}}, TruthTable::and_n(2)), NetlistError);
    }
    SUBCASE("open flip-flop fails validation until connected") {
        const NetId q = nl.add_ff_open(FfKind::ResetType, nl.constant(true), nl.constant(false), "q");
        CHECK_THROWS_AS(nl.validate(), NetlistError);
        nl.connect_d(q, a);
        CHECK_NOTHROW(nl.validate());
    }
}

TEST_CASE("flip-flop update rule, exhaustive per kind") {
    Netlist nl;
    const NetId d = nl.add_input("D"), ce = nl.add_input("CE"), sr = nl.add_input("SR");
    const NetId qs = nl.add_ff(FfKind::SetType, d, ce, sr);
    const NetId qr = nl.add_ff(FfKind::ResetType, d, ce, sr);
    for (std::uint8_t init = 0; init < 2; ++init)
        for (unsigned idx = 0; idx < 8; ++idx) {
            const bool dv = idx & 1u, cev = idx & 2u, srv = idx & 4u;
            Simulator sim(nl);
            const std::uint8_t st[] = {init, init};
            sim.load_state(st);
            sim.set_input(d, dv);
            sim.set_input(ce, cev);
            sim.set_input(sr, srv);
            sim.evaluate();
            sim.clock();
            sim.evaluate();
            CAPTURE(idx);
            CAPTURE(init);
            CHECK(sim.value(qs) == (srv ? true : cev ? dv : init != 0));
            CHECK(sim.value(qr) == (srv ? false : cev ? dv : init != 0));
        }
}

TEST_CASE("flip-flop examples over a stimulus") {
    Netlist nl;
    const NetId d = nl.add_input("D"), ce = nl.add_input("CE"), sr = nl.add_input("SR");
    const NetId qs = nl.add_ff(FfKind::SetType, d, ce, sr);
    const NetId qr = nl.add_ff(FfKind::ResetType, d, ce, sr);
    Stimulus s(6);
    s.set("D", {0, 1, 0, 0, 0, 0});
    s.set("CE", {0, 1, 0, 0, 0, 0});
    s.set("SR", {1, 0, 0, 0, 0, 0});
    const Trace tr = simulate(nl, s, 6);
    CHECK(tr.at(qs, 1)); // set by sr on cycle 0
    CHECK_FALSE(tr.at(qr, 1));
    CHECK(tr.at(qr, 2)); // loaded d=1 on cycle 1
    for (std::size_t t = 2; t < 6; ++t) // ce=0, sr=0 holds
        CHECK(tr.at(qr, t));
}

TEST_CASE("topological order") {
    Netlist nl;
    const NetId a = nl.add_input("a");
    const NetId l1 = nl.add_lut({a}, TruthTable::inverter(), "l1");
    const NetId l2 = nl.add_lut({l1}, TruthTable::inverter(), "l2");
    (void)l2;
    const auto order = nl.topo_order();
    REQUIRE(order.size() == 2);
    CHECK(std::get<Lut>(nl.cells()[order[0]]).out == l1);

    SUBCASE("self loop is a combinational cycle") {
        nl.rewire_lut(l1, std::vector<NetId>{l1}, TruthTable::inverter());
        try {
            nl.topo_order();
            FAIL("expected a combinational cycle");
        } catch (const CombinationalCycleError &e) {
            CHECK(e.net() == "l1");
        }
    }
    SUBCASE("a ring through flip-flops is sequential") {
        Netlist ring;
        ring.reset();
        fm::build_fm_csr(ring, 8);
        CHECK_NOTHROW(ring.topo_order());
    }
}

TEST_CASE("length-8 csr marker returns every 8 cycles") {
    Netlist nl;
    const fm::CsrShape csr = fm::build_fm_csr(nl, 8);
    const Trace tr = simulate(nl, held(40), 40);
    for (std::size_t t = 1; t < 40; ++t)
        CHECK(tr.at(csr.stage(8), t) == (t % 8 == 1));
}

TEST_CASE("pure combinational netlist under zero stimulus is constant") {
    Netlist nl;
    const NetId a = nl.add_input("a"), b = nl.add_input("b");
    const NetId x = nl.add_lut({a, b}, TruthTable::xor_n(2));
    const NetId y = nl.add_lut({x, a}, TruthTable::or_n(2));
    Stimulus s(100);
    s.hold("a", false);
    s.hold("b", false);
    const Trace tr = simulate(nl, s, 100);
    for (std::size_t t = 0; t < 100; ++t) {
        CHECK_FALSE(tr.at(x, t));
        CHECK_FALSE(tr.at(y, t));
    }
}

namespace {

// Random DAG of luts over a few ports with flip-flops feeding back.
Netlist random_netlist(std::uint64_t seed, unsigned ports, unsigned luts, unsigned ffs) {
    std::mt19937_64 rng(seed);
    Netlist nl;
    const NetId rst = nl.reset();
    std::vector<NetId> pool;
    for (unsigned p = 0; p < ports; ++p)
        pool.push_back(nl.add_input("p" + std::to_string(p)));
    std::vector<NetId> qs;
    for (unsigned f = 0; f < ffs; ++f) {
        const auto kind = rng() & 1u ? FfKind::SetType : FfKind::ResetType;
        qs.push_back(nl.add_ff_open(kind, pool[rng() % pool.size()], rst));
        pool.push_back(qs.back());
    }
    for (unsigned l = 0; l < luts; ++l) {
        const unsigned k = 1 + rng() % 6;
        std::vector<NetId> ins;
        for (unsigned i = 0; i < k; ++i)
            ins.push_back(pool[rng() % pool.size()]);
        pool.push_back(nl.add_lut(ins, TruthTable::from_bits(k, rng())));
    }
    for (NetId q : qs)
        nl.connect_d(q, pool[rng() % pool.size()]);
    return nl;
}

Stimulus random_stimulus(const Netlist &nl, std::size_t n, std::uint64_t seed) {
    Stimulus s(n);
    s.standard_reset();
    std::uint64_t k = seed;
    for (const auto &[name, id] : nl.inputs())
        if (name != Netlist::kResetPort)
            s.set(name, random_bits(n, ++k));
    return s;
}

} // namespace

TEST_CASE("compiled simulator matches the reference interpreter on random netlists") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Netlist nl = random_netlist(seed, 4, 40, 12);
        const Stimulus s = random_stimulus(nl, 300, seed * 7);
        CAPTURE(seed);
        CHECK(simulate(nl, s, 300) == reference::simulate(nl, s, 300));
    }
}

TEST_CASE("simulation is deterministic and batch equals serial") {
    const Netlist nl = random_netlist(42, 3, 30, 8);
    std::vector<Stimulus> stims;
    for (std::uint64_t i = 0; i < 6; ++i)
        stims.push_back(random_stimulus(nl, 200, 100 + i));
    const auto batch = simulate_batch(nl, stims, 200);
    for (std::size_t i = 0; i < stims.size(); ++i) {
        CHECK(batch[i] == simulate(nl, stims[i], 200));
        CHECK(simulate(nl, stims[i], 200) == simulate(nl, stims[i], 200));
    }
}

TEST_CASE("one topological pass reaches the fixpoint") {
    const Netlist nl = random_netlist(5, 4, 60, 10);
    const Stimulus s = random_stimulus(nl, 50, 3);
    Simulator sim(nl);
    for (std::size_t t = 0; t < 50; ++t) {
        for (const auto &[name, id] : nl.inputs())
            sim.set_input(id, s.bits(name)[t]);
        sim.evaluate();
        const std::vector<std::uint8_t> once(sim.values().begin(), sim.values().end());
        sim.evaluate();
        CHECK(std::equal(once.begin(), once.end(), sim.values().begin()));
        sim.clock();
    }
}

TEST_CASE("disjoint rings are periodic after reset") {
    for (unsigned L : {4u, 8u, 16u}) {
        Netlist nl;
        fm::build_sync(nl, L);
        fm::build_fm_csr(nl, L);
        const unsigned stages[] = {1, 3};
        fm::build_csr(nl, L, stages, "ring");
        const Trace tr = simulate(nl, held(5 * L), 5 * L);
        for (std::uint32_t n = 0; n < tr.net_count(); ++n)
            for (std::size_t t = 1; t + L < tr.cycles(); ++t)
                CHECK(tr.at(NetId{n}, t) == tr.at(NetId{n}, t + L));
    }
}

TEST_CASE("netlist and trace text formats round-trip") {
    const Netlist nl = random_netlist(9, 3, 25, 6);
    std::ostringstream a;
    nl.write(a);
    std::istringstream in(a.str());
    const Netlist back = Netlist::read(in);
    std::ostringstream b;
    back.write(b);
    CHECK(a.str() == b.str());

    const Stimulus s = random_stimulus(nl, 130, 4);
    const Trace tr = simulate(nl, s, 130);
    CHECK(simulate(back, s, 130) == tr);
    std::ostringstream csv;
    tr.write_csv(csv);
    std::istringstream cin(csv.str());
    CHECK(Trace::read_csv(cin, nl) == tr);
}

TEST_CASE("malformed inputs are rejected") {
    std::istringstream bad("LUT x zz a\n");
    CHECK_THROWS_AS(Netlist::read(bad), NetlistError);
    Netlist nl;
    nl.reset();
    nl.add_input("a");
    Stimulus s(10);
    s.standard_reset();
    CHECK_THROWS_AS(simulate(nl, s, 10), NetlistError); // no sequence for a
    s.hold("a", true);
    CHECK_THROWS_AS(simulate(nl, s, 11), NetlistError); // horizon too short
}
