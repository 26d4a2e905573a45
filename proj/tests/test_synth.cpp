#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>

#include "chaintrace/pool_heuristics.hpp"
#include "chaintrace/synth.hpp"
#include "chaintrace/xchain.hpp"
#include "helpers.hpp"

using namespace chaintrace;
using namespace testutil;

namespace {

std::string serialized(const Ledger& ledger) {
    std::ostringstream out;
    serialize_ledger(ledger, out);
    return out.str();
}

std::vector<ResolvedShift> resolve_all(const SyntheticWorld& world,
                                       std::size_t* multi_hits = nullptr) {
    WindowParams windows = WindowParams::defaults();
    std::vector<ResolvedShift> resolved;
    for (const auto& s : world.shifts) {
        Phase1Result cands = phase1_basic(s, world.ledgers, windows);
        if (multi_hits && cands.hit_class == HitClass::MULTI_HIT) ++*multi_hits;
        auto r = phase1_augmented(s, cands, world.oracle);
        if (r) resolved.push_back(*r);
    }
    return resolved;
}

}  // namespace

TEST_CASE("parameter validation") {
    GenParams p;
    CHECK_NOTHROW(p.validate());
    auto expect_invalid = [](GenParams bad) {
        CHECK_THROWS_AS(bad.validate(), SynthError);
    };
    GenParams q = p;
    q.shift_rate = 1.5;
    expect_invalid(q);
    q = p;
    q.collision_rate = -0.1;
    expect_invalid(q);
    q = p;
    q.uturn_rate = 0.7;
    q.xrt_rate = 0.7;  // together past 1
    expect_invalid(q);
    q = p;
    q.n_entities = 0;
    expect_invalid(q);
    q = p;
    q.chains = {};
    expect_invalid(q);
    q = p;
    q.chains = {"BTC", "XMR"};
    expect_invalid(q);
    q = p;
    q.chains = {"BTC", "LTC"};
    q.founder_schedule = true;  // pool injection without ZEC
    expect_invalid(q);
    q = p;
    q.chains = {"ZEC"};
    q.shift_rate = 0.1;  // shifts need a second chain
    expect_invalid(q);
    q = p;
    q.chains = {"ZEC"};
    q.shift_rate = 0;
    q.noise_txs = 10;
    CHECK_NOTHROW(q.validate());
}

TEST_CASE("generation is a pure function of (params, seed)") {
    GenParams params;
    params.n_entities = 8;
    params.txs_per_entity = 4;
    params.shift_rate = 0.5;
    params.uturn_rate = 0.3;
    params.xrt_rate = 0.2;
    params.miner_fanout = 105;
    params.noise_txs = 100;
    SyntheticWorld a = generate(params, 77);
    SyntheticWorld b = generate(params, 77);

    REQUIRE(a.ledgers.size() == b.ledgers.size());
    for (const auto& [sym, ledger] : a.ledgers)
        CHECK(serialized(ledger) == serialized(b.ledgers.at(sym)));
    REQUIRE(a.shifts.size() == b.shifts.size());
    for (std::size_t i = 0; i < a.shifts.size(); ++i) {
        CHECK(a.shifts[i].id == b.shifts[i].id);
        CHECK(a.shifts[i].amount == b.shifts[i].amount);
        CHECK(a.shifts[i].timestamp == b.shifts[i].timestamp);
    }
    ScoreReport cross = score(a.truth, b.truth);
    CHECK(cross.precision == 1.0);
    CHECK(cross.recall == 1.0);

    SyntheticWorld c = generate(params, 78);
    CHECK(serialized(a.ledgers.at("ZEC")) != serialized(c.ledgers.at("ZEC")));

    CHECK(substream_seed(1, "plan") != substream_seed(1, "noise"));
    CHECK(substream_seed(1, "plan") != substream_seed(2, "plan"));
}

TEST_CASE("founder schedule carries the signature values and cadence") {
    GenParams params;
    params.n_entities = 2;
    params.txs_per_entity = 2;
    params.shift_rate = 0;
    params.founder_schedule = true;
    params.founder_withdrawals = 200;  // forces one rotation past the cap
    params.chains = {"ZEC"};
    SyntheticWorld world = generate(params, 5);
    const Ledger& zec_ledger = world.ledgers.at("ZEC");

    const Amount dep = parse_decimal("249.9999", 8);
    const Amount wd = parse_decimal("250.0001", 8);
    std::vector<const LedgerTx*> deposits, withdrawals;
    for (const auto& tx : zec_ledger.txs()) {
        if (tx.pool_deposit() == dep) deposits.push_back(&tx);
        if (tx.pool_withdrawal() == wd) withdrawals.push_back(&tx);
    }
    REQUIRE(deposits.size() == 200);
    REQUIRE(withdrawals.size() == 200);
    for (std::size_t k = 0; k < 200; ++k) {
        // Withdrawal lands 1-3 blocks after its deposit; the next deposit
        // follows after a 6-10 block gap.
        std::uint64_t to_wd = withdrawals[k]->height - deposits[k]->height;
        CHECK(to_wd >= 1);
        CHECK(to_wd <= 3);
        if (k + 1 < 200) {
            std::uint64_t gap = deposits[k + 1]->height - withdrawals[k]->height;
            CHECK(gap >= 6);
            CHECK(gap <= 10);
        }
    }

    FounderReport report = tag_founders(zec_ledger, {});
    CHECK(report.links.size() == 200);
    // 200 deposits overflow one 44,272.5 ZEC rotation, so the schedule
    // rotated to a second deposit address, each staying under the cap.
    CHECK(report.deposit_patterns.size() == 2);
    for (const auto& p : report.deposit_patterns) {
        CHECK(p.within_rotation_cap);
        CHECK(p.signature_deposits > 0);
    }
    ScoreReport s = score(report.links, world.truth);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
}

TEST_CASE("deposit search resolution on generated shift streams") {
    GenParams params;
    params.n_entities = 10;
    params.txs_per_entity = 5;
    params.shift_rate = 0.6;
    params.uturn_rate = 0.2;
    params.xrt_rate = 0.2;

    SUBCASE("zero collision rate means every shift is a single hit") {
        SyntheticWorld world = generate(params, 13);
        WindowParams windows = WindowParams::defaults();
        REQUIRE(!world.shifts.empty());
        for (const auto& s : world.shifts) {
            Phase1Result r = phase1_basic(s, world.ledgers, windows);
            CHECK(r.hit_class == HitClass::SINGLE_HIT);
        }
    }
    SUBCASE("decoy collisions create multi hits the oracle still resolves") {
        params.collision_rate = 0.5;
        SyntheticWorld world = generate(params, 13);
        std::size_t multi = 0;
        auto resolved = resolve_all(world, &multi);
        CHECK(multi > 0);
        CHECK(resolved.size() == world.shifts.size());
    }
}

TEST_CASE("prediction scoring is an exact set comparison") {
    GenParams params;
    params.n_entities = 6;
    params.txs_per_entity = 3;
    params.shift_rate = 0.5;
    SyntheticWorld world = generate(params, 3);
    REQUIRE(world.truth.size() >= 5);

    SUBCASE("predicting the truth scores perfectly") {
        ScoreReport s = score(world.truth, world.truth);
        CHECK(s.precision == 1.0);
        CHECK(s.recall == 1.0);
        CHECK(s.matched == s.truth);
        CHECK_FALSE(s.zero_pred);
    }
    SUBCASE("an empty prediction is vacuously precise and flagged") {
        ScoreReport s = score({}, world.truth);
        CHECK(s.precision == 1.0);
        CHECK(s.zero_pred);
        CHECK(s.recall == 0.0);
        CHECK(s.predicted == 0);
    }
    SUBCASE("one dropped and one fabricated link count against both scores") {
        std::vector<LinkEvidence> pred(world.truth.begin(), world.truth.end() - 1);
        LinkEvidence bogus = world.truth.back();
        bogus.value += 1;  // value participates in matching
        pred.push_back(bogus);
        ScoreReport s = score(pred, world.truth);
        std::size_t n = world.truth.size();
        CHECK(s.predicted == n);
        CHECK(s.matched == n - 1);
        CHECK(s.precision == doctest::Approx(static_cast<double>(n - 1) / n));
        CHECK(s.recall == doctest::Approx(static_cast<double>(n - 1) / n));
    }
    SUBCASE("endpoint order never matters after canonicalization") {
        std::vector<LinkEvidence> pred = world.truth;
        for (auto& l : pred) {
            std::reverse(l.source.addresses.begin(), l.source.addresses.end());
            std::reverse(l.target.addresses.begin(), l.target.addresses.end());
        }
        ScoreReport s = score(pred, world.truth);
        CHECK(s.precision == 1.0);
        CHECK(s.recall == 1.0);
    }
}

TEST_CASE("world bundles survive a save/load round trip") {
    namespace fs = std::filesystem;
    GenParams params;
    params.n_entities = 6;
    params.txs_per_entity = 3;
    params.shift_rate = 0.4;
    params.uturn_rate = 0.5;
    params.miner_fanout = 110;
    SyntheticWorld world = generate(params, 9);

    std::string dir = (fs::temp_directory_path() / "ct_test_world").string();
    save_world(world, dir);
    WorldBundle loaded = load_world(dir);

    REQUIRE(loaded.ledgers.size() == world.ledgers.size());
    for (const auto& [sym, ledger] : world.ledgers)
        CHECK(serialized(loaded.ledgers.at(sym)) == serialized(ledger));
    REQUIRE(loaded.shifts.size() == world.shifts.size());
    for (std::size_t i = 0; i < world.shifts.size(); ++i) {
        CHECK(loaded.shifts[i].id == world.shifts[i].id);
        CHECK(loaded.shifts[i].amount == world.shifts[i].amount);
    }
    for (const auto& s : world.shifts) {
        auto orig = world.oracle.query(s.cur_in + "_s_" + s.id);
        auto back = loaded.oracle.query(s.cur_in + "_s_" + s.id);
        REQUIRE(orig.has_value() == back.has_value());
        if (orig) {
            CHECK(back->out_txid == orig->out_txid);
            CHECK(back->out_coin == orig->out_coin);
            CHECK(back->withdraw_address == orig->withdraw_address);
        }
    }
    const Tag* pool = loaded.tags.find({"ZEC", "ZEC_pool_main"});
    REQUIRE(pool != nullptr);
    CHECK(pool->category == TagCategory::POOL);
    ScoreReport s = score(loaded.truth, world.truth);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
    fs::remove_all(dir);
}

TEST_CASE("detectors recover every injected pattern exactly") {
    GenParams params;
    params.n_entities = 12;
    params.txs_per_entity = 4;
    params.shift_rate = 0.5;
    params.uturn_rate = 0.4;
    params.xrt_rate = 0.3;
    params.founder_schedule = true;
    params.founder_withdrawals = 25;
    params.miner_fanout = 110;
    params.noise_txs = 300;
    params.pool_type1 = 2;
    params.pool_type2 = 2;
    params.pool_type3 = 2;
    SyntheticWorld world = generate(params, 41);

    auto resolved = resolve_all(world);
    REQUIRE(resolved.size() == world.shifts.size());

    std::vector<LinkEvidence> predicted = detect_pass_through(resolved);
    for (auto& l : detect_uturn(resolved, world.ledgers)) predicted.push_back(std::move(l));
    for (auto& l : detect_round_trip(resolved, world.ledgers)) predicted.push_back(std::move(l));
    const Ledger& zec_ledger = world.ledgers.at("ZEC");
    for (auto& l : tag_founders(zec_ledger, {}).links) predicted.push_back(std::move(l));
    for (auto& l : tag_miners(zec_ledger, world.tags).links) predicted.push_back(std::move(l));

    ScoreReport report = score(predicted, world.truth);
    CHECK(report.precision == 1.0);
    CHECK(report.recall == 1.0);
    REQUIRE(!report.kinds.empty());
    std::map<LinkKind, ScoreReport::KindScore> by_kind;
    for (const auto& k : report.kinds) by_kind[k.kind] = k;
    for (LinkKind kind : {LinkKind::PASS_THROUGH, LinkKind::UTURN_BASIC, LinkKind::UTURN_ADDR,
                          LinkKind::UTURN_UTXO, LinkKind::XRT, LinkKind::FOUNDER_VALUE,
                          LinkKind::MINER_PAYOUT}) {
        REQUIRE(by_kind.count(kind) == 1);
        CHECK(by_kind[kind].truth > 0);
        CHECK(by_kind[kind].precision == 1.0);
        CHECK(by_kind[kind].recall == 1.0);
    }

    // The injected pool-interaction shifts also surface in the Zcash
    // interaction counters.
    PoolInteractionCounts counts = pool_shift_interactions(resolved, zec_ledger);
    CHECK(counts.direct_to_pool == 2);
    CHECK(counts.deposit_next == 2);
    CHECK(counts.funded_from_pool == 2);
}
