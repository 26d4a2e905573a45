#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "chaintrace/matrix_sim.hpp"

using namespace chaintrace;

namespace {

Amount eth(const char* s) { return parse_decimal(s, 9); }

/// partners_count must always equal, over the X3 slots, three per completed
/// cycle plus the referrals currently sitting in the slot.
void check_partner_identity(const MatrixWorld& world) {
    for (const auto& [id, u] : world.users) {
        std::uint64_t expected = 0;
        for (const auto& s : u.x3) expected += 3ULL * s.reinvest_count + s.referrals.size();
        CHECK(u.partners_count == expected);
    }
}

/// Active levels must form a contiguous prefix in both matrices.
void check_level_prefix(const MatrixWorld& world) {
    for (const auto& [id, u] : world.users)
        for (const auto* slots : {&u.x3, &u.x4}) {
            bool gap = false;
            for (const auto& s : *slots) {
                if (!s.active) gap = true;
                else CHECK_FALSE(gap);
            }
        }
}

/// Every payment must recompute from the event log, and money only moves,
/// never appears: sum of (paid_out - paid_in) is zero.
void check_conservation(const MatrixWorld& world) {
    std::map<std::string, Amount> by_payee, by_payer;
    for (const auto& ev : world.events) {
        by_payee[ev.payee] += ev.amount;
        by_payer[ev.payer] += ev.amount;
    }
    Amount net_sum = 0;
    for (const auto& [id, u] : world.users) {
        CHECK(u.paid_out == by_payee[id]);
        CHECK(u.paid_in == by_payer[id]);
        net_sum += u.paid_out - u.paid_in;
    }
    CHECK(net_sum == 0);
}

std::vector<ScenarioOp> random_ops(std::uint64_t seed, std::size_t n_users, std::size_t n_ops) {
    std::mt19937_64 rng(seed);
    std::vector<ScenarioOp> ops;
    auto user = [&](std::size_t bound) { return "u" + std::to_string(rng() % bound); };
    for (std::size_t i = 0; i < n_ops; ++i) {
        ScenarioOp op;
        if (rng() % 100 < 55) {
            op.op = "register";
            op.user = user(n_users);
            switch (rng() % 4) {
                case 0: op.ref = ""; break;
                case 1: op.ref = "owner"; break;
                case 2: op.ref = "ghost"; break;
                default: op.ref = user(n_users); break;
            }
        } else {
            op.op = "buy";
            op.user = rng() % 20 == 0 ? "owner" : user(n_users);
            op.matrix = rng() % 2 ? Matrix::X4 : Matrix::X3;
            op.level = static_cast<int>(rng() % 13) + 1;  // 13 probes LEVEL_RANGE
        }
        ops.push_back(std::move(op));
    }
    return ops;
}

}  // namespace

TEST_CASE("slot prices double per level from 0.025 ETH") {
    CHECK(slot_price(1) == eth("0.025"));
    CHECK(slot_price(2) == eth("0.05"));
    CHECK(slot_price(12) == eth("51.2"));
    Amount total = 0;
    for (int l = 1; l <= kMatrixLevels; ++l) total += slot_price(l);
    CHECK(total == eth("102.375"));
    CHECK(kRegistrationGwei == 2 * slot_price(1));
    CHECK(kDefaultGasGwei == eth("0.00883"));

    for (int bad : {0, -1, 13}) {
        try {
            slot_price(bad);
            FAIL("expected LEVEL_RANGE");
        } catch (const MatrixSimError& e) {
            CHECK(e.code() == MatrixSimError::Code::LEVEL_RANGE);
        }
    }
}

TEST_CASE("a fresh world gives the owner all 24 slots, permanently open") {
    MatrixWorld world = new_world("owner");
    CHECK(world.gas_fee == eth("0.00883"));
    const MatrixUser& o = world.users.at("owner");
    for (const auto* slots : {&o.x3, &o.x4})
        for (const auto& s : *slots) {
            CHECK(s.active);
            CHECK(s.never_block);
            CHECK_FALSE(s.blocked);
        }
    CHECK(o.highest_level(Matrix::X3) == 12);
    CHECK(o.paid_in == 0);
}

TEST_CASE("registration splits the fee into two direct payments") {
    MatrixWorld world = new_world("owner");
    auto events = register_user(world, "a");
    REQUIRE(events.size() == 2);
    for (const auto& ev : events) {
        CHECK(ev.payer == "a");
        CHECK(ev.payee == "owner");
        CHECK(ev.amount == eth("0.025"));
        CHECK(ev.reason == PayReason::DIRECT);
    }
    CHECK(events[0].matrix == Matrix::X3);
    CHECK(events[1].matrix == Matrix::X4);
    const MatrixUser& a = world.users.at("a");
    CHECK(a.upline == "owner");
    CHECK(a.slot(Matrix::X3, 1).active);
    CHECK(a.slot(Matrix::X4, 1).active);
    CHECK(a.paid_in == eth("0.05"));
    CHECK(a.gas_paid == eth("0.00883"));
    CHECK(world.users.at("owner").paid_out == eth("0.05"));
    CHECK(world.users.at("owner").partners_count == 1);

    SUBCASE("an unknown or self referrer falls back to the owner") {
        register_user(world, "b", "nobody");
        CHECK(world.users.at("b").upline == "owner");
        register_user(world, "c", "c");
        CHECK(world.users.at("c").upline == "owner");
    }
}

TEST_CASE("three fills cycle an X3 slot and divert the third payment") {
    MatrixWorld world = new_world("owner");
    register_user(world, "a");
    register_user(world, "u1", "a");
    register_user(world, "u2", "a");

    const MatrixUser& a = world.users.at("a");
    CHECK(a.paid_out == eth("0.1"));  // two X3 + two X4 halves
    CHECK(a.partners_count == 2);
    CHECK(a.slot(Matrix::X3, 1).referrals.size() == 2);

    auto events = register_user(world, "u3", "a");
    // Third X3 referral fills the slot: it cycles, blocks, and the money
    // walks up to the owner. The X4 slot holds six, so "a" keeps that half.
    CHECK(events[0].matrix == Matrix::X3);
    CHECK(events[0].payee == "owner");
    CHECK(events[0].reason == PayReason::FALLBACK);
    CHECK(events[1].matrix == Matrix::X4);
    CHECK(events[1].payee == "a");
    CHECK(events[1].reason == PayReason::DIRECT);

    CHECK(a.partners_count == 3);
    CHECK(a.slot(Matrix::X3, 1).reinvest_count == 1);
    CHECK(a.slot(Matrix::X3, 1).referrals.empty());
    CHECK(a.slot(Matrix::X3, 1).blocked);
    CHECK(a.slot(Matrix::X4, 1).referrals.size() == 3);
    CHECK(a.paid_out == eth("0.125"));

    SUBCASE("payments route past the blocked slot") {
        auto more = register_user(world, "u4", "a");
        CHECK(more[0].payee == "owner");
        CHECK(more[0].reason == PayReason::FALLBACK);
        // The diverted referral is credited to the accepting slot instead.
        CHECK(world.users.at("owner").partners_count >= 2);
        CHECK(world.users.at("a").partners_count == 3);
    }
    SUBCASE("buying level 2 unblocks level 1 for good") {
        auto buy = buy_new_level(world, "a", Matrix::X3, 2);
        REQUIRE(buy.size() == 1);
        CHECK(buy[0].payee == "owner");
        CHECK(buy[0].amount == eth("0.05"));
        CHECK(buy[0].reason == PayReason::DIRECT);  // the owner is a's upline
        CHECK_FALSE(a.slot(Matrix::X3, 1).blocked);
        CHECK(a.slot(Matrix::X3, 1).never_block);
        CHECK(a.slot(Matrix::X3, 2).active);

        // The next full cycle reinvests without blocking: "a" keeps earning.
        register_user(world, "u5", "a");
        register_user(world, "u6", "a");
        auto filled = register_user(world, "u7", "a");
        CHECK(filled[0].payee == "a");
        CHECK(a.slot(Matrix::X3, 1).reinvest_count == 2);
        CHECK_FALSE(a.slot(Matrix::X3, 1).blocked);
    }
    check_partner_identity(world);
    check_conservation(world);
}

TEST_CASE("spillover lands on the nearest upline owning the level") {
    MatrixWorld world = new_world("owner");
    register_user(world, "a");
    register_user(world, "b", "a");
    register_user(world, "c", "b");
    buy_new_level(world, "a", Matrix::X3, 2);
    // "c" buys level 2; direct upline "b" never bought it, so the money
    // spills over to "a".
    auto events = buy_new_level(world, "c", Matrix::X3, 2);
    CHECK(events[0].payee == "a");
    CHECK(events[0].reason == PayReason::SPILLOVER);
    check_partner_identity(world);
}

TEST_CASE("call validation") {
    MatrixWorld world = new_world("owner");
    register_user(world, "a");
    auto expect = [&](MatrixSimError::Code code, auto&& fn) {
        try {
            fn();
            FAIL("expected error");
        } catch (const MatrixSimError& e) {
            CHECK(e.code() == code);
        }
    };
    expect(MatrixSimError::Code::ALREADY_REGISTERED, [&] { register_user(world, "a"); });
    expect(MatrixSimError::Code::BAD_AMOUNT,
           [&] { register_user(world, "b", "", eth("0.04")); });
    expect(MatrixSimError::Code::NOT_REGISTERED,
           [&] { buy_new_level(world, "ghost", Matrix::X3, 2); });
    expect(MatrixSimError::Code::LEVEL_RANGE, [&] { buy_new_level(world, "a", Matrix::X3, 13); });
    expect(MatrixSimError::Code::ALREADY_ACTIVE,
           [&] { buy_new_level(world, "a", Matrix::X4, 1); });
    expect(MatrixSimError::Code::NON_SEQUENTIAL_LEVEL,
           [&] { buy_new_level(world, "a", Matrix::X3, 3); });
    CHECK(world.calls == 1);  // rejected calls never count
}

TEST_CASE("random scenarios conserve money and keep the invariants") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
        MatrixWorld world = new_world("owner");
        auto ops = random_ops(seed, 40, 250);
        Amount owner_prev = 0;
        std::size_t step = 0;
        for (const auto& op : ops) {
            replay_scenario(world, {op}, true);
            const MatrixUser& o = world.users.at("owner");
            // The owner never spends, so their balance only grows.
            CHECK(o.paid_out - o.paid_in >= owner_prev);
            owner_prev = o.paid_out - o.paid_in;
            if (++step % 25 == 0) check_partner_identity(world);
        }
        check_partner_identity(world);
        check_level_prefix(world);
        check_conservation(world);

        // No payment was ever accepted by a blocked slot: re-derive every
        // payee's slot eligibility is impossible post hoc, but the ledger
        // identity above plus determinism pin the routing outcome.
        MatrixWorld replayed = new_world("owner");
        replay_scenario(replayed, ops, true);
        CHECK(state_hash(replayed) == state_hash(world));
    }
}

TEST_CASE("replay is strict unless asked to be lenient") {
    std::vector<ScenarioOp> ops{
        {"register", "a", "", Matrix::X3, 1},
        {"register", "a", "", Matrix::X3, 1},  // duplicate
        {"buy", "a", "", Matrix::X3, 2},
    };
    MatrixWorld lenient = new_world("owner");
    ReplayResult r = replay_scenario(lenient, ops, true);
    CHECK(r.accepted == 2);
    CHECK(r.rejected == 1);
    CHECK(r.events.size() == 3);

    MatrixWorld strict = new_world("owner");
    CHECK_THROWS_AS(replay_scenario(strict, ops, false), MatrixSimError);
}

TEST_CASE("profit report") {
    MatrixWorld world = new_world("owner");
    register_user(world, "a");
    ProfitReport report = profit_report(world);
    REQUIRE(report.nets.size() == 2);
    CHECK(report.nets[0].id == "owner");
    CHECK(report.nets[0].net == eth("0.05"));
    CHECK(report.nets[1].id == "a");
    CHECK(report.nets[1].net == -eth("0.05883"));
    CHECK(report.owner_net == eth("0.05"));
    CHECK(report.histogram.at("(0.01,0.1]") == 1);
    CHECK(report.histogram.at("(-0.1,-0.01]") == 1);
    CHECK(report.top_shares[0] == doctest::Approx(1.0));
    CHECK(report.top_shares[1] == 0.0);
    CHECK(report.spillover_fraction == 0.0);
    CHECK(report.loser_fraction == doctest::Approx(0.5));

    SUBCASE("the owner never loses on any random scenario") {
        for (std::uint64_t seed : {7ULL, 8ULL}) {
            MatrixWorld w = new_world("owner");
            replay_scenario(w, random_ops(seed, 30, 200), true);
            ProfitReport r = profit_report(w);
            CHECK(r.owner_net >= 0);
            CHECK(r.nets.front().net >= r.nets.back().net);
            std::size_t bucketed = 0;
            for (const auto& [label, n] : r.histogram) bucketed += n;
            CHECK(bucketed == w.users.size());
        }
    }
}

TEST_CASE("scenario files load and event logs export") {
    namespace fs = std::filesystem;
    std::string scenario = (fs::temp_directory_path() / "ct_test_scenario.jsonl").string();
    {
        std::ofstream out(scenario);
        out << R"({"op":"register","user":"a"})" << '\n';
        out << R"({"op":"register","user":"b","ref":"a"})" << '\n';
        out << R"({"op":"buy","user":"a","matrix":"X4","level":2})" << '\n';
    }
    auto ops = load_scenario_jsonl(scenario);
    REQUIRE(ops.size() == 3);
    CHECK(ops[0].op == "register");
    CHECK(ops[0].ref.empty());
    CHECK(ops[1].ref == "a");
    CHECK(ops[2].matrix == Matrix::X4);
    CHECK(ops[2].level == 2);
    fs::remove(scenario);

    MatrixWorld world = new_world("owner");
    ReplayResult r = replay_scenario(world, ops);
    std::string log = (fs::temp_directory_path() / "ct_test_events.csv").string();
    save_event_log_csv(r.events, log);
    std::ifstream in(log);
    std::string line;
    std::getline(in, line);
    CHECK(line == "seq,payer,payee,matrix,level,amount,reason");
    std::getline(in, line);
    CHECK(line == "1,a,owner,X3,1,0.025,DIRECT");
    fs::remove(log);
}
