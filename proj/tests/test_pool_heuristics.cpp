#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>

#include "chaintrace/cluster.hpp"
#include "chaintrace/pool_heuristics.hpp"
#include "chaintrace/synth.hpp"
#include "helpers.hpp"

using namespace chaintrace;
using namespace testutil;

namespace {

const Amount kFounder = parse_decimal("250.0001", 8);

/// O(n^2) exhaustive pairing: for every deposit/withdrawal pair of equal
/// value, the pair links iff the value occurs exactly once on each side and
/// the block gap fits.
std::set<std::pair<std::string, std::string>> round_trip_oracle(const Ledger& ledger,
                                                                std::uint64_t max_interval) {
    std::vector<const LedgerTx*> deposits, withdrawals;
    for (const auto& tx : ledger.txs()) {
        if (tx.pool_deposit() > 0) deposits.push_back(&tx);
        if (tx.pool_withdrawal() > 0) withdrawals.push_back(&tx);
    }
    std::set<std::pair<std::string, std::string>> links;
    for (const LedgerTx* d : deposits) {
        Amount v = d->pool_deposit();
        std::size_t same_d = 0, same_w = 0;
        for (const LedgerTx* x : deposits) same_d += x->pool_deposit() == v;
        const LedgerTx* match = nullptr;
        for (const LedgerTx* w : withdrawals)
            if (w->pool_withdrawal() == v) {
                ++same_w;
                match = w;
            }
        if (same_d != 1 || same_w != 1) continue;
        if (match->height <= d->height || match->height - d->height > max_interval) continue;
        links.emplace(d->txid, match->txid);
    }
    return links;
}

std::set<std::pair<std::string, std::string>> endpoints_of(const std::vector<LinkEvidence>& links) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& l : links) out.emplace(l.source.txid, l.target.txid);
    return out;
}

}  // namespace

TEST_CASE("founder withdrawals are flagged by exact value only") {
    std::vector<LedgerTx> txs{
        shield_tx("d1", 1, 10, {{"fdep", parse_decimal("249.9999", 8)}}),
        shield_tx("d2", 3, 30, {{"fdep", parse_decimal("300", 8)}}),
        deshield_tx("w1", 9, 90, {{"fw1", kFounder}}),
        deshield_tx("w2", 10, 100, {{"fw2", parse_decimal("250.0002", 8)}}),
        deshield_tx("w3", 16, 160, {{"fw3", kFounder}}),
    };
    FounderReport report = tag_founders(make_ledger(zec(), txs), {});
    REQUIRE(report.links.size() == 2);
    CHECK(report.links[0].kind == LinkKind::FOUNDER_VALUE);
    CHECK(report.links[0].value == kFounder);
    CHECK(report.tags.find({"ZEC", "fw1"}) != nullptr);
    CHECK(report.tags.find({"ZEC", "fw3"}) != nullptr);
    CHECK(report.tags.find({"ZEC", "fw2"}) == nullptr);

    REQUIRE(report.deposit_patterns.size() == 1);
    CHECK(report.deposit_patterns[0].address == "fdep");
    CHECK(report.deposit_patterns[0].signature_deposits == 1);
    CHECK(report.deposit_patterns[0].total_deposited == parse_decimal("549.9999", 8));
    CHECK(report.deposit_patterns[0].within_rotation_cap);
}

TEST_CASE("deposit pattern reports the rotation cap violation") {
    std::vector<LedgerTx> txs;
    Amount dep = parse_decimal("249.9999", 8);
    for (int k = 0; k < 178; ++k)  // 178 * 249.9999 = 44499.98... > 44272.5
        txs.push_back(shield_tx("d" + std::to_string(k), static_cast<std::uint64_t>(k + 1),
                                (k + 1) * 10, {{"rot", dep}}));
    FounderReport report = tag_founders(make_ledger(zec(), txs), {});
    REQUIRE(report.deposit_patterns.size() == 1);
    CHECK(report.deposit_patterns[0].signature_deposits == 178);
    CHECK_FALSE(report.deposit_patterns[0].within_rotation_cap);
}

TEST_CASE("miner payouts need >100 outputs and one pool tag") {
    auto payout = [](std::string txid, std::size_t outputs, bool pool) {
        std::vector<TxOutput> zout;
        if (pool) zout.push_back({"f2pool", 100});
        while (zout.size() < outputs)
            zout.push_back({"m" + std::to_string(zout.size()), 100});
        return deshield_tx(std::move(txid), 1, 10, std::move(zout));
    };
    TagMap pools;
    pools.assign({"ZEC", "f2pool"}, {"F2Pool", TagCategory::POOL});

    SUBCASE("150 outputs including the pool tag 149 miners") {
        Ledger ledger = make_ledger(zec(), {payout("p", 150, true)});
        MinerReport report = tag_miners(ledger, pools);
        REQUIRE(report.links.size() == 1);
        CHECK(report.links[0].kind == LinkKind::MINER_PAYOUT);
        CHECK(report.tags.size() == 149);
        CHECK(report.tags.find({"ZEC", "f2pool"}) == nullptr);
        CHECK(report.tags.find({"ZEC", "m5"}) != nullptr);
    }
    SUBCASE("99 outputs stay below the threshold") {
        Ledger ledger = make_ledger(zec(), {payout("p", 99, true)});
        CHECK(tag_miners(ledger, pools).links.empty());
    }
    SUBCASE("150 outputs without any pool tag are not a payout") {
        Ledger ledger = make_ledger(zec(), {payout("p", 150, false)});
        CHECK(tag_miners(ledger, pools).links.empty());
    }
    SUBCASE("synthetic payout stream matches the injected ground truth") {
        GenParams params;
        params.n_entities = 4;
        params.txs_per_entity = 2;
        params.shift_rate = 0;
        params.miner_fanout = 130;
        params.chains = {"BTC", "ZEC"};
        SyntheticWorld world = generate(params, 9);
        MinerReport report = tag_miners(world.ledgers.at("ZEC"), world.tags);
        ScoreReport s = score(report.links, world.truth);
        for (const auto& k : s.kinds)
            if (k.kind == LinkKind::MINER_PAYOUT) {
                CHECK(k.precision == 1.0);
                CHECK(k.recall == 1.0);
                CHECK(k.truth == 1);
            }
    }
}

TEST_CASE("unique-value round trips") {
    SUBCASE("a single matching later withdrawal at gap 10 links") {
        Amount v = parse_decimal("1.23456789", 8);
        std::vector<LedgerTx> txs{shield_tx("d", 5, 50, {{"a", v}}),
                                  deshield_tx("w", 15, 150, {{"b", v}})};
        auto links = round_trip_unique(make_ledger(zec(), txs), 10);
        REQUIRE(links.size() == 1);
        CHECK(links[0].source.txid == "d");
        CHECK(links[0].target.txid == "w");
        CHECK(links[0].value == v);
        // One block farther is outside the interval.
        std::vector<LedgerTx> far{shield_tx("d", 5, 50, {{"a", v}}),
                                  deshield_tx("w", 16, 160, {{"b", v}})};
        CHECK(round_trip_unique(make_ledger(zec(), far), 10).empty());
    }
    SUBCASE("a second deposit of the value kills the link") {
        Amount v = parse_decimal("1.2345", 8);
        std::vector<LedgerTx> txs{shield_tx("d1", 1, 10, {{"a", v}}),
                                  shield_tx("d2", 2, 20, {{"c", v}}),
                                  deshield_tx("w", 3, 30, {{"b", v}})};
        CHECK(round_trip_unique(make_ledger(zec(), txs), 100).empty());
    }
    SUBCASE("random ledgers equal the O(n^2) pairing oracle at every interval") {
        for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
            Ledger ledger = random_zcash_ledger(seed, 2500, 600, zec());
            for (std::uint64_t interval : {1, 10, 30, 60, 100}) {
                auto links = round_trip_unique(ledger, interval);
                CHECK(endpoints_of(links) == round_trip_oracle(ledger, interval));
                auto serial = round_trip_unique_serial(ledger, interval);
                CHECK(endpoints_of(serial) == endpoints_of(links));
            }
        }
    }
    SUBCASE("the interval sweep is monotone and consistent with point queries") {
        Ledger ledger = random_zcash_ledger(4, 3000, 500, zec());
        auto curve = round_trip_sweep(ledger);
        REQUIRE(curve.size() == 100);
        for (std::size_t i = 0; i < curve.size(); ++i) {
            CHECK(curve[i].max_interval == i + 1);
            if (i > 0) {
                CHECK(curve[i].links >= curve[i - 1].links);
                CHECK(curve[i].linked_value >= curve[i - 1].linked_value);
            }
        }
        for (std::size_t at : {0, 29, 99}) {
            auto links = round_trip_unique(ledger, curve[at].max_interval);
            Amount total = 0;
            for (const auto& l : links) total += l.value;
            CHECK(links.size() == curve[at].links);
            CHECK(total == curve[at].linked_value);
        }
    }
}

TEST_CASE("anonymity reduction accounting") {
    std::vector<LedgerTx> txs{
        shield_tx("d", 1, 10, {{"a", 1000}}),
        deshield_tx("w1", 2, 20, {{"f", 400}}),
        deshield_tx("w2", 3, 30, {{"m", 350}}),
        deshield_tx("w3", 4, 40, {{"o", 250}}),
    };
    Ledger ledger = make_ledger(zec(), txs);

    SUBCASE("no links means zero reduction") {
        AnonymityReport report = anonymity_reduction(ledger, {});
        CHECK(report.total_withdrawals == 3);
        CHECK(report.linked_value_share == 0.0);
        CHECK(report.classes.empty());
    }
    SUBCASE("class shares are value-weighted and exclusive") {
        LinkEvidence founder;
        founder.kind = LinkKind::FOUNDER_VALUE;
        founder.target.txid = "w1";
        founder.value = 400;
        LinkEvidence miner;
        miner.kind = LinkKind::MINER_PAYOUT;
        miner.target.txid = "w2";
        miner.value = 350;
        LinkEvidence other;
        other.kind = LinkKind::ROUND_TRIP_UNIQUE;
        other.target.txid = "w2";  // OTHER never demotes a specific class
        other.value = 350;
        AnonymityReport report = anonymity_reduction(ledger, {founder, miner, other});
        CHECK(report.linked_value_share == doctest::Approx(0.75));
        std::map<PoolAttribution, double> shares;
        for (const auto& c : report.classes) shares[c.attribution] = c.value_share;
        CHECK(shares[PoolAttribution::FOUNDER] == doctest::Approx(0.4));
        CHECK(shares[PoolAttribution::MINER] == doctest::Approx(0.35));
        CHECK(shares.count(PoolAttribution::OTHER) == 0);
    }
    SUBCASE("all withdrawals linked means 100%") {
        std::vector<LinkEvidence> links;
        for (const char* txid : {"w1", "w2", "w3"}) {
            LinkEvidence l;
            l.kind = LinkKind::ROUND_TRIP_UNIQUE;
            l.target.txid = txid;
            links.push_back(l);
        }
        CHECK(anonymity_reduction(ledger, links).linked_value_share == doctest::Approx(1.0));
    }
}

TEST_CASE("deposit-pattern suspect filter") {
    // One cluster per address (no co-spends needed for these fixtures).
    auto singleton_clusters = [](const std::vector<std::string>& addrs) {
        std::vector<std::pair<Address, std::size_t>> roots;
        for (std::size_t i = 0; i < addrs.size(); ++i)
            roots.push_back({{"ZEC", addrs[i]}, i});
        return ClusterSet::from_components(roots);
    };
    const std::int64_t may2017 = 1494000000;  // 2017-05-05 UTC

    SUBCASE("a fresh single-address cluster depositing 100.4 once is flagged") {
        std::vector<LedgerTx> txs{
            shield_tx("d", 1, may2017, {{"fresh", parse_decimal("100.4", 8)}})};
        auto flags = tsb_filter(make_ledger(zec(), txs), singleton_clusters({"fresh"}));
        REQUIRE(flags.size() == 1);
        CHECK(flags[0].month == "2017-05");
        CHECK(flags[0].matched_amount == parse_decimal("100", 8));
        CHECK(flags[0].month_total == parse_decimal("100.4", 8));
    }
    SUBCASE("a cluster that ever received from the pool is exonerated") {
        std::vector<LedgerTx> txs{
            deshield_tx("w", 1, may2017 - 100, {{"tainted", parse_decimal("3", 8)}}),
            shield_tx("d", 2, may2017, {{"tainted", parse_decimal("100.4", 8)}})};
        CHECK(tsb_filter(make_ledger(zec(), txs), singleton_clusters({"tainted"})).empty());
    }
    SUBCASE("per-tx tolerance is +-5, cluster-month tolerance +-1") {
        std::vector<LedgerTx> txs{
            shield_tx("d", 1, may2017, {{"near", parse_decimal("104.9", 8)}})};
        // 104.9 is within 5 of 100 but the month total misses the +-1 band.
        CHECK(tsb_filter(make_ledger(zec(), txs), singleton_clusters({"near"})).empty());
        std::vector<LedgerTx> ok{
            shield_tx("d", 1, may2017, {{"near", parse_decimal("100.9", 8)}})};
        CHECK(tsb_filter(make_ledger(zec(), ok), singleton_clusters({"near"})).size() == 1);
    }
    SUBCASE("busy addresses exceed the history cap") {
        std::vector<LedgerTx> txs;
        for (int k = 0; k < 251; ++k)
            txs.push_back(coinbase_tx("cb" + std::to_string(k),
                                      static_cast<std::uint64_t>(k + 1), may2017 - 10000 + k,
                                      {{"busy", 100}}));
        txs.push_back(shield_tx("d", 300, may2017, {{"busy", parse_decimal("100.4", 8)}}));
        CHECK(tsb_filter(make_ledger(zec(), txs), singleton_clusters({"busy"})).empty());
    }
    SUBCASE("raising tx_tol is monotone-increasing, lowering max_history decreasing") {
        std::vector<LedgerTx> txs{
            shield_tx("d1", 1, may2017, {{"edge", parse_decimal("100.8", 8)}}),
            coinbase_tx("cb", 2, may2017 + 10, {{"edge", 100}}),
        };
        Ledger ledger = make_ledger(zec(), txs);
        ClusterSet clusters = singleton_clusters({"edge"});
        TsbParams tight = TsbParams::defaults();
        tight.tx_tol = parse_decimal("0.5", 8);
        TsbParams loose = TsbParams::defaults();
        CHECK(tsb_filter(ledger, clusters, tight).size() <=
              tsb_filter(ledger, clusters, loose).size());
        TsbParams short_history = TsbParams::defaults();
        short_history.max_history = 1;
        CHECK(tsb_filter(ledger, clusters, short_history).size() <=
              tsb_filter(ledger, clusters, loose).size());
        CHECK(tsb_filter(ledger, clusters, loose).size() == 1);
        CHECK(tsb_filter(ledger, clusters, short_history).empty());
    }
}

TEST_CASE("Dash mixing-transaction shape detection") {
    Amount one = parse_decimal("1", 8);
    auto tx_with = [](std::size_t inputs, std::vector<Amount> outputs) {
        LedgerTx tx;
        tx.txid = "t";
        tx.height = 1;
        for (std::size_t i = 0; i < inputs; ++i)
            tx.vin.push_back({{"src" + std::to_string(i), 0}, "in" + std::to_string(i), 0});
        std::size_t k = 0;
        for (Amount v : outputs) tx.vout.push_back({"out" + std::to_string(k++), v});
        return tx;
    };

    CHECK(detect_coinjoin(tx_with(5, {one, one, one, one, parse_decimal("0.0473", 8)})));
    CHECK_FALSE(detect_coinjoin(tx_with(2, {one, one, one})));  // input floor
    CHECK_FALSE(detect_coinjoin(tx_with(3, {one, parse_decimal("10", 8), one})));
    CHECK_FALSE(detect_coinjoin(tx_with(3, {one, parse_decimal("0.3", 8),
                                            parse_decimal("0.7", 8)})));  // two nonstandard
    CHECK(detect_coinjoin(tx_with(3, {parse_decimal("0.01", 8), parse_decimal("0.01", 8)})));

    SUBCASE("invariant under output permutation") {
        LedgerTx tx = tx_with(4, {one, parse_decimal("0.05", 8), one, one});
        bool base = detect_coinjoin(tx);
        std::sort(tx.vout.begin(), tx.vout.end(),
                  [](const TxOutput& a, const TxOutput& b) { return a.value < b.value; });
        CHECK(detect_coinjoin(tx) == base);
        std::reverse(tx.vout.begin(), tx.vout.end());
        CHECK(detect_coinjoin(tx) == base);
    }
}

TEST_CASE("UTC month bucketing") {
    CHECK(utc_month(0) == "1970-01");
    CHECK(utc_month(1494000000) == "2017-05");
    CHECK(utc_month(1493596800) == "2017-05");  // 2017-05-01 00:00:00
    CHECK(utc_month(1493596799) == "2017-04");
}
