#include "chaintrace/pool_heuristics.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <map>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "chaintrace/classify.hpp"

namespace chaintrace {

const char* to_string(PoolAttribution a) {
    switch (a) {
        case PoolAttribution::FOUNDER: return "founder";
        case PoolAttribution::MINER: return "miner";
        case PoolAttribution::OTHER: return "other";
        case PoolAttribution::UNKNOWN: return "unknown";
    }
    return "?";
}

std::vector<PoolEvent> pool_events(const Ledger& ledger) {
    std::vector<PoolEvent> events;
    for (const auto& tx : ledger.txs()) {
        Amount dep = tx.pool_deposit();
        Amount wd = tx.pool_withdrawal();
        if (dep > 0) {
            PoolEvent e;
            e.tx = &tx;
            e.direction = PoolDirection::DEPOSIT;
            e.value = dep;
            for (const auto& js : tx.joinsplits)
                for (const auto& z : js.zin)
                    if (!z.address.empty()) e.actors.push_back(z.address);
            events.push_back(std::move(e));
        }
        if (wd > 0) {
            PoolEvent e;
            e.tx = &tx;
            e.direction = PoolDirection::WITHDRAWAL;
            e.value = wd;
            for (const auto& js : tx.joinsplits)
                for (const auto& z : js.zout)
                    if (!z.address.empty()) e.actors.push_back(z.address);
            events.push_back(std::move(e));
        }
    }
    return events;
}

FounderReport tag_founders(const Ledger& ledger,
                           const std::unordered_set<std::string>& known_founders,
                           Amount withdrawal_value, Amount deposit_value, Amount rotation_cap) {
    FounderReport report;
    const std::string& chain = ledger.chain().symbol;

    struct DepositStat {
        std::size_t signature = 0;
        Amount total = 0;
    };
    std::map<std::string, DepositStat> deposit_stats;

    for (const auto& event : pool_events(ledger)) {
        if (event.direction == PoolDirection::WITHDRAWAL) {
            if (event.value != withdrawal_value) continue;
            LinkEvidence link;
            link.kind = LinkKind::FOUNDER_VALUE;
            link.params["withdrawal_value"] =
                format_decimal(withdrawal_value, ledger.chain().decimals);
            link.target.txid = event.tx->txid;
            for (const auto& a : event.actors) {
                link.target.addresses.push_back({chain, a});
                report.tags.assign({chain, a}, {"founder", TagCategory::FOUNDER});
            }
            link.value = event.value;
            link.canonicalize();
            report.links.push_back(std::move(link));
        } else {
            for (const auto& a : event.actors) {
                auto& stat = deposit_stats[a];
                stat.total += event.value;
                if (event.value == deposit_value) ++stat.signature;
            }
        }
    }

    for (const auto& [addr, stat] : deposit_stats) {
        if (stat.signature == 0 && !known_founders.count(addr)) continue;
        report.deposit_patterns.push_back(
            {addr, stat.signature, stat.total, stat.total <= rotation_cap});
    }
    // Known founders that never deposited still show up with zeroes.
    for (const auto& addr : known_founders)
        if (!deposit_stats.count(addr)) report.deposit_patterns.push_back({addr, 0, 0, true});
    std::sort(report.deposit_patterns.begin(), report.deposit_patterns.end(),
              [](const auto& a, const auto& b) { return a.address < b.address; });
    return report;
}

MinerReport tag_miners(const Ledger& ledger, const TagMap& pools, std::size_t min_outputs) {
    MinerReport report;
    const std::string& chain = ledger.chain().symbol;
    for (const auto& event : pool_events(ledger)) {
        if (event.direction != PoolDirection::WITHDRAWAL) continue;
        if (event.actors.size() <= min_outputs) continue;
        std::string pool_label;
        for (const auto& a : event.actors) {
            const Tag* tag = pools.find({chain, a});
            if (tag && tag->category == TagCategory::POOL) {
                pool_label = tag->label;
                break;
            }
        }
        if (pool_label.empty()) continue;
        LinkEvidence link;
        link.kind = LinkKind::MINER_PAYOUT;
        link.params["min_outputs"] = std::to_string(min_outputs);
        link.params["pool"] = pool_label;
        link.target.txid = event.tx->txid;
        link.value = event.value;
        for (const auto& a : event.actors) {
            link.target.addresses.push_back({chain, a});
            const Tag* tag = pools.find({chain, a});
            if (!tag || tag->category != TagCategory::POOL)
                report.tags.assign({chain, a}, {"miner:" + pool_label, TagCategory::MINER});
        }
        link.canonicalize();
        report.links.push_back(std::move(link));
    }
    return report;
}

namespace {

struct ValueOccurrence {
    std::size_t deposits = 0;
    std::size_t withdrawals = 0;
    const LedgerTx* deposit_tx = nullptr;
    const LedgerTx* withdrawal_tx = nullptr;
};

struct AmountKeyHash {
    std::size_t operator()(Amount v) const { return std::hash<std::int64_t>{}(v); }
};

using ValueMap = std::unordered_map<Amount, ValueOccurrence, AmountKeyHash>;

void record_event(ValueMap& map, const PoolEvent& e) {
    auto& occ = map[e.value];
    if (e.direction == PoolDirection::DEPOSIT) {
        ++occ.deposits;
        occ.deposit_tx = e.tx;
    } else {
        ++occ.withdrawals;
        occ.withdrawal_tx = e.tx;
    }
}

LinkEvidence make_round_trip_link(const Ledger& ledger, const ValueOccurrence& occ,
                                  std::uint64_t max_interval, Amount value) {
    const std::string& chain = ledger.chain().symbol;
    LinkEvidence link;
    link.kind = LinkKind::ROUND_TRIP_UNIQUE;
    link.params["max_interval"] = std::to_string(max_interval);
    link.source.txid = occ.deposit_tx->txid;
    link.target.txid = occ.withdrawal_tx->txid;
    for (const auto& js : occ.deposit_tx->joinsplits)
        for (const auto& z : js.zin)
            if (!z.address.empty()) link.source.addresses.push_back({chain, z.address});
    for (const auto& js : occ.withdrawal_tx->joinsplits)
        for (const auto& z : js.zout)
            if (!z.address.empty()) link.target.addresses.push_back({chain, z.address});
    link.value = value;
    link.canonicalize();
    return link;
}

std::vector<LinkEvidence> links_from_value_map(const Ledger& ledger, const ValueMap& map,
                                               std::uint64_t max_interval) {
    std::vector<LinkEvidence> links;
    for (const auto& [value, occ] : map) {
        if (occ.deposits != 1 || occ.withdrawals != 1) continue;
        if (occ.withdrawal_tx->height <= occ.deposit_tx->height) continue;
        if (occ.withdrawal_tx->height - occ.deposit_tx->height > max_interval) continue;
        links.push_back(make_round_trip_link(ledger, occ, max_interval, value));
    }
    std::sort(links.begin(), links.end(), [](const LinkEvidence& a, const LinkEvidence& b) {
        return a.source.txid < b.source.txid;
    });
    return links;
}

}  // namespace

std::vector<LinkEvidence> round_trip_unique_serial(const Ledger& ledger,
                                                   std::uint64_t max_interval) {
    ValueMap map;
    for (const auto& e : pool_events(ledger)) record_event(map, e);
    return links_from_value_map(ledger, map, max_interval);
}

std::vector<LinkEvidence> round_trip_unique(const Ledger& ledger, std::uint64_t max_interval) {
#ifdef _OPENMP
    const auto& txs = ledger.txs();
    int threads = omp_get_max_threads();
    if (threads > 1 && txs.size() > 4096) {
        // Per-thread value histograms over tx shards, merged by summing
        // occurrence counts. A value's uniqueness is only decidable after
        // the merge, so per-shard results never leak into the link set.
        std::vector<ValueMap> maps(static_cast<std::size_t>(threads));
#pragma omp parallel num_threads(threads)
        {
            int t = omp_get_thread_num();
            std::size_t per = (txs.size() + static_cast<std::size_t>(threads) - 1) /
                              static_cast<std::size_t>(threads);
            std::size_t lo = static_cast<std::size_t>(t) * per;
            std::size_t hi = std::min(txs.size(), lo + per);
            auto& local = maps[static_cast<std::size_t>(t)];
            for (std::size_t i = lo; i < hi; ++i) {
                const auto& tx = txs[i];
                Amount dep = tx.pool_deposit();
                Amount wd = tx.pool_withdrawal();
                if (dep > 0) {
                    auto& occ = local[dep];
                    ++occ.deposits;
                    occ.deposit_tx = &tx;
                }
                if (wd > 0) {
                    auto& occ = local[wd];
                    ++occ.withdrawals;
                    occ.withdrawal_tx = &tx;
                }
            }
        }
        ValueMap merged = std::move(maps[0]);
        for (int t = 1; t < threads; ++t) {
            for (const auto& [value, occ] : maps[static_cast<std::size_t>(t)]) {
                auto& dst = merged[value];
                dst.deposits += occ.deposits;
                dst.withdrawals += occ.withdrawals;
                if (occ.deposit_tx) dst.deposit_tx = occ.deposit_tx;
                if (occ.withdrawal_tx) dst.withdrawal_tx = occ.withdrawal_tx;
            }
        }
        return links_from_value_map(ledger, merged, max_interval);
    }
#endif
    return round_trip_unique_serial(ledger, max_interval);
}

std::vector<IntervalSweepPoint> round_trip_sweep(const Ledger& ledger, std::uint64_t limit) {
    ValueMap map;
    for (const auto& e : pool_events(ledger)) record_event(map, e);
    // Unique-value pairs are interval-independent; bucket them by gap.
    std::vector<std::pair<std::uint64_t, Amount>> gaps;
    for (const auto& [value, occ] : map) {
        if (occ.deposits != 1 || occ.withdrawals != 1) continue;
        if (occ.withdrawal_tx->height <= occ.deposit_tx->height) continue;
        gaps.emplace_back(occ.withdrawal_tx->height - occ.deposit_tx->height, value);
    }
    std::sort(gaps.begin(), gaps.end());
    std::vector<IntervalSweepPoint> curve;
    std::size_t idx = 0;
    std::size_t count = 0;
    Amount total = 0;
    for (std::uint64_t interval = 1; interval <= limit; ++interval) {
        while (idx < gaps.size() && gaps[idx].first <= interval) {
            ++count;
            total += gaps[idx].second;
            ++idx;
        }
        curve.push_back({interval, count, total});
    }
    return curve;
}

AnonymityReport anonymity_reduction(const Ledger& ledger, const std::vector<LinkEvidence>& links) {
    // Attribution per withdrawal txid. FOUNDER/MINER are exclusive; any
    // other link kind targeting a withdrawal counts as OTHER.
    std::unordered_map<std::string, PoolAttribution> attribution;
    for (const auto& link : links) {
        const std::string& txid = link.target.txid;
        if (txid.empty()) continue;
        PoolAttribution a = PoolAttribution::OTHER;
        if (link.kind == LinkKind::FOUNDER_VALUE) a = PoolAttribution::FOUNDER;
        else if (link.kind == LinkKind::MINER_PAYOUT) a = PoolAttribution::MINER;
        auto it = attribution.find(txid);
        if (it == attribution.end()) {
            attribution.emplace(txid, a);
        } else if (it->second == PoolAttribution::OTHER && a != PoolAttribution::OTHER) {
            it->second = a;  // specific attribution wins over OTHER
        }
    }

    AnonymityReport report;
    std::map<PoolAttribution, std::pair<std::size_t, Amount>> per_class;
    for (const auto& event : pool_events(ledger)) {
        if (event.direction != PoolDirection::WITHDRAWAL) continue;
        ++report.total_withdrawals;
        report.total_withdrawn += event.value;
        auto it = attribution.find(event.tx->txid);
        if (it == attribution.end()) continue;
        auto& [count, value] = per_class[it->second];
        ++count;
        value += event.value;
    }
    Amount linked_total = 0;
    for (const auto& [attr, cv] : per_class) {
        AnonymityReport::ClassShare share;
        share.attribution = attr;
        share.withdrawals = cv.first;
        share.value = cv.second;
        share.value_share = report.total_withdrawn == 0
                                ? 0.0
                                : static_cast<double>(cv.second) /
                                      static_cast<double>(report.total_withdrawn);
        linked_total += cv.second;
        report.classes.push_back(share);
    }
    report.linked_value_share = report.total_withdrawn == 0
                                    ? 0.0
                                    : static_cast<double>(linked_total) /
                                          static_cast<double>(report.total_withdrawn);
    return report;
}

std::string utc_month(std::int64_t ts) {
    std::time_t t = static_cast<std::time_t>(ts);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", tm.tm_year + 1900, tm.tm_mon + 1);
    return buf;
}

TsbParams TsbParams::defaults() {
    TsbParams p;
    p.amounts = {10000000000, 20000000000, 40000000000, 50000000000};  // 100/200/400/500 ZEC
    return p;
}

std::vector<TsbFlag> tsb_filter(const Ledger& ledger, const ClusterSet& clusters,
                                const TsbParams& params) {
    const std::string& chain = ledger.chain().symbol;

    // Addresses that ever received from the pool.
    std::unordered_set<std::string> pool_recipients;
    for (const auto& event : pool_events(ledger))
        if (event.direction == PoolDirection::WITHDRAWAL)
            pool_recipients.insert(event.actors.begin(), event.actors.end());

    auto near = [&](Amount v, Amount tol) -> std::optional<Amount> {
        for (Amount a : params.amounts) {
            Amount diff = v > a ? v - a : a - v;
            if (diff <= tol) return a;
        }
        return std::nullopt;
    };

    struct MonthState {
        Amount total = 0;
        bool has_matching_tx = false;
    };
    std::map<std::pair<std::uint32_t, std::string>, MonthState> months;

    for (const auto& event : pool_events(ledger)) {
        if (event.direction != PoolDirection::DEPOSIT || event.actors.empty()) continue;
        auto cluster = clusters.cluster_of({chain, event.actors.front()});
        if (!cluster) continue;
        auto& state = months[{*cluster, utc_month(event.tx->timestamp)}];
        state.total += event.value;
        if (near(event.value, params.tx_tol)) state.has_matching_tx = true;
    }

    std::vector<TsbFlag> flags;
    for (const auto& [key, state] : months) {
        const auto& [cluster_id, month] = key;
        if (!state.has_matching_tx) continue;
        auto matched = near(state.total, params.cluster_tol);
        if (!matched) continue;
        bool eligible = true;
        for (const auto& member : clusters.members(cluster_id)) {
            if (pool_recipients.count(member.value) ||
                ledger.by_address(member.value).size() > params.max_history) {
                eligible = false;
                break;
            }
        }
        if (!eligible) continue;
        flags.push_back({cluster_id, month, *matched, state.total});
    }
    return flags;
}

bool detect_coinjoin(const LedgerTx& tx, const std::set<Amount>& denominations) {
    if (tx.vin.size() < 3) return false;
    Amount standard_value = -1;
    std::size_t standard = 0;
    std::size_t nonstandard = 0;
    for (const auto& out : tx.vout) {
        if (denominations.count(out.value)) {
            if (standard_value == -1) standard_value = out.value;
            if (out.value != standard_value) return false;  // two distinct denominations
            ++standard;
        } else {
            ++nonstandard;
        }
    }
    // A mix needs at least two uniform outputs; one nonstandard output at
    // most (the fee absorber).
    return standard >= 2 && nonstandard <= 1;
}

}  // namespace chaintrace
