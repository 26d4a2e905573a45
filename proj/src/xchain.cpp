#include "chaintrace/xchain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "chaintrace/classify.hpp"
#include "chaintrace/cluster.hpp"

namespace chaintrace {

WindowParams::Window WindowParams::get(const std::string& chain) const {
    auto it = per_chain.find(chain);
    if (it == per_chain.end()) return {0, 0};
    return it->second;
}

void WindowParams::set(const std::string& chain, std::uint64_t before, std::uint64_t after) {
    per_chain[chain] = {before, after};
}

WindowParams WindowParams::defaults() {
    WindowParams w;
    w.set("BTC", 0, 1);
    w.set("BCH", 9, 4);
    w.set("DASH", 5, 5);
    w.set("DOGE", 1, 4);
    w.set("ETH", 5, 0);
    w.set("ETC", 5, 0);
    w.set("LTC", 1, 2);
    w.set("ZEC", 1, 3);
    return w;
}

void FixtureOracle::add(ShiftStatus status) {
    table_[status.deposit_address] = std::move(status);
}

std::optional<ShiftStatus> FixtureOracle::query(const std::string& deposit_address) const {
    auto it = table_.find(deposit_address);
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

namespace {

const char* to_string(ShiftState s) {
    switch (s) {
        case ShiftState::COMPLETE: return "complete";
        case ShiftState::ERROR: return "error";
        case ShiftState::NO_DEPOSITS: return "no_deposits";
    }
    return "?";
}

ShiftState shift_state_from_string(const std::string& s) {
    if (s == "complete") return ShiftState::COMPLETE;
    if (s == "no_deposits") return ShiftState::NO_DEPOSITS;
    return ShiftState::ERROR;
}

int chain_decimals(const ChainRegistry& chains, const std::string& symbol) {
    const ChainId* c = chains.find(symbol);
    return c ? c->decimals : 8;
}

}  // namespace

FixtureOracle FixtureOracle::load_csv(const std::string& path, const ChainRegistry& chains) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open oracle fixture: " + path);
    FixtureOracle oracle;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.rfind("addr_s,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string addr, status, withdraw, in_coin, in_type, out_coin, out_type, out_txid;
        if (!std::getline(ss, addr, ',') || !std::getline(ss, status, ',') ||
            !std::getline(ss, withdraw, ',') || !std::getline(ss, in_coin, ',') ||
            !std::getline(ss, in_type, ',') || !std::getline(ss, out_coin, ',') ||
            !std::getline(ss, out_type, ',') || !std::getline(ss, out_txid))
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad oracle row");
        ShiftStatus st;
        st.deposit_address = addr;
        st.status = shift_state_from_string(status);
        st.withdraw_address = withdraw;
        st.in_type = in_type;
        st.out_type = out_type;
        st.in_coin = in_coin.empty() ? 0 : parse_decimal(in_coin, chain_decimals(chains, in_type));
        st.out_coin =
            out_coin.empty() ? 0 : parse_decimal(out_coin, chain_decimals(chains, out_type));
        st.out_txid = out_txid;
        oracle.add(std::move(st));
    }
    return oracle;
}

void FixtureOracle::save_csv(const std::string& path, const ChainRegistry& chains) const {
    std::ofstream out(path);
    out << "addr_s,status,withdraw,in_coin,in_type,out_coin,out_type,out_txid\n";
    std::vector<const ShiftStatus*> rows;
    rows.reserve(table_.size());
    for (const auto& [addr, st] : table_) rows.push_back(&st);
    std::sort(rows.begin(), rows.end(), [](const ShiftStatus* a, const ShiftStatus* b) {
        return a->deposit_address < b->deposit_address;
    });
    for (const ShiftStatus* st : rows)
        out << st->deposit_address << ',' << to_string(st->status) << ',' << st->withdraw_address
            << ',' << format_decimal(st->in_coin, chain_decimals(chains, st->in_type)) << ','
            << st->in_type << ','
            << format_decimal(st->out_coin, chain_decimals(chains, st->out_type)) << ','
            << st->out_type << ',' << st->out_txid << '\n';
}

Phase1Result phase1_basic(const ShiftRecord& shift, const LedgerMap& ledgers,
                          const WindowParams& windows) {
    auto it = ledgers.find(shift.cur_in);
    if (it == ledgers.end())
        throw XchainError(XchainError::Code::CHAIN_MISSING, "no ledger for " + shift.cur_in);
    const Ledger& ledger = it->second;

    Phase1Result result;
    auto anchor = ledger.height_closest_to(shift.timestamp);
    if (!anchor) return result;
    result.anchor_height = *anchor;
    auto window = windows.get(shift.cur_in);
    std::uint64_t lo = *anchor >= window.before ? *anchor - window.before : 0;
    std::uint64_t hi = *anchor + window.after;

    for (const LedgerTx* tx : ledger.in_height_range(lo, hi)) {
        if (tx->xfer) {
            if (tx->xfer->value == shift.amount)
                result.candidates.push_back({tx, tx->xfer->to});
        } else {
            std::set<std::string> seen;
            for (const auto& out : tx->vout)
                if (out.value == shift.amount && seen.insert(out.address).second)
                    result.candidates.push_back({tx, out.address});
        }
    }
    result.hit_class = result.candidates.empty()
                           ? HitClass::ZERO_HITS
                           : (result.candidates.size() == 1 ? HitClass::SINGLE_HIT
                                                            : HitClass::MULTI_HIT);
    return result;
}

std::optional<ResolvedShift> phase1_augmented(const ShiftRecord& shift,
                                              const Phase1Result& candidates,
                                              const ShiftOracle& oracle) {
    std::vector<std::pair<const Phase1Candidate*, ShiftStatus>> confirmed;
    for (const auto& cand : candidates.candidates) {
        auto status = oracle.query(cand.recipient);
        if (!status || status->status != ShiftState::COMPLETE) continue;
        // Re-used deposit addresses return the latest record; a mismatch on
        // pair or amount means this answer belongs to another shift.
        if (status->in_type != shift.cur_in || status->out_type != shift.cur_out) continue;
        if (status->in_coin != shift.amount) continue;
        confirmed.emplace_back(&cand, *status);
    }
    if (confirmed.empty()) return std::nullopt;
    std::set<std::string> txids;
    for (const auto& [cand, status] : confirmed) txids.insert(cand->tx->txid);
    if (txids.size() > 1)
        throw XchainError(XchainError::Code::AMBIGUOUS,
                          "shift " + shift.id + ": oracle confirmed " +
                              std::to_string(txids.size()) + " distinct deposit txs");
    ResolvedShift resolved;
    resolved.shift = shift;
    resolved.deposit_tx = confirmed.front().first->tx;
    resolved.status = confirmed.front().second;
    return resolved;
}

std::vector<const LedgerTx*> phase2_estimate(const ShiftRecord& shift, const Ledger& ledger_out,
                                             double rate, Amount fee, double tol,
                                             const WindowParams& windows) {
    std::vector<const LedgerTx*> out;
    auto anchor = ledger_out.height_closest_to(shift.timestamp);
    if (!anchor) return out;
    auto window = windows.get(ledger_out.chain().symbol);
    std::uint64_t lo = *anchor >= window.before ? *anchor - window.before : 0;
    std::uint64_t hi = *anchor + window.after;

    double expected = static_cast<double>(shift.amount) * rate - static_cast<double>(fee);
    if (expected <= 0) return out;
    double band = expected * tol;
    auto in_band = [&](Amount v) {
        return std::abs(static_cast<double>(v) - expected) <= band;
    };
    for (const LedgerTx* tx : ledger_out.in_height_range(lo, hi)) {
        bool hit = false;
        if (tx->xfer) {
            hit = in_band(tx->xfer->value);
        } else {
            for (const auto& o : tx->vout)
                if (in_band(o.value)) { hit = true; break; }
        }
        if (hit) out.push_back(tx);
    }
    return out;
}

namespace {

std::vector<Address> deposit_inputs(const ResolvedShift& s) {
    if (s.deposit_tx->xfer) return {{s.shift.cur_in, s.deposit_tx->xfer->from}};
    return input_addresses(*s.deposit_tx, s.shift.cur_in);
}

}  // namespace

std::vector<LinkEvidence> detect_pass_through(const std::vector<ResolvedShift>& resolved) {
    std::vector<LinkEvidence> links;
    links.reserve(resolved.size());
    for (const auto& s : resolved) {
        LinkEvidence link;
        link.kind = LinkKind::PASS_THROUGH;
        link.params["shift_id"] = s.shift.id;
        link.source.txid = s.deposit_tx->txid;
        link.source.addresses = deposit_inputs(s);
        link.target.txid = s.status.out_txid;
        link.target.addresses = {{s.shift.cur_out, s.status.withdraw_address}};
        link.value = s.shift.amount;
        link.canonicalize();
        links.push_back(std::move(link));
    }
    return links;
}

namespace {

bool within_relative(Amount value, Amount reference, double tol) {
    if (reference <= 0) return false;
    double diff = std::abs(static_cast<double>(value) - static_cast<double>(reference));
    return diff <= tol * static_cast<double>(reference);
}

/// Index of resolved shifts by currency pair, time-ordered.
struct PairIndex {
    std::map<std::pair<std::string, std::string>, std::vector<const ResolvedShift*>> groups;

    explicit PairIndex(const std::vector<ResolvedShift>& resolved) {
        for (const auto& s : resolved)
            groups[{s.shift.cur_in, s.shift.cur_out}].push_back(&s);
        for (auto& [pair, v] : groups)
            std::sort(v.begin(), v.end(), [](const ResolvedShift* a, const ResolvedShift* b) {
                if (a->shift.timestamp != b->shift.timestamp)
                    return a->shift.timestamp < b->shift.timestamp;
                return a->shift.id < b->shift.id;
            });
    }

    /// Shifts of `pair` with timestamp in (after, after + window].
    std::vector<const ResolvedShift*> in_window(const std::pair<std::string, std::string>& pair,
                                                std::int64_t after, std::int64_t window) const {
        std::vector<const ResolvedShift*> out;
        auto it = groups.find(pair);
        if (it == groups.end()) return out;
        const auto& v = it->second;
        auto lo = std::lower_bound(v.begin(), v.end(), after + 1,
                                   [](const ResolvedShift* s, std::int64_t t) {
                                       return s->shift.timestamp < t;
                                   });
        for (; lo != v.end() && (*lo)->shift.timestamp <= after + window; ++lo)
            out.push_back(*lo);
        return out;
    }
};

/// Does the return shift spend the exact outpoint created by the first
/// shift's withdrawal? UTXO chains only.
bool spends_created_outpoint(const ResolvedShift& first, const ResolvedShift& second,
                             const LedgerMap& ledgers) {
    auto it = ledgers.find(first.shift.cur_out);
    if (it == ledgers.end()) return false;
    if (it->second.chain().accounting != Accounting::UTXO) return false;
    const LedgerTx* phase2 = it->second.by_txid(first.status.out_txid);
    if (!phase2 || !second.deposit_tx) return false;
    for (std::uint32_t idx = 0; idx < phase2->vout.size(); ++idx) {
        if (phase2->vout[idx].address != first.status.withdraw_address) continue;
        for (const auto& in : second.deposit_tx->vin)
            if (in.spent == Outpoint{phase2->txid, idx}) return true;
    }
    return false;
}

bool addr_funds_return(const ResolvedShift& first, const ResolvedShift& second) {
    for (const auto& a : deposit_inputs(second))
        if (a.value == first.status.withdraw_address) return true;
    return false;
}

}  // namespace

std::vector<LinkEvidence> detect_uturn(const std::vector<ResolvedShift>& resolved,
                                       const LedgerMap& ledgers, const UturnParams& params) {
    PairIndex index(resolved);
    std::vector<LinkEvidence> links;
    for (const auto& first : resolved) {
        auto returns = index.in_window({first.shift.cur_out, first.shift.cur_in},
                                       first.shift.timestamp, params.window_secs);
        for (const ResolvedShift* second : returns) {
            if (!within_relative(second->shift.amount, first.status.out_coin, params.value_tol))
                continue;
            bool addr_tier = addr_funds_return(first, *second);
            bool utxo_tier = addr_tier && spends_created_outpoint(first, *second, ledgers);
            auto emit = [&](LinkKind kind) {
                LinkEvidence link;
                link.kind = kind;
                link.params["window_secs"] = std::to_string(params.window_secs);
                link.params["value_tol"] = std::to_string(params.value_tol);
                link.params["first_shift"] = first.shift.id;
                link.params["second_shift"] = second->shift.id;
                link.source.txid = first.status.out_txid;
                link.source.addresses = {{first.shift.cur_out, first.status.withdraw_address}};
                link.target.txid = second->deposit_tx->txid;
                link.target.addresses = deposit_inputs(*second);
                link.value = second->shift.amount;
                link.canonicalize();
                links.push_back(std::move(link));
            };
            emit(LinkKind::UTURN_BASIC);
            if (addr_tier) emit(LinkKind::UTURN_ADDR);
            if (utxo_tier) emit(LinkKind::UTURN_UTXO);
        }
    }
    return links;
}

std::vector<LinkEvidence> detect_round_trip(const std::vector<ResolvedShift>& resolved,
                                            const LedgerMap& ledgers,
                                            const RoundTripParams& params) {
    (void)ledgers;
    PairIndex index(resolved);
    std::vector<LinkEvidence> links;
    for (const auto& first : resolved) {
        auto returns = index.in_window({first.shift.cur_out, first.shift.cur_in},
                                       first.shift.timestamp, params.window_secs);
        for (const ResolvedShift* second : returns) {
            if (!within_relative(second->shift.amount, first.status.out_coin, params.value_tol))
                continue;
            LinkEvidence link;
            link.kind = LinkKind::XRT;
            link.params["window_secs"] = std::to_string(params.window_secs);
            link.params["value_tol"] = std::to_string(params.value_tol);
            link.params["first_shift"] = first.shift.id;
            link.params["second_shift"] = second->shift.id;
            link.source.txid = first.deposit_tx->txid;
            link.source.addresses = deposit_inputs(first);
            link.target.txid = second->status.out_txid;
            link.target.addresses = {{first.shift.cur_in, second->status.withdraw_address}};
            bool same = false;
            for (const auto& a : link.source.addresses)
                if (a.value == second->status.withdraw_address) same = true;
            link.params["same_address"] = same ? "true" : "false";
            link.value = first.shift.amount;
            link.canonicalize();
            links.push_back(std::move(link));
        }
    }
    return links;
}

std::vector<std::vector<ShiftRecord>> detect_trading_bots(std::vector<ShiftRecord> stream,
                                                          const BotParams& params) {
    std::sort(stream.begin(), stream.end(), [](const ShiftRecord& a, const ShiftRecord& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        return a.id < b.id;
    });
    std::map<std::pair<std::string, std::string>, std::vector<const ShiftRecord*>> groups;
    for (const auto& s : stream) groups[{s.cur_in, s.cur_out}].push_back(&s);

    std::vector<std::vector<ShiftRecord>> clusters;
    for (const auto& [pair, v] : groups) {
        // Maximal contiguous runs with all timestamps inside the span and
        // all values inside the relative band.
        std::size_t prev_end = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            Amount lo = v[i]->amount, hi = v[i]->amount;
            std::size_t j = i + 1;
            for (; j < v.size(); ++j) {
                if (v[j]->timestamp - v[i]->timestamp > params.span_secs) break;
                Amount nlo = std::min(lo, v[j]->amount);
                Amount nhi = std::max(hi, v[j]->amount);
                if (!within_relative(nhi, nlo, params.value_tol)) break;
                lo = nlo;
                hi = nhi;
            }
            if (j - i >= params.min_set && j > prev_end) {
                std::vector<ShiftRecord> cluster;
                cluster.reserve(j - i);
                for (std::size_t k = i; k < j; ++k) cluster.push_back(*v[k]);
                clusters.push_back(std::move(cluster));
                prev_end = j;
            }
        }
    }
    return clusters;
}

bool is_shielded_address(const std::string& addr) {
    return !addr.empty() && addr.front() == 'z';
}

PoolInteractionCounts pool_shift_interactions(const std::vector<ResolvedShift>& resolved,
                                              const Ledger& zcash) {
    PoolInteractionCounts counts;
    const std::string& symbol = zcash.chain().symbol;
    for (const auto& s : resolved) {
        if (s.shift.cur_out == symbol) {
            if (is_shielded_address(s.status.withdraw_address)) {
                ++counts.direct_to_pool;
                counts.direct_to_pool_value += s.status.out_coin;
                continue;
            }
            const LedgerTx* phase2 = zcash.by_txid(s.status.out_txid);
            if (!phase2) continue;
            for (std::uint32_t idx = 0; idx < phase2->vout.size(); ++idx) {
                if (phase2->vout[idx].address != s.status.withdraw_address) continue;
                const LedgerTx* spender = zcash.spender_of({phase2->txid, idx});
                if (spender && spender->pool_deposit() > 0) {
                    ++counts.deposit_next;
                    counts.deposit_next_value += s.status.out_coin;
                }
                break;
            }
        } else if (s.shift.cur_in == symbol && s.deposit_tx) {
            for (const auto& in : s.deposit_tx->vin) {
                const LedgerTx* origin = zcash.by_txid(in.spent.txid);
                if (origin && classify_zcash_tx(*origin) == ZTxClass::DESHIELDED) {
                    ++counts.funded_from_pool;
                    counts.funded_from_pool_value += s.shift.amount;
                    break;
                }
            }
        }
    }
    return counts;
}

std::vector<ShiftRecord> load_shift_stream(const std::string& path, const ChainRegistry& chains) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open shift stream: " + path);
    std::vector<ShiftRecord> stream;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.rfind("id,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string id, cur_in, cur_out, amt, ts;
        if (!std::getline(ss, id, ',') || !std::getline(ss, cur_in, ',') ||
            !std::getline(ss, cur_out, ',') || !std::getline(ss, amt, ',') ||
            !std::getline(ss, ts))
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad shift row");
        ShiftRecord s;
        s.id = id;
        s.cur_in = cur_in;
        s.cur_out = cur_out;
        s.amount = parse_decimal(amt, chain_decimals(chains, cur_in));
        s.timestamp = std::stoll(ts);
        stream.push_back(std::move(s));
    }
    return stream;
}

void save_shift_stream(const std::vector<ShiftRecord>& stream, const std::string& path,
                       const ChainRegistry& chains) {
    std::ofstream out(path);
    out << "id,cur_in,cur_out,amt,ts\n";
    for (const auto& s : stream)
        out << s.id << ',' << s.cur_in << ',' << s.cur_out << ','
            << format_decimal(s.amount, chain_decimals(chains, s.cur_in)) << ',' << s.timestamp
            << '\n';
}

}  // namespace chaintrace
