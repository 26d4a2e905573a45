#include "chaintrace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

namespace chaintrace {

namespace {

using Rng = std::mt19937_64;

Amount pow10a(int n) {
    Amount v = 1;
    while (n-- > 0) v *= 10;
    return v;
}

std::size_t pick(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool chance(Rng& rng, double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

/// Builds one chain's transaction list block by block, tracking the
/// shielded-pool balance so generated ledgers always validate.
struct ChainBuilder {
    ChainId chain;
    std::vector<LedgerTx> txs;
    std::uint64_t height = 0;
    std::int64_t time = 0;
    std::uint64_t seq = 0;
    Amount pool_balance = 0;
    std::set<Amount> fine_values;  // searched amounts, unique per chain

    ChainBuilder(ChainId c, std::int64_t t0) : chain(std::move(c)), time(t0) {}

    Amount coin() const { return pow10a(chain.decimals); }
    Amount coarse_unit() const { return pow10a(chain.decimals - 2); }

    std::string next_txid() { return chain.symbol + "_tx" + std::to_string(++seq); }

    void new_block(std::int64_t at = 0) {
        ++height;
        time = std::max(at, time + 1);
    }
    void skip_blocks(std::uint64_t n) { height += n; }

    LedgerTx& add(LedgerTx tx) {
        tx.height = height;
        tx.timestamp = time;
        if (tx.txid.empty()) tx.txid = next_txid();
        txs.push_back(std::move(tx));
        return txs.back();
    }

    LedgerTx& coinbase(const std::string& addr, Amount value) {
        LedgerTx tx;
        tx.coinbase = true;
        tx.vout.push_back({addr, value});
        return add(std::move(tx));
    }

    LedgerTx& pool_deposit_tx(const std::string& from, Amount value) {
        LedgerTx tx;
        tx.joinsplits.push_back({{{from, value}}, {}});
        pool_balance += value;
        return add(std::move(tx));
    }

    LedgerTx& pool_withdrawal_tx(const std::vector<TxOutput>& zout) {
        LedgerTx tx;
        tx.joinsplits.push_back({{}, zout});
        for (const auto& o : zout) pool_balance -= o.value;
        return add(std::move(tx));
    }

    /// A value with at least four decimal places, unused on this chain.
    Amount draw_fine(Rng& rng) {
        for (;;) {
            Amount coins = static_cast<Amount>(rng() % 50);
            Amount frac = static_cast<Amount>(rng() % 10000);
            if (frac % 10 == 0) frac += 1 + static_cast<Amount>(rng() % 9);
            Amount v = coins * coin() + frac * pow10a(chain.decimals - 4);
            if (v > 0 && fine_values.insert(v).second) return v;
        }
    }
};

/// FIFO pool of spendable outputs owned by one entity on one chain.
struct Wallet {
    struct Coin {
        Outpoint op;
        std::string addr;
        Amount value;
    };
    std::deque<Coin> coins;

    Coin take() {
        Coin c = coins.front();
        coins.pop_front();
        return c;
    }
};

struct ShiftPlan {
    enum Pair { NONE, UTURN, XRT };
    enum PoolType { REGULAR, TYPE1, TYPE2, TYPE3 };
    std::string id;
    std::string entity;
    std::string cur_in;
    std::string cur_out;
    Pair pair = NONE;
    bool xrt_same_addr = false;
    PoolType pool = REGULAR;
};

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, const std::string& label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h ^ seed;
}

void GenParams::validate() const {
    auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
    if (!rate_ok(shift_rate) || !rate_ok(collision_rate) || !rate_ok(uturn_rate) ||
        !rate_ok(xrt_rate) || uturn_rate + xrt_rate > 1.0)
        throw SynthError(SynthError::Code::INVALID_PARAMS, "rates must lie in [0,1]");
    if (n_entities == 0)
        throw SynthError(SynthError::Code::INVALID_PARAMS, "need at least one entity");
    if (chains.empty())
        throw SynthError(SynthError::Code::INVALID_PARAMS, "need at least one chain");
    ChainRegistry builtin = ChainRegistry::builtin();
    for (const auto& c : chains)
        if (!builtin.contains(c))
            throw SynthError(SynthError::Code::INVALID_PARAMS, "unknown chain: " + c);
    bool has_zec = std::count(chains.begin(), chains.end(), "ZEC") > 0;
    if ((founder_schedule || noise_txs || miner_fanout || pool_type1 || pool_type2 || pool_type3) &&
        !has_zec)
        throw SynthError(SynthError::Code::INVALID_PARAMS,
                         "pool injections require ZEC among the chains");
    if ((shift_rate > 0 || pool_type1 || pool_type2 || pool_type3) && chains.size() < 2)
        throw SynthError(SynthError::Code::INVALID_PARAMS, "shifts require two chains");
}

namespace {

LinkEvidence make_truth(LinkKind kind, const std::string& src_txid,
                        std::vector<Address> src_addrs, const std::string& dst_txid,
                        std::vector<Address> dst_addrs, Amount value) {
    LinkEvidence link;
    link.kind = kind;
    link.source.txid = src_txid;
    link.source.addresses = std::move(src_addrs);
    link.target.txid = dst_txid;
    link.target.addresses = std::move(dst_addrs);
    link.value = value;
    link.canonicalize();
    return link;
}

}  // namespace

SyntheticWorld generate(const GenParams& params, std::uint64_t seed) {
    params.validate();

    SyntheticWorld world;
    world.seed = seed;
    world.params = params;
    ChainRegistry builtin = ChainRegistry::builtin();
    for (const auto& c : params.chains) world.registry.add(builtin.get(c));

    const std::int64_t t0 = 1577836800;  // 2020-01-01
    std::map<std::string, ChainBuilder> builders;
    for (const auto& c : params.chains) builders.emplace(c, ChainBuilder(builtin.get(c), t0));

    std::vector<std::string> entity_ids;
    for (std::size_t i = 0; i < params.n_entities; ++i)
        entity_ids.push_back("E" + std::to_string(i + 1));

    auto entity_addr = [&](const std::string& chain, const std::string& entity, std::size_t k) {
        std::string a = chain + "_" + entity + "_a" + std::to_string(k);
        world.entities[entity].push_back({chain, a});
        return a;
    };

    // ---- plan the shift schedule so funding needs are known up front ----
    Rng plan_rng(substream_seed(seed, "plan"));
    std::size_t n_shifts = static_cast<std::size_t>(
        std::llround(params.shift_rate * static_cast<double>(params.n_entities) *
                     static_cast<double>(params.txs_per_entity)));
    std::vector<ShiftPlan> plans;
    std::size_t xrt_seq = 0;
    for (std::size_t i = 0; i < n_shifts; ++i) {
        ShiftPlan p;
        p.id = "S" + std::to_string(i + 1);
        p.entity = entity_ids[i % entity_ids.size()];
        std::size_t a = pick(plan_rng, params.chains.size());
        std::size_t b = pick(plan_rng, params.chains.size() - 1);
        if (b >= a) ++b;
        p.cur_in = params.chains[a];
        p.cur_out = params.chains[b];
        double r = std::uniform_real_distribution<double>(0.0, 1.0)(plan_rng);
        if (r < params.uturn_rate)
            p.pair = ShiftPlan::UTURN;
        else if (r < params.uturn_rate + params.xrt_rate) {
            p.pair = ShiftPlan::XRT;
            p.xrt_same_addr = (xrt_seq++ % 2) == 0;
        }
        plans.push_back(std::move(p));
    }
    std::string non_zec;
    for (const auto& c : params.chains)
        if (c != "ZEC") { non_zec = c; break; }
    auto add_pool_plan = [&](std::size_t count, ShiftPlan::PoolType type) {
        for (std::size_t i = 0; i < count; ++i) {
            ShiftPlan p;
            p.id = std::string("P") + std::to_string(static_cast<int>(type)) + "_" +
                   std::to_string(i + 1);
            p.entity = entity_ids[i % entity_ids.size()];
            p.cur_in = type == ShiftPlan::TYPE3 ? "ZEC" : non_zec;
            p.cur_out = type == ShiftPlan::TYPE3 ? non_zec : "ZEC";
            p.pool = type;
            plans.push_back(std::move(p));
        }
    };
    add_pool_plan(params.pool_type1, ShiftPlan::TYPE1);
    add_pool_plan(params.pool_type2, ShiftPlan::TYPE2);
    add_pool_plan(params.pool_type3, ShiftPlan::TYPE3);

    // Spendable coins each entity needs per chain: shift deposits plus the
    // return deposits of xrt pairs plus activity margin.
    std::map<std::pair<std::string, std::string>, std::size_t> deposit_needs;
    for (const auto& p : plans) {
        if (p.pool != ShiftPlan::TYPE3) ++deposit_needs[{p.entity, p.cur_in}];
        if (p.pair == ShiftPlan::XRT &&
            builtin.get(p.cur_out).accounting == Accounting::UTXO)
            ++deposit_needs[{p.entity, p.cur_out}];
    }

    // ---- funding ----
    std::map<std::pair<std::string, std::string>, Wallet> wallets;  // (chain, entity)
    std::map<std::string, Wallet> hot;                              // exchange side, per chain
    std::size_t hot_needs = plans.size() * 2 + 8;
    for (const auto& sym : params.chains) {
        ChainBuilder& cb = builders.at(sym);
        if (cb.chain.accounting == Accounting::ACCOUNT) continue;
        cb.new_block(t0 + 10);
        std::size_t in_block = 0;
        auto fresh_block = [&] {
            if (++in_block >= 25) {
                cb.new_block();
                in_block = 0;
            }
        };
        for (const auto& e : entity_ids) {
            std::size_t coins = std::max<std::size_t>(4, deposit_needs[{e, sym}] + 2) +
                                2 * params.txs_per_entity;
            for (std::size_t k = 0; k < coins; ++k) {
                std::string addr = entity_addr(sym, e, k);
                const LedgerTx& tx = cb.coinbase(addr, 100 * cb.coin());
                wallets[{sym, e}].coins.push_back({{tx.txid, 0}, addr, 100 * cb.coin()});
                fresh_block();
            }
        }
        for (std::size_t k = 0; k < hot_needs; ++k) {
            std::string addr = sym + "_hot" + std::to_string(k);
            const LedgerTx& tx = cb.coinbase(addr, 1000 * cb.coin());
            hot[sym].coins.push_back({{tx.txid, 0}, addr, 1000 * cb.coin()});
            fresh_block();
        }
        if (sym == "ZEC") {
            cb.new_block();
            cb.pool_deposit_tx("ZEC_pool_seed", 100000 * cb.coin());
        }
    }
    for (const auto& sym : params.chains) {
        if (builders.at(sym).chain.accounting != Accounting::ACCOUNT) continue;
        for (const auto& e : entity_ids) entity_addr(sym, e, 0);
    }

    // ---- entity activity: co-spends that seed the clustering substrate ----
    for (const auto& sym : params.chains) {
        ChainBuilder& cb = builders.at(sym);
        Rng rng(substream_seed(seed, "activity:" + sym));
        cb.new_block();
        std::size_t in_block = 0;
        for (const auto& e : entity_ids) {
            for (std::size_t k = 0; k < params.txs_per_entity; ++k) {
                if (cb.chain.accounting == Accounting::ACCOUNT) {
                    LedgerTx tx;
                    std::string from = sym + "_" + e + "_a0";
                    std::string to = entity_addr(sym, e, k + 1);
                    tx.xfer = AccountXfer{from, to,
                                          static_cast<Amount>(1 + rng() % 5) * cb.coin(),
                                          cb.coarse_unit()};
                    cb.add(std::move(tx));
                } else {
                    Wallet& w = wallets[{sym, e}];
                    if (w.coins.size() < 2) break;
                    Wallet::Coin c1 = w.take();
                    Wallet::Coin c2 = w.take();
                    LedgerTx tx;
                    tx.vin.push_back({c1.op, c1.addr, c1.value});
                    tx.vin.push_back({c2.op, c2.addr, c2.value});
                    Amount total = c1.value + c2.value;
                    Amount half = total / 2 - (total / 2) % cb.coarse_unit();
                    std::string o1 = entity_addr(sym, e, 1000 + k * 2);
                    std::string o2 = entity_addr(sym, e, 1000 + k * 2 + 1);
                    tx.vout.push_back({o1, half});
                    tx.vout.push_back({o2, total - half - cb.coarse_unit()});
                    const LedgerTx& added = cb.add(std::move(tx));
                    w.coins.push_back({{added.txid, 0}, o1, added.vout[0].value});
                    w.coins.push_back({{added.txid, 1}, o2, added.vout[1].value});
                }
                if (++in_block >= 20) {
                    cb.new_block();
                    in_block = 0;
                }
            }
        }
    }

    // ---- founder schedule on ZEC ----
    if (params.founder_schedule) {
        ChainBuilder& cb = builders.at("ZEC");
        Rng rng(substream_seed(seed, "founder"));
        const Amount dep = parse_decimal("249.9999", cb.chain.decimals);
        const Amount wd = parse_decimal("250.0001", cb.chain.decimals);
        const Amount cap = parse_decimal("44272.5", cb.chain.decimals);
        cb.fine_values.insert(dep);
        cb.fine_values.insert(wd);
        std::size_t rotation = 0;
        Amount rotation_total = 0;
        for (std::size_t k = 0; k < params.founder_withdrawals; ++k) {
            if (rotation_total + dep > cap) {
                ++rotation;
                rotation_total = 0;
            }
            cb.skip_blocks(5 + rng() % 5);  // 6-10 block cadence
            cb.new_block();
            cb.pool_deposit_tx("ZEC_fdep" + std::to_string(rotation), dep);
            rotation_total += dep;
            cb.skip_blocks(rng() % 3);
            cb.new_block();
            std::string out_addr = "ZEC_fwd" + std::to_string(k);
            const LedgerTx& tx = cb.pool_withdrawal_tx({{out_addr, wd}});
            world.truth.push_back(
                make_truth(LinkKind::FOUNDER_VALUE, "", {}, tx.txid, {{"ZEC", out_addr}}, wd));
        }
    }

    // ---- ZEC noise traffic (coarse values only, so it never collides
    // with any searched or signature amount) ----
    if (params.noise_txs) {
        ChainBuilder& cb = builders.at("ZEC");
        Rng rng(substream_seed(seed, "noise"));
        std::vector<Wallet::Coin> pool;
        cb.new_block();
        std::size_t in_block = 0;
        for (std::size_t i = 0; i < params.noise_txs; ++i) {
            Amount v = static_cast<Amount>(1 + rng() % 5000) * cb.coarse_unit();
            double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            std::string addr = "ZEC_noise" + std::to_string(i);
            if (r < 0.60) {
                if (r < 0.30 || pool.empty()) {
                    const LedgerTx& tx = cb.coinbase(addr, v);
                    pool.push_back({{tx.txid, 0}, addr, v});
                } else {
                    Wallet::Coin c = pool[pick(rng, pool.size())];
                    pool.erase(std::remove_if(pool.begin(), pool.end(),
                                              [&](const Wallet::Coin& x) { return x.op == c.op; }),
                               pool.end());
                    LedgerTx tx;
                    tx.vin.push_back({c.op, c.addr, c.value});
                    tx.vout.push_back({addr, c.value - cb.coarse_unit()});
                    const LedgerTx& added = cb.add(std::move(tx));
                    pool.push_back({{added.txid, 0}, addr, added.vout[0].value});
                }
            } else if (r < 0.85) {
                cb.pool_deposit_tx(addr, v);
            } else if (cb.pool_balance > v) {
                cb.pool_withdrawal_tx({{addr, v}});
            } else {
                cb.coinbase(addr, v);
            }
            if (++in_block >= 20) {
                cb.new_block();
                in_block = 0;
            }
        }
    }

    // ---- one mining-pool payout with wide fan-out ----
    if (params.miner_fanout) {
        ChainBuilder& cb = builders.at("ZEC");
        Amount share = cb.coarse_unit();
        Amount total = static_cast<Amount>(params.miner_fanout + 1) * share;
        cb.new_block();
        cb.pool_deposit_tx("ZEC_mining_fund", total + cb.coin());
        cb.new_block();
        std::vector<TxOutput> zout;
        std::vector<Address> actors;
        zout.push_back({"ZEC_pool_main", share});
        actors.push_back({"ZEC", "ZEC_pool_main"});
        for (std::size_t k = 0; k < params.miner_fanout; ++k) {
            std::string a = "ZEC_miner" + std::to_string(k);
            zout.push_back({a, share});
            actors.push_back({"ZEC", a});
        }
        const LedgerTx& tx = cb.pool_withdrawal_tx(zout);
        world.tags.assign({"ZEC", "ZEC_pool_main"}, {"flypool", TagCategory::POOL});
        world.truth.push_back(
            make_truth(LinkKind::MINER_PAYOUT, "", {}, tx.txid, actors, total));
    }

    // ---- shifts ----
    Rng rng(substream_seed(seed, "shifts"));
    std::int64_t t_base = t0;
    for (auto& [sym, cb] : builders) t_base = std::max(t_base, cb.time);
    t_base += 3600;

    // Number of filler blocks that pushes a block out of every default
    // height window (max delta is 9).
    constexpr int kFillers = 12;
    // Mint `value` to `addr` in whatever form the chain's accounting allows.
    auto mint = [](ChainBuilder& cb, const std::string& addr, Amount value) -> LedgerTx& {
        if (cb.chain.accounting == Accounting::ACCOUNT) {
            LedgerTx tx;
            tx.xfer = AccountXfer{cb.chain.symbol + "_faucet", addr, value, cb.coarse_unit()};
            return cb.add(std::move(tx));
        }
        return cb.coinbase(addr, value);
    };
    auto fillers = [&](ChainBuilder& cb, std::int64_t from, std::int64_t to) {
        for (int f = 0; f < kFillers; ++f) {
            cb.new_block(from + (to - from) * (f + 1) / (kFillers + 1));
            mint(cb, cb.chain.symbol + "_filler" + std::to_string(cb.seq), cb.coarse_unit());
        }
    };

    // Emit one shift's deposit and phase-2 legs; returns what later legs
    // and truth links need.
    struct Leg {
        std::string deposit_txid;
        std::vector<Address> deposit_inputs;
        std::string s_addr;
        std::string u_addr;
        std::string out_txid;
        std::uint32_t out_index = 0;  // vout index paying u_addr
        Amount out_coin = 0;
    };

    std::size_t slot = 0;
    for (const auto& plan : plans) {
        std::int64_t T = t_base + static_cast<std::int64_t>(slot++) * 3700;
        ChainBuilder& cin = builders.at(plan.cur_in);
        ChainBuilder& cout = builders.at(plan.cur_out);

        Leg leg;
        leg.s_addr = plan.cur_in + "_s_" + plan.id;
        leg.u_addr = plan.pool == ShiftPlan::TYPE1 ? "z_" + plan.id
                                                   : plan.cur_out + "_u_" + plan.id;

        Amount amt = cin.draw_fine(rng);
        leg.out_coin = plan.pool == ShiftPlan::REGULAR ? cout.draw_fine(rng)
                                                       : 2 * cout.coin() + cout.draw_fine(rng);
        cout.fine_values.insert(leg.out_coin);

        // Phase-1 deposit on curIn.
        cin.new_block(T);
        if (cin.chain.accounting == Accounting::ACCOUNT) {
            LedgerTx tx;
            std::string from = plan.cur_in + "_" + plan.entity + "_a0";
            tx.xfer = AccountXfer{from, leg.s_addr, amt, cin.coarse_unit()};
            leg.deposit_txid = cin.add(std::move(tx)).txid;
            leg.deposit_inputs = {{plan.cur_in, from}};
        } else if (plan.pool == ShiftPlan::TYPE3) {
            // Deposit funded straight from a pool withdrawal.
            cin.pool_withdrawal_tx({{plan.cur_in + "_z2t_" + plan.id, amt + cin.coin()}});
            const LedgerTx& origin = cin.txs.back();
            cin.new_block();
            LedgerTx tx;
            std::string from = plan.cur_in + "_z2t_" + plan.id;
            tx.vin.push_back({{origin.txid, 0}, from, amt + cin.coin()});
            tx.vout.push_back({leg.s_addr, amt});
            leg.deposit_txid = cin.add(std::move(tx)).txid;
            leg.deposit_inputs = {{plan.cur_in, from}};
        } else {
            Wallet& w = wallets[{plan.cur_in, plan.entity}];
            Wallet::Coin c = w.take();
            LedgerTx tx;
            tx.vin.push_back({c.op, c.addr, c.value});
            tx.vout.push_back({leg.s_addr, amt});
            Amount change = c.value - amt;
            change -= change % cin.coarse_unit();
            if (change > 0)
                tx.vout.push_back({plan.cur_in + "_chg_" + plan.id, change});
            leg.deposit_txid = cin.add(std::move(tx)).txid;
            leg.deposit_inputs = {{plan.cur_in, c.addr}};
        }
        if (plan.pool == ShiftPlan::REGULAR && chance(rng, params.collision_rate))
            mint(cin, plan.cur_in + "_decoy_" + plan.id, amt);

        ShiftRecord shift{plan.id, plan.cur_in, plan.cur_out, amt, cin.time};
        world.shifts.push_back(shift);

        // Phase-2 withdrawal on curOut.
        cout.new_block(T + 120);
        if (plan.pool == ShiftPlan::TYPE1) {
            // Straight into the shielded pool.
            const LedgerTx& tx = cout.pool_deposit_tx(plan.cur_out + "_hotz_" + plan.id,
                                                      leg.out_coin);
            leg.out_txid = tx.txid;
        } else if (cout.chain.accounting == Accounting::ACCOUNT) {
            LedgerTx tx;
            tx.xfer = AccountXfer{plan.cur_out + "_hot0", leg.u_addr, leg.out_coin,
                                  cout.coarse_unit()};
            leg.out_txid = cout.add(std::move(tx)).txid;
        } else {
            Wallet::Coin c = hot[plan.cur_out].take();
            LedgerTx tx;
            tx.vin.push_back({c.op, c.addr, c.value});
            tx.vout.push_back({leg.u_addr, leg.out_coin});
            Amount change = c.value - leg.out_coin;
            change -= change % cout.coarse_unit();
            if (change > 0) tx.vout.push_back({c.addr + "_r", change});
            const LedgerTx& added = cout.add(std::move(tx));
            leg.out_txid = added.txid;
            if (added.vout.size() > 1)
                hot[plan.cur_out].coins.push_back(
                    {{added.txid, 1}, added.vout[1].address, added.vout[1].value});
        }

        ShiftStatus status;
        status.status = ShiftState::COMPLETE;
        status.deposit_address = leg.s_addr;
        status.withdraw_address = leg.u_addr;
        status.in_coin = amt;
        status.in_type = plan.cur_in;
        status.out_coin = leg.out_coin;
        status.out_type = plan.cur_out;
        status.out_txid = leg.out_txid;
        world.oracle.add(status);

        world.truth.push_back(make_truth(LinkKind::PASS_THROUGH, leg.deposit_txid,
                                         leg.deposit_inputs, leg.out_txid,
                                         {{plan.cur_out, leg.u_addr}}, amt));

        if (plan.pool == ShiftPlan::TYPE2) {
            // The withdrawal's next spend puts the money into the pool.
            cout.new_block(T + 200);
            LedgerTx tx;
            tx.vin.push_back({{leg.out_txid, 0}, leg.u_addr, leg.out_coin});
            tx.joinsplits.push_back({{{leg.u_addr, leg.out_coin}}, {}});
            cout.pool_balance += leg.out_coin;
            cout.add(std::move(tx));
        }

        if (plan.pair == ShiftPlan::NONE) continue;

        // ---- paired return shift curOut -> curIn ----
        fillers(cout, T + 130, T + 580);
        std::string rid = plan.id + "R";
        Amount ret_amt = leg.out_coin;  // exact: inside both 1% and 0.5% bands
        std::string s2 = plan.cur_out + "_s_" + rid;
        std::string wd_ret = plan.pair == ShiftPlan::XRT && plan.xrt_same_addr
                                 ? leg.deposit_inputs.front().value
                                 : plan.cur_in + "_u_" + rid;

        cout.new_block(T + 600);
        std::string ret_dep_txid;
        std::vector<Address> ret_inputs;
        if (cout.chain.accounting == Accounting::ACCOUNT) {
            LedgerTx tx;
            std::string from = plan.pair == ShiftPlan::UTURN
                                   ? leg.u_addr
                                   : plan.cur_out + "_" + plan.entity + "_a0";
            tx.xfer = AccountXfer{from, s2, ret_amt, cout.coarse_unit()};
            ret_dep_txid = cout.add(std::move(tx)).txid;
            ret_inputs = {{plan.cur_out, from}};
        } else if (plan.pair == ShiftPlan::UTURN) {
            LedgerTx tx;
            tx.vin.push_back({{leg.out_txid, leg.out_index}, leg.u_addr, leg.out_coin});
            tx.vout.push_back({s2, ret_amt});
            ret_dep_txid = cout.add(std::move(tx)).txid;
            ret_inputs = {{plan.cur_out, leg.u_addr}};
        } else {
            Wallet& w = wallets[{plan.cur_out, plan.entity}];
            Wallet::Coin c = w.take();
            LedgerTx tx;
            tx.vin.push_back({c.op, c.addr, c.value});
            tx.vout.push_back({s2, ret_amt});
            Amount change = c.value - ret_amt;
            change -= change % cout.coarse_unit();
            if (change > 0) tx.vout.push_back({plan.cur_out + "_chg_" + rid, change});
            ret_dep_txid = cout.add(std::move(tx)).txid;
            ret_inputs = {{plan.cur_out, c.addr}};
        }

        ShiftRecord ret{rid, plan.cur_out, plan.cur_in, ret_amt, cout.time};
        world.shifts.push_back(ret);

        // Return phase-2 back on curIn.
        Amount out2 = cin.draw_fine(rng);
        cin.new_block(T + 720);
        std::string ret_out_txid;
        if (cin.chain.accounting == Accounting::ACCOUNT) {
            LedgerTx tx;
            tx.xfer = AccountXfer{plan.cur_in + "_hot0", wd_ret, out2, cin.coarse_unit()};
            ret_out_txid = cin.add(std::move(tx)).txid;
        } else {
            Wallet::Coin c = hot[plan.cur_in].take();
            LedgerTx tx;
            tx.vin.push_back({c.op, c.addr, c.value});
            tx.vout.push_back({wd_ret, out2});
            Amount change = c.value - out2;
            change -= change % cin.coarse_unit();
            if (change > 0) tx.vout.push_back({c.addr + "_r", change});
            ret_out_txid = cin.add(std::move(tx)).txid;
        }

        ShiftStatus rstatus;
        rstatus.status = ShiftState::COMPLETE;
        rstatus.deposit_address = s2;
        rstatus.withdraw_address = wd_ret;
        rstatus.in_coin = ret_amt;
        rstatus.in_type = plan.cur_out;
        rstatus.out_coin = out2;
        rstatus.out_type = plan.cur_in;
        rstatus.out_txid = ret_out_txid;
        world.oracle.add(rstatus);

        world.truth.push_back(make_truth(LinkKind::PASS_THROUGH, ret_dep_txid, ret_inputs,
                                         ret_out_txid, {{plan.cur_in, wd_ret}}, ret_amt));
        world.truth.push_back(make_truth(LinkKind::UTURN_BASIC, leg.out_txid,
                                         {{plan.cur_out, leg.u_addr}}, ret_dep_txid, ret_inputs,
                                         ret_amt));
        if (plan.pair == ShiftPlan::UTURN) {
            world.truth.push_back(make_truth(LinkKind::UTURN_ADDR, leg.out_txid,
                                             {{plan.cur_out, leg.u_addr}}, ret_dep_txid,
                                             ret_inputs, ret_amt));
            if (cout.chain.accounting == Accounting::UTXO)
                world.truth.push_back(make_truth(LinkKind::UTURN_UTXO, leg.out_txid,
                                                 {{plan.cur_out, leg.u_addr}}, ret_dep_txid,
                                                 ret_inputs, ret_amt));
        }
        world.truth.push_back(make_truth(LinkKind::XRT, leg.deposit_txid, leg.deposit_inputs,
                                         ret_out_txid, {{plan.cur_in, wd_ret}}, amt));
    }

    for (auto& [sym, cb] : builders)
        world.ledgers.emplace(sym, make_ledger(cb.chain, std::move(cb.txs)));
    return world;
}

namespace {

std::string link_key(LinkEvidence link) {
    link.canonicalize();
    std::string key = to_string(link.kind);
    auto ep = [&](const LinkEndpoint& e) {
        key += '|';
        key += e.txid;
        for (const auto& a : e.addresses) {
            key += ';';
            key += a.chain;
            key += ':';
            key += a.value;
        }
    };
    ep(link.source);
    ep(link.target);
    key += '|';
    key += std::to_string(link.value);
    return key;
}

}  // namespace

ScoreReport score(const std::vector<LinkEvidence>& predicted,
                  const std::vector<LinkEvidence>& truth) {
    std::map<LinkKind, std::set<std::string>> pred_by_kind, truth_by_kind;
    for (const auto& l : predicted) pred_by_kind[l.kind].insert(link_key(l));
    for (const auto& l : truth) truth_by_kind[l.kind].insert(link_key(l));

    ScoreReport report;
    std::set<LinkKind> kinds;
    for (const auto& [k, _] : pred_by_kind) kinds.insert(k);
    for (const auto& [k, _] : truth_by_kind) kinds.insert(k);

    std::size_t pred_total = 0, truth_total = 0, matched_total = 0;
    for (LinkKind kind : kinds) {
        const auto& p = pred_by_kind[kind];
        const auto& t = truth_by_kind[kind];
        std::size_t matched = 0;
        for (const auto& key : p) matched += t.count(key);
        ScoreReport::KindScore ks;
        ks.kind = kind;
        ks.predicted = p.size();
        ks.truth = t.size();
        ks.matched = matched;
        ks.zero_pred = p.empty();
        ks.precision = p.empty() ? 1.0
                                 : static_cast<double>(matched) / static_cast<double>(p.size());
        ks.recall = t.empty() ? 1.0
                              : static_cast<double>(matched) / static_cast<double>(t.size());
        report.kinds.push_back(ks);
        pred_total += p.size();
        truth_total += t.size();
        matched_total += matched;
    }
    report.predicted = pred_total;
    report.truth = truth_total;
    report.matched = matched_total;
    report.zero_pred = pred_total == 0;
    report.precision = pred_total == 0 ? 1.0
                                       : static_cast<double>(matched_total) /
                                             static_cast<double>(pred_total);
    report.recall = truth_total == 0 ? 1.0
                                     : static_cast<double>(matched_total) /
                                           static_cast<double>(truth_total);
    return report;
}

void save_world(const SyntheticWorld& world, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json j;
    j["seed"] = world.seed;
    const GenParams& p = world.params;
    j["params"] = {{"n_entities", p.n_entities},
                   {"txs_per_entity", p.txs_per_entity},
                   {"shift_rate", p.shift_rate},
                   {"collision_rate", p.collision_rate},
                   {"founder_schedule", p.founder_schedule},
                   {"founder_withdrawals", p.founder_withdrawals},
                   {"miner_fanout", p.miner_fanout},
                   {"uturn_rate", p.uturn_rate},
                   {"xrt_rate", p.xrt_rate},
                   {"noise_txs", p.noise_txs},
                   {"pool_type1", p.pool_type1},
                   {"pool_type2", p.pool_type2},
                   {"pool_type3", p.pool_type3}};
    nlohmann::json chains = nlohmann::json::array();
    for (const auto& [sym, chain] : world.registry.all())
        chains.push_back({{"symbol", chain.symbol},
                          {"accounting", chain.accounting == Accounting::UTXO ? "utxo" : "account"},
                          {"decimals", chain.decimals}});
    j["chains"] = std::move(chains);
    std::ofstream((fs::path(dir) / "world.json").string()) << j.dump(2) << '\n';

    for (const auto& [sym, ledger] : world.ledgers)
        serialize_ledger(ledger, (fs::path(dir) / (sym + ".jsonl")).string());
    save_shift_stream(world.shifts, (fs::path(dir) / "shifts.csv").string(), world.registry);
    world.oracle.save_csv((fs::path(dir) / "oracle.csv").string(), world.registry);
    world.tags.save_csv((fs::path(dir) / "tags.csv").string());
    save_evidence_jsonl(world.truth, (fs::path(dir) / "truth.jsonl").string());
}

WorldBundle load_world(const std::string& dir) {
    namespace fs = std::filesystem;
    WorldBundle bundle;
    std::ifstream in((fs::path(dir) / "world.json").string());
    if (!in) throw std::runtime_error("cannot open world bundle: " + dir);
    nlohmann::json j = nlohmann::json::parse(in);
    for (const auto& c : j.at("chains")) {
        ChainId chain;
        chain.symbol = c.at("symbol").get<std::string>();
        chain.accounting = c.at("accounting").get<std::string>() == "account"
                               ? Accounting::ACCOUNT
                               : Accounting::UTXO;
        chain.decimals = c.at("decimals").get<int>();
        bundle.registry.add(chain);
    }
    for (const auto& [sym, chain] : bundle.registry.all())
        bundle.ledgers.emplace(sym, parse_ledger((fs::path(dir) / (sym + ".jsonl")).string(), chain));
    bundle.shifts = load_shift_stream((fs::path(dir) / "shifts.csv").string(), bundle.registry);
    bundle.oracle = FixtureOracle::load_csv((fs::path(dir) / "oracle.csv").string(),
                                            bundle.registry);
    if (fs::exists(fs::path(dir) / "tags.csv"))
        bundle.tags = TagMap::load_csv((fs::path(dir) / "tags.csv").string());
    bundle.truth = load_evidence_jsonl((fs::path(dir) / "truth.jsonl").string());
    return bundle;
}

Ledger random_utxo_ledger(std::uint64_t seed, std::size_t n_txs, std::size_t n_addresses,
                          const ChainId& chain) {
    Rng rng(seed);
    ChainBuilder cb(chain, 1577836800);
    std::vector<Wallet::Coin> pool;
    auto addr = [&](std::size_t k) { return chain.symbol + "_r" + std::to_string(k); };
    cb.new_block();
    std::size_t in_block = 0;
    for (std::size_t i = 0; i < n_txs; ++i) {
        if (pool.size() < 3 || chance(rng, 0.3)) {
            Amount v = static_cast<Amount>(1 + rng() % 1000) * cb.coarse_unit();
            const LedgerTx& tx = cb.coinbase(addr(pick(rng, n_addresses)), v);
            pool.push_back({{tx.txid, 0}, tx.vout[0].address, v});
        } else {
            std::size_t k = 1 + pick(rng, 3);  // spend 1-3 coins
            LedgerTx tx;
            Amount total = 0;
            for (std::size_t s = 0; s < k && !pool.empty(); ++s) {
                std::size_t at = pick(rng, pool.size());
                Wallet::Coin c = pool[at];
                pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(at));
                tx.vin.push_back({c.op, c.addr, c.value});
                total += c.value;
            }
            std::size_t outs = 1 + pick(rng, 3);
            const LedgerTx* added = nullptr;
            for (std::size_t o = 0; o < outs; ++o) {
                Amount v = o + 1 == outs ? total : total / static_cast<Amount>(outs - o) / 2 * 2;
                if (v <= 0) v = 1;
                total -= v;
                tx.vout.push_back({addr(pick(rng, n_addresses)), v});
            }
            added = &cb.add(std::move(tx));
            for (std::uint32_t o = 0; o < added->vout.size(); ++o)
                pool.push_back({{added->txid, o}, added->vout[o].address, added->vout[o].value});
        }
        if (++in_block >= 10) {
            cb.new_block();
            in_block = 0;
        }
    }
    return make_ledger(chain, std::move(cb.txs));
}

Ledger random_zcash_ledger(std::uint64_t seed, std::size_t n_txs, std::size_t value_space,
                           const ChainId& chain) {
    Rng rng(seed);
    ChainBuilder cb(chain, 1577836800);
    cb.new_block();
    std::size_t in_block = 0;
    for (std::size_t i = 0; i < n_txs; ++i) {
        Amount v = static_cast<Amount>(1 + rng() % std::max<std::size_t>(1, value_space)) *
                   pow10a(chain.decimals - 4) * 7;
        double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        std::string a = chain.symbol + "_z" + std::to_string(i % 64);
        if (r < 0.40) {
            cb.coinbase(a, v);
        } else if (r < 0.72 || cb.pool_balance <= v) {
            cb.pool_deposit_tx(a, v);
        } else {
            cb.pool_withdrawal_tx({{a, v}});
        }
        if (++in_block >= 8) {
            cb.new_block();
            in_block = 0;
        }
    }
    return make_ledger(chain, std::move(cb.txs));
}

}  // namespace chaintrace
