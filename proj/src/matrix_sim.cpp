#include "chaintrace/matrix_sim.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace chaintrace {

const char* to_string(Matrix m) { return m == Matrix::X3 ? "X3" : "X4"; }

const char* to_string(PayReason r) {
    switch (r) {
        case PayReason::DIRECT: return "DIRECT";
        case PayReason::SKIP_BLOCKED: return "SKIP_BLOCKED";
        case PayReason::SPILLOVER: return "SPILLOVER";
        case PayReason::FALLBACK: return "FALLBACK";
    }
    return "?";
}

SlotState& MatrixUser::slot(Matrix m, int level) {
    return (m == Matrix::X3 ? x3 : x4)[static_cast<std::size_t>(level - 1)];
}

const SlotState& MatrixUser::slot(Matrix m, int level) const {
    return (m == Matrix::X3 ? x3 : x4)[static_cast<std::size_t>(level - 1)];
}

int MatrixUser::highest_level(Matrix m) const {
    const auto& slots = m == Matrix::X3 ? x3 : x4;
    int h = 0;
    while (h < kMatrixLevels && slots[static_cast<std::size_t>(h)].active) ++h;
    return h;
}

Amount slot_price(int level) {
    if (level < 1 || level > kMatrixLevels)
        throw MatrixSimError(MatrixSimError::Code::LEVEL_RANGE,
                             "slot level out of range: " + std::to_string(level));
    return kSlotBaseGwei << (level - 1);
}

MatrixWorld new_world(const std::string& owner, Amount gas_fee) {
    MatrixWorld world;
    world.owner = owner;
    world.gas_fee = gas_fee;
    MatrixUser& u = world.users[owner];
    u.id = owner;
    for (auto* slots : {&u.x3, &u.x4})
        for (auto& s : *slots) {
            s.active = true;
            s.never_block = true;
        }
    return world;
}

namespace {

constexpr std::size_t capacity_of(Matrix m) {
    return m == Matrix::X3 ? kX3Capacity : kX4Capacity;
}

std::vector<std::string> upline_chain(const MatrixWorld& world, const std::string& origin) {
    std::vector<std::string> chain;
    std::string cur = world.users.at(origin).upline;
    while (!cur.empty() && cur != world.owner && chain.size() <= world.users.size()) {
        chain.push_back(cur);
        cur = world.users.at(cur).upline;
    }
    return chain;
}

/// Record `origin` in the slot's referral list. Returns true when the slot
/// fills and reinvests, which diverts the money further up.
bool accept_referral(MatrixWorld& world, MatrixUser& payee, Matrix m, int level,
                     const std::string& origin) {
    SlotState& slot = payee.slot(m, level);
    slot.referrals.push_back(origin);
    if (m == Matrix::X3) ++payee.partners_count;
    if (slot.referrals.size() < capacity_of(m)) return false;
    ++slot.reinvest_count;
    slot.referrals.clear();
    if (payee.id == world.owner || slot.never_block) return false;
    if (level < kMatrixLevels && payee.slot(m, level + 1).active) {
        slot.never_block = true;  // next level owned: can never block again
        return false;
    }
    slot.blocked = true;
    return true;
}

}  // namespace

PaymentEvent route_payment(MatrixWorld& world, const std::string& origin, Matrix m, int level,
                           Amount half) {
    std::vector<std::string> chain =
        (m == Matrix::X4 && world.x4_route) ? world.x4_route(world, origin)
                                            : upline_chain(world, origin);
    const std::string direct = world.users.at(origin).upline;

    bool referral_recorded = false;
    bool skipped_block = false;    // blocked or just-filled slot on the way up
    bool skipped_inactive = false; // upline never bought the level
    std::string payee;
    for (const std::string& cand : chain) {
        MatrixUser& user = world.users.at(cand);
        const SlotState& slot = user.slot(m, level);
        if (!slot.active) {
            skipped_inactive = true;
            continue;
        }
        if (slot.blocked) {
            skipped_block = true;
            continue;
        }
        if (!referral_recorded) {
            referral_recorded = true;
            if (accept_referral(world, user, m, level, origin)) {
                skipped_block = true;  // fill diverted the money upward
                continue;
            }
        }
        payee = cand;
        break;
    }
    if (payee.empty()) {
        payee = world.owner;
        if (!referral_recorded)
            accept_referral(world, world.users.at(world.owner), m, level, origin);
    }

    PayReason reason;
    if (payee == direct)
        reason = PayReason::DIRECT;
    else if (payee == world.owner)
        reason = PayReason::FALLBACK;
    else if (skipped_block)
        reason = PayReason::SKIP_BLOCKED;
    else
        reason = skipped_inactive ? PayReason::SPILLOVER : PayReason::SKIP_BLOCKED;

    world.users.at(payee).paid_out += half;
    PaymentEvent ev;
    ev.seq = world.events.size() + 1;
    ev.payer = origin;
    ev.payee = payee;
    ev.matrix = m;
    ev.level = level;
    ev.amount = half;
    ev.reason = reason;
    world.events.push_back(ev);
    return ev;
}

std::vector<PaymentEvent> register_user(MatrixWorld& world, const std::string& new_user,
                                        const std::string& referrer, Amount payment) {
    if (world.registered(new_user))
        throw MatrixSimError(MatrixSimError::Code::ALREADY_REGISTERED,
                             new_user + " is already registered");
    if (payment != slot_price(1) * 2)
        throw MatrixSimError(MatrixSimError::Code::BAD_AMOUNT,
                             "registration requires exactly " +
                                 format_decimal(slot_price(1) * 2, 9) + " ETH");
    std::string upline = world.owner;
    if (!referrer.empty() && referrer != new_user && world.registered(referrer))
        upline = referrer;

    MatrixUser& u = world.users[new_user];
    u.id = new_user;
    u.upline = upline;
    u.slot(Matrix::X3, 1).active = true;
    u.slot(Matrix::X3, 1).slot_referrer = upline;
    u.slot(Matrix::X4, 1).active = true;
    u.slot(Matrix::X4, 1).slot_referrer = upline;
    u.paid_in += payment;
    u.gas_paid += world.gas_fee;
    ++world.calls;

    Amount half = payment / 2;
    std::vector<PaymentEvent> out;
    out.push_back(route_payment(world, new_user, Matrix::X3, 1, half));
    out.push_back(route_payment(world, new_user, Matrix::X4, 1, half));
    return out;
}

std::vector<PaymentEvent> buy_new_level(MatrixWorld& world, const std::string& user, Matrix m,
                                        int level) {
    if (!world.registered(user))
        throw MatrixSimError(MatrixSimError::Code::NOT_REGISTERED, user + " is not registered");
    Amount price = slot_price(level);  // validates the range
    MatrixUser& u = world.users.at(user);
    if (u.slot(m, level).active)
        throw MatrixSimError(MatrixSimError::Code::ALREADY_ACTIVE,
                             user + " already owns " + std::string(to_string(m)) + " level " +
                                 std::to_string(level));
    if (level != u.highest_level(m) + 1)
        throw MatrixSimError(MatrixSimError::Code::NON_SEQUENTIAL_LEVEL,
                             "levels must be bought in order");

    SlotState& slot = u.slot(m, level);
    slot.active = true;
    slot.slot_referrer = u.upline;
    if (level > 1) {
        SlotState& below = u.slot(m, level - 1);
        below.blocked = false;
        below.never_block = true;
    }
    u.paid_in += price;
    u.gas_paid += world.gas_fee;
    ++world.calls;

    std::vector<PaymentEvent> out;
    out.push_back(route_payment(world, user, m, level, price));
    return out;
}

ProfitReport profit_report(const MatrixWorld& world, std::size_t top_k) {
    ProfitReport report;
    Amount positive_total = 0;
    std::size_t losers = 0;
    for (const auto& [id, u] : world.users) {
        Amount net = u.paid_out - u.paid_in - u.gas_paid;
        report.nets.push_back({id, net});
        if (net > 0) positive_total += net;
        if (net < 0) ++losers;
        if (id == world.owner) report.owner_net = net;
    }
    std::sort(report.nets.begin(), report.nets.end(),
              [](const ProfitReport::UserNet& a, const ProfitReport::UserNet& b) {
                  if (a.net != b.net) return a.net > b.net;
                  return a.id < b.id;
              });

    // Buckets in ETH, matching the histogram's decade edges.
    auto bucket = [](Amount net_gwei) -> std::string {
        double eth = static_cast<double>(net_gwei) / 1e9;
        if (eth <= -1) return "<=-1";
        if (eth <= -0.1) return "(-1,-0.1]";
        if (eth <= -0.01) return "(-0.1,-0.01]";
        if (eth < 0) return "(-0.01,0)";
        if (eth == 0) return "0";
        if (eth <= 0.01) return "(0,0.01]";
        if (eth <= 0.1) return "(0.01,0.1]";
        if (eth <= 1) return "(0.1,1]";
        return ">1";
    };
    for (const auto& n : report.nets) ++report.histogram[bucket(n.net)];

    for (std::size_t i = 0; i < top_k && i < report.nets.size(); ++i) {
        Amount net = report.nets[i].net;
        report.top_shares.push_back(
            positive_total > 0 && net > 0
                ? static_cast<double>(net) / static_cast<double>(positive_total)
                : 0.0);
    }

    std::size_t diverted = 0;
    for (const auto& ev : world.events)
        if (ev.reason != PayReason::DIRECT) ++diverted;
    report.spillover_fraction =
        world.calls ? static_cast<double>(diverted) / static_cast<double>(world.calls) : 0.0;
    report.loser_fraction =
        world.users.empty() ? 0.0
                            : static_cast<double>(losers) / static_cast<double>(world.users.size());
    return report;
}

namespace {

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
}

void fnv_str(std::uint64_t& h, const std::string& s) {
    fnv(h, s.data(), s.size());
    fnv(h, "\x1f", 1);
}

void fnv_int(std::uint64_t& h, std::int64_t v) { fnv(h, &v, sizeof v); }

}  // namespace

std::uint64_t state_hash(const MatrixWorld& world) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    fnv_str(h, world.owner);
    fnv_int(h, world.gas_fee);
    for (const auto& [id, u] : world.users) {
        fnv_str(h, id);
        fnv_str(h, u.upline);
        fnv_int(h, static_cast<std::int64_t>(u.partners_count));
        fnv_int(h, u.paid_in);
        fnv_int(h, u.paid_out);
        fnv_int(h, u.gas_paid);
        for (const auto* slots : {&u.x3, &u.x4})
            for (const auto& s : *slots) {
                fnv_int(h, (s.active ? 1 : 0) | (s.blocked ? 2 : 0) | (s.never_block ? 4 : 0));
                fnv_int(h, s.reinvest_count);
                for (const auto& r : s.referrals) fnv_str(h, r);
                fnv_str(h, s.slot_referrer);
            }
    }
    for (const auto& ev : world.events) {
        fnv_int(h, static_cast<std::int64_t>(ev.seq));
        fnv_str(h, ev.payer);
        fnv_str(h, ev.payee);
        fnv_int(h, ev.matrix == Matrix::X3 ? 3 : 4);
        fnv_int(h, ev.level);
        fnv_int(h, ev.amount);
        fnv_int(h, static_cast<std::int64_t>(ev.reason));
    }
    return h;
}

std::vector<ScenarioOp> load_scenario_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    std::vector<ScenarioOp> ops;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        ScenarioOp op;
        op.op = j.at("op").get<std::string>();
        op.user = j.at("user").get<std::string>();
        op.ref = j.value("ref", std::string{});
        op.matrix = j.value("matrix", std::string{"X3"}) == "X4" ? Matrix::X4 : Matrix::X3;
        op.level = j.value("level", 1);
        ops.push_back(std::move(op));
    }
    return ops;
}

ReplayResult replay_scenario(MatrixWorld& world, const std::vector<ScenarioOp>& ops,
                             bool lenient) {
    ReplayResult result;
    for (const auto& op : ops) {
        try {
            std::vector<PaymentEvent> evs =
                op.op == "buy" ? buy_new_level(world, op.user, op.matrix, op.level)
                               : register_user(world, op.user, op.ref);
            result.events.insert(result.events.end(), evs.begin(), evs.end());
            ++result.accepted;
        } catch (const MatrixSimError&) {
            if (!lenient) throw;
            ++result.rejected;
        }
    }
    return result;
}

void save_event_log_csv(const std::vector<PaymentEvent>& events, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write event log: " + path);
    out << "seq,payer,payee,matrix,level,amount,reason\n";
    for (const auto& ev : events)
        out << ev.seq << ',' << ev.payer << ',' << ev.payee << ',' << to_string(ev.matrix) << ','
            << ev.level << ',' << format_decimal(ev.amount, 9) << ',' << to_string(ev.reason)
            << '\n';
}

}  // namespace chaintrace
