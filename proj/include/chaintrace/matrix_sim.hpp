#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chaintrace/amount.hpp"

namespace chaintrace {

/// Pyramid-matrix contract simulator. Amounts are ETH in gwei (9 decimals).

enum class Matrix { X3, X4 };
const char* to_string(Matrix m);

inline constexpr int kMatrixLevels = 12;
inline constexpr std::size_t kX3Capacity = 3;
inline constexpr std::size_t kX4Capacity = 6;
inline constexpr Amount kSlotBaseGwei = 25'000'000;       // 0.025 ETH
inline constexpr Amount kRegistrationGwei = 50'000'000;   // 0.05 ETH
inline constexpr Amount kDefaultGasGwei = 8'830'000;      // 0.00883 ETH

struct SlotState {
    bool active = false;
    bool blocked = false;
    bool never_block = false;  // owner, or the next level was purchased
    std::uint32_t reinvest_count = 0;
    std::vector<std::string> referrals;  // ids currently filling the slot
    std::string slot_referrer;
    std::optional<std::string> closed_part;  // X4 only; reserved for routing strategies
};

struct MatrixUser {
    std::string id;
    std::string upline;
    std::array<SlotState, kMatrixLevels> x3;
    std::array<SlotState, kMatrixLevels> x4;
    std::uint64_t partners_count = 0;  // X3-leg attribution
    Amount paid_in = 0;   // sent into the contract
    Amount paid_out = 0;  // received from the contract
    Amount gas_paid = 0;

    SlotState& slot(Matrix m, int level);
    const SlotState& slot(Matrix m, int level) const;
    /// Highest contiguous active level, 0 when none.
    int highest_level(Matrix m) const;
};

/// Why a payment landed where it did.
///   DIRECT       payee is the payer's direct upline
///   SKIP_BLOCKED diverted past at least one blocked (or just-filled) slot
///   SPILLOVER    diverted only past uplines that never bought the level
///   FALLBACK     diverted all the way to the owner
enum class PayReason { DIRECT, SKIP_BLOCKED, SPILLOVER, FALLBACK };
const char* to_string(PayReason r);

struct PaymentEvent {
    std::uint64_t seq = 0;
    std::string payer;
    std::string payee;
    Matrix matrix = Matrix::X3;
    int level = 1;
    Amount amount = 0;
    PayReason reason = PayReason::DIRECT;
};

class MatrixSimError : public std::runtime_error {
public:
    enum class Code {
        LEVEL_RANGE,
        ALREADY_REGISTERED,
        BAD_AMOUNT,
        NOT_REGISTERED,
        NON_SEQUENTIAL_LEVEL,
        ALREADY_ACTIVE,
    };
    MatrixSimError(Code code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

struct MatrixWorld;

/// Candidate-chain seam for X4 routing. Returns the ordered candidates to
/// try above `origin`, owner excluded (the walk always ends at the owner).
/// The default follows the upline chain, same as X3.
using RoutingStrategy =
    std::function<std::vector<std::string>(const MatrixWorld&, const std::string& origin)>;

struct MatrixWorld {
    std::string owner;
    std::map<std::string, MatrixUser> users;
    std::vector<PaymentEvent> events;
    Amount gas_fee = kDefaultGasGwei;
    std::uint64_t calls = 0;  // state-changing calls accepted
    RoutingStrategy x4_route;  // empty -> upline walk

    bool registered(const std::string& id) const { return users.count(id) != 0; }
};

/// Owner starts with all 24 slots open for free and permanently unblockable.
MatrixWorld new_world(const std::string& owner, Amount gas_fee = kDefaultGasGwei);

/// 0.025 ETH * 2^(level-1). Throws LEVEL_RANGE outside 1..12.
Amount slot_price(int level);

/// Register a new user. Payment must equal slot_price(1)*2; the two halves
/// route independently through the X3 and X4 level-1 logic. A missing or
/// unknown referrer falls back to the owner as upline.
std::vector<PaymentEvent> register_user(MatrixWorld& world, const std::string& new_user,
                                        const std::string& referrer = {},
                                        Amount payment = kRegistrationGwei);

/// Buy the next level in one matrix. Unblocks level-1 permanently and
/// routes slot_price(level) to the first eligible upline at that level.
std::vector<PaymentEvent> buy_new_level(MatrixWorld& world, const std::string& user, Matrix m,
                                        int level);

/// The upline walk shared by registration and level purchase. Skips
/// candidates whose slot at `level` is inactive or blocked; the referral is
/// recorded in the first accepting slot, and if that fills the slot
/// (capacity 3 X3 / 6 X4) the slot reinvests — reinvest count up, referral
/// list cleared, blocked unless the next level is owned — and the money
/// keeps walking up. The owner always accepts and never blocks.
PaymentEvent route_payment(MatrixWorld& world, const std::string& origin, Matrix m, int level,
                           Amount half);

struct ProfitReport {
    struct UserNet {
        std::string id;
        Amount net = 0;  // paid_out - paid_in - gas_paid
    };
    std::vector<UserNet> nets;             // sorted by net descending, then id
    std::map<std::string, std::size_t> histogram;  // bucket label -> count
    std::vector<double> top_shares;        // top-k share of all positive earnings
    double spillover_fraction = 0.0;       // non-DIRECT events / state-changing calls
    double loser_fraction = 0.0;           // users with net < 0
    Amount owner_net = 0;
};

ProfitReport profit_report(const MatrixWorld& world, std::size_t top_k = 10);

/// FNV-1a over a canonical rendering of users, slots, and the event log.
std::uint64_t state_hash(const MatrixWorld& world);

struct ScenarioOp {
    std::string op;  // "register" | "buy"
    std::string user;
    std::string ref;
    Matrix matrix = Matrix::X3;
    int level = 1;
};

std::vector<ScenarioOp> load_scenario_jsonl(const std::string& path);

struct ReplayResult {
    std::vector<PaymentEvent> events;
    std::size_t accepted = 0;
    std::size_t rejected = 0;  // only when lenient
};

/// Apply a scenario in order. Strict mode rethrows the first bad call;
/// lenient mode counts and skips it.
ReplayResult replay_scenario(MatrixWorld& world, const std::vector<ScenarioOp>& ops,
                             bool lenient = false);

/// seq,payer,payee,matrix,level,amount,reason — amount in ETH decimal.
void save_event_log_csv(const std::vector<PaymentEvent>& events, const std::string& path);

}  // namespace chaintrace
