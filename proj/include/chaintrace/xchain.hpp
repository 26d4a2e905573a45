#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "chaintrace/evidence.hpp"
#include "chaintrace/ledger.hpp"

namespace chaintrace {

/// One advertised cross-chain trade: (curIn, curOut, amt, t, id).
struct ShiftRecord {
    std::string id;
    std::string cur_in;
    std::string cur_out;
    Amount amount = 0;  // in curIn smallest units
    std::int64_t timestamp = 0;
};

enum class ShiftState { COMPLETE, ERROR, NO_DEPOSITS };

/// The oracle's answer for one deposit address.
struct ShiftStatus {
    ShiftState status = ShiftState::ERROR;
    std::string deposit_address;   // addr_s on curIn
    std::string withdraw_address;  // addr_u on curOut
    Amount in_coin = 0;
    std::string in_type;
    Amount out_coin = 0;           // in curOut smallest units
    std::string out_type;
    std::string out_txid;          // Phase-2 tx on curOut
    std::string error;
};

/// Per-chain (delta_b, delta_a) block window around the anchor block.
struct WindowParams {
    struct Window {
        std::uint64_t before = 0;
        std::uint64_t after = 0;
    };
    std::map<std::string, Window> per_chain;

    Window get(const std::string& chain) const;
    void set(const std::string& chain, std::uint64_t before, std::uint64_t after);

    /// BTC 0/1, BCH 9/4, DASH 5/5, DOGE 1/4, ETH 5/0, ETC 5/0, LTC 1/2,
    /// ZEC 1/3 — the tuned per-chain defaults.
    static WindowParams defaults();
};

/// Address -> status lookup. Deterministic within a run.
class ShiftOracle {
public:
    virtual ~ShiftOracle() = default;
    virtual std::optional<ShiftStatus> query(const std::string& deposit_address) const = 0;
};

/// File-backed mock answering from a fixture table.
/// CSV: addr_s,status,withdraw,in_coin,in_type,out_coin,out_type,out_txid
class FixtureOracle : public ShiftOracle {
public:
    void add(ShiftStatus status);
    std::optional<ShiftStatus> query(const std::string& deposit_address) const override;
    std::size_t size() const { return table_.size(); }

    static FixtureOracle load_csv(const std::string& path, const ChainRegistry& chains);
    void save_csv(const std::string& path, const ChainRegistry& chains) const;

private:
    std::unordered_map<std::string, ShiftStatus> table_;
};

/// Ledgers keyed by chain symbol.
using LedgerMap = std::map<std::string, Ledger>;

enum class HitClass { ZERO_HITS, SINGLE_HIT, MULTI_HIT };

struct Phase1Candidate {
    const LedgerTx* tx = nullptr;
    std::string recipient;  // address that received exactly the shifted amount
};

struct Phase1Result {
    HitClass hit_class = HitClass::ZERO_HITS;
    std::vector<Phase1Candidate> candidates;
    std::uint64_t anchor_height = 0;
};

class XchainError : public std::runtime_error {
public:
    enum class Code { CHAIN_MISSING, AMBIGUOUS, NOT_APPLICABLE };
    XchainError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

/// Deposit-side search: transactions in the height window around the block
/// closest to the advertised timestamp carrying an output of exactly the
/// advertised amount.
Phase1Result phase1_basic(const ShiftRecord& shift, const LedgerMap& ledgers,
                          const WindowParams& windows);

struct ResolvedShift {
    ShiftRecord shift;
    const LedgerTx* deposit_tx = nullptr;  // Phase-1 tx on curIn
    ShiftStatus status;                    // carries the Phase-2 txid
};

/// Oracle confirmation over Phase-1 candidates. A candidate survives only
/// when the oracle agrees on currency pair and amount (address re-use
/// guard). More than one confirmed candidate raises AMBIGUOUS.
std::optional<ResolvedShift> phase1_augmented(const ShiftRecord& shift,
                                              const Phase1Result& candidates,
                                              const ShiftOracle& oracle);

/// Estimation fallback when no oracle exists: candidates on the curOut
/// ledger within `tol` of amt*rate - fee inside the timing window. No
/// ground truth; lower fidelity than the augmented path.
std::vector<const LedgerTx*> phase2_estimate(const ShiftRecord& shift, const Ledger& ledger_out,
                                             double rate, Amount fee, double tol,
                                             const WindowParams& windows);

/// One PASS_THROUGH link per resolved shift: deposit input addresses on
/// curIn to withdrawal output addresses on curOut.
std::vector<LinkEvidence> detect_pass_through(const std::vector<ResolvedShift>& resolved);

enum class UturnTier { BASIC, ADDR, UTXO };

struct UturnParams {
    std::int64_t window_secs = 1800;
    double value_tol = 0.01;
};

/// Opposite-direction shift pairs within the timing window whose second
/// amount is within tolerance of the first shift's outCoin. Tier ADDR
/// additionally requires the Phase-2 output address to fund the later
/// Phase-1 deposit; tier UTXO requires the exact created outpoint spent.
/// Emits one link per detected pair at its strongest tier, plus links for
/// every weaker tier it also satisfies (UTXO implies ADDR implies BASIC).
std::vector<LinkEvidence> detect_uturn(const std::vector<ResolvedShift>& resolved,
                                       const LedgerMap& ledgers,
                                       const UturnParams& params = {});

struct RoundTripParams {
    std::int64_t window_secs = 1800;
    double value_tol = 0.005;
};

/// X->Y then Y->X within window and tolerance against the first shift's
/// outCoin. same_address param records whether the first deposit's input
/// address equals the second withdrawal's output address.
std::vector<LinkEvidence> detect_round_trip(const std::vector<ResolvedShift>& resolved,
                                            const LedgerMap& ledgers,
                                            const RoundTripParams& params = {});

struct BotParams {
    std::size_t min_set = 15;
    std::int64_t span_secs = 300;
    double value_tol = 0.01;
};

/// Maximal same-pair shift sets inside a sliding time span with all values
/// within the relative tolerance band. Grouping by exact currency pair
/// is the odd-pair post-filter: a stray shift of another pair never joins.
std::vector<std::vector<ShiftRecord>> detect_trading_bots(std::vector<ShiftRecord> stream,
                                                          const BotParams& params = {});

struct PoolInteractionCounts {
    std::size_t direct_to_pool = 0;    // withdrawal straight to a z-address
    std::size_t deposit_next = 0;      // withdrawal whose next spend shields
    std::size_t funded_from_pool = 0;  // deposit funded by a z-to-t output
    Amount direct_to_pool_value = 0;
    Amount deposit_next_value = 0;
    Amount funded_from_pool_value = 0;
};

/// The three shift/shielded-pool interaction patterns on a Zcash ledger.
/// z-address withdrawal targets are conventionally marked with a "z" name
/// prefix in the oracle fixture.
PoolInteractionCounts pool_shift_interactions(const std::vector<ResolvedShift>& resolved,
                                              const Ledger& zcash);

/// Shift stream CSV: id,cur_in,cur_out,amt,ts
std::vector<ShiftRecord> load_shift_stream(const std::string& path, const ChainRegistry& chains);
void save_shift_stream(const std::vector<ShiftRecord>& stream, const std::string& path,
                       const ChainRegistry& chains);

/// Whether an address string denotes a shielded (z-) address.
bool is_shielded_address(const std::string& addr);

}  // namespace chaintrace
