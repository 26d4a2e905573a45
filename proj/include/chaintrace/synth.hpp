#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "chaintrace/cluster.hpp"
#include "chaintrace/evidence.hpp"
#include "chaintrace/ledger.hpp"
#include "chaintrace/xchain.hpp"

namespace chaintrace {

class SynthError : public std::runtime_error {
public:
    enum class Code { INVALID_PARAMS };
    SynthError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

struct GenParams {
    std::size_t n_entities = 40;
    std::size_t txs_per_entity = 10;
    /// Expected shifts per entity activity slot; shift count =
    /// round(shift_rate * n_entities * txs_per_entity).
    double shift_rate = 0.2;
    /// Probability of a same-amount decoy landing in a deposit's block.
    double collision_rate = 0.0;
    /// Inject the founders' deposit/withdrawal cadence on the ZEC ledger.
    bool founder_schedule = false;
    std::size_t founder_withdrawals = 1953;
    /// Fan-out of one injected mining-pool payout; 0 disables it.
    std::size_t miner_fanout = 0;
    /// Fractions of shifts paired with an immediate opposite shift. uturn
    /// pairs re-spend the exact withdrawal outpoint; xrt pairs are funded
    /// from a fresh address (basic-tier only).
    double uturn_rate = 0.0;
    double xrt_rate = 0.0;
    /// Extra churn on the ZEC ledger (transparent plus pool traffic).
    std::size_t noise_txs = 0;
    /// Injected shielded-pool interaction shifts: withdraw-to-z,
    /// withdraw-then-shield, deposit-funded-from-deshield.
    std::size_t pool_type1 = 0;
    std::size_t pool_type2 = 0;
    std::size_t pool_type3 = 0;
    std::vector<std::string> chains = {"BTC", "ZEC", "ETH"};

    void validate() const;  // throws INVALID_PARAMS
};

/// A generated multi-chain world with recorded ground truth. Every injected
/// pattern appears in `truth` with the same canonical endpoints the
/// detectors emit.
struct SyntheticWorld {
    std::uint64_t seed = 0;
    GenParams params;
    ChainRegistry registry;
    std::map<std::string, std::vector<Address>> entities;  // entity id -> owned addresses
    LedgerMap ledgers;
    std::vector<ShiftRecord> shifts;
    FixtureOracle oracle;
    TagMap tags;  // pool tag backing the miner-payout injection
    std::vector<LinkEvidence> truth;
};

/// Deterministic for (params, seed). Ledgers pass full ingestion
/// validation; shift amounts carry at least four decimal places and are
/// unique per chain unless collisions are requested.
SyntheticWorld generate(const GenParams& params, std::uint64_t seed);

struct ScoreReport {
    struct KindScore {
        LinkKind kind = LinkKind::PASS_THROUGH;
        std::size_t predicted = 0;
        std::size_t truth = 0;
        std::size_t matched = 0;
        double precision = 1.0;
        double recall = 0.0;
        bool zero_pred = false;
    };
    std::size_t predicted = 0;
    std::size_t truth = 0;
    std::size_t matched = 0;
    /// Empty prediction reports precision 1.0 with zero_pred set.
    double precision = 1.0;
    double recall = 0.0;
    bool zero_pred = false;
    std::vector<KindScore> kinds;
};

/// Exact set comparison on (kind, endpoints, value) after canonicalization;
/// params never participate in matching.
ScoreReport score(const std::vector<LinkEvidence>& predicted,
                  const std::vector<LinkEvidence>& truth);

/// World bundle: <SYMBOL>.jsonl per ledger, shifts.csv, oracle.csv,
/// tags.csv, truth.jsonl, world.json (seed, params, chain manifest).
void save_world(const SyntheticWorld& world, const std::string& dir);

struct WorldBundle {
    ChainRegistry registry;
    LedgerMap ledgers;
    std::vector<ShiftRecord> shifts;
    FixtureOracle oracle;
    TagMap tags;
    std::vector<LinkEvidence> truth;
};

WorldBundle load_world(const std::string& dir);

/// Labeled substream seed so per-chain streams stay independent.
std::uint64_t substream_seed(std::uint64_t seed, const std::string& label);

/// Standalone random ledgers for oracle-equivalence and scale tests.
Ledger random_utxo_ledger(std::uint64_t seed, std::size_t n_txs, std::size_t n_addresses,
                          const ChainId& chain);
/// Pool deposits/withdrawals drawn from a small value grid so duplicate
/// values are common and the unique-value rule is exercised.
Ledger random_zcash_ledger(std::uint64_t seed, std::size_t n_txs, std::size_t value_space,
                           const ChainId& chain);

}  // namespace chaintrace
