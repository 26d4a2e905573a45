#pragma once

#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "chaintrace/cluster.hpp"
#include "chaintrace/evidence.hpp"
#include "chaintrace/ledger.hpp"

namespace chaintrace {

enum class PoolDirection { DEPOSIT, WITHDRAWAL };
enum class PoolAttribution { FOUNDER, MINER, OTHER, UNKNOWN };

const char* to_string(PoolAttribution a);

struct PoolEvent {
    const LedgerTx* tx = nullptr;
    PoolDirection direction = PoolDirection::DEPOSIT;
    Amount value = 0;                       // DEPOSIT: sum zIn; WITHDRAWAL: sum zOut
    std::vector<std::string> actors;        // transparent addresses on the visible side
    PoolAttribution attribution = PoolAttribution::UNKNOWN;
};

/// All deposits and withdrawals of a classified Zcash ledger, ledger order.
std::vector<PoolEvent> pool_events(const Ledger& ledger);

inline constexpr Amount kFounderWithdrawalZat = 25000010000;  // 250.0001 ZEC
inline constexpr Amount kFounderDepositZat = 24999990000;     // 249.9999 ZEC
inline constexpr Amount kFounderRotationCapZat = 4427250000000;  // 44,272.5 ZEC

struct FounderReport {
    TagMap tags;                       // addresses newly attributed FOUNDER
    std::vector<LinkEvidence> links;   // FOUNDER_VALUE per flagged withdrawal
    /// Deposit-side diagnostic: per-address count of deposits at the
    /// signature value and whether the cumulative rotation cap held.
    struct DepositPattern {
        std::string address;
        std::size_t signature_deposits = 0;
        Amount total_deposited = 0;
        bool within_rotation_cap = true;
    };
    std::vector<DepositPattern> deposit_patterns;
};

/// Value heuristic: any withdrawal of exactly `withdrawal_value` is a
/// founder withdrawal. The deposit-side pattern is reported, never used to
/// auto-tag.
FounderReport tag_founders(const Ledger& ledger,
                           const std::unordered_set<std::string>& known_founders,
                           Amount withdrawal_value = kFounderWithdrawalZat,
                           Amount deposit_value = kFounderDepositZat,
                           Amount rotation_cap = kFounderRotationCapZat);

struct MinerReport {
    TagMap tags;                      // non-pool outputs newly tagged MINER
    std::vector<LinkEvidence> links;  // MINER_PAYOUT per flagged withdrawal
};

/// Payout heuristic: a withdrawal with more than `min_outputs` output
/// addresses, at least one of them pool-tagged, is a mining payout.
MinerReport tag_miners(const Ledger& ledger, const TagMap& pools, std::size_t min_outputs = 100);

/// Unique-value round trips: value v deposited exactly once and withdrawn
/// exactly once, withdrawal after deposit within `max_interval` blocks.
std::vector<LinkEvidence> round_trip_unique(const Ledger& ledger, std::uint64_t max_interval);
std::vector<LinkEvidence> round_trip_unique_serial(const Ledger& ledger,
                                                   std::uint64_t max_interval);

struct IntervalSweepPoint {
    std::uint64_t max_interval = 0;
    std::size_t links = 0;
    Amount linked_value = 0;
};

/// Linked-value-vs-interval curve for intervals 1..limit.
std::vector<IntervalSweepPoint> round_trip_sweep(const Ledger& ledger, std::uint64_t limit = 100);

struct AnonymityReport {
    struct ClassShare {
        PoolAttribution attribution;
        std::size_t withdrawals = 0;
        Amount value = 0;
        double value_share = 0.0;  // of total withdrawn value
    };
    std::vector<ClassShare> classes;
    std::size_t total_withdrawals = 0;
    Amount total_withdrawn = 0;
    double linked_value_share = 0.0;  // all linked classes combined
};

/// Per-attribution share of withdrawals linked by the supplied evidence.
/// FOUNDER and MINER are mutually exclusive per transaction; remaining
/// links count as OTHER.
AnonymityReport anonymity_reduction(const Ledger& ledger, const std::vector<LinkEvidence>& links);

struct TsbParams {
    std::set<Amount> amounts;          // requested deposit values, smallest units
    Amount tx_tol = 500000000;         // +-5 ZEC per transaction
    Amount cluster_tol = 100000000;    // +-1 ZEC per cluster-month
    std::size_t max_history = 250;     // lifetime tx cap per member address
    static TsbParams defaults();       // 100/200/400/500 ZEC
};

struct TsbFlag {
    std::uint32_t cluster_id = 0;
    std::string month;   // UTC "YYYY-MM"
    Amount matched_amount = 0;  // the requested amount the month total matched
    Amount month_total = 0;
};

/// Suspect filter over cluster-months. A cluster is flagged in month M iff
/// it made a deposit within tx_tol of a requested amount in M, no member
/// was ever a withdrawal output, no member exceeds the history cap, and the
/// cluster's deposits in M total within cluster_tol of a requested amount.
std::vector<TsbFlag> tsb_filter(const Ledger& ledger, const ClusterSet& clusters,
                                const TsbParams& params = TsbParams::defaults());

inline const std::set<Amount> kDashDenominations = {1000000, 10000000, 100000000, 1000000000};

/// Dash PrivateSend shape: at least three inputs and all outputs but at most
/// one carrying one shared denomination value. Standard outputs must match
/// the denomination exactly; the single nonstandard output absorbs fees.
bool detect_coinjoin(const LedgerTx& tx, const std::set<Amount>& denominations = kDashDenominations);

/// UTC "YYYY-MM" bucket of a UNIX timestamp.
std::string utc_month(std::int64_t ts);

}  // namespace chaintrace
