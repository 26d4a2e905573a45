#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "chaintrace/ledger.hpp"

namespace chaintrace {

/// Classifies one Zcash-style transaction. Total on valid transactions.
/// zOut entries holding only the fee sentinel count as empty.
ZTxClass classify_zcash_tx(const LedgerTx& tx);

/// Per-class transaction counts over a whole ledger. The parallel variant
/// uses OpenMP with a deterministic reduction; the serial variant is the
/// reference it is tested against.
using ClassCounts = std::array<std::uint64_t, 6>;
ClassCounts class_counts(const Ledger& ledger);
ClassCounts class_counts_serial(const Ledger& ledger);

struct PoolPoint {
    std::uint64_t height = 0;
    Amount balance = 0;
};

/// Cumulative shielded-pool balance per block: sum of zIn totals minus zOut
/// totals. Throws NEGATIVE_POOL if withdrawals ever exceed deposits.
std::vector<PoolPoint> pool_balance_series(const Ledger& ledger);

}  // namespace chaintrace
