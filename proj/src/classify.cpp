#include "chaintrace/classify.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace chaintrace {

ZTxClass classify_zcash_tx(const LedgerTx& tx) {
    if (tx.coinbase) return ZTxClass::COINGEN;
    if (tx.joinsplits.empty()) return ZTxClass::TRANSPARENT;
    bool zin_nonempty = false;
    bool zout_nonempty = false;
    for (const auto& js : tx.joinsplits) {
        for (const auto& e : js.zin)
            if (!e.address.empty()) zin_nonempty = true;
        for (const auto& e : js.zout)
            if (!e.address.empty()) zout_nonempty = true;
    }
    // A tx moving transparent value alongside its joinsplits, or exposing
    // both pool endpoints, does not fit a single pool direction.
    if (!tx.vin.empty() && !tx.vout.empty()) return ZTxClass::MIXED;
    if (zin_nonempty && zout_nonempty) return ZTxClass::MIXED;
    if (zin_nonempty) return ZTxClass::SHIELDED;
    if (zout_nonempty) return ZTxClass::DESHIELDED;
    return ZTxClass::PRIVATE;
}

ClassCounts class_counts_serial(const Ledger& ledger) {
    ClassCounts counts{};
    for (const auto& tx : ledger.txs()) counts[static_cast<std::size_t>(classify_zcash_tx(tx))]++;
    return counts;
}

ClassCounts class_counts(const Ledger& ledger) {
    ClassCounts counts{};
    const auto& txs = ledger.txs();
    const std::int64_t n = static_cast<std::int64_t>(txs.size());
#ifdef _OPENMP
    std::uint64_t c0 = 0, c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0;
#pragma omp parallel for reduction(+ : c0, c1, c2, c3, c4, c5) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        switch (classify_zcash_tx(txs[static_cast<std::size_t>(i)])) {
            case ZTxClass::TRANSPARENT: ++c0; break;
            case ZTxClass::COINGEN: ++c1; break;
            case ZTxClass::SHIELDED: ++c2; break;
            case ZTxClass::DESHIELDED: ++c3; break;
            case ZTxClass::MIXED: ++c4; break;
            case ZTxClass::PRIVATE: ++c5; break;
        }
    }
    counts = {c0, c1, c2, c3, c4, c5};
    // Enum order must match the table above.
    static_assert(static_cast<int>(ZTxClass::TRANSPARENT) == 0);
    static_assert(static_cast<int>(ZTxClass::PRIVATE) == 5);
#else
    (void)n;
    counts = class_counts_serial(ledger);
#endif
    return counts;
}

std::vector<PoolPoint> pool_balance_series(const Ledger& ledger) {
    std::vector<PoolPoint> series;
    for (const auto& tx : ledger.txs()) {
        Amount delta = tx.pool_deposit() - tx.pool_withdrawal();
        if (!series.empty() && series.back().height == tx.height)
            series.back().balance += delta;
        else
            series.push_back({tx.height, (series.empty() ? 0 : series.back().balance) + delta});
    }
    // The balance check is per block: intra-block ordering may net out.
    for (const auto& p : series)
        if (p.balance < 0)
            throw LedgerError(LedgerError::Code::NEGATIVE_POOL,
                              "pool balance negative at height " + std::to_string(p.height));
    return series;
}

}  // namespace chaintrace
