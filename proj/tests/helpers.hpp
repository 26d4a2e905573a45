#pragma once

// Shared fixture builders for the unit tests.

#include <string>
#include <vector>

#include "chaintrace/ledger.hpp"

namespace testutil {

using namespace chaintrace;

inline LedgerTx coinbase_tx(std::string txid, std::uint64_t height, std::int64_t ts,
                            std::vector<TxOutput> vout) {
    LedgerTx tx;
    tx.txid = std::move(txid);
    tx.height = height;
    tx.timestamp = ts;
    tx.coinbase = true;
    tx.vout = std::move(vout);
    return tx;
}

inline LedgerTx spend_tx(std::string txid, std::uint64_t height, std::int64_t ts,
                         std::vector<TxInput> vin, std::vector<TxOutput> vout) {
    LedgerTx tx;
    tx.txid = std::move(txid);
    tx.height = height;
    tx.timestamp = ts;
    tx.vin = std::move(vin);
    tx.vout = std::move(vout);
    return tx;
}

/// t-to-z: the named addresses fund the pool.
inline LedgerTx shield_tx(std::string txid, std::uint64_t height, std::int64_t ts,
                          std::vector<TxOutput> zin) {
    LedgerTx tx;
    tx.txid = std::move(txid);
    tx.height = height;
    tx.timestamp = ts;
    tx.joinsplits.push_back({std::move(zin), {}});
    return tx;
}

/// z-to-t: the named addresses receive from the pool.
inline LedgerTx deshield_tx(std::string txid, std::uint64_t height, std::int64_t ts,
                            std::vector<TxOutput> zout) {
    LedgerTx tx;
    tx.txid = std::move(txid);
    tx.height = height;
    tx.timestamp = ts;
    tx.joinsplits.push_back({{}, std::move(zout)});
    return tx;
}

inline LedgerTx xfer_tx(std::string txid, std::uint64_t height, std::int64_t ts, std::string from,
                        std::string to, Amount value, Amount fee) {
    LedgerTx tx;
    tx.txid = std::move(txid);
    tx.height = height;
    tx.timestamp = ts;
    tx.xfer = AccountXfer{std::move(from), std::move(to), value, fee};
    return tx;
}

inline ChainId zec() { return {"ZEC", Accounting::UTXO, 8}; }
inline ChainId btc() { return {"BTC", Accounting::UTXO, 8}; }
inline ChainId dash() { return {"DASH", Accounting::UTXO, 8}; }
inline ChainId eth() { return {"ETH", Accounting::ACCOUNT, 9}; }

}  // namespace testutil
