#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "chaintrace/amount.hpp"
#include "chaintrace/chain.hpp"

namespace chaintrace {

/// Chain-scoped address. Equality is (chain symbol, value); addresses are
/// never compared across chains implicitly.
struct Address {
    std::string chain;
    std::string value;

    bool operator==(const Address&) const = default;
    auto operator<=>(const Address&) const = default;
};

struct AddressHash {
    std::size_t operator()(const Address& a) const {
        std::size_t h = std::hash<std::string>{}(a.chain);
        return h ^ (std::hash<std::string>{}(a.value) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    }
};

/// Sentinel for zOut value not assigned to any address (miner-fee
/// allocation). Excluded from classification and address indexing.
inline constexpr const char* kFeeSentinel = "";

struct Outpoint {
    std::string txid;
    std::uint32_t index = 0;

    bool operator==(const Outpoint&) const = default;
};

struct OutpointHash {
    std::size_t operator()(const Outpoint& o) const {
        return std::hash<std::string>{}(o.txid) * 31 + o.index;
    }
};

struct TxInput {
    Outpoint spent;
    std::string address;
    Amount value = 0;
};

struct TxOutput {
    std::string address;
    Amount value = 0;
};

/// Transparent endpoints of one vJoinSplit: zIn funds the pool, zOut leaves
/// it. Shielded endpoints are represented by absence.
struct JoinSplit {
    std::vector<TxOutput> zin;
    std::vector<TxOutput> zout;
};

struct AccountXfer {
    std::string from;
    std::string to;
    Amount value = 0;
    Amount fee = 0;
};

struct LedgerTx {
    std::string txid;
    std::uint64_t height = 0;
    std::int64_t timestamp = 0;
    bool coinbase = false;
    std::vector<TxInput> vin;
    std::vector<TxOutput> vout;
    std::vector<JoinSplit> joinsplits;
    std::optional<AccountXfer> xfer;

    Amount pool_deposit() const;   // sum of zIn over all joinsplits
    Amount pool_withdrawal() const;  // sum of zOut, fee sentinel included
};

enum class ZTxClass { TRANSPARENT, COINGEN, SHIELDED, DESHIELDED, MIXED, PRIVATE };

const char* to_string(ZTxClass c);

class LedgerError : public std::runtime_error {
public:
    enum class Code { MALFORMED_RECORD, DUPLICATE_TXID, DOUBLE_SPEND, OUT_OF_ORDER, NEGATIVE_POOL };

    LedgerError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

/// Immutable after construction; safe for concurrent readers.
class Ledger {
public:
    Ledger(ChainId chain, std::vector<LedgerTx> txs);

    const ChainId& chain() const { return chain_; }
    const std::vector<LedgerTx>& txs() const { return txs_; }

    const LedgerTx* by_txid(const std::string& txid) const;
    /// Transactions with height in [lo, hi], in ledger order.
    std::vector<const LedgerTx*> in_height_range(std::uint64_t lo, std::uint64_t hi) const;
    /// Transactions touching the given address (as input, output, zin, zout
    /// or account endpoint), in ledger order.
    std::vector<const LedgerTx*> by_address(const std::string& addr) const;
    /// Transaction spending the given outpoint, if any.
    const LedgerTx* spender_of(const Outpoint& op) const;
    /// Block whose timestamp is closest to t; nullopt on an empty ledger.
    std::optional<std::uint64_t> height_closest_to(std::int64_t t) const;

private:
    ChainId chain_;
    std::vector<LedgerTx> txs_;
    std::unordered_map<std::string, std::size_t> txid_index_;
    std::unordered_map<std::string, std::vector<std::size_t>> addr_index_;
    std::unordered_map<Outpoint, std::size_t, OutpointHash> spend_index_;
    std::vector<std::pair<std::uint64_t, std::size_t>> height_starts_;  // (height, first tx idx)
    std::vector<std::pair<std::int64_t, std::uint64_t>> block_times_;   // (timestamp, height), sorted
};

/// JSONL ledger ingestion. One tx per line; values are decimal strings
/// scaled by the chain's `decimals`. Input must be append-ordered by height.
Ledger parse_ledger(const std::string& path, const ChainId& chain);
Ledger parse_ledger_stream(std::istream& in, const ChainId& chain, const std::string& origin = "<stream>");

/// Validates and indexes transactions already in memory (same checks as
/// parse_ledger).
Ledger make_ledger(const ChainId& chain, std::vector<LedgerTx> txs);

void serialize_ledger(const Ledger& ledger, std::ostream& out);
void serialize_ledger(const Ledger& ledger, const std::string& path);

}  // namespace chaintrace
