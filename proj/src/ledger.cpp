#include "chaintrace/ledger.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace chaintrace {

using nlohmann::json;

Amount LedgerTx::pool_deposit() const {
    Amount total = 0;
    for (const auto& js : joinsplits)
        for (const auto& e : js.zin) total += e.value;
    return total;
}

Amount LedgerTx::pool_withdrawal() const {
    Amount total = 0;
    for (const auto& js : joinsplits)
        for (const auto& e : js.zout) total += e.value;
    return total;
}

const char* to_string(ZTxClass c) {
    switch (c) {
        case ZTxClass::TRANSPARENT: return "transparent";
        case ZTxClass::COINGEN: return "coingen";
        case ZTxClass::SHIELDED: return "shielded";
        case ZTxClass::DESHIELDED: return "deshielded";
        case ZTxClass::MIXED: return "mixed";
        case ZTxClass::PRIVATE: return "private";
    }
    return "?";
}

Ledger::Ledger(ChainId chain, std::vector<LedgerTx> txs)
    : chain_(std::move(chain)), txs_(std::move(txs)) {
    txid_index_.reserve(txs_.size());
    std::uint64_t prev_height = 0;
    for (std::size_t i = 0; i < txs_.size(); ++i) {
        const auto& tx = txs_[i];
        if (i > 0 && tx.height < prev_height)
            throw LedgerError(LedgerError::Code::OUT_OF_ORDER,
                              "tx " + tx.txid + " at height " + std::to_string(tx.height) +
                                  " after height " + std::to_string(prev_height));
        if (!txid_index_.emplace(tx.txid, i).second)
            throw LedgerError(LedgerError::Code::DUPLICATE_TXID, "duplicate txid: " + tx.txid);
        if (chain_.accounting == Accounting::UTXO && tx.xfer)
            throw LedgerError(LedgerError::Code::MALFORMED_RECORD,
                              "tx " + tx.txid + ": UTXO chain tx carries account xfer");
        if (chain_.accounting == Accounting::ACCOUNT &&
            (!tx.vin.empty() || !tx.vout.empty() || !tx.joinsplits.empty()))
            throw LedgerError(LedgerError::Code::MALFORMED_RECORD,
                              "tx " + tx.txid + ": account chain tx carries UTXO fields");
        if (height_starts_.empty() || height_starts_.back().first != tx.height)
            height_starts_.emplace_back(tx.height, i);
        if (block_times_.empty() || block_times_.back().second != tx.height)
            block_times_.emplace_back(tx.timestamp, tx.height);
        prev_height = tx.height;

        auto touch = [&](const std::string& addr) {
            if (addr.empty()) return;  // fee sentinel stays unindexed
            auto& v = addr_index_[addr];
            if (v.empty() || v.back() != i) v.push_back(i);
        };
        for (const auto& in : tx.vin) {
            touch(in.address);
            if (!spend_index_.emplace(in.spent, i).second)
                throw LedgerError(LedgerError::Code::DOUBLE_SPEND,
                                  "outpoint " + in.spent.txid + ":" +
                                      std::to_string(in.spent.index) + " spent twice");
        }
        for (const auto& out : tx.vout) touch(out.address);
        for (const auto& js : tx.joinsplits) {
            for (const auto& e : js.zin) touch(e.address);
            for (const auto& e : js.zout) touch(e.address);
        }
        if (tx.xfer) {
            touch(tx.xfer->from);
            touch(tx.xfer->to);
        }
    }
    std::sort(block_times_.begin(), block_times_.end());
}

const LedgerTx* Ledger::by_txid(const std::string& txid) const {
    auto it = txid_index_.find(txid);
    return it == txid_index_.end() ? nullptr : &txs_[it->second];
}

std::vector<const LedgerTx*> Ledger::in_height_range(std::uint64_t lo, std::uint64_t hi) const {
    std::vector<const LedgerTx*> out;
    auto it = std::lower_bound(height_starts_.begin(), height_starts_.end(),
                               std::make_pair(lo, std::size_t{0}));
    if (it == height_starts_.end()) return out;
    for (std::size_t i = it->second; i < txs_.size() && txs_[i].height <= hi; ++i)
        out.push_back(&txs_[i]);
    return out;
}

std::vector<const LedgerTx*> Ledger::by_address(const std::string& addr) const {
    std::vector<const LedgerTx*> out;
    auto it = addr_index_.find(addr);
    if (it == addr_index_.end()) return out;
    out.reserve(it->second.size());
    for (std::size_t i : it->second) out.push_back(&txs_[i]);
    return out;
}

const LedgerTx* Ledger::spender_of(const Outpoint& op) const {
    auto it = spend_index_.find(op);
    return it == spend_index_.end() ? nullptr : &txs_[it->second];
}

std::optional<std::uint64_t> Ledger::height_closest_to(std::int64_t t) const {
    if (block_times_.empty()) return std::nullopt;
    auto it = std::lower_bound(block_times_.begin(), block_times_.end(),
                               std::make_pair(t, std::uint64_t{0}));
    if (it == block_times_.end()) return block_times_.back().second;
    if (it == block_times_.begin()) return it->second;
    auto prev = std::prev(it);
    return (t - prev->first) <= (it->first - t) ? prev->second : it->second;
}

namespace {

Amount amount_field(const json& j, const char* key, int decimals, std::size_t line) {
    const auto& v = j.at(key);
    std::optional<Amount> parsed;
    if (v.is_string())
        parsed = try_parse_decimal(v.get<std::string>(), decimals);
    else if (v.is_number_unsigned() || v.is_number_integer())
        parsed = static_cast<Amount>(v.get<std::int64_t>());
    if (!parsed || *parsed < 0)
        throw LedgerError(LedgerError::Code::MALFORMED_RECORD,
                          "line " + std::to_string(line) + ": bad amount in field '" + key + "'");
    return *parsed;
}

LedgerTx tx_from_json(const json& j, const ChainId& chain, std::size_t line) {
    LedgerTx tx;
    tx.txid = j.at("txid").get<std::string>();
    tx.height = j.at("height").get<std::uint64_t>();
    tx.timestamp = j.at("ts").get<std::int64_t>();
    tx.coinbase = j.value("coinbase", false);
    if (j.contains("vin")) {
        for (const auto& e : j["vin"]) {
            TxInput in;
            in.spent.txid = e.at("src_txid").get<std::string>();
            in.spent.index = e.at("src_idx").get<std::uint32_t>();
            in.address = e.at("addr").get<std::string>();
            in.value = amount_field(e, "value", chain.decimals, line);
            tx.vin.push_back(std::move(in));
        }
    }
    if (j.contains("vout")) {
        for (const auto& e : j["vout"]) {
            tx.vout.push_back({e.at("addr").get<std::string>(),
                               amount_field(e, "value", chain.decimals, line)});
        }
    }
    if (j.contains("joinsplits")) {
        for (const auto& e : j["joinsplits"]) {
            JoinSplit js;
            for (const auto& z : e.value("zin", json::array()))
                js.zin.push_back({z.at("addr").get<std::string>(),
                                  amount_field(z, "value", chain.decimals, line)});
            for (const auto& z : e.value("zout", json::array()))
                js.zout.push_back({z.value("addr", std::string{}),
                                   amount_field(z, "value", chain.decimals, line)});
            tx.joinsplits.push_back(std::move(js));
        }
    }
    if (j.contains("xfer") && !j["xfer"].is_null()) {
        const auto& x = j["xfer"];
        AccountXfer xfer;
        xfer.from = x.at("from").get<std::string>();
        xfer.to = x.at("to").get<std::string>();
        xfer.value = amount_field(x, "value", chain.decimals, line);
        xfer.fee = amount_field(x, "fee", chain.decimals, line);
        tx.xfer = std::move(xfer);
    }

    if (chain.accounting == Accounting::UTXO && tx.xfer)
        throw LedgerError(LedgerError::Code::MALFORMED_RECORD,
                          "line " + std::to_string(line) + ": UTXO chain tx carries account xfer");
    if (chain.accounting == Accounting::ACCOUNT &&
        (!tx.vin.empty() || !tx.vout.empty() || !tx.joinsplits.empty()))
        throw LedgerError(LedgerError::Code::MALFORMED_RECORD,
                          "line " + std::to_string(line) + ": account chain tx carries UTXO fields");
    return tx;
}

json tx_to_json(const LedgerTx& tx, int decimals) {
    json j;
    j["txid"] = tx.txid;
    j["height"] = tx.height;
    j["ts"] = tx.timestamp;
    j["coinbase"] = tx.coinbase;
    if (!tx.vin.empty()) {
        json arr = json::array();
        for (const auto& in : tx.vin)
            arr.push_back({{"src_txid", in.spent.txid},
                           {"src_idx", in.spent.index},
                           {"addr", in.address},
                           {"value", format_decimal(in.value, decimals)}});
        j["vin"] = std::move(arr);
    }
    if (!tx.vout.empty()) {
        json arr = json::array();
        for (const auto& out : tx.vout)
            arr.push_back({{"addr", out.address}, {"value", format_decimal(out.value, decimals)}});
        j["vout"] = std::move(arr);
    }
    if (!tx.joinsplits.empty()) {
        json arr = json::array();
        for (const auto& js : tx.joinsplits) {
            json o;
            o["zin"] = json::array();
            o["zout"] = json::array();
            for (const auto& z : js.zin)
                o["zin"].push_back({{"addr", z.address}, {"value", format_decimal(z.value, decimals)}});
            for (const auto& z : js.zout)
                o["zout"].push_back({{"addr", z.address}, {"value", format_decimal(z.value, decimals)}});
            arr.push_back(std::move(o));
        }
        j["joinsplits"] = std::move(arr);
    }
    if (tx.xfer)
        j["xfer"] = {{"from", tx.xfer->from},
                     {"to", tx.xfer->to},
                     {"value", format_decimal(tx.xfer->value, decimals)},
                     {"fee", format_decimal(tx.xfer->fee, decimals)}};
    return j;
}

}  // namespace

Ledger parse_ledger_stream(std::istream& in, const ChainId& chain, const std::string& origin) {
    std::vector<LedgerTx> txs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw LedgerError(LedgerError::Code::MALFORMED_RECORD,
                              origin + ":" + std::to_string(lineno) + ": invalid JSON");
        try {
            txs.push_back(tx_from_json(j, chain, lineno));
        } catch (const json::exception& e) {
            throw LedgerError(LedgerError::Code::MALFORMED_RECORD,
                              origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return Ledger(chain, std::move(txs));
}

Ledger parse_ledger(const std::string& path, const ChainId& chain) {
    std::ifstream in(path);
    if (!in)
        throw LedgerError(LedgerError::Code::MALFORMED_RECORD, "cannot open ledger file: " + path);
    return parse_ledger_stream(in, chain, path);
}

Ledger make_ledger(const ChainId& chain, std::vector<LedgerTx> txs) {
    return Ledger(chain, std::move(txs));
}

void serialize_ledger(const Ledger& ledger, std::ostream& out) {
    for (const auto& tx : ledger.txs())
        out << tx_to_json(tx, ledger.chain().decimals).dump() << '\n';
}

void serialize_ledger(const Ledger& ledger, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw LedgerError(LedgerError::Code::MALFORMED_RECORD, "cannot write ledger file: " + path);
    serialize_ledger(ledger, out);
}

}  // namespace chaintrace
