#include "chaintrace/chain.hpp"

#include <fstream>

#include <json.hpp>

namespace chaintrace {

void ChainRegistry::add(ChainId chain) {
    if (chain.symbol.empty()) throw ChainError("chain symbol must be nonempty");
    if (chain.decimals < 0 || chain.decimals > 18)
        throw ChainError("chain decimals out of range for " + chain.symbol);
    auto [it, inserted] = chains_.emplace(chain.symbol, std::move(chain));
    if (!inserted) throw ChainError("duplicate chain symbol: " + it->first);
}

const ChainId& ChainRegistry::get(const std::string& symbol) const {
    auto it = chains_.find(symbol);
    if (it == chains_.end()) throw ChainError("unknown chain: " + symbol);
    return it->second;
}

const ChainId* ChainRegistry::find(const std::string& symbol) const {
    auto it = chains_.find(symbol);
    return it == chains_.end() ? nullptr : &it->second;
}

ChainRegistry ChainRegistry::load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ChainError("cannot open chain manifest: " + path);
    nlohmann::json doc;
    in >> doc;
    ChainRegistry reg;
    for (const auto& c : doc.at("chains")) {
        ChainId chain;
        chain.symbol = c.at("symbol").get<std::string>();
        std::string acc = c.at("accounting").get<std::string>();
        if (acc == "utxo")
            chain.accounting = Accounting::UTXO;
        else if (acc == "account")
            chain.accounting = Accounting::ACCOUNT;
        else
            throw ChainError("unknown accounting model: " + acc);
        chain.decimals = c.at("decimals").get<int>();
        reg.add(std::move(chain));
    }
    return reg;
}

ChainRegistry ChainRegistry::builtin() {
    ChainRegistry reg;
    reg.add({"BTC", Accounting::UTXO, 8});
    reg.add({"BCH", Accounting::UTXO, 8});
    reg.add({"DASH", Accounting::UTXO, 8});
    reg.add({"DOGE", Accounting::UTXO, 8});
    reg.add({"LTC", Accounting::UTXO, 8});
    reg.add({"ZEC", Accounting::UTXO, 8});
    // Ether amounts are held in gwei: 51.2 ETH in wei does not fit in a
    // 64-bit unit count, and every constant used here is gwei-exact.
    reg.add({"ETH", Accounting::ACCOUNT, 9});
    reg.add({"ETC", Accounting::ACCOUNT, 9});
    return reg;
}

}  // namespace chaintrace
