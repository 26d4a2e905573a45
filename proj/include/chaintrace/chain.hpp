#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace chaintrace {

enum class Accounting { UTXO, ACCOUNT };

/// One registered chain: symbol, accounting model, smallest-unit scale.
struct ChainId {
    std::string symbol;  // short uppercase token, unique in a registry
    Accounting accounting = Accounting::UTXO;
    int decimals = 8;    // in [0, 18]

    bool operator==(const ChainId&) const = default;
};

class ChainError : public std::runtime_error {
public:
    explicit ChainError(const std::string& what) : std::runtime_error(what) {}
};

/// Registry of chains keyed by symbol. Loadable from a chain manifest JSON.
class ChainRegistry {
public:
    void add(ChainId chain);
    const ChainId& get(const std::string& symbol) const;
    const ChainId* find(const std::string& symbol) const;
    bool contains(const std::string& symbol) const { return chains_.count(symbol) > 0; }
    const std::map<std::string, ChainId>& all() const { return chains_; }

    /// Manifest format: {"chains":[{"symbol","accounting","decimals"}]}
    static ChainRegistry load_manifest(const std::string& path);

    /// BTC, BCH, DASH, DOGE, ETH, ETC, LTC, ZEC with their usual scales.
    static ChainRegistry builtin();

private:
    std::map<std::string, ChainId> chains_;
};

}  // namespace chaintrace
