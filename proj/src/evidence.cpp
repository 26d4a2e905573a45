#include "chaintrace/evidence.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace chaintrace {

using nlohmann::json;

const char* to_string(LinkKind k) {
    switch (k) {
        case LinkKind::FOUNDER_VALUE: return "founder_value";
        case LinkKind::MINER_PAYOUT: return "miner_payout";
        case LinkKind::ROUND_TRIP_UNIQUE: return "round_trip_unique";
        case LinkKind::PASS_THROUGH: return "pass_through";
        case LinkKind::UTURN_BASIC: return "uturn_basic";
        case LinkKind::UTURN_ADDR: return "uturn_addr";
        case LinkKind::UTURN_UTXO: return "uturn_utxo";
        case LinkKind::XRT: return "xrt";
        case LinkKind::TSB_FLAG: return "tsb_flag";
        case LinkKind::COINJOIN: return "coinjoin";
    }
    return "?";
}

std::optional<LinkKind> link_kind_from_string(const std::string& s) {
    static const std::map<std::string, LinkKind> table = {
        {"founder_value", LinkKind::FOUNDER_VALUE},
        {"miner_payout", LinkKind::MINER_PAYOUT},
        {"round_trip_unique", LinkKind::ROUND_TRIP_UNIQUE},
        {"pass_through", LinkKind::PASS_THROUGH},
        {"uturn_basic", LinkKind::UTURN_BASIC},
        {"uturn_addr", LinkKind::UTURN_ADDR},
        {"uturn_utxo", LinkKind::UTURN_UTXO},
        {"xrt", LinkKind::XRT},
        {"tsb_flag", LinkKind::TSB_FLAG},
        {"coinjoin", LinkKind::COINJOIN},
    };
    auto it = table.find(s);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

void LinkEvidence::canonicalize() {
    auto fix = [](LinkEndpoint& ep) {
        std::sort(ep.addresses.begin(), ep.addresses.end());
        ep.addresses.erase(std::unique(ep.addresses.begin(), ep.addresses.end()),
                           ep.addresses.end());
    };
    fix(source);
    fix(target);
}

namespace {

json endpoint_to_json(const LinkEndpoint& ep) {
    json a = json::array();
    for (const auto& addr : ep.addresses) a.push_back({{"chain", addr.chain}, {"addr", addr.value}});
    return {{"txid", ep.txid}, {"addresses", std::move(a)}};
}

LinkEndpoint endpoint_from_json(const json& j) {
    LinkEndpoint ep;
    ep.txid = j.value("txid", std::string{});
    for (const auto& a : j.value("addresses", json::array()))
        ep.addresses.push_back({a.at("chain").get<std::string>(), a.at("addr").get<std::string>()});
    return ep;
}

}  // namespace

void save_evidence_jsonl(const std::vector<LinkEvidence>& links, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write evidence file: " + path);
    for (const auto& link : links) {
        json j;
        j["kind"] = to_string(link.kind);
        j["params"] = link.params;
        j["src"] = endpoint_to_json(link.source);
        j["dst"] = endpoint_to_json(link.target);
        j["value"] = static_cast<std::int64_t>(link.value);
        out << j.dump() << '\n';
    }
}

std::vector<LinkEvidence> load_evidence_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open evidence file: " + path);
    std::vector<LinkEvidence> links;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        LinkEvidence link;
        auto kind = link_kind_from_string(j.at("kind").get<std::string>());
        if (!kind) throw std::runtime_error("unknown link kind in " + path);
        link.kind = *kind;
        if (j.contains("params"))
            for (const auto& [k, v] : j["params"].items()) link.params[k] = v.get<std::string>();
        link.source = endpoint_from_json(j.at("src"));
        link.target = endpoint_from_json(j.at("dst"));
        link.value = j.at("value").get<std::int64_t>();
        links.push_back(std::move(link));
    }
    return links;
}

}  // namespace chaintrace
