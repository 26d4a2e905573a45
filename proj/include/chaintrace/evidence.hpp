#pragma once

#include <map>
#include <string>
#include <vector>

#include "chaintrace/amount.hpp"
#include "chaintrace/ledger.hpp"

namespace chaintrace {

enum class LinkKind {
    FOUNDER_VALUE,
    MINER_PAYOUT,
    ROUND_TRIP_UNIQUE,
    PASS_THROUGH,
    UTURN_BASIC,
    UTURN_ADDR,
    UTURN_UTXO,
    XRT,
    TSB_FLAG,
    COINJOIN,
};

const char* to_string(LinkKind k);
std::optional<LinkKind> link_kind_from_string(const std::string& s);

struct LinkEndpoint {
    std::string txid;                 // may be empty when address-level only
    std::vector<Address> addresses;   // canonical: sorted, deduplicated
};

/// One heuristic-derived link. Parameters used are recorded verbatim for
/// audit as key -> rendered value.
struct LinkEvidence {
    LinkKind kind = LinkKind::PASS_THROUGH;
    std::map<std::string, std::string> params;
    LinkEndpoint source;
    LinkEndpoint target;
    Amount value = 0;

    void canonicalize();
};

/// JSONL export/import: {"kind","params",{"src"},{"dst"},"value"}
void save_evidence_jsonl(const std::vector<LinkEvidence>& links, const std::string& path);
std::vector<LinkEvidence> load_evidence_jsonl(const std::string& path);

}  // namespace chaintrace
