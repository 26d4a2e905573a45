#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "chaintrace/ledger.hpp"

namespace chaintrace {

enum class TagCategory { EXCHANGE, POOL, FOUNDER, MINER, SERVICE, OTHER };

const char* to_string(TagCategory c);
std::optional<TagCategory> tag_category_from_string(const std::string& s);

struct Tag {
    std::string label;
    TagCategory category = TagCategory::OTHER;
};

/// Address tags. An address has at most one label; conflicting assignments
/// are surfaced, never overwritten.
class TagMap {
public:
    struct Conflict {
        Address address;
        Tag kept;
        Tag rejected;
    };

    /// Returns false (and records a conflict) when the address is already
    /// tagged with a different label.
    bool assign(const Address& addr, Tag tag);
    const Tag* find(const Address& addr) const;
    const std::vector<Conflict>& conflicts() const { return conflicts_; }
    const std::unordered_map<Address, Tag, AddressHash>& all() const { return tags_; }
    std::size_t size() const { return tags_.size(); }

    /// CSV format: address,chain,label,category
    static TagMap load_csv(const std::string& path);
    void save_csv(const std::string& path) const;

private:
    std::unordered_map<Address, Tag, AddressHash> tags_;
    std::vector<Conflict> conflicts_;
};

/// Disjoint-set forest with union by size and path compression.
class DisjointSet {
public:
    std::size_t make_set();
    std::size_t find(std::size_t x);
    bool unite(std::size_t a, std::size_t b);
    std::size_t size() const { return parent_.size(); }
    std::size_t component_size(std::size_t x) { return size_[find(x)]; }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
};

/// Finished partition of chain-scoped addresses. Cluster ids are canonical:
/// assigned by (size desc, lexicographic min address asc), largest = 0.
class ClusterSet {
public:
    ClusterSet() = default;

    std::optional<std::uint32_t> cluster_of(const Address& addr) const;
    std::size_t cluster_count() const { return cluster_sizes_.size(); }
    std::size_t address_count() const { return cluster_ids_.size(); }
    std::size_t cluster_size(std::uint32_t id) const { return cluster_sizes_.at(id); }
    const std::vector<Address>& members(std::uint32_t id) const { return members_.at(id); }

    /// Partition equality irrespective of id numbering.
    bool same_partition(const ClusterSet& other) const;

    /// CSV export: address,chain,cluster_id
    void save_csv(const std::string& path) const;

    static ClusterSet from_components(
        const std::vector<std::pair<Address, std::size_t>>& address_roots);

private:
    std::unordered_map<Address, std::uint32_t, AddressHash> cluster_ids_;
    std::vector<std::size_t> cluster_sizes_;
    std::vector<std::vector<Address>> members_;
};

/// All transparent input addresses of one tx (vin plus joinsplit zin).
std::vector<Address> input_addresses(const LedgerTx& tx, const std::string& chain);

/// Multi-input heuristic: co-spent input addresses belong to one entity.
/// `skip` filters out transactions (e.g. detected CoinJoins) whose inputs
/// must not be merged. Parallel kernel with per-thread forests and an
/// associative merge; the serial variant is the tested reference.
ClusterSet multi_input_cluster(const std::vector<LedgerTx>& txs, const std::string& chain,
                               const std::function<bool(const LedgerTx&)>& skip = {});
ClusterSet multi_input_cluster_serial(const std::vector<LedgerTx>& txs, const std::string& chain,
                                      const std::function<bool(const LedgerTx&)>& skip = {});

struct ChangeClusterResult {
    ClusterSet clusters;
    /// Merges vetoed because both sides carried different EXCHANGE labels.
    std::vector<std::pair<Address, Address>> vetoed;
    std::size_t merges_applied = 0;
};

/// Change heuristic: a shielding tx with exactly one transparent zOut
/// address attributes that address to the inputs' owner. Off by default in
/// pipelines; `excluded` holds known service-fee addresses.
ChangeClusterResult change_cluster(const std::vector<LedgerTx>& txs, const std::string& chain,
                                   const ClusterSet& clusters,
                                   const std::unordered_set<std::string>& excluded,
                                   const TagMap& tags = {});

struct ClusterTagSummary {
    std::uint32_t cluster_id = 0;
    std::map<std::string, std::size_t> label_counts;
    std::string dominant_label;
    std::size_t tagged = 0;
    std::size_t total = 0;
    bool conflict = false;  // more than one distinct label present
};

std::vector<ClusterTagSummary> propagate_tags(const ClusterSet& clusters, const TagMap& tags);

/// Directed weighted graph over addresses; edge weight = number of shift
/// transactions from u to v. No self-loops.
class RelationGraph {
public:
    void add_edge(const Address& from, const Address& to);
    std::size_t weight(const Address& from, const Address& to) const;
    std::size_t total_weight() const { return total_weight_; }

    std::vector<Address> input_cluster(const Address& of) const;   // all u with u->of
    std::vector<Address> output_cluster(const Address& of) const;  // all v with of->v
    std::size_t in_degree(const Address& of) const;
    std::size_t out_degree(const Address& of) const;

    /// Addresses ranked by in/out-degree, descending, ties by address.
    std::vector<std::pair<Address, std::size_t>> rank_by_in_degree() const;
    std::vector<std::pair<Address, std::size_t>> rank_by_out_degree() const;

    /// CSV edge list: src,dst,weight (addresses rendered chain:value)
    void save_csv(const std::string& path) const;

private:
    std::map<Address, std::map<Address, std::size_t>> out_;
    std::map<Address, std::map<Address, std::size_t>> in_;
    std::size_t total_weight_ = 0;
};

}  // namespace chaintrace
