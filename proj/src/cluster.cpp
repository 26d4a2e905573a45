#include "chaintrace/cluster.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace chaintrace {

const char* to_string(TagCategory c) {
    switch (c) {
        case TagCategory::EXCHANGE: return "exchange";
        case TagCategory::POOL: return "pool";
        case TagCategory::FOUNDER: return "founder";
        case TagCategory::MINER: return "miner";
        case TagCategory::SERVICE: return "service";
        case TagCategory::OTHER: return "other";
    }
    return "?";
}

std::optional<TagCategory> tag_category_from_string(const std::string& s) {
    if (s == "exchange") return TagCategory::EXCHANGE;
    if (s == "pool") return TagCategory::POOL;
    if (s == "founder") return TagCategory::FOUNDER;
    if (s == "miner") return TagCategory::MINER;
    if (s == "service") return TagCategory::SERVICE;
    if (s == "other") return TagCategory::OTHER;
    return std::nullopt;
}

bool TagMap::assign(const Address& addr, Tag tag) {
    auto it = tags_.find(addr);
    if (it == tags_.end()) {
        tags_.emplace(addr, std::move(tag));
        return true;
    }
    if (it->second.label == tag.label) return true;
    conflicts_.push_back({addr, it->second, std::move(tag)});
    return false;
}

const Tag* TagMap::find(const Address& addr) const {
    auto it = tags_.find(addr);
    return it == tags_.end() ? nullptr : &it->second;
}

TagMap TagMap::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tag file: " + path);
    TagMap tags;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.rfind("address,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string addr, chain, label, cat;
        if (!std::getline(ss, addr, ',') || !std::getline(ss, chain, ',') ||
            !std::getline(ss, label, ',') || !std::getline(ss, cat))
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad tag row");
        auto category = tag_category_from_string(cat);
        if (!category)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad category " + cat);
        tags.assign({chain, addr}, {label, *category});
    }
    return tags;
}

void TagMap::save_csv(const std::string& path) const {
    std::ofstream out(path);
    out << "address,chain,label,category\n";
    std::vector<std::pair<Address, Tag>> rows(tags_.begin(), tags_.end());
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [addr, tag] : rows)
        out << addr.value << ',' << addr.chain << ',' << tag.label << ','
            << to_string(tag.category) << '\n';
}

std::size_t DisjointSet::make_set() {
    parent_.push_back(parent_.size());
    size_.push_back(1);
    return parent_.size() - 1;
}

std::size_t DisjointSet::find(std::size_t x) {
    while (parent_[x] != x) {
        parent_[x] = parent_[parent_[x]];
        x = parent_[x];
    }
    return x;
}

bool DisjointSet::unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
}

std::optional<std::uint32_t> ClusterSet::cluster_of(const Address& addr) const {
    auto it = cluster_ids_.find(addr);
    if (it == cluster_ids_.end()) return std::nullopt;
    return it->second;
}

bool ClusterSet::same_partition(const ClusterSet& other) const {
    if (cluster_ids_.size() != other.cluster_ids_.size()) return false;
    if (cluster_sizes_.size() != other.cluster_sizes_.size()) return false;
    // Ids are canonical, so equal partitions have equal id maps.
    for (const auto& [addr, id] : cluster_ids_) {
        auto o = other.cluster_of(addr);
        if (!o || *o != id) return false;
    }
    return true;
}

void ClusterSet::save_csv(const std::string& path) const {
    std::ofstream out(path);
    out << "address,chain,cluster_id\n";
    for (std::uint32_t id = 0; id < members_.size(); ++id)
        for (const auto& addr : members_[id])
            out << addr.value << ',' << addr.chain << ',' << id << '\n';
}

ClusterSet ClusterSet::from_components(
    const std::vector<std::pair<Address, std::size_t>>& address_roots) {
    // Group by root, then assign ids by (size desc, lexicographic min addr).
    std::unordered_map<std::size_t, std::vector<const Address*>> groups;
    for (const auto& [addr, root] : address_roots) groups[root].push_back(&addr);

    struct Group {
        std::vector<const Address*> members;
        const Address* min_addr;
    };
    std::vector<Group> ordered;
    ordered.reserve(groups.size());
    for (auto& [root, members] : groups) {
        const Address* min_addr = members.front();
        for (const Address* a : members)
            if (*a < *min_addr) min_addr = a;
        ordered.push_back({std::move(members), min_addr});
    }
    std::sort(ordered.begin(), ordered.end(), [](const Group& a, const Group& b) {
        if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
        return *a.min_addr < *b.min_addr;
    });

    ClusterSet set;
    set.members_.resize(ordered.size());
    set.cluster_sizes_.resize(ordered.size());
    for (std::uint32_t id = 0; id < ordered.size(); ++id) {
        auto& group = ordered[id];
        set.cluster_sizes_[id] = group.members.size();
        set.members_[id].reserve(group.members.size());
        for (const Address* a : group.members) {
            set.cluster_ids_.emplace(*a, id);
            set.members_[id].push_back(*a);
        }
        std::sort(set.members_[id].begin(), set.members_[id].end());
    }
    return set;
}

std::vector<Address> input_addresses(const LedgerTx& tx, const std::string& chain) {
    std::vector<Address> out;
    for (const auto& in : tx.vin)
        if (!in.address.empty()) out.push_back({chain, in.address});
    for (const auto& js : tx.joinsplits)
        for (const auto& e : js.zin)
            if (!e.address.empty()) out.push_back({chain, e.address});
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

/// Shared co-spend union pass over one tx range.
void unite_tx_range(const std::vector<LedgerTx>& txs, std::size_t lo, std::size_t hi,
                    const std::string& chain, const std::function<bool(const LedgerTx&)>& skip,
                    DisjointSet& dsu, std::unordered_map<Address, std::size_t, AddressHash>& ids) {
    auto id_of = [&](const Address& a) {
        auto it = ids.find(a);
        if (it != ids.end()) return it->second;
        std::size_t id = dsu.make_set();
        ids.emplace(a, id);
        return id;
    };
    for (std::size_t i = lo; i < hi; ++i) {
        const auto& tx = txs[i];
        if (skip && skip(tx)) continue;
        auto addrs = input_addresses(tx, chain);
        if (addrs.empty()) continue;
        std::size_t first = id_of(addrs.front());
        for (std::size_t k = 1; k < addrs.size(); ++k) dsu.unite(first, id_of(addrs[k]));
    }
}

ClusterSet finish(DisjointSet& dsu,
                  const std::unordered_map<Address, std::size_t, AddressHash>& ids) {
    std::vector<std::pair<Address, std::size_t>> roots;
    roots.reserve(ids.size());
    for (const auto& [addr, id] : ids) roots.emplace_back(addr, dsu.find(id));
    return ClusterSet::from_components(roots);
}

}  // namespace

ClusterSet multi_input_cluster_serial(const std::vector<LedgerTx>& txs, const std::string& chain,
                                      const std::function<bool(const LedgerTx&)>& skip) {
    DisjointSet dsu;
    std::unordered_map<Address, std::size_t, AddressHash> ids;
    unite_tx_range(txs, 0, txs.size(), chain, skip, dsu, ids);
    return finish(dsu, ids);
}

ClusterSet multi_input_cluster(const std::vector<LedgerTx>& txs, const std::string& chain,
                               const std::function<bool(const LedgerTx&)>& skip) {
#ifdef _OPENMP
    int threads = omp_get_max_threads();
    if (threads > 1 && txs.size() > 4096) {
        // Per-thread forests over tx shards; the merge replays each shard's
        // co-spend groups into one forest. Union is associative, so the
        // result is the same partition as the serial pass.
        std::vector<DisjointSet> dsus(static_cast<std::size_t>(threads));
        std::vector<std::unordered_map<Address, std::size_t, AddressHash>> maps(
            static_cast<std::size_t>(threads));
#pragma omp parallel num_threads(threads)
        {
            int t = omp_get_thread_num();
            std::size_t per = (txs.size() + static_cast<std::size_t>(threads) - 1) /
                              static_cast<std::size_t>(threads);
            std::size_t lo = static_cast<std::size_t>(t) * per;
            std::size_t hi = std::min(txs.size(), lo + per);
            if (lo < hi)
                unite_tx_range(txs, lo, hi, chain, skip, dsus[static_cast<std::size_t>(t)],
                               maps[static_cast<std::size_t>(t)]);
        }
        DisjointSet dsu;
        std::unordered_map<Address, std::size_t, AddressHash> ids;
        auto id_of = [&](const Address& a) {
            auto it = ids.find(a);
            if (it != ids.end()) return it->second;
            std::size_t id = dsu.make_set();
            ids.emplace(a, id);
            return id;
        };
        for (int t = 0; t < threads; ++t) {
            // Replay: for each shard root, unite all of its members.
            std::unordered_map<std::size_t, std::size_t> root_rep;
            for (const auto& [addr, local] : maps[static_cast<std::size_t>(t)]) {
                std::size_t root = dsus[static_cast<std::size_t>(t)].find(local);
                std::size_t global = id_of(addr);
                auto [it, inserted] = root_rep.emplace(root, global);
                if (!inserted) dsu.unite(it->second, global);
            }
        }
        return finish(dsu, ids);
    }
#endif
    return multi_input_cluster_serial(txs, chain, skip);
}

ChangeClusterResult change_cluster(const std::vector<LedgerTx>& txs, const std::string& chain,
                                   const ClusterSet& clusters,
                                   const std::unordered_set<std::string>& excluded,
                                   const TagMap& tags) {
    // Rebuild a forest seeded with the existing partition, then apply the
    // single-zOut unions on top of it.
    DisjointSet dsu;
    std::unordered_map<Address, std::size_t, AddressHash> ids;
    auto id_of = [&](const Address& a) {
        auto it = ids.find(a);
        if (it != ids.end()) return it->second;
        std::size_t id = dsu.make_set();
        ids.emplace(a, id);
        return id;
    };
    for (std::uint32_t c = 0; c < clusters.cluster_count(); ++c) {
        const auto& members = clusters.members(c);
        std::size_t first = id_of(members.front());
        for (std::size_t k = 1; k < members.size(); ++k) dsu.unite(first, id_of(members[k]));
    }

    // Exchange guard: never merge two clusters carrying different exchange
    // labels; such a merge is a heuristic false-positive signal.
    auto exchange_label = [&](std::size_t root) -> std::string {
        std::string label;
        for (const auto& [addr, id] : ids) {
            if (dsu.find(id) != root) continue;
            const Tag* tag = tags.find(addr);
            if (tag && tag->category == TagCategory::EXCHANGE) {
                if (!label.empty() && label != tag->label) return label;  // already mixed
                label = tag->label;
            }
        }
        return label;
    };

    ChangeClusterResult result;
    for (const auto& tx : txs) {
        if (tx.joinsplits.empty()) continue;
        auto inputs = input_addresses(tx, chain);
        if (inputs.empty()) continue;
        std::vector<std::string> zouts;
        for (const auto& js : tx.joinsplits)
            for (const auto& e : js.zout)
                if (!e.address.empty()) zouts.push_back(e.address);
        std::sort(zouts.begin(), zouts.end());
        zouts.erase(std::unique(zouts.begin(), zouts.end()), zouts.end());
        if (zouts.size() != 1) continue;
        if (excluded.count(zouts.front())) continue;
        Address change{chain, zouts.front()};
        std::size_t a = dsu.find(id_of(inputs.front()));
        std::size_t b = dsu.find(id_of(change));
        if (a == b) continue;
        std::string la = exchange_label(a);
        std::string lb = exchange_label(b);
        if (!la.empty() && !lb.empty() && la != lb) {
            result.vetoed.emplace_back(inputs.front(), change);
            continue;
        }
        dsu.unite(a, b);
        ++result.merges_applied;
    }

    std::vector<std::pair<Address, std::size_t>> roots;
    roots.reserve(ids.size());
    for (const auto& [addr, id] : ids) roots.emplace_back(addr, dsu.find(id));
    result.clusters = ClusterSet::from_components(roots);
    return result;
}

std::vector<ClusterTagSummary> propagate_tags(const ClusterSet& clusters, const TagMap& tags) {
    std::vector<ClusterTagSummary> out;
    out.reserve(clusters.cluster_count());
    for (std::uint32_t id = 0; id < clusters.cluster_count(); ++id) {
        ClusterTagSummary summary;
        summary.cluster_id = id;
        summary.total = clusters.cluster_size(id);
        for (const auto& addr : clusters.members(id)) {
            const Tag* tag = tags.find(addr);
            if (!tag) continue;
            summary.label_counts[tag->label]++;
            summary.tagged++;
        }
        std::size_t best = 0;
        for (const auto& [label, count] : summary.label_counts) {
            if (count > best) {
                best = count;
                summary.dominant_label = label;
            }
        }
        summary.conflict = summary.label_counts.size() > 1;
        out.push_back(std::move(summary));
    }
    return out;
}

void RelationGraph::add_edge(const Address& from, const Address& to) {
    if (from == to) return;
    out_[from][to]++;
    in_[to][from]++;
    ++total_weight_;
}

std::size_t RelationGraph::weight(const Address& from, const Address& to) const {
    auto it = out_.find(from);
    if (it == out_.end()) return 0;
    auto jt = it->second.find(to);
    return jt == it->second.end() ? 0 : jt->second;
}

std::vector<Address> RelationGraph::input_cluster(const Address& of) const {
    std::vector<Address> out;
    auto it = in_.find(of);
    if (it == in_.end()) return out;
    for (const auto& [u, w] : it->second) out.push_back(u);
    return out;
}

std::vector<Address> RelationGraph::output_cluster(const Address& of) const {
    std::vector<Address> out;
    auto it = out_.find(of);
    if (it == out_.end()) return out;
    for (const auto& [v, w] : it->second) out.push_back(v);
    return out;
}

std::size_t RelationGraph::in_degree(const Address& of) const {
    auto it = in_.find(of);
    return it == in_.end() ? 0 : it->second.size();
}

std::size_t RelationGraph::out_degree(const Address& of) const {
    auto it = out_.find(of);
    return it == out_.end() ? 0 : it->second.size();
}

namespace {
std::vector<std::pair<Address, std::size_t>> rank(
    const std::map<Address, std::map<Address, std::size_t>>& adj) {
    std::vector<std::pair<Address, std::size_t>> out;
    out.reserve(adj.size());
    for (const auto& [addr, edges] : adj) out.emplace_back(addr, edges.size());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}
}  // namespace

std::vector<std::pair<Address, std::size_t>> RelationGraph::rank_by_in_degree() const {
    return rank(in_);
}

std::vector<std::pair<Address, std::size_t>> RelationGraph::rank_by_out_degree() const {
    return rank(out_);
}

void RelationGraph::save_csv(const std::string& path) const {
    std::ofstream out(path);
    out << "src,dst,weight\n";
    for (const auto& [u, edges] : out_)
        for (const auto& [v, w] : edges)
            out << u.chain << ':' << u.value << ',' << v.chain << ':' << v.value << ',' << w
                << '\n';
}

}  // namespace chaintrace
