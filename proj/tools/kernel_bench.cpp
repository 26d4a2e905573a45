// kernel-bench: compares the OpenMP kernels against their serial reference
// implementations on generated ledgers and verifies they agree.

#include <chrono>
#include <cstdio>

#include "chaintrace/classify.hpp"
#include "chaintrace/cluster.hpp"
#include "chaintrace/pool_heuristics.hpp"
#include "chaintrace/synth.hpp"

using namespace chaintrace;

namespace {

template <typename F>
double time_ms(F&& f) {
    auto start = std::chrono::steady_clock::now();
    f();
    auto end = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(end - start).count();
}

void row(const char* kernel, std::size_t n, double serial_ms, double parallel_ms, bool equal) {
    std::printf("%-22s %10zu txs  serial %9.1f ms  parallel %9.1f ms  speedup %5.2fx  %s\n",
                kernel, n, serial_ms, parallel_ms,
                parallel_ms > 0 ? serial_ms / parallel_ms : 0.0, equal ? "match" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t n_txs = argc > 1 ? static_cast<std::size_t>(std::atoll(argv[1])) : 200000;
    std::uint64_t seed = argc > 2 ? static_cast<std::uint64_t>(std::atoll(argv[2])) : 42;
    ChainRegistry registry = ChainRegistry::builtin();

    Ledger utxo = random_utxo_ledger(seed, n_txs, n_txs / 4, registry.get("BTC"));
    ClusterSet serial_clusters, parallel_clusters;
    double t_serial =
        time_ms([&] { serial_clusters = multi_input_cluster_serial(utxo.txs(), "BTC"); });
    double t_parallel = time_ms([&] { parallel_clusters = multi_input_cluster(utxo.txs(), "BTC"); });
    row("multi_input_cluster", n_txs, t_serial, t_parallel,
        serial_clusters.same_partition(parallel_clusters));

    Ledger zec = random_zcash_ledger(seed, n_txs, 5000, registry.get("ZEC"));
    ClassCounts serial_counts{}, parallel_counts{};
    t_serial = time_ms([&] { serial_counts = class_counts_serial(zec); });
    t_parallel = time_ms([&] { parallel_counts = class_counts(zec); });
    row("class_counts", n_txs, t_serial, t_parallel, serial_counts == parallel_counts);

    std::vector<LinkEvidence> serial_links, parallel_links;
    t_serial = time_ms([&] { serial_links = round_trip_unique_serial(zec, 30); });
    t_parallel = time_ms([&] { parallel_links = round_trip_unique(zec, 30); });
    bool equal = serial_links.size() == parallel_links.size();
    for (std::size_t i = 0; equal && i < serial_links.size(); ++i)
        equal = serial_links[i].source.txid == parallel_links[i].source.txid &&
                serial_links[i].target.txid == parallel_links[i].target.txid &&
                serial_links[i].value == parallel_links[i].value;
    row("round_trip_unique", n_txs, t_serial, t_parallel, equal);
    return 0;
}
