// chaintrace: multi-chain forensics pipeline front end.
//
// Subcommands: ingest, cluster, zcash-analyze, trace, simulate, generate,
// score, report. Every run writes a config snapshot next to its outputs so
// results are reproducible from the snapshot plus the inputs.
// Exit codes: 0 ok, 2 bad input/usage, 3 internal invariant violation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "chaintrace/classify.hpp"
#include "chaintrace/cluster.hpp"
#include "chaintrace/matrix_sim.hpp"
#include "chaintrace/pool_heuristics.hpp"
#include "chaintrace/synth.hpp"
#include "chaintrace/xchain.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace chaintrace;

namespace {

constexpr int kSchemaVersion = 1;

int log_level() {
    const char* env = std::getenv("CHAINTRACE_LOG");
    if (!env) return 0;
    std::string v = env;
    if (v == "debug") return 2;
    if (v == "info" || v == "1") return 1;
    return 0;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[chaintrace] " << msg << '\n';
}

struct Options {
    std::string chains_dir;
    std::string shifts_file;
    std::string oracle_file;
    std::string tags_file;
    std::string out_dir = "out";
    std::string scenario_file;
    std::string pred_file;
    std::string truth_dir;
    std::string evidence_file;
    std::uint64_t seed = 1;
    int delta_b = -1;  // <0: keep per-chain defaults
    int delta_a = -1;
    std::int64_t uturn_window = 1800;
    double uturn_tol = 0.01;
    double xrt_tol = 0.005;
    std::size_t bot_min = 15;
    std::int64_t bot_span = 300;
    std::string gas = "0.00883";
    // generator knobs
    std::size_t gen_entities = 40;
    std::size_t gen_txs = 10;
    double gen_shift_rate = 0.2;
    double gen_collision_rate = 0.0;
    double gen_uturn_rate = 0.0;
    double gen_xrt_rate = 0.0;
    bool gen_founders = false;
    std::size_t gen_noise = 0;
    std::size_t gen_miner_fanout = 0;
};

json options_json(const Options& o, const std::string& subcommand) {
    return {{"schema_version", kSchemaVersion},
            {"subcommand", subcommand},
            {"chains", o.chains_dir},
            {"shifts", o.shifts_file},
            {"oracle", o.oracle_file},
            {"tags", o.tags_file},
            {"out", o.out_dir},
            {"scenario", o.scenario_file},
            {"pred", o.pred_file},
            {"truth", o.truth_dir},
            {"evidence", o.evidence_file},
            {"seed", o.seed},
            {"delta_b", o.delta_b},
            {"delta_a", o.delta_a},
            {"uturn_window", o.uturn_window},
            {"uturn_tol", o.uturn_tol},
            {"xrt_tol", o.xrt_tol},
            {"bot_min", o.bot_min},
            {"bot_span", o.bot_span},
            {"gas", o.gas},
            {"gen",
             {{"entities", o.gen_entities},
              {"txs_per_entity", o.gen_txs},
              {"shift_rate", o.gen_shift_rate},
              {"collision_rate", o.gen_collision_rate},
              {"uturn_rate", o.gen_uturn_rate},
              {"xrt_rate", o.gen_xrt_rate},
              {"founders", o.gen_founders},
              {"noise", o.gen_noise},
              {"miner_fanout", o.gen_miner_fanout}}}};
}

void write_snapshot(const Options& o, const std::string& subcommand) {
    fs::create_directories(o.out_dir);
    std::ofstream out(fs::path(o.out_dir) / "config.json");
    out << options_json(o, subcommand).dump(2) << '\n';
}

ChainRegistry load_registry(const std::string& dir) {
    fs::path manifest = fs::path(dir) / "chains.json";
    if (fs::exists(manifest)) return ChainRegistry::load_manifest(manifest.string());
    return ChainRegistry::builtin();
}

LedgerMap load_ledgers(const ChainRegistry& registry, const std::string& dir) {
    LedgerMap ledgers;
    for (const auto& [sym, chain] : registry.all()) {
        fs::path p = fs::path(dir) / (sym + ".jsonl");
        if (!fs::exists(p)) continue;
        log_info("ingesting " + p.string());
        ledgers.emplace(sym, parse_ledger(p.string(), chain));
    }
    if (ledgers.empty())
        throw LedgerError(LedgerError::Code::MALFORMED_RECORD,
                          "no <SYMBOL>.jsonl ledgers found in " + dir);
    return ledgers;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
}

int cmd_ingest(const Options& o) {
    ChainRegistry registry = load_registry(o.chains_dir);
    LedgerMap ledgers = load_ledgers(registry, o.chains_dir);
    json per_chain = json::object();
    for (const auto& [sym, ledger] : ledgers) {
        const auto& txs = ledger.txs();
        per_chain[sym] = {{"transactions", txs.size()},
                          {"first_height", txs.empty() ? 0 : txs.front().height},
                          {"last_height", txs.empty() ? 0 : txs.back().height}};
    }
    write_snapshot(o, "ingest");
    write_json(fs::path(o.out_dir) / "ingest.json",
               {{"schema_version", kSchemaVersion}, {"chains", per_chain}});
    return 0;
}

int cmd_cluster(const Options& o) {
    ChainRegistry registry = load_registry(o.chains_dir);
    LedgerMap ledgers = load_ledgers(registry, o.chains_dir);
    TagMap tags;
    if (!o.tags_file.empty()) tags = TagMap::load_csv(o.tags_file);
    write_snapshot(o, "cluster");
    json summary = json::object();
    for (const auto& [sym, ledger] : ledgers) {
        if (ledger.chain().accounting != Accounting::UTXO) continue;
        auto skip = [](const LedgerTx& tx) { return detect_coinjoin(tx); };
        ClusterSet clusters = multi_input_cluster(ledger.txs(), sym, skip);
        clusters.save_csv((fs::path(o.out_dir) / ("clusters_" + sym + ".csv")).string());
        json labels = json::array();
        for (const auto& s : propagate_tags(clusters, tags))
            if (s.tagged)
                labels.push_back({{"cluster", s.cluster_id},
                                  {"dominant", s.dominant_label},
                                  {"tagged", s.tagged},
                                  {"total", s.total},
                                  {"conflict", s.conflict}});
        summary[sym] = {{"addresses", clusters.address_count()},
                        {"clusters", clusters.cluster_count()},
                        {"labels", std::move(labels)}};
    }
    write_json(fs::path(o.out_dir) / "cluster.json",
               {{"schema_version", kSchemaVersion}, {"chains", summary}});
    return 0;
}

int cmd_zcash_analyze(const Options& o) {
    ChainRegistry registry = load_registry(o.chains_dir);
    LedgerMap ledgers = load_ledgers(registry, o.chains_dir);
    auto it = ledgers.find("ZEC");
    if (it == ledgers.end())
        throw LedgerError(LedgerError::Code::MALFORMED_RECORD, "zcash-analyze needs ZEC.jsonl");
    const Ledger& zec = it->second;
    TagMap tags;
    if (!o.tags_file.empty()) tags = TagMap::load_csv(o.tags_file);
    write_snapshot(o, "zcash-analyze");

    ClassCounts counts = class_counts(zec);
    json class_json = json::object();
    for (int c = 0; c < 6; ++c)
        class_json[to_string(static_cast<ZTxClass>(c))] = counts[static_cast<std::size_t>(c)];

    {
        std::ofstream bal(fs::path(o.out_dir) / "pool_balance.csv");
        bal << "height,balance\n";
        for (const auto& p : pool_balance_series(zec))
            bal << p.height << ',' << format_decimal(p.balance, zec.chain().decimals) << '\n';
    }

    FounderReport founders = tag_founders(zec, {});
    MinerReport miners = tag_miners(zec, tags);
    std::vector<LinkEvidence> links = founders.links;
    links.insert(links.end(), miners.links.begin(), miners.links.end());
    auto rt = round_trip_unique(zec, 30);
    links.insert(links.end(), rt.begin(), rt.end());
    save_evidence_jsonl(links, (fs::path(o.out_dir) / "evidence.jsonl").string());

    {
        std::ofstream sweep(fs::path(o.out_dir) / "round_trip_sweep.csv");
        sweep << "max_interval,links,linked_value\n";
        for (const auto& p : round_trip_sweep(zec))
            sweep << p.max_interval << ',' << p.links << ','
                  << format_decimal(p.linked_value, zec.chain().decimals) << '\n';
    }

    AnonymityReport anon = anonymity_reduction(zec, links);
    json classes = json::array();
    for (const auto& c : anon.classes)
        classes.push_back({{"attribution", to_string(c.attribution)},
                           {"withdrawals", c.withdrawals},
                           {"value", format_decimal(c.value, zec.chain().decimals)},
                           {"value_share", c.value_share}});
    write_json(fs::path(o.out_dir) / "zcash.json",
               {{"schema_version", kSchemaVersion},
                {"classes", class_json},
                {"founder_links", founders.links.size()},
                {"miner_links", miners.links.size()},
                {"round_trip_links", rt.size()},
                {"anonymity",
                 {{"total_withdrawals", anon.total_withdrawals},
                  {"linked_value_share", anon.linked_value_share},
                  {"classes", std::move(classes)}}}});
    return 0;
}

int cmd_trace(const Options& o) {
    ChainRegistry registry = load_registry(o.chains_dir);
    LedgerMap ledgers = load_ledgers(registry, o.chains_dir);
    std::vector<ShiftRecord> shifts = load_shift_stream(o.shifts_file, registry);
    FixtureOracle oracle = FixtureOracle::load_csv(o.oracle_file, registry);
    write_snapshot(o, "trace");

    WindowParams windows = WindowParams::defaults();
    if (o.delta_b >= 0 || o.delta_a >= 0)
        for (const auto& [sym, chain] : registry.all()) {
            auto w = windows.get(sym);
            windows.set(sym, o.delta_b >= 0 ? static_cast<std::uint64_t>(o.delta_b) : w.before,
                        o.delta_a >= 0 ? static_cast<std::uint64_t>(o.delta_a) : w.after);
        }

    std::vector<ResolvedShift> resolved;
    std::size_t zero = 0, single = 0, multi = 0, ambiguous = 0;
    for (const auto& shift : shifts) {
        Phase1Result phase1 = phase1_basic(shift, ledgers, windows);
        switch (phase1.hit_class) {
            case HitClass::ZERO_HITS: ++zero; break;
            case HitClass::SINGLE_HIT: ++single; break;
            case HitClass::MULTI_HIT: ++multi; break;
        }
        try {
            if (auto r = phase1_augmented(shift, phase1, oracle)) resolved.push_back(*r);
        } catch (const XchainError& e) {
            if (e.code() != XchainError::Code::AMBIGUOUS) throw;
            ++ambiguous;
        }
    }
    log_info("resolved " + std::to_string(resolved.size()) + "/" +
             std::to_string(shifts.size()) + " shifts");

    std::vector<LinkEvidence> links = detect_pass_through(resolved);
    UturnParams up{o.uturn_window, o.uturn_tol};
    auto uturns = detect_uturn(resolved, ledgers, up);
    links.insert(links.end(), uturns.begin(), uturns.end());
    RoundTripParams rp{o.uturn_window, o.xrt_tol};
    auto xrts = detect_round_trip(resolved, ledgers, rp);
    links.insert(links.end(), xrts.begin(), xrts.end());
    save_evidence_jsonl(links, (fs::path(o.out_dir) / "evidence.jsonl").string());

    BotParams bp{o.bot_min, o.bot_span, 0.01};
    auto bots = detect_trading_bots(shifts, bp);
    {
        std::ofstream out(fs::path(o.out_dir) / "bots.csv");
        out << "cluster,id,cur_in,cur_out,amt,ts\n";
        for (std::size_t i = 0; i < bots.size(); ++i)
            for (const auto& s : bots[i])
                out << i << ',' << s.id << ',' << s.cur_in << ',' << s.cur_out << ','
                    << format_decimal(s.amount, registry.get(s.cur_in).decimals) << ','
                    << s.timestamp << '\n';
    }

    json stats = {{"schema_version", kSchemaVersion},
                  {"shifts", shifts.size()},
                  {"zero_hits", zero},
                  {"single_hits", single},
                  {"multi_hits", multi},
                  {"ambiguous", ambiguous},
                  {"resolved", resolved.size()},
                  {"pass_through", resolved.size()},
                  {"uturn_links", uturns.size()},
                  {"xrt_links", xrts.size()},
                  {"bot_clusters", bots.size()}};
    if (ledgers.count("ZEC")) {
        PoolInteractionCounts pc = pool_shift_interactions(resolved, ledgers.at("ZEC"));
        stats["pool_interactions"] = {{"direct_to_pool", pc.direct_to_pool},
                                      {"deposit_next", pc.deposit_next},
                                      {"funded_from_pool", pc.funded_from_pool}};
    }
    write_json(fs::path(o.out_dir) / "trace.json", stats);
    return 0;
}

int cmd_simulate(const Options& o) {
    std::vector<ScenarioOp> ops = load_scenario_jsonl(o.scenario_file);
    Amount gas = parse_decimal(o.gas, 9);
    MatrixWorld world = new_world("owner", gas);
    write_snapshot(o, "simulate");
    ReplayResult replay = replay_scenario(world, ops, /*lenient=*/true);
    save_event_log_csv(world.events, (fs::path(o.out_dir) / "events.csv").string());

    ProfitReport report = profit_report(world);
    json hist = json::object();
    for (const auto& [bucket, count] : report.histogram) hist[bucket] = count;
    json nets = json::array();
    for (const auto& n : report.nets)
        nets.push_back({{"user", n.id}, {"net", format_decimal(n.net, 9)}});
    write_json(fs::path(o.out_dir) / "profit.json",
               {{"schema_version", kSchemaVersion},
                {"accepted_calls", replay.accepted},
                {"rejected_calls", replay.rejected},
                {"users", world.users.size()},
                {"state_hash", state_hash(world)},
                {"owner_net", format_decimal(report.owner_net, 9)},
                {"spillover_fraction", report.spillover_fraction},
                {"loser_fraction", report.loser_fraction},
                {"histogram", std::move(hist)},
                {"top_shares", report.top_shares},
                {"nets", std::move(nets)}});
    return 0;
}

int cmd_generate(const Options& o) {
    GenParams params;
    params.n_entities = o.gen_entities;
    params.txs_per_entity = o.gen_txs;
    params.shift_rate = o.gen_shift_rate;
    params.collision_rate = o.gen_collision_rate;
    params.uturn_rate = o.gen_uturn_rate;
    params.xrt_rate = o.gen_xrt_rate;
    params.founder_schedule = o.gen_founders;
    params.noise_txs = o.gen_noise;
    params.miner_fanout = o.gen_miner_fanout;
    SyntheticWorld world = generate(params, o.seed);
    save_world(world, o.out_dir);
    write_snapshot(o, "generate");
    log_info("world written to " + o.out_dir);
    return 0;
}

json score_json(const ScoreReport& report) {
    json kinds = json::array();
    for (const auto& k : report.kinds)
        kinds.push_back({{"kind", to_string(k.kind)},
                         {"predicted", k.predicted},
                         {"truth", k.truth},
                         {"matched", k.matched},
                         {"precision", k.precision},
                         {"recall", k.recall},
                         {"zero_pred", k.zero_pred}});
    return {{"schema_version", kSchemaVersion},
            {"predicted", report.predicted},
            {"truth", report.truth},
            {"matched", report.matched},
            {"precision", report.precision},
            {"recall", report.recall},
            {"zero_pred", report.zero_pred},
            {"kinds", std::move(kinds)}};
}

int cmd_score(const Options& o) {
    std::vector<LinkEvidence> predicted = load_evidence_jsonl(o.pred_file);
    WorldBundle truth = load_world(o.truth_dir);
    write_snapshot(o, "score");
    ScoreReport report = score(predicted, truth.truth);
    json j = score_json(report);
    write_json(fs::path(o.out_dir) / "score.json", j);
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_report(const Options& o) {
    std::vector<LinkEvidence> links = load_evidence_jsonl(o.evidence_file);
    write_snapshot(o, "report");
    std::map<std::string, std::size_t> per_kind;
    std::map<std::string, Amount> per_kind_value;
    for (const auto& l : links) {
        ++per_kind[to_string(l.kind)];
        per_kind_value[to_string(l.kind)] += l.value;
    }
    json kinds = json::object();
    for (const auto& [k, n] : per_kind)
        kinds[k] = {{"links", n}, {"value_units", per_kind_value[k]}};
    write_json(fs::path(o.out_dir) / "report.json",
               {{"schema_version", kSchemaVersion},
                {"links", links.size()},
                {"kinds", std::move(kinds)}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-ledger transaction forensics toolkit"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--chains", o.chains_dir,
                        "Directory with chains.json and <SYMBOL>.jsonl ledgers");
        sub->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
        sub->add_option("--seed", o.seed, "Deterministic seed")->capture_default_str();
    };

    CLI::App* ingest = app.add_subcommand("ingest", "Validate and index ledgers");
    add_common(ingest);
    CLI::App* cluster = app.add_subcommand("cluster", "Multi-input address clustering");
    add_common(cluster);
    cluster->add_option("--tags", o.tags_file, "Tag CSV: address,chain,label,category");
    CLI::App* zcash = app.add_subcommand("zcash-analyze", "Shielded-pool heuristics");
    add_common(zcash);
    zcash->add_option("--tags", o.tags_file, "Tag CSV (pool tags enable miner detection)");
    CLI::App* trace = app.add_subcommand("trace", "Cross-chain shift tracing");
    add_common(trace);
    trace->add_option("--shifts", o.shifts_file, "Shift stream CSV")->required();
    trace->add_option("--oracle", o.oracle_file, "Oracle fixture CSV")->required();
    trace->add_option("--delta-b", o.delta_b, "Override blocks-before window for all chains");
    trace->add_option("--delta-a", o.delta_a, "Override blocks-after window for all chains");
    trace->add_option("--uturn-window", o.uturn_window, "U-turn/round-trip window, seconds")
        ->capture_default_str();
    trace->add_option("--uturn-tol", o.uturn_tol, "U-turn value tolerance")
        ->capture_default_str();
    trace->add_option("--xrt-tol", o.xrt_tol, "Round-trip value tolerance")
        ->capture_default_str();
    trace->add_option("--bot-min", o.bot_min, "Minimum shifts per bot cluster")
        ->capture_default_str();
    trace->add_option("--bot-span", o.bot_span, "Bot cluster span, seconds")
        ->capture_default_str();
    CLI::App* simulate = app.add_subcommand("simulate", "Replay a matrix-contract scenario");
    add_common(simulate);
    simulate->add_option("--scenario", o.scenario_file, "Scenario JSONL")->required();
    simulate->add_option("--gas", o.gas, "Flat per-call gas fee, ETH")->capture_default_str();
    CLI::App* generate = app.add_subcommand("generate", "Generate a ground-truth world");
    add_common(generate);
    generate->add_option("--entities", o.gen_entities)->capture_default_str();
    generate->add_option("--txs", o.gen_txs)->capture_default_str();
    generate->add_option("--shift-rate", o.gen_shift_rate)->capture_default_str();
    generate->add_option("--collision-rate", o.gen_collision_rate)->capture_default_str();
    generate->add_option("--uturn-rate", o.gen_uturn_rate)->capture_default_str();
    generate->add_option("--xrt-rate", o.gen_xrt_rate)->capture_default_str();
    generate->add_flag("--founders", o.gen_founders, "Inject the founder cadence");
    generate->add_option("--noise", o.gen_noise, "Extra ZEC noise txs")->capture_default_str();
    generate->add_option("--miner-fanout", o.gen_miner_fanout)->capture_default_str();
    CLI::App* score_cmd = app.add_subcommand("score", "Score evidence against ground truth");
    add_common(score_cmd);
    score_cmd->add_option("--pred", o.pred_file, "Predicted evidence JSONL")->required();
    score_cmd->add_option("--truth", o.truth_dir, "World bundle directory")->required();
    CLI::App* report = app.add_subcommand("report", "Summarize an evidence file");
    add_common(report);
    report->add_option("--evidence", o.evidence_file, "Evidence JSONL")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << '\n';
        return 2;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(o);
        if (cluster->parsed()) return cmd_cluster(o);
        if (zcash->parsed()) return cmd_zcash_analyze(o);
        if (trace->parsed()) return cmd_trace(o);
        if (simulate->parsed()) return cmd_simulate(o);
        if (generate->parsed()) return cmd_generate(o);
        if (score_cmd->parsed()) return cmd_score(o);
        if (report->parsed()) return cmd_report(o);
    } catch (const LedgerError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == LedgerError::Code::NEGATIVE_POOL ? 3 : 2;
    } catch (const ChainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const AmountError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const XchainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const MatrixSimError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const SynthError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
