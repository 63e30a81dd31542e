// Command-line front end: run seeded Monte-Carlo experiments, evaluate the
// closed-form steady-state predictions, print step-size bounds, and export
// topology snapshots pruned to the surviving edges.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "diffnet/harness.hpp"
#include "diffnet/theory.hpp"
#include "diffnet/util.hpp"

namespace {

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 long runs_override, long seed_override, int threads) {
    auto cfg = diffnet::load_config_file(config_path);
    if (runs_override > 0) cfg.runs = runs_override;
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    auto trace = diffnet::run_experiment(cfg, threads);
    auto manifest = diffnet::emit_outputs(trace, cfg, out_dir);
    std::cout << "wrote " << out_dir << " (completed runs: " << trace.completed_runs
              << "/" << cfg.runs;
    if (!trace.divergent_runs.empty())
        std::cout << ", divergent: " << trace.divergent_runs.size();
    std::cout << ")\n";
    if (trace.completed_runs > 0)
        std::cout << "final networked MSD: "
                  << diffnet::format_double(trace.msd_network_db.back()) << " dB\n";
    return 0;
}

int cmd_theory(const std::string& config_path, const std::string& out_path) {
    auto cfg = diffnet::load_config_file(config_path);
    auto inputs = diffnet::theory_inputs_from(cfg);
    auto report = diffnet::steady_state_msd(inputs);

    nlohmann::json j;
    j["stable"] = report.stable;
    j["rho_phi"] = report.rho_phi;
    j["networked_msd"] = report.networked_msd;
    j["networked_msd_db"] = report.networked_msd_db;
    nlohmann::json per_node = nlohmann::json::object();
    nlohmann::json bounds = nlohmann::json::object();
    for (int k = 0; k < inputs.normal_topology.num_nodes(); ++k) {
        auto key = std::to_string(inputs.original_ids[static_cast<size_t>(k)]);
        per_node[key] = report.per_node_msd[k];
        bounds[key] = report.step_bounds[k];
    }
    j["per_node_msd"] = std::move(per_node);
    j["step_bounds"] = std::move(bounds);

    if (out_path.empty() || out_path == "-") {
        std::cout << j.dump(2) << '\n';
    } else {
        std::ofstream out(out_path);
        if (!out) {
            std::cerr << "cannot write " << out_path << '\n';
            return 1;
        }
        out << j.dump(2) << '\n';
        std::cout << "wrote " << out_path << '\n';
    }
    return 0;
}

int cmd_bound(const std::string& config_path) {
    auto cfg = diffnet::load_config_file(config_path);
    auto inputs = diffnet::theory_inputs_from(cfg);
    std::cout << "node,mu,step_bound\n";
    for (int k = 0; k < inputs.normal_topology.num_nodes(); ++k) {
        double bound = diffnet::mean_step_bound(inputs.sigma_u_sq[k], inputs.lambda,
                                                inputs.sigma_eta_sq[k]);
        std::cout << inputs.original_ids[static_cast<size_t>(k)] << ','
                  << diffnet::format_double(inputs.mu[k]) << ','
                  << diffnet::format_double(bound) << '\n';
    }
    return 0;
}

int cmd_snapshot(const std::string& config_path, long iteration,
                 const std::string& out_path, int threads) {
    auto cfg = diffnet::load_config_file(config_path);
    if (iteration >= 0) cfg.iterations = iteration;
    auto trace = diffnet::run_experiment(cfg, threads);

    // cut every edge whose averaged weight fell below the threshold in both
    // directions, then report the surviving topology
    std::vector<std::pair<int, int>> cut;
    for (const auto& [a, b] : cfg.topology.topo.edges())
        if (trace.final_weights(a, b) <= cfg.edge_threshold &&
            trace.final_weights(b, a) <= cfg.edge_threshold)
            cut.emplace_back(a, b);
    diffnet::TopologyDocument snapshot{cfg.topology.topo.prune_edges(cut),
                                       cfg.topology.states, cfg.topology.positions};
    auto j = diffnet::topology_to_json(snapshot);
    j["iteration"] = cfg.iterations;

    if (out_path.empty() || out_path == "-") {
        std::cout << j.dump(2) << '\n';
    } else {
        std::ofstream out(out_path);
        if (!out) {
            std::cerr << "cannot write " << out_path << '\n';
            return 1;
        }
        out << j.dump(2) << '\n';
        std::cout << "wrote " << out_path << '\n';
    }
    return 0;
}

int cmd_psd_truth(const std::string& config_path, const std::string& out_path) {
    auto cfg = diffnet::load_config_file(config_path);
    if (!cfg.sensing) {
        std::cerr << "psd-truth requires a sensing scenario\n";
        return 1;
    }
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "cannot write " << out_path << '\n';
        return 1;
    }
    out << "frequency_index";
    std::vector<std::string> names;
    for (const auto& [name, _] : cfg.sensing->true_weights.per_cluster) {
        out << ",psd_" << name;
        names.push_back(name);
    }
    out << '\n';
    std::vector<Eigen::VectorXd> curves;
    for (const auto& name : names)
        curves.push_back(
            diffnet::psd_truth(*cfg.sensing, cfg.sensing->true_weights.per_cluster.at(name)));
    for (int f = 0; f < cfg.sensing->num_freqs; ++f) {
        out << f;
        for (const auto& c : curves) out << ',' << diffnet::format_double(c[f]);
        out << '\n';
    }
    std::cout << "wrote " << out_path << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"robust resilient diffusion simulator"};
    app.require_subcommand(1);
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;

    std::string config_path, out_dir = "out", out_path;
    long runs_override = 0, seed_override = -1, iteration = -1;

    auto* simulate = app.add_subcommand("simulate", "run a seeded experiment");
    simulate->add_option("config", config_path, "experiment config (JSON)")->required();
    simulate->add_option("--out", out_dir, "output directory");
    simulate->add_option("--runs", runs_override, "override the run count");
    simulate->add_option("--seed", seed_override, "override the root seed");
    simulate->add_option("--threads", threads, "worker threads for Monte-Carlo runs");

    auto* theory = app.add_subcommand("theory", "steady-state MSD prediction");
    theory->add_option("config", config_path)->required();
    theory->add_option("--out", out_path, "report file (default stdout)");

    auto* bound = app.add_subcommand("bound", "per-node mean-stability step bounds");
    bound->add_option("config", config_path)->required();

    auto* snapshot =
        app.add_subcommand("topology-snapshot", "surviving topology after a run");
    snapshot->add_option("config", config_path)->required();
    snapshot->add_option("--iteration", iteration, "stop after this many iterations");
    snapshot->add_option("--out", out_path, "snapshot file (default stdout)");
    snapshot->add_option("--threads", threads, "worker threads for Monte-Carlo runs");

    auto* psd = app.add_subcommand("psd-truth", "ground-truth PSD curve as CSV");
    psd->add_option("config", config_path)->required();
    psd->add_option("--out", out_path, "CSV file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed())
            return cmd_simulate(config_path, out_dir, runs_override, seed_override,
                                threads);
        if (theory->parsed()) return cmd_theory(config_path, out_path);
        if (bound->parsed()) return cmd_bound(config_path);
        if (snapshot->parsed())
            return cmd_snapshot(config_path, iteration, out_path, threads);
        if (psd->parsed()) return cmd_psd_truth(config_path, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
