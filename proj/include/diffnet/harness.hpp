#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "diffnet/combine.hpp"
#include "diffnet/scenarios.hpp"
#include "diffnet/signal.hpp"
#include "diffnet/theory.hpp"
#include "diffnet/topology.hpp"

namespace diffnet {

enum class ScenarioKind { kGenericLinear, kLocalization, kSensing };

// Fully resolved experiment description: topology inline, every per-node
// parameter expanded, seed explicit. Feeding the resolved form back through
// load_config reproduces the run bit for bit.
struct ExperimentConfig {
    explicit ExperimentConfig(TopologyDocument topo) : topology(std::move(topo)) {}

    TopologyDocument topology;
    ScenarioKind scenario = ScenarioKind::kGenericLinear;

    // scalar-observation scenarios
    RegressorStyle regressor_style = RegressorStyle::kIidGaussian;
    std::vector<double> sigma_u_sq;     // per node
    std::vector<NoiseModel> noise;      // per node

    // sensing scenario
    std::optional<SensingScenario> sensing;
    BlockUpdateMode block_update = BlockUpdateMode::kAverage;

    AlgorithmKind algorithm = AlgorithmKind::kRdlmg;
    std::vector<AdaptParams> adapt;     // per node
    CombineParams combine;
    std::optional<AttackSpec> attack;

    long iterations = 1000;
    long runs = 1;
    std::uint64_t seed = 1;
    long msd_every = 1;
    long weights_every = 0;        // 0 = record the final weights only
    double divergence_threshold = 1e6;
    double edge_threshold = 1e-3;       // weight below which an edge counts as cut

    std::vector<int> attacked_nodes() const;  // normal nodes with an attacking neighbor
    std::unique_ptr<DataModel> make_data_model(long run) const;
};

ExperimentConfig load_config(const nlohmann::json& doc);
ExperimentConfig load_config_file(const std::string& path);
nlohmann::json resolved_json(const ExperimentConfig& cfg);

// Per-iteration aggregates over the completed (non-divergent) runs. Byzantine
// nodes never enter any deviation average.
struct MetricsTrace {
    std::vector<long> iterations;          // recorded steps, 0 = initial state
    Eigen::MatrixXd msd_per_node;          // records x num_nodes, byzantine cols zero
    std::vector<double> msd_network;       // linear
    std::vector<double> msd_network_db;
    std::vector<int> attacked;             // node ids with an attacking neighbor
    Eigen::MatrixXd attacked_distance;     // records x attacked.size()
    Eigen::MatrixXd final_weights;         // (i,j) = mean weight i assigns to j
    std::vector<long> weight_iterations;   // snapshot steps when enabled
    std::vector<Eigen::MatrixXd> weight_snapshots;
    std::vector<DivergenceEvent> divergent_runs;
    long completed_runs = 0;
    double max_simplex_deviation = 0.0;
    std::vector<std::vector<int>> subnetworks;          // normal-node components
    std::vector<std::vector<double>> msd_subnetwork;    // records x subnetworks
};

MetricsTrace run_experiment(const ExperimentConfig& cfg, int threads = 1);

// Connected components over the normal nodes, keeping a topology edge only
// when its averaged final weight exceeds the threshold in either direction.
std::vector<std::vector<int>> subnetwork_partition(const Eigen::MatrixXd& final_weights,
                                                   const Topology& topo,
                                                   double edge_threshold);

// Writes msd_network.csv, msd_per_node.csv, attacked_distance.csv,
// weights_final.csv and manifest.json into dir; returns the manifest.
nlohmann::json emit_outputs(const MetricsTrace& trace, const ExperimentConfig& cfg,
                            const std::string& dir);

// Steady-state theory inputs derived from a config: Byzantine nodes dropped,
// same-cluster edges only, per-node parameters carried over. Rejects noise
// models without a finite variance.
TheoryInputs theory_inputs_from(const ExperimentConfig& cfg);

}  // namespace diffnet
