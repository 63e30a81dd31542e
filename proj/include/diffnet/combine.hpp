#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "diffnet/adapt.hpp"
#include "diffnet/attack.hpp"
#include "diffnet/topology.hpp"

namespace diffnet {

// --- algorithm family -------------------------------------------------------

enum class AlgorithmKind { kNcLms, kDlms, kNcLmg, kDlmg, kRdlms, kRdlmg };

constexpr bool is_cooperative(AlgorithmKind k) {
    return k != AlgorithmKind::kNcLms && k != AlgorithmKind::kNcLmg;
}
constexpr bool is_resilient(AlgorithmKind k) {
    return k == AlgorithmKind::kRdlms || k == AlgorithmKind::kRdlmg;
}
constexpr Kernel kernel_of(AlgorithmKind k) {
    return (k == AlgorithmKind::kNcLms || k == AlgorithmKind::kDlms ||
            k == AlgorithmKind::kRdlms)
               ? Kernel::kLms
               : Kernel::kLmg;
}

AlgorithmKind algorithm_from_string(const std::string& name);
std::string to_string(AlgorithmKind k);

// --- combination machinery --------------------------------------------------

struct CombineParams {
    double nu = 0.01;           // forgetting factor of the distance memory
    double rho = 0.0;           // smoothing of the prediction-error estimate
    int removal_count = 1;      // neighbors discarded per iteration (resilient kinds)
    double gamma_sq_init = 1.0;
};

// keeps inverse-distance weights finite when a neighbor's message coincides
// with the local estimate
constexpr double kGammaSqFloor = 1e-12;

// exponential memory of squared message distances
inline double update_gamma_sq(double gamma_sq_prev, double nu, double dist_sq) {
    double g = (1.0 - nu) * gamma_sq_prev + nu * dist_sq;
    return g < kGammaSqFloor ? kGammaSqFloor : g;
}

// Updates the running prediction-error estimate in place and returns the
// neighbor's cost contribution gamma^-4 * q. rho = 0 keeps the instantaneous
// squared error.
inline double cost_contribution(double& q_estimate, double rho, double gamma_sq,
                                double sq_err) {
    q_estimate = (1.0 - rho) * sq_err + rho * q_estimate;
    double inv = 1.0 / gamma_sq;
    return inv * inv * q_estimate;
}

// The removal_count largest contributions, ties broken toward the lowest node
// id. Never empties the survivor set: at most |contributions|-1 entries are
// removed, so a single-entry neighborhood keeps its node (self-learning
// fallback).
std::vector<int> removal_set(const std::vector<std::pair<int, double>>& contributions,
                             int removal_count);

// weights proportional to gamma^-2 over the survivor slots; zero elsewhere.
// survivor_mask runs parallel to gamma_sq; the result sums to one.
void combination_weights(const Eigen::VectorXd& gamma_sq,
                         const std::vector<char>& survivor_mask, Eigen::VectorXd& out);

// convex combination of intermediate estimates
Eigen::VectorXd combine_step(const std::vector<double>& weights,
                             const std::vector<const Eigen::VectorXd*>& psis);

// --- per-run world ----------------------------------------------------------

// One data observation. Scalar scenarios fill (d, u); block scenarios fill
// (d_block, basis) where basis rows are the per-sample regressors.
struct Sample {
    double d = 0.0;
    Eigen::VectorXd u;
    Eigen::VectorXd d_block;
    const Eigen::MatrixXd* basis = nullptr;
};

// Per-run data generator. Implementations own their random streams; sample()
// advances the node's stream by exactly one observation.
class DataModel {
public:
    virtual ~DataModel() = default;
    virtual int dim() const = 0;
    virtual bool is_block() const { return false; }
    virtual void sample(int node, Sample& out) = 0;
};

struct DivergenceEvent {
    long run = 0;
    long iteration = 0;
    int node = 0;
};

// Synchronous two-phase state of one Monte-Carlo run: every normal node
// adapts on its current observation, then every node combines the freshly
// produced intermediate estimates. Byzantine nodes hold no honest state and
// only fabricate per-victim messages during the combine phase; before the
// attack starts they are treated as absent from every neighborhood.
class World {
public:
    World(const Topology& topo, const IdealStates& states, AlgorithmKind kind,
          std::vector<AdaptParams> adapt_per_node, CombineParams combine,
          DataModel& data, const AttackSpec* attack, double divergence_threshold,
          long run_index, BlockUpdateMode block_mode = BlockUpdateMode::kAverage);

    // One global iteration; returns false once the run has diverged.
    bool run_iteration();

    long iteration() const { return iteration_; }
    const Eigen::VectorXd& estimate(int node) const {
        return nodes_[static_cast<size_t>(node)].est.w;
    }
    const Eigen::VectorXd& intermediate(int node) const {
        return nodes_[static_cast<size_t>(node)].est.psi;
    }
    // row i = weights node i assigned at the last combine; zero rows for
    // byzantine nodes and before the first iteration
    const Eigen::MatrixXd& weights() const { return weights_; }
    const std::optional<DivergenceEvent>& divergence() const { return divergence_; }
    double max_simplex_deviation() const { return max_simplex_dev_; }
    const Topology& topology() const { return topo_; }

private:
    struct NodeRuntime {
        NodeEstimate est;
        Eigen::VectorXd gamma_sq;   // slot-aligned with Topology::neighbors(i)
        Eigen::VectorXd q_estimate;
        Sample current, next;
        Eigen::VectorXd w_next;
        Eigen::VectorXd block_scratch;
    };

    double message_sq_err(NodeRuntime& me, const Eigen::VectorXd& message);
    bool check_divergence();

    const Topology& topo_;
    AlgorithmKind kind_;
    std::vector<AdaptParams> adapt_;
    CombineParams combine_;
    DataModel& data_;
    const AttackSpec* attack_;
    double divergence_threshold_;
    long run_index_;
    BlockUpdateMode block_mode_;
    long iteration_ = 0;
    std::vector<NodeRuntime> nodes_;
    Eigen::MatrixXd weights_;
    std::optional<DivergenceEvent> divergence_;
    double max_simplex_dev_ = 0.0;

    // scratch reused across iterations
    std::vector<const Eigen::VectorXd*> msgs_;
    std::vector<Eigen::VectorXd> fab_buf_;
    std::vector<std::pair<int, double>> contributions_;
    std::vector<char> survivor_mask_;
    Eigen::VectorXd weight_buf_;
};

}  // namespace diffnet
