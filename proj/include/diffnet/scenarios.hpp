#pragma once

#include <array>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "diffnet/combine.hpp"
#include "diffnet/signal.hpp"
#include "diffnet/topology.hpp"

namespace diffnet {

// --- multi-target localization ----------------------------------------------

// Planar localization task: each cluster shares a static 2-D target and every
// node observes noisy direction/distance pairs. The adjusted observation
// d = u' w_o + eta makes the task a linear estimation problem, so the data
// generator below is shared with the generic linear scenario.
struct LocalizationScenario {
    IdealStates targets;                              // per-cluster 2-D targets
    std::vector<double> sigma_u_sq;                   // per node
    std::vector<NoiseModel> noise;                    // per node
    std::vector<std::array<double, 2>> node_positions;  // documentation only
};

// One observation: regressor u (direction-like, IID Gaussian entries with the
// node's variance), additive noise, d = u' target + eta.
std::pair<double, Eigen::VectorXd> localization_pair(const LocalizationScenario& s,
                                                     const Topology& topo, int node,
                                                     RngStream& regressor_stream,
                                                     RngStream& noise_stream);

// Scalar (d, u) generator used by both the generic linear and localization
// scenarios; owns one regressor and one noise stream per node.
class LinearDataModel final : public DataModel {
public:
    LinearDataModel(const Topology& topo, const IdealStates& states,
                    std::vector<double> sigma_u_sq, RegressorStyle style,
                    std::vector<NoiseModel> noise, std::uint64_t seed, long run);

    int dim() const override { return dim_; }
    void sample(int node, Sample& out) override;

private:
    const Topology& topo_;
    int dim_;
    std::vector<Eigen::VectorXd> true_state_;  // per node
    std::vector<RegressorSampler> regressors_;
    std::vector<NoiseModel> noise_;
    std::vector<RngStream> regressor_streams_;
    std::vector<RngStream> noise_streams_;
};

// --- multi-task spectrum sensing ----------------------------------------------

enum class ChannelProfile { kFlatUnit, kLogNormal };

// Spectrum sensing over a rectangular basis expansion: per iteration every
// node observes the received power spectrum at num_freqs frequency samples.
// The receiver noise floor is assumed known and already subtracted, so the
// observation block is d = B w_o + eta with a per-frequency background
// Gaussian plus alpha-stable impulses.
struct SensingScenario {
    int num_basis = 50;
    int num_freqs = 100;
    IdealStates true_weights;       // sparse nonnegative, dim num_basis
    double receiver_noise = 0.1;    // sigma_r^2
    double impulse_alpha = 1.2;
    double impulse_gamma = 0.08;
    ChannelProfile channel = ChannelProfile::kFlatUnit;
    double lognormal_sigma = 0.3;
};

// Non-overlapping unit-amplitude rectangles partitioning [0,1): rows are
// frequency samples, columns basis functions.
Eigen::MatrixXd rectangular_basis(int num_basis, int num_freqs);

// transmit PSD over the frequency grid for one cluster's weight vector
Eigen::VectorXd psd_truth(const SensingScenario& s, const Eigen::VectorXd& weights);

class SensingDataModel final : public DataModel {
public:
    SensingDataModel(const Topology& topo, const SensingScenario& scenario,
                     std::uint64_t seed, long run);

    int dim() const override { return scenario_.num_basis; }
    bool is_block() const override { return true; }
    void sample(int node, Sample& out) override;

    const Eigen::MatrixXd& basis_for(int node) const;

private:
    const Topology& topo_;
    SensingScenario scenario_;
    Eigen::MatrixXd shared_basis_;
    std::vector<Eigen::MatrixXd> per_node_basis_;   // only for non-flat channels
    std::vector<Eigen::VectorXd> clean_psd_;        // B_i w_o per node
    std::vector<Eigen::VectorXd> background_sd_;    // per-frequency noise std dev
    std::vector<RngStream> noise_streams_;
};

// One robust adaptation step from an observation block: per-sample errors are
// individually rescaled so a single impulsive sample cannot dominate. Average
// mode applies the mean of the per-sample gradients with step mu; sequential
// mode applies them one at a time with step mu / block_size. psi is written,
// w is left untouched.
void block_adapt(NodeEstimate& state, const AdaptParams& params,
                 const Eigen::VectorXd& d_block, const Eigen::MatrixXd& basis,
                 BlockUpdateMode mode, Eigen::VectorXd& scratch);

}  // namespace diffnet
