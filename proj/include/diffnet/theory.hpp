#pragma once

#include <vector>

#include <Eigen/Core>

#include "diffnet/topology.hpp"

namespace diffnet {

// Closed-form steady-state predictions for the robust diffusion family under
// white regressors and finite-variance noise. All expectations use the
// steady-state plug-in approximations; the network here is the steady-state
// one (normal nodes only, same-cluster edges only).
struct TheoryInputs {
    TheoryInputs(Topology topo, std::vector<int> ids)
        : normal_topology(std::move(topo)), original_ids(std::move(ids)) {}

    Topology normal_topology;          // relabeled 0..N-1
    std::vector<int> original_ids;     // relabeled index -> original node id
    int dim = 1;                       // M
    Eigen::VectorXd mu;                // per node
    Eigen::VectorXd sigma_u_sq;        // per node, E{u u'} = sigma_u_sq * I
    Eigen::VectorXd sigma_eta_sq;      // per node, finite noise variance
    double lambda = 1.0;
    int removal_count = 0;             // F

    void validate() const;             // positivity + N*M solve-size guard
};

struct TheoryReport {
    Eigen::MatrixXd expected_weights;  // (i,j) = weight node i assigns to j
    Eigen::VectorXd per_node_msd;      // relabeled order
    double networked_msd = 0.0;        // linear
    double networked_msd_db = 0.0;
    double rho_phi = 0.0;              // spectral radius of the energy operator
    bool stable = false;
    Eigen::VectorXd step_bounds;       // per-node mean-stability bounds
};

// Mean-stability step bound 2 / (E{f} * sigma_u_sq) with the steady-state
// scale expectation E{f} = 1/(1 + lambda sigma_eta_sq)^2. The LMS limit
// (lambda -> 0) recovers the classical 2 / sigma_u_sq.
double mean_step_bound(double sigma_u_sq, double lambda, double sigma_eta_sq);

// Expected steady-state combination matrix: unnormalized weights are the
// expected inverse distance memories (1 + lambda s_eta_j^2)^4 /
// (mu_j^2 * M * sigma_u_j^2 * sigma_eta_j^2), the removal policy discards the
// removal_count survivors with the largest expected cost contribution (ties
// toward the lowest id), and rows renormalize over the survivors.
Eigen::MatrixXd steady_state_weights(const TheoryInputs& in);

// Steady-state networked and per-node mean-square deviation. When the energy
// operator is unstable (rho >= 1) the report flags it instead of throwing.
TheoryReport steady_state_msd(const TheoryInputs& in);

// The steady-state network a converged resilient run settles on: Byzantine
// nodes dropped, only same-cluster edges kept, nodes relabeled densely.
// Returns inputs with parameter vectors left empty for the caller to fill.
TheoryInputs steady_state_inputs(const Topology& topo);

}  // namespace diffnet
