#include "diffnet/theory.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

namespace diffnet {

void TheoryInputs::validate() const {
    int n = normal_topology.num_nodes();
    if (mu.size() != n || sigma_u_sq.size() != n || sigma_eta_sq.size() != n)
        throw std::invalid_argument("theory: per-node parameter count mismatch");
    if (dim <= 0) throw std::invalid_argument("theory: dimension must be positive");
    for (int i = 0; i < n; ++i) {
        if (!(mu[i] > 0) || !(sigma_u_sq[i] > 0))
            throw std::invalid_argument("theory: mu and sigma_u_sq must be positive");
        if (!std::isfinite(sigma_eta_sq[i]) || !(sigma_eta_sq[i] > 0))
            throw std::invalid_argument(
                "theory: noise variance must be finite and positive "
                "(heavy-tailed noise has no steady-state prediction)");
    }
    if (!(lambda >= 0))
        throw std::invalid_argument("theory: lambda must be nonnegative");
    if (static_cast<long>(n) * dim > 200)
        throw std::invalid_argument(
            "theory: N*M > 200 makes the (N^2 M^2) solve infeasible");
    if (removal_count < 0)
        throw std::invalid_argument("theory: removal count must be >= 0");
}

double mean_step_bound(double sigma_u_sq, double lambda, double sigma_eta_sq) {
    if (!(sigma_u_sq > 0) || !(sigma_eta_sq >= 0) || !(lambda >= 0))
        throw std::invalid_argument("mean_step_bound: inputs must be positive");
    double q = 1.0 + lambda * sigma_eta_sq;
    double expected_scale = 1.0 / (q * q);
    return 2.0 / (expected_scale * sigma_u_sq);
}

namespace {

// expected inverse distance memory of node j's messages at steady state
double expected_inv_gamma_sq(const TheoryInputs& in, int j) {
    double q = 1.0 + in.lambda * in.sigma_eta_sq[j];
    double trace_u = static_cast<double>(in.dim) * in.sigma_u_sq[j];
    return (q * q * q * q) / (in.mu[j] * in.mu[j] * trace_u * in.sigma_eta_sq[j]);
}

// expected squared prediction error of node j's message as seen by node i:
// noise floor plus the message's own steady-state energy through i's regressor
double expected_q(const TheoryInputs& in, int i, int j) {
    double q = 1.0 + in.lambda * in.sigma_eta_sq[j];
    double psi_energy = in.mu[j] * in.mu[j] * static_cast<double>(in.dim) *
                        in.sigma_u_sq[j] * in.sigma_eta_sq[j] / (q * q * q * q);
    return in.sigma_eta_sq[i] + in.sigma_u_sq[i] * psi_energy;
}

double expected_scale(const TheoryInputs& in, int i) {
    double q = 1.0 + in.lambda * in.sigma_eta_sq[i];
    return 1.0 / (q * q);
}

}  // namespace

Eigen::MatrixXd steady_state_weights(const TheoryInputs& in) {
    in.validate();
    const Topology& topo = in.normal_topology;
    int n = topo.num_nodes();
    Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(n, n);

    for (int i = 0; i < n; ++i) {
        const auto& nbrs = topo.neighbors(i);
        std::vector<std::pair<int, double>> contributions;
        contributions.reserve(nbrs.size());
        for (int j : nbrs) {
            double g = expected_inv_gamma_sq(in, j);
            contributions.emplace_back(j, g * g * expected_q(in, i, j));
        }

        // steady-state removal: drop the largest expected contributions,
        // capped so at least one survivor remains, ties toward the lowest id
        int effective =
            std::min(in.removal_count, static_cast<int>(nbrs.size()) - 1);
        std::vector<char> removed_flag(nbrs.size(), 0);
        if (effective > 0) {
            auto order = contributions;
            std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
            for (int k = 0; k < effective; ++k) {
                int victim = order[static_cast<size_t>(k)].first;
                auto it = std::lower_bound(nbrs.begin(), nbrs.end(), victim);
                removed_flag[static_cast<size_t>(it - nbrs.begin())] = 1;
            }
        }

        double total = 0.0;
        for (size_t s = 0; s < nbrs.size(); ++s) {
            if (removed_flag[s]) continue;
            double g = expected_inv_gamma_sq(in, nbrs[s]);
            weights(i, nbrs[s]) = g;
            total += g;
        }
        if (total <= 0.0) throw std::logic_error("steady_state_weights: empty survivors");
        weights.row(i) /= total;
    }
    return weights;
}

TheoryReport steady_state_msd(const TheoryInputs& in) {
    in.validate();
    int n = in.normal_topology.num_nodes();
    int m = in.dim;
    long nm = static_cast<long>(n) * m;

    TheoryReport report;
    report.expected_weights = steady_state_weights(in);
    report.step_bounds.resize(n);
    for (int i = 0; i < n; ++i)
        report.step_bounds[i] = mean_step_bound(in.sigma_u_sq[i], in.lambda,
                                                in.sigma_eta_sq[i]);

    Eigen::MatrixXd identity_m = Eigen::MatrixXd::Identity(m, m);
    // combination operator: block (i,j) = a_{j,i} I_M
    Eigen::MatrixXd a_t = Eigen::kroneckerProduct(report.expected_weights, identity_m);

    Eigen::VectorXd scale(n), step(n);
    for (int i = 0; i < n; ++i) {
        scale[i] = expected_scale(in, i);
        step[i] = in.mu[i];
    }
    Eigen::VectorXd mfu_diag(nm), mf_diag(nm), noise_diag(nm);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < m; ++k) {
            long idx = static_cast<long>(i) * m + k;
            mf_diag[idx] = step[i] * scale[i];
            mfu_diag[idx] = step[i] * scale[i] * in.sigma_u_sq[i];
            noise_diag[idx] = in.sigma_eta_sq[i] * in.sigma_u_sq[i];
        }

    // one-step error operator
    Eigen::MatrixXd b = a_t * (Eigen::MatrixXd::Identity(nm, nm) -
                               Eigen::MatrixXd(mfu_diag.asDiagonal()));

    // eigenvalues of the energy operator b (x) b are pairwise products, so its
    // radius is the square of b's
    double rho_b = b.eigenvalues().cwiseAbs().maxCoeff();
    report.rho_phi = rho_b * rho_b;
    report.stable = report.rho_phi < 1.0;
    if (!report.stable) {
        report.per_node_msd = Eigen::VectorXd::Constant(
            n, std::numeric_limits<double>::quiet_NaN());
        report.networked_msd = std::numeric_limits<double>::quiet_NaN();
        report.networked_msd_db = std::numeric_limits<double>::quiet_NaN();
        return report;
    }

    // driving term: g H g' with g the combined noise-injection operator
    Eigen::MatrixXd g = a_t * Eigen::MatrixXd(mf_diag.asDiagonal());
    Eigen::MatrixXd rhs_mat =
        g * Eigen::MatrixXd(noise_diag.asDiagonal()) * g.transpose();

    Eigen::MatrixXd phi = Eigen::kroneckerProduct(b, b);
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(nm * nm, nm * nm) - phi;
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(rhs_mat.data(), nm * nm);
    Eigen::VectorXd w_vec = lhs.partialPivLu().solve(rhs);

    Eigen::Map<const Eigen::MatrixXd> w_inf(w_vec.data(), nm, nm);
    report.per_node_msd.resize(n);
    for (int i = 0; i < n; ++i)
        report.per_node_msd[i] = w_inf.block(i * m, i * m, m, m).trace();
    report.networked_msd = w_inf.trace() / static_cast<double>(n);
    report.networked_msd_db = 10.0 * std::log10(report.networked_msd);
    return report;
}

TheoryInputs steady_state_inputs(const Topology& topo) {
    std::vector<int> original = topo.normal_nodes();
    std::map<int, int> relabel;
    for (size_t k = 0; k < original.size(); ++k)
        relabel[original[k]] = static_cast<int>(k);

    std::vector<std::pair<int, int>> edges;
    for (const auto& [a, b] : topo.edges()) {
        if (topo.is_byzantine(a) || topo.is_byzantine(b)) continue;
        if (topo.cluster(a) != topo.cluster(b)) continue;
        edges.emplace_back(relabel.at(a), relabel.at(b));
    }
    std::vector<std::string> clusters;
    clusters.reserve(original.size());
    for (int id : original) clusters.push_back(topo.cluster(id));

    int n = static_cast<int>(original.size());
    Topology normal(n, std::move(edges), std::move(clusters), {});
    return TheoryInputs(std::move(normal), std::move(original));
}

}  // namespace diffnet
