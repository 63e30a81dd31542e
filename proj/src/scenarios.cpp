#include "diffnet/scenarios.hpp"

#include <cmath>

namespace diffnet {

std::pair<double, Eigen::VectorXd> localization_pair(const LocalizationScenario& s,
                                                     const Topology& topo, int node,
                                                     RngStream& regressor_stream,
                                                     RngStream& noise_stream) {
    const Eigen::VectorXd& target = s.targets.state_for(topo, node);
    Eigen::VectorXd u(2);
    double sd = std::sqrt(s.sigma_u_sq.at(static_cast<size_t>(node)));
    u[0] = sd * regressor_stream.gaussian();
    u[1] = sd * regressor_stream.gaussian();
    double eta = sample_noise(s.noise.at(static_cast<size_t>(node)), noise_stream);
    return {desired_signal(u, target, eta), std::move(u)};
}

LinearDataModel::LinearDataModel(const Topology& topo, const IdealStates& states,
                                 std::vector<double> sigma_u_sq, RegressorStyle style,
                                 std::vector<NoiseModel> noise, std::uint64_t seed,
                                 long run)
    : topo_(topo), dim_(states.dim()), noise_(std::move(noise)) {
    if (static_cast<int>(sigma_u_sq.size()) != topo.num_nodes() ||
        static_cast<int>(noise_.size()) != topo.num_nodes())
        throw std::invalid_argument("linear model: per-node parameter count mismatch");
    true_state_.resize(static_cast<size_t>(topo.num_nodes()));
    for (int i = 0; i < topo.num_nodes(); ++i) {
        regressors_.emplace_back(dim_, style, sigma_u_sq[static_cast<size_t>(i)]);
        regressor_streams_.emplace_back(seed, static_cast<std::uint64_t>(run),
                                        static_cast<std::uint64_t>(i),
                                        RngStream::kRegressor);
        noise_streams_.emplace_back(seed, static_cast<std::uint64_t>(run),
                                    static_cast<std::uint64_t>(i), RngStream::kNoise);
        if (!topo.is_byzantine(i))
            true_state_[static_cast<size_t>(i)] = states.state_for(topo, i);
        validate(noise_[static_cast<size_t>(i)]);
    }
}

void LinearDataModel::sample(int node, Sample& out) {
    auto idx = static_cast<size_t>(node);
    regressors_[idx].sample(regressor_streams_[idx], out.u);
    double eta = sample_noise(noise_[idx], noise_streams_[idx]);
    out.d = out.u.dot(true_state_[idx]) + eta;
}

Eigen::MatrixXd rectangular_basis(int num_basis, int num_freqs) {
    if (num_basis <= 0 || num_freqs <= 0)
        throw std::invalid_argument("rectangular_basis: sizes must be positive");
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(num_freqs, num_basis);
    for (int iota = 0; iota < num_freqs; ++iota) {
        double f = (static_cast<double>(iota) + 0.5) / static_cast<double>(num_freqs);
        int m = std::min(static_cast<int>(f * num_basis), num_basis - 1);
        basis(iota, m) = 1.0;
    }
    return basis;
}

Eigen::VectorXd psd_truth(const SensingScenario& s, const Eigen::VectorXd& weights) {
    return rectangular_basis(s.num_basis, s.num_freqs) * weights;
}

SensingDataModel::SensingDataModel(const Topology& topo, const SensingScenario& scenario,
                                   std::uint64_t seed, long run)
    : topo_(topo), scenario_(scenario) {
    if (scenario_.true_weights.dim() != scenario_.num_basis)
        throw std::invalid_argument("sensing: weight dimension must equal basis count");
    for (const auto& [name, w] : scenario_.true_weights.per_cluster)
        if ((w.array() < 0).any())
            throw std::invalid_argument("sensing: transmit powers must be nonnegative");

    shared_basis_ = rectangular_basis(scenario_.num_basis, scenario_.num_freqs);

    if (scenario_.channel == ChannelProfile::kLogNormal) {
        per_node_basis_.resize(static_cast<size_t>(topo.num_nodes()));
        for (int i = 0; i < topo.num_nodes(); ++i) {
            // static per-node gain profile, identical across runs
            RngStream gain(seed, 0, static_cast<std::uint64_t>(i), RngStream::kConfig);
            Eigen::VectorXd h(scenario_.num_freqs);
            for (int f = 0; f < scenario_.num_freqs; ++f)
                h[f] = std::exp(scenario_.lognormal_sigma * gain.gaussian());
            per_node_basis_[static_cast<size_t>(i)] = h.asDiagonal() * shared_basis_;
        }
    }

    clean_psd_.resize(static_cast<size_t>(topo.num_nodes()));
    background_sd_.resize(static_cast<size_t>(topo.num_nodes()));
    for (int i = 0; i < topo.num_nodes(); ++i) {
        noise_streams_.emplace_back(seed, static_cast<std::uint64_t>(run),
                                    static_cast<std::uint64_t>(i), RngStream::kNoise);
        if (topo.is_byzantine(i)) continue;
        const auto& basis = basis_for(i);
        const Eigen::VectorXd& w_true = scenario_.true_weights.state_for(topo, i);
        auto idx = static_cast<size_t>(i);
        clean_psd_[idx] = basis * w_true;
        // background level scales with the received spectrum at each frequency
        double sr = scenario_.receiver_noise;
        background_sd_[idx] =
            (sr * (sr + 2.0 * clean_psd_[idx].array()) / 10.0).sqrt().matrix();
    }
}

const Eigen::MatrixXd& SensingDataModel::basis_for(int node) const {
    return per_node_basis_.empty() ? shared_basis_
                                   : per_node_basis_[static_cast<size_t>(node)];
}

void SensingDataModel::sample(int node, Sample& out) {
    auto idx = static_cast<size_t>(node);
    out.basis = &basis_for(node);
    out.d_block.resize(scenario_.num_freqs);
    RngStream& stream = noise_streams_[idx];
    for (int f = 0; f < scenario_.num_freqs; ++f) {
        double eta = background_sd_[idx][f] * stream.gaussian() +
                     sample_alpha_stable(scenario_.impulse_alpha, scenario_.impulse_gamma,
                                         stream);
        out.d_block[f] = clean_psd_[idx][f] + eta;
    }
}

void block_adapt(NodeEstimate& state, const AdaptParams& params,
                 const Eigen::VectorXd& d_block, const Eigen::MatrixXd& basis,
                 BlockUpdateMode mode, Eigen::VectorXd& scratch) {
    long block = d_block.size();
    if (block == 0) throw std::invalid_argument("block_adapt: empty observation block");
    if (basis.rows() != block || basis.cols() != state.w.size())
        throw std::invalid_argument("block_adapt: dimension mismatch");
    bool lms = params.kernel == Kernel::kLms;
    double step = params.mu / static_cast<double>(block);

    if (mode == BlockUpdateMode::kAverage) {
        scratch.noalias() = basis * state.w;
        scratch = d_block - scratch;  // per-sample errors
        for (long k = 0; k < block; ++k) {
            double e = scratch[k];
            scratch[k] = (lms ? 1.0 : gm_scale(e, params.lambda)) * e;
        }
        state.psi = state.w;
        state.psi.noalias() += step * (basis.transpose() * scratch);
        return;
    }

    state.psi = state.w;
    for (long k = 0; k < block; ++k) {
        double e = d_block[k] - basis.row(k).dot(state.psi);
        double scale = lms ? 1.0 : gm_scale(e, params.lambda);
        state.psi.noalias() += (step * scale * e) * basis.row(k).transpose();
    }
}

}  // namespace diffnet
