#include "diffnet/signal.hpp"

#include <cmath>

namespace diffnet {

void validate(const NoiseModel& model) {
    std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                if (!(m.variance > 0))
                    throw std::invalid_argument("gaussian noise: variance must be > 0");
            } else if constexpr (std::is_same_v<T, ContaminatedGaussianNoise>) {
                if (!(m.sigma_v_sq > 0) || !(m.sigma_g_sq > 0))
                    throw std::invalid_argument("cg noise: variances must be > 0");
                if (m.sigma_g_sq < m.sigma_v_sq)
                    throw std::invalid_argument(
                        "cg noise: impulse variance must dominate the background");
                if (m.p < 0 || m.p > 1)
                    throw std::invalid_argument("cg noise: p must be a probability");
            } else {
                if (!(m.alpha > 0) || m.alpha > 2)
                    throw std::invalid_argument("alpha-stable noise: alpha must be in (0,2]");
                if (!(m.gamma_disp > 0))
                    throw std::invalid_argument("alpha-stable noise: dispersion must be > 0");
            }
        },
        model);
}

bool has_finite_variance(const NoiseModel& model) {
    if (const auto* a = std::get_if<AlphaStableNoise>(&model)) return a->alpha >= 2.0;
    return true;
}

double noise_variance(const NoiseModel& model) {
    return std::visit(
        [](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                return m.variance;
            } else if constexpr (std::is_same_v<T, ContaminatedGaussianNoise>) {
                return m.sigma_v_sq + m.p * m.sigma_g_sq;
            } else {
                return m.alpha >= 2.0 ? 2.0 * m.gamma_disp * m.gamma_disp
                                      : std::numeric_limits<double>::infinity();
            }
        },
        model);
}

double sample_alpha_stable(double alpha, double gamma_disp, RngStream& stream) {
    // angle uniform on (-pi/2, pi/2), unit-rate exponential weight
    double v = 3.14159265358979323846 * (stream.uniform01() - 0.5);
    double w = stream.exponential();
    if (alpha == 1.0) return gamma_disp * std::tan(v);
    double s = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
               std::pow(std::cos(v - alpha * v) / w, (1.0 - alpha) / alpha);
    return gamma_disp * s;
}

double sample_noise(const NoiseModel& model, RngStream& stream) {
    return std::visit(
        [&stream](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                return std::sqrt(m.variance) * stream.gaussian();
            } else if constexpr (std::is_same_v<T, ContaminatedGaussianNoise>) {
                double value = std::sqrt(m.sigma_v_sq) * stream.gaussian();
                if (stream.uniform01() < m.p)
                    value += std::sqrt(m.sigma_g_sq) * stream.gaussian();
                return value;
            } else {
                return sample_alpha_stable(m.alpha, m.gamma_disp, stream);
            }
        },
        model);
}

RegressorSampler::RegressorSampler(int dimension, RegressorStyle style, double sigma_u_sq)
    : dimension_(dimension), style_(style), sigma_u_sq_(sigma_u_sq) {
    if (dimension <= 0) throw std::invalid_argument("regressor: dimension must be positive");
    if (!(sigma_u_sq > 0)) throw std::invalid_argument("regressor: variance must be > 0");
    if (style_ == RegressorStyle::kTappedDelay)
        delay_line_ = Eigen::VectorXd::Zero(dimension);
}

void RegressorSampler::sample(RngStream& stream, Eigen::VectorXd& out) {
    out.resize(dimension_);
    double sd = std::sqrt(sigma_u_sq_);
    if (style_ == RegressorStyle::kIidGaussian) {
        for (int k = 0; k < dimension_; ++k) out[k] = sd * stream.gaussian();
        return;
    }
    // shift the register and insert one fresh scalar at the front
    for (int k = dimension_ - 1; k > 0; --k) delay_line_[k] = delay_line_[k - 1];
    delay_line_[0] = sd * stream.gaussian();
    out = delay_line_;
}

double desired_signal(const Eigen::VectorXd& u, const Eigen::VectorXd& w_true,
                      double noise) {
    if (u.size() != w_true.size())
        throw std::invalid_argument("desired_signal: dimension mismatch");
    return u.dot(w_true) + noise;
}

}  // namespace diffnet
