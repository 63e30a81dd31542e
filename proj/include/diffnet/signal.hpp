#pragma once

#include <limits>
#include <stdexcept>
#include <variant>

#include <Eigen/Core>

#include "diffnet/rng.hpp"

namespace diffnet {

// --- noise models -----------------------------------------------------------

struct GaussianNoise {
    double variance = 1.0;
};

// Gaussian background plus Bernoulli-gated high-variance Gaussian impulses.
// Effective variance is sigma_v_sq + p * sigma_g_sq.
struct ContaminatedGaussianNoise {
    double sigma_v_sq = 1.0;
    double sigma_g_sq = 1.0;
    double p = 0.0;
};

// Symmetric alpha-stable, zero location, characteristic function
// exp(-(gamma_disp^alpha) |t|^alpha). Infinite variance for alpha < 2.
struct AlphaStableNoise {
    double alpha = 1.2;
    double gamma_disp = 0.1;
};

using NoiseModel = std::variant<GaussianNoise, ContaminatedGaussianNoise, AlphaStableNoise>;

void validate(const NoiseModel& model);

// true when the model has a finite second moment (alpha-stable only at alpha = 2)
bool has_finite_variance(const NoiseModel& model);

// effective variance; +inf for alpha-stable with alpha < 2
double noise_variance(const NoiseModel& model);

double sample_noise(const NoiseModel& model, RngStream& stream);

// Chambers-Mallows-Stuck draw from the symmetric alpha-stable law above.
double sample_alpha_stable(double alpha, double gamma_disp, RngStream& stream);

// --- regressors -------------------------------------------------------------

enum class RegressorStyle {
    kIidGaussian,   // every entry fresh N(0, sigma_u_sq)
    kTappedDelay,   // shift register over a scalar Gaussian stream
};

// Per-node regressor generator. Tapped-delay style keeps the shift-register
// state here, confined to the owning run.
class RegressorSampler {
public:
    RegressorSampler(int dimension, RegressorStyle style, double sigma_u_sq);

    void sample(RngStream& stream, Eigen::VectorXd& out);

    int dimension() const { return dimension_; }
    double sigma_u_sq() const { return sigma_u_sq_; }

private:
    int dimension_;
    RegressorStyle style_;
    double sigma_u_sq_;
    Eigen::VectorXd delay_line_;  // previous entries for tapped-delay
    bool primed_ = false;
};

// d = u' w_true + noise
double desired_signal(const Eigen::VectorXd& u, const Eigen::VectorXd& w_true,
                      double noise);

}  // namespace diffnet
