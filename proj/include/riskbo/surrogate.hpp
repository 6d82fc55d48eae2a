#pragma once

#include "riskbo/core.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace riskbo::surrogate {

/// Squared-exponential kernel hyperparameters, expressed in unit-box input
/// coordinates and standardized output units.
struct KernelParams {
    Eigen::VectorXd length_scales;  // one per input dimension, in [1e-2, 10]
    double amplitude = 1.0;         // in [1e-2, 10]
    double noise_var = 1e-3;        // in [1e-6, 1]
};

struct FitConfig {
    int multi_starts = 64;
    int refine_rounds = 50;
    std::uint64_t seed = 0;
};

/// amplitude * exp(-1/2 sum_j ((a_j - b_j) / ls_j)^2)
double kernel_eval(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                   const KernelParams& params);

/// Fitted zero-mean GP on standardized targets. Stores the Cholesky factor
/// of (K + noise I) and the solved weights so posterior queries are cheap.
class GpModel {
public:
    GpModel(Eigen::MatrixXd inputs, Eigen::VectorXd raw_targets,
            KernelParams params);

    struct Posterior {
        double mean = 0.0;
        double variance = 0.0;
    };

    /// De-standardized posterior mean and latent variance at a unit-box
    /// query point. Variance is clamped at zero against round-off.
    Posterior posterior(const Eigen::VectorXd& query) const;
    double posterior_mean(const Eigen::VectorXd& query) const;

    const KernelParams& params() const { return params_; }
    const Eigen::MatrixXd& train_inputs() const { return inputs_; }
    double target_mean() const { return target_mean_; }
    double target_std() const { return target_std_; }
    double log_marginal_likelihood() const { return lml_; }

private:
    Eigen::MatrixXd inputs_;        // N x n, unit box
    Eigen::VectorXd targets_std_;   // standardized observations
    KernelParams params_;
    Eigen::MatrixXd chol_lower_;    // L with L L^T = K + noise I (+ jitter)
    Eigen::VectorXd alpha_weights_; // (K + noise I)^-1 targets
    double target_mean_ = 0.0;
    double target_std_ = 1.0;
    double lml_ = 0.0;

    Eigen::VectorXd cross_covariance(const Eigen::VectorXd& query) const;
};

/// -1/2 y^T (K+nI)^-1 y - sum log L_ii - N/2 log 2pi, on standardized
/// targets. Throws if the kernel matrix cannot be factorized even after
/// jitter escalation.
double log_marginal_likelihood(const Eigen::MatrixXd& inputs,
                               const Eigen::VectorXd& targets_std,
                               const KernelParams& params);

/// Maximizes the log marginal likelihood with seeded random multi-starts
/// in log-space followed by coordinate-wise golden-section refinement.
GpModel fit_gp(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
               const FitConfig& config = {});

/// One posterior mean per model (one model per objective).
std::vector<double> posterior_batch(const std::vector<GpModel>& models,
                                    const Eigen::VectorXd& query);

}  // namespace riskbo::surrogate
