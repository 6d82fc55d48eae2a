#include "riskbo/surrogate.hpp"

#include "riskbo/random.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace riskbo::surrogate {

namespace {

constexpr double kLogLsLo = -4.605170185988091;   // log 1e-2
constexpr double kLogLsHi = 2.302585092994046;    // log 10
constexpr double kLogAmpLo = kLogLsLo;
constexpr double kLogAmpHi = kLogLsHi;
constexpr double kLogNoiseLo = -13.815510557964274;  // log 1e-6
constexpr double kLogNoiseHi = 0.0;                  // log 1
constexpr double kStdFloor = 1e-12;

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& inputs,
                              const KernelParams& params) {
    const Eigen::Index n = inputs.rows();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        K(i, i) = params.amplitude;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v =
                kernel_eval(inputs.row(i).transpose(), inputs.row(j).transpose(), params);
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

// LLT of K + noise I with jitter escalation 1e-10 .. 1e-4
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& K, double noise_var) {
    Eigen::MatrixXd A = K;
    A.diagonal().array() += noise_var;
    double jitter = 0.0;
    while (true) {
        Eigen::MatrixXd attempt = A;
        if (jitter > 0.0) attempt.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(attempt);
        if (llt.info() == Eigen::Success) {
            return llt.matrixL();
        }
        if (jitter == 0.0) {
            jitter = 1e-10;
        } else if (jitter < 1e-4) {
            jitter *= 10.0;
        } else {
            throw std::runtime_error("kernel matrix factorization failed at max jitter");
        }
    }
}

double lml_from_factor(const Eigen::MatrixXd& L, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& alpha_weights) {
    const double n = static_cast<double>(y.size());
    return -0.5 * y.dot(alpha_weights) - L.diagonal().array().log().sum() -
           0.5 * n * std::log(2.0 * M_PI);
}

struct Standardization {
    double mean = 0.0;
    double std = 1.0;
};

Standardization standardize(const Eigen::VectorXd& raw) {
    Standardization s;
    s.mean = raw.mean();
    const double var =
        (raw.array() - s.mean).square().sum() / static_cast<double>(raw.size());
    s.std = std::max(std::sqrt(var), kStdFloor);
    return s;
}

}  // namespace

double kernel_eval(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                   const KernelParams& params) {
    double q = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        const double d = (a[j] - b[j]) / params.length_scales[j];
        q += d * d;
    }
    return params.amplitude * std::exp(-0.5 * q);
}

double log_marginal_likelihood(const Eigen::MatrixXd& inputs,
                               const Eigen::VectorXd& targets_std,
                               const KernelParams& params) {
    const Eigen::MatrixXd L =
        cholesky_lower(kernel_matrix(inputs, params), params.noise_var);
    const Eigen::VectorXd alpha_weights =
        L.transpose().triangularView<Eigen::Upper>().solve(
            L.triangularView<Eigen::Lower>().solve(targets_std));
    return lml_from_factor(L, targets_std, alpha_weights);
}

GpModel::GpModel(Eigen::MatrixXd inputs, Eigen::VectorXd raw_targets,
                 KernelParams params)
    : inputs_(std::move(inputs)), params_(std::move(params)) {
    if (inputs_.rows() != raw_targets.size()) {
        throw std::invalid_argument("inputs and targets disagree in length");
    }
    if (!raw_targets.allFinite()) {
        throw std::invalid_argument("targets must be finite");
    }
    const auto s = standardize(raw_targets);
    target_mean_ = s.mean;
    target_std_ = s.std;
    targets_std_ = (raw_targets.array() - target_mean_) / target_std_;

    chol_lower_ = cholesky_lower(kernel_matrix(inputs_, params_), params_.noise_var);
    alpha_weights_ = chol_lower_.transpose().triangularView<Eigen::Upper>().solve(
        chol_lower_.triangularView<Eigen::Lower>().solve(targets_std_));
    lml_ = lml_from_factor(chol_lower_, targets_std_, alpha_weights_);
}

Eigen::VectorXd GpModel::cross_covariance(const Eigen::VectorXd& query) const {
    Eigen::VectorXd k(inputs_.rows());
    for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
        k[i] = kernel_eval(query, inputs_.row(i).transpose(), params_);
    }
    return k;
}

GpModel::Posterior GpModel::posterior(const Eigen::VectorXd& query) const {
    const Eigen::VectorXd k = cross_covariance(query);
    const double mean_std = k.dot(alpha_weights_);
    const Eigen::VectorXd v = chol_lower_.triangularView<Eigen::Lower>().solve(k);
    double var_std = params_.amplitude - v.squaredNorm();
    if (var_std < 0.0) var_std = 0.0;

    Posterior out;
    out.mean = target_mean_ + target_std_ * mean_std;
    out.variance = target_std_ * target_std_ * var_std;
    return out;
}

double GpModel::posterior_mean(const Eigen::VectorXd& query) const {
    return target_mean_ + target_std_ * cross_covariance(query).dot(alpha_weights_);
}

namespace {

struct LogBounds {
    double lo;
    double hi;
};

std::vector<LogBounds> parameter_bounds(int dim) {
    std::vector<LogBounds> bounds(static_cast<std::size_t>(dim) + 2);
    for (int j = 0; j < dim; ++j) bounds[j] = {kLogLsLo, kLogLsHi};
    bounds[dim] = {kLogAmpLo, kLogAmpHi};
    bounds[dim + 1] = {kLogNoiseLo, kLogNoiseHi};
    return bounds;
}

KernelParams params_from_log(const std::vector<double>& theta, int dim) {
    KernelParams p;
    p.length_scales = Eigen::VectorXd(dim);
    for (int j = 0; j < dim; ++j) p.length_scales[j] = std::exp(theta[j]);
    p.amplitude = std::exp(theta[dim]);
    p.noise_var = std::exp(theta[dim + 1]);
    return p;
}

}  // namespace

GpModel fit_gp(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
               const FitConfig& config) {
    if (inputs.rows() < 2) {
        throw std::invalid_argument("gp fitting needs at least two points");
    }
    if (!targets.allFinite()) {
        throw std::invalid_argument("targets must be finite");
    }
    const int dim = static_cast<int>(inputs.cols());
    const auto s = standardize(targets);
    const Eigen::VectorXd targets_std = (targets.array() - s.mean) / s.std;

    const auto bounds = parameter_bounds(dim);
    const auto objective = [&](const std::vector<double>& theta) {
        try {
            return log_marginal_likelihood(inputs, targets_std,
                                           params_from_log(theta, dim));
        } catch (const std::runtime_error&) {
            return -std::numeric_limits<double>::infinity();
        }
    };

    Rng rng(config.seed);
    std::vector<double> best(bounds.size());
    for (std::size_t c = 0; c < bounds.size(); ++c) {
        best[c] = 0.5 * (bounds[c].lo + bounds[c].hi);
    }
    double best_value = objective(best);

    for (int start = 0; start < config.multi_starts; ++start) {
        std::vector<double> theta(bounds.size());
        for (std::size_t c = 0; c < bounds.size(); ++c) {
            theta[c] = rng.uniform(bounds[c].lo, bounds[c].hi);
        }
        const double value = objective(theta);
        if (value > best_value) {
            best_value = value;
            best = theta;
        }
    }

    // Coordinate-wise golden-section ascent over the full box per
    // coordinate; stops early once a full round stalls.
    constexpr double kInvPhi = 0.6180339887498949;
    for (int round = 0; round < config.refine_rounds; ++round) {
        const double round_start = best_value;
        for (std::size_t c = 0; c < bounds.size(); ++c) {
            double lo = bounds[c].lo;
            double hi = bounds[c].hi;
            auto eval_at = [&](double x) {
                std::vector<double> theta = best;
                theta[c] = x;
                return objective(theta);
            };
            double x1 = hi - kInvPhi * (hi - lo);
            double x2 = lo + kInvPhi * (hi - lo);
            double f1 = eval_at(x1);
            double f2 = eval_at(x2);
            for (int it = 0; it < 30; ++it) {
                if (f1 < f2) {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + kInvPhi * (hi - lo);
                    f2 = eval_at(x2);
                } else {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - kInvPhi * (hi - lo);
                    f1 = eval_at(x1);
                }
            }
            const double candidate = 0.5 * (lo + hi);
            const double value = eval_at(candidate);
            if (value > best_value) {
                best_value = value;
                best[c] = candidate;
            }
        }
        if (best_value - round_start < 1e-9) break;
    }

    return GpModel(inputs, targets, params_from_log(best, dim));
}

std::vector<double> posterior_batch(const std::vector<GpModel>& models,
                                    const Eigen::VectorXd& query) {
    if (models.empty()) {
        throw std::invalid_argument("no models supplied");
    }
    std::vector<double> means;
    means.reserve(models.size());
    for (const auto& model : models) means.push_back(model.posterior_mean(query));
    return means;
}

}  // namespace riskbo::surrogate
