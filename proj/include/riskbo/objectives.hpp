#pragma once

#include "riskbo/core.hpp"

#include <Eigen/Core>

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace riskbo::objectives {

/// Black-box loss source. Implementations must be deterministic given
/// (configuration, split, seed) and safe to call concurrently. Access
/// counters per split support the data-separation audit in tests.
class ObjectiveProvider {
public:
    virtual ~ObjectiveProvider() = default;

    virtual std::string name() const = 0;
    virtual int num_constrained() const = 0;
    int num_objectives() const { return num_constrained() + 1; }
    virtual const SearchSpace& space() const = 0;

    LossSamples evaluate(const Configuration& config, Split split,
                         std::size_t n_samples, std::uint64_t run_seed) const;

    /// Closed-form expected losses, available for synthetic providers only.
    virtual bool has_true_means() const { return false; }
    virtual std::vector<double> true_means(const Eigen::VectorXd& values) const;

    /// Finite list of admissible configurations (table providers); proposals
    /// snap to the nearest unevaluated entry. Empty for continuous spaces.
    virtual const std::vector<Eigen::VectorXd>& finite_points() const;

    /// Required sample counts, when the provider dictates them (tables).
    virtual std::size_t required_samples(Split split) const;

    std::size_t access_count(Split split) const {
        return counts_[static_cast<std::size_t>(split)].load();
    }

protected:
    virtual LossSamples evaluate_impl(const Configuration& config, Split split,
                                      std::size_t n_samples,
                                      std::uint64_t run_seed) const = 0;

private:
    mutable std::array<std::atomic<std::size_t>, 3> counts_{};
};

enum class NoiseKind { bernoulli, clipped_gaussian };

/// One objective's expected-loss curve over the scalar position
/// s(lambda) = mean of unit-box-scaled coordinates:
/// mu(s) = clamp(base + gain * s^exponent, 0, 1).
struct Curve {
    double base = 0.0;
    double gain = 0.0;
    double exponent = 1.0;
};

/// Closed-form trade-off family used for verification: constrained curves
/// and the free curve carry opposing gain signs so a genuine trade-off
/// exists by construction.
class SyntheticTradeoff {
public:
    SyntheticTradeoff(SearchSpace space, std::vector<Curve> curves,
                      NoiseKind noise = NoiseKind::bernoulli,
                      double noise_sd = 0.05);

    const SearchSpace& space() const { return space_; }
    int num_constrained() const { return static_cast<int>(curves_.size()) - 1; }
    NoiseKind noise() const { return noise_; }
    double noise_sd() const { return noise_sd_; }

    std::vector<double> true_means(const Eigen::VectorXd& values) const;

private:
    SearchSpace space_;
    std::vector<Curve> curves_;  // c constrained then the free objective
    NoiseKind noise_;
    double noise_sd_;
};

std::vector<double> true_mean(const SyntheticTradeoff& problem,
                              const Eigen::VectorXd& values);

class SyntheticProvider : public ObjectiveProvider {
public:
    SyntheticProvider(std::string name, SyntheticTradeoff problem);

    std::string name() const override { return name_; }
    int num_constrained() const override { return problem_.num_constrained(); }
    const SearchSpace& space() const override { return problem_.space(); }
    bool has_true_means() const override { return true; }
    std::vector<double> true_means(const Eigen::VectorXd& values) const override;

    const SyntheticTradeoff& problem() const { return problem_; }

protected:
    LossSamples evaluate_impl(const Configuration& config, Split split,
                              std::size_t n_samples,
                              std::uint64_t run_seed) const override;

private:
    std::string name_;
    SyntheticTradeoff problem_;
};

struct BuiltinProblem {
    std::string name;
    int dim = 1;
    int constrained = 1;
    std::string summary;
};

/// Named synthetic presets covering the shapes exercised in tests:
/// fairness-like, robustness-like, selective-robustness-like, pruning-like.
const std::vector<BuiltinProblem>& builtin_problems();
std::unique_ptr<SyntheticProvider> make_builtin_problem(
    const std::string& name, NoiseKind noise = NoiseKind::bernoulli);

/// Replays precomputed per-sample losses from a JSON manifest + CSV files.
/// The listed configurations form a finite search space.
std::unique_ptr<ObjectiveProvider> load_table_objective(
    const std::string& manifest_path);

/// Single-call subprocess protocol: one JSON request line on stdin, one
/// JSON response line on stdout, exit code 0. Throws with captured stderr
/// on timeout or protocol violations.
LossSamples subprocess_evaluate(const std::string& command,
                                const Eigen::VectorXd& values, Split split,
                                std::size_t n_samples, std::uint64_t seed,
                                double timeout_s = 3600.0);

class SubprocessProvider : public ObjectiveProvider {
public:
    SubprocessProvider(std::string command, SearchSpace space, int constrained,
                       double timeout_s = 3600.0);

    std::string name() const override { return "subprocess"; }
    int num_constrained() const override { return constrained_; }
    const SearchSpace& space() const override { return space_; }

protected:
    LossSamples evaluate_impl(const Configuration& config, Split split,
                              std::size_t n_samples,
                              std::uint64_t run_seed) const override;

private:
    std::string command_;
    SearchSpace space_;
    int constrained_;
    double timeout_s_;
};

/// Validation-split summary used across the pipeline.
EvalRecord evaluate_record(const ObjectiveProvider& provider,
                           const Configuration& config, std::size_t k,
                           std::uint64_t run_seed);

}  // namespace riskbo::objectives
