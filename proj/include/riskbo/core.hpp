#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace riskbo {

using ConfigId = std::uint64_t;

enum class Split { validation, calibration, test };

std::string_view split_name(Split s);

enum class BoundKind { hoeffding, hoeffding_bentkus };

std::string_view bound_name(BoundKind b);
BoundKind bound_from_name(std::string_view name);

/// Hyperparameter box; all configurations live inside it.
class SearchSpace {
public:
    SearchSpace(Eigen::VectorXd lower, Eigen::VectorXd upper);

    static SearchSpace unit(int dim);

    int dim() const { return static_cast<int>(lower_.size()); }
    const Eigen::VectorXd& lower() const { return lower_; }
    const Eigen::VectorXd& upper() const { return upper_; }

    bool contains(const Eigen::VectorXd& values) const;

    // map between raw coordinates and the unit box used for modeling
    Eigen::VectorXd to_unit(const Eigen::VectorXd& values) const;
    Eigen::VectorXd from_unit(const Eigen::VectorXd& unit) const;

private:
    Eigen::VectorXd lower_;
    Eigen::VectorXd upper_;
};

/// A point in the search space. Ids are run-scoped tokens assigned at
/// creation; two evaluations of the same coordinates keep distinct ids.
struct Configuration {
    Eigen::VectorXd values;
    ConfigId id = 0;

    Configuration() = default;
    Configuration(Eigen::VectorXd v, ConfigId token)
        : values(std::move(v)), id(token) {}
};

/// User-facing risk request: per-constraint limits, the certification
/// confidence delta, and the region width parameter delta_prime. The free
/// objective always sits at index c in objective vectors.
struct RiskSpec {
    std::vector<double> alphas;
    double delta = 0.1;
    double delta_prime = 1e-4;
    BoundKind bound = BoundKind::hoeffding_bentkus;

    int num_constrained() const { return static_cast<int>(alphas.size()); }
    int num_objectives() const { return num_constrained() + 1; }
    int free_objective_index() const { return num_constrained(); }

    void validate() const;  // throws std::invalid_argument on bad fields
};

/// Per-sample losses for one configuration on one split. The first c
/// vectors are constrained objectives (values in [0,1]); the last is the
/// free objective and may take any real value.
struct LossSamples {
    ConfigId config_id = 0;
    Split split = Split::validation;
    std::vector<std::vector<double>> per_objective;

    std::size_t sample_count() const {
        return per_objective.empty() ? 0 : per_objective.front().size();
    }
    std::vector<double> means() const;
};

/// Evaluation summary used throughout the pipeline.
struct EvalRecord {
    Configuration config;
    std::vector<double> val_means;
    std::optional<std::vector<double>> cal_means;
    std::string provenance;
};

/// Arithmetic mean with a fixed left-to-right summation order.
/// Throws std::invalid_argument on an empty input.
double empirical_mean(std::span<const double> samples);

/// Collects every violation in a record instead of failing fast; an empty
/// result means the record conforms.
std::vector<std::string> validate_record(const EvalRecord& record,
                                         const RiskSpec& spec,
                                         const SearchSpace& space);

struct SplitSizes {
    std::size_t validation = 0;
    std::size_t calibration = 0;
};

/// Common (k, m) across records; throws if counts disagree.
SplitSizes split_sizes(std::span<const LossSamples> records);

}  // namespace riskbo
