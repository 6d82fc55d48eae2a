#include "riskbo/core.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace riskbo {

std::string_view split_name(Split s) {
    switch (s) {
        case Split::validation: return "validation";
        case Split::calibration: return "calibration";
        case Split::test: return "test";
    }
    return "unknown";
}

std::string_view bound_name(BoundKind b) {
    return b == BoundKind::hoeffding ? "hoeffding" : "hoeffding_bentkus";
}

BoundKind bound_from_name(std::string_view name) {
    if (name == "hoeffding") return BoundKind::hoeffding;
    if (name == "hoeffding_bentkus" || name == "hb") {
        return BoundKind::hoeffding_bentkus;
    }
    throw std::invalid_argument("unknown bound family: " + std::string(name));
}

SearchSpace::SearchSpace(Eigen::VectorXd lower, Eigen::VectorXd upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() == 0 || lower_.size() != upper_.size()) {
        throw std::invalid_argument("search space bounds must be nonempty and equal-sized");
    }
    for (Eigen::Index j = 0; j < lower_.size(); ++j) {
        if (!(lower_[j] < upper_[j])) {
            throw std::invalid_argument("search space requires lower < upper in every dimension");
        }
    }
}

SearchSpace SearchSpace::unit(int dim) {
    return SearchSpace(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim));
}

bool SearchSpace::contains(const Eigen::VectorXd& values) const {
    if (values.size() != lower_.size()) return false;
    for (Eigen::Index j = 0; j < values.size(); ++j) {
        if (values[j] < lower_[j] || values[j] > upper_[j]) return false;
    }
    return true;
}

Eigen::VectorXd SearchSpace::to_unit(const Eigen::VectorXd& values) const {
    return (values - lower_).cwiseQuotient(upper_ - lower_);
}

Eigen::VectorXd SearchSpace::from_unit(const Eigen::VectorXd& unit) const {
    return lower_ + unit.cwiseProduct(upper_ - lower_);
}

void RiskSpec::validate() const {
    if (alphas.empty()) {
        throw std::invalid_argument("risk spec needs at least one constrained objective");
    }
    for (double a : alphas) {
        if (!(a > 0.0 && a < 1.0)) {
            throw std::invalid_argument("alpha values must lie in (0,1)");
        }
    }
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("delta must lie in (0,1)");
    }
    if (!(delta_prime > 0.0 && delta_prime < 1.0)) {
        throw std::invalid_argument("delta_prime must lie in (0,1)");
    }
}

std::vector<double> LossSamples::means() const {
    std::vector<double> out;
    out.reserve(per_objective.size());
    for (const auto& v : per_objective) out.push_back(empirical_mean(v));
    return out;
}

double empirical_mean(std::span<const double> samples) {
    if (samples.empty()) throw std::invalid_argument("empty sample set");
    double sum = 0.0;
    for (double x : samples) sum += x;
    return sum / static_cast<double>(samples.size());
}

std::vector<std::string> validate_record(const EvalRecord& record,
                                         const RiskSpec& spec,
                                         const SearchSpace& space) {
    std::vector<std::string> errors;
    const int c = spec.num_constrained();

    auto check_means = [&](const std::vector<double>& means, std::string_view label) {
        if (static_cast<int>(means.size()) != spec.num_objectives()) {
            std::ostringstream os;
            os << label << " objective count mismatch: expected "
               << spec.num_objectives() << ", got " << means.size();
            errors.push_back(os.str());
            return;
        }
        for (int i = 0; i < c; ++i) {
            if (!std::isfinite(means[i]) || means[i] < 0.0 || means[i] > 1.0) {
                std::ostringstream os;
                os << label << " loss out of range on objective " << i << ": " << means[i];
                errors.push_back(os.str());
            }
        }
        if (!std::isfinite(means[c])) {
            std::ostringstream os;
            os << label << " free objective is not finite";
            errors.push_back(os.str());
        }
    };

    check_means(record.val_means, "validation");
    if (record.cal_means) check_means(*record.cal_means, "calibration");

    if (!space.contains(record.config.values)) {
        errors.push_back("configuration outside space");
    }
    return errors;
}

SplitSizes split_sizes(std::span<const LossSamples> records) {
    if (records.empty()) throw std::invalid_argument("no loss records");
    std::map<Split, std::size_t> sizes;
    for (const auto& rec : records) {
        for (const auto& v : rec.per_objective) {
            if (v.size() != rec.sample_count()) {
                throw std::invalid_argument("loss vectors in one record differ in length");
            }
        }
        auto [it, inserted] = sizes.emplace(rec.split, rec.sample_count());
        if (!inserted && it->second != rec.sample_count()) {
            throw std::invalid_argument("inconsistent sample counts across records");
        }
    }
    SplitSizes out;
    if (auto it = sizes.find(Split::validation); it != sizes.end()) out.validation = it->second;
    if (auto it = sizes.find(Split::calibration); it != sizes.end()) out.calibration = it->second;
    return out;
}

}  // namespace riskbo
