#include "riskbo/objectives.hpp"

#include "riskbo/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <mutex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace riskbo::objectives {

using nlohmann::json;

LossSamples ObjectiveProvider::evaluate(const Configuration& config, Split split,
                                        std::size_t n_samples,
                                        std::uint64_t run_seed) const {
    counts_[static_cast<std::size_t>(split)].fetch_add(1);
    return evaluate_impl(config, split, n_samples, run_seed);
}

std::vector<double> ObjectiveProvider::true_means(const Eigen::VectorXd&) const {
    throw std::logic_error("provider has no closed-form means");
}

const std::vector<Eigen::VectorXd>& ObjectiveProvider::finite_points() const {
    static const std::vector<Eigen::VectorXd> empty;
    return empty;
}

std::size_t ObjectiveProvider::required_samples(Split) const { return 0; }

SyntheticTradeoff::SyntheticTradeoff(SearchSpace space, std::vector<Curve> curves,
                                     NoiseKind noise, double noise_sd)
    : space_(std::move(space)),
      curves_(std::move(curves)),
      noise_(noise),
      noise_sd_(noise_sd) {
    if (curves_.size() < 2) {
        throw std::invalid_argument("need at least one constrained and one free curve");
    }
    const double free_gain = curves_.back().gain;
    for (std::size_t i = 0; i + 1 < curves_.size(); ++i) {
        if (!(curves_[i].gain * free_gain < 0.0)) {
            throw std::invalid_argument(
                "constrained and free gains must have opposing signs");
        }
        if (curves_[i].exponent < 0.0) {
            throw std::invalid_argument("curve exponents must be non-negative");
        }
    }
    if (curves_.back().exponent < 0.0) {
        throw std::invalid_argument("curve exponents must be non-negative");
    }
}

std::vector<double> SyntheticTradeoff::true_means(const Eigen::VectorXd& values) const {
    if (!space_.contains(values)) {
        throw std::invalid_argument("configuration outside space");
    }
    const double s = space_.to_unit(values).mean();
    std::vector<double> mu;
    mu.reserve(curves_.size());
    for (const auto& curve : curves_) {
        const double raw = curve.base + curve.gain * std::pow(s, curve.exponent);
        mu.push_back(std::clamp(raw, 0.0, 1.0));
    }
    return mu;
}

std::vector<double> true_mean(const SyntheticTradeoff& problem,
                              const Eigen::VectorXd& values) {
    return problem.true_means(values);
}

SyntheticProvider::SyntheticProvider(std::string name, SyntheticTradeoff problem)
    : name_(std::move(name)), problem_(std::move(problem)) {}

std::vector<double> SyntheticProvider::true_means(const Eigen::VectorXd& values) const {
    return problem_.true_means(values);
}

LossSamples SyntheticProvider::evaluate_impl(const Configuration& config,
                                             Split split, std::size_t n_samples,
                                             std::uint64_t run_seed) const {
    if (n_samples < 1) throw std::invalid_argument("need at least one sample");
    const auto mu = problem_.true_means(config.values);
    const std::uint64_t base =
        derive_seed(derive_seed(run_seed, split_name(split)), config.id);

    LossSamples out;
    out.config_id = config.id;
    out.split = split;
    out.per_objective.resize(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        Rng rng(derive_seed(base, "objective", i));
        auto& samples = out.per_objective[i];
        samples.reserve(n_samples);
        for (std::size_t s = 0; s < n_samples; ++s) {
            if (problem_.noise() == NoiseKind::bernoulli) {
                samples.push_back(rng.bernoulli(mu[i]) ? 1.0 : 0.0);
            } else {
                samples.push_back(
                    std::clamp(mu[i] + problem_.noise_sd() * rng.normal(), 0.0, 1.0));
            }
        }
    }
    return out;
}

const std::vector<BuiltinProblem>& builtin_problems() {
    static const std::vector<BuiltinProblem> catalog = {
        {"fairness-like", 1, 1,
         "1-d trade-off with a linear constrained loss and quadratic free loss"},
        {"robustness-like", 1, 1,
         "1-d trade-off with a steep constrained loss curve"},
        {"selective-robustness-like", 2, 2,
         "2-d problem with two constrained losses and one free loss"},
        {"pruning-like", 3, 1,
         "3-d problem with one constrained loss and a strong free trade-off"},
    };
    return catalog;
}

std::unique_ptr<SyntheticProvider> make_builtin_problem(const std::string& name,
                                                        NoiseKind noise) {
    if (name == "fairness-like") {
        return std::make_unique<SyntheticProvider>(
            name, SyntheticTradeoff(SearchSpace::unit(1),
                                    {{0.1, 0.8, 1.0}, {0.9, -0.8, 2.0}}, noise));
    }
    if (name == "robustness-like") {
        return std::make_unique<SyntheticProvider>(
            name, SyntheticTradeoff(SearchSpace::unit(1),
                                    {{0.05, 0.9, 4.0}, {0.9, -0.85, 1.0}}, noise));
    }
    if (name == "selective-robustness-like") {
        return std::make_unique<SyntheticProvider>(
            name,
            SyntheticTradeoff(SearchSpace::unit(2),
                              {{0.05, 0.6, 1.0}, {0.1, 0.5, 2.0}, {0.85, -0.7, 1.0}},
                              noise));
    }
    if (name == "pruning-like") {
        return std::make_unique<SyntheticProvider>(
            name, SyntheticTradeoff(SearchSpace::unit(3),
                                    {{0.0, 0.8, 1.5}, {0.95, -0.9, 1.0}}, noise));
    }
    throw std::invalid_argument("unknown builtin problem: " + name);
}

namespace {

class TableProvider : public ObjectiveProvider {
public:
    struct Entry {
        std::string manifest_id;
        Eigen::VectorXd lambda;
        std::map<Split, std::vector<std::vector<double>>> losses;
    };

    TableProvider(SearchSpace space, int constrained, std::vector<Entry> entries)
        : space_(std::move(space)),
          constrained_(constrained),
          entries_(std::move(entries)) {
        for (const auto& e : entries_) points_.push_back(e.lambda);
        for (const auto& [split, vectors] : entries_.front().losses) {
            required_[static_cast<std::size_t>(split)] = vectors.front().size();
        }
    }

    std::string name() const override { return "table"; }
    int num_constrained() const override { return constrained_; }
    const SearchSpace& space() const override { return space_; }
    const std::vector<Eigen::VectorXd>& finite_points() const override {
        return points_;
    }
    std::size_t required_samples(Split split) const override {
        return required_[static_cast<std::size_t>(split)];
    }

protected:
    LossSamples evaluate_impl(const Configuration& config, Split split,
                              std::size_t n_samples, std::uint64_t) const override {
        const Entry* match = nullptr;
        for (const auto& e : entries_) {
            if ((e.lambda - config.values).lpNorm<Eigen::Infinity>() <= 1e-12) {
                match = &e;
                break;
            }
        }
        if (match == nullptr) {
            throw std::runtime_error("configuration not listed in the table manifest");
        }
        auto it = match->losses.find(split);
        if (it == match->losses.end()) {
            throw std::runtime_error(std::string("no ") + std::string(split_name(split)) +
                                     " losses for configuration " + match->manifest_id);
        }
        if (n_samples != 0 && n_samples != it->second.front().size()) {
            throw std::runtime_error("requested sample count differs from the manifest");
        }
        LossSamples out;
        out.config_id = config.id;
        out.split = split;
        out.per_objective = it->second;
        return out;
    }

private:
    SearchSpace space_;
    int constrained_;
    std::vector<Entry> entries_;
    std::vector<Eigen::VectorXd> points_;
    std::array<std::size_t, 3> required_{};
};

std::vector<std::vector<double>> read_loss_csv(const std::filesystem::path& path,
                                               int num_objectives,
                                               std::vector<std::string>& errors) {
    std::ifstream in(path);
    if (!in) {
        errors.push_back("cannot open loss file " + path.string());
        return {};
    }
    std::string line;
    if (!std::getline(in, line)) {
        errors.push_back("empty loss file " + path.string());
        return {};
    }
    // header must read objective_0,...,objective_c
    {
        std::stringstream header(line);
        std::string field;
        int idx = 0;
        while (std::getline(header, field, ',')) {
            if (field != "objective_" + std::to_string(idx)) {
                errors.push_back("bad header in " + path.string());
                return {};
            }
            ++idx;
        }
        if (idx != num_objectives) {
            errors.push_back("wrong objective count in " + path.string());
            return {};
        }
    }
    std::vector<std::vector<double>> columns(num_objectives);
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        int idx = 0;
        while (std::getline(ss, field, ',')) {
            if (idx >= num_objectives) break;
            try {
                columns[idx].push_back(std::stod(field));
            } catch (const std::exception&) {
                errors.push_back("non-numeric value at " + path.string() + ":" +
                                 std::to_string(row));
                return {};
            }
            ++idx;
        }
        if (idx != num_objectives) {
            errors.push_back("wrong column count at " + path.string() + ":" +
                             std::to_string(row));
            return {};
        }
    }
    if (columns.front().empty()) {
        errors.push_back("no sample rows in " + path.string());
        return {};
    }
    return columns;
}

}  // namespace

std::unique_ptr<ObjectiveProvider> load_table_objective(
    const std::string& manifest_path) {
    std::vector<std::string> errors;
    std::ifstream in(manifest_path);
    if (!in) {
        throw std::runtime_error("cannot open manifest " + manifest_path);
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("manifest parse error: " + std::string(e.what()));
    }

    const auto base_dir = std::filesystem::path(manifest_path).parent_path();
    int dim = 0;
    int constrained = 0;
    std::vector<TableProvider::Entry> entries;

    if (!doc.contains("dim") || !doc["dim"].is_number_integer()) {
        errors.push_back("manifest missing integer field 'dim'");
    } else {
        dim = doc["dim"].get<int>();
    }
    if (!doc.contains("constrained") || !doc["constrained"].is_number_integer()) {
        errors.push_back("manifest missing integer field 'constrained'");
    } else {
        constrained = doc["constrained"].get<int>();
    }
    if (!doc.contains("configs") || !doc["configs"].is_array() ||
        doc["configs"].empty()) {
        errors.push_back("manifest needs a nonempty 'configs' array");
    }

    const auto split_of = [](const std::string& key) {
        if (key == "validation") return Split::validation;
        if (key == "calibration") return Split::calibration;
        return Split::test;
    };

    std::map<Split, std::size_t> split_sizes_seen;
    std::vector<std::string> seen_ids;
    if (errors.empty()) {
        for (const auto& cfg : doc["configs"]) {
            TableProvider::Entry entry;
            if (!cfg.contains("id")) {
                errors.push_back("config without id");
                continue;
            }
            entry.manifest_id = cfg["id"].is_string()
                                    ? cfg["id"].get<std::string>()
                                    : cfg["id"].dump();
            if (std::find(seen_ids.begin(), seen_ids.end(), entry.manifest_id) !=
                seen_ids.end()) {
                errors.push_back("duplicated config id " + entry.manifest_id);
                continue;
            }
            seen_ids.push_back(entry.manifest_id);

            if (!cfg.contains("lambda") || !cfg["lambda"].is_array() ||
                static_cast<int>(cfg["lambda"].size()) != dim) {
                errors.push_back("config " + entry.manifest_id +
                                 ": lambda must have 'dim' entries");
                continue;
            }
            entry.lambda = Eigen::VectorXd(dim);
            for (int j = 0; j < dim; ++j) {
                entry.lambda[j] = cfg["lambda"][j].get<double>();
            }

            if (!cfg.contains("losses") || !cfg["losses"].is_object()) {
                errors.push_back("config " + entry.manifest_id + ": missing losses");
                continue;
            }
            for (const auto& [key, value] : cfg["losses"].items()) {
                if (key != "validation" && key != "calibration" && key != "test") {
                    errors.push_back("config " + entry.manifest_id +
                                     ": unknown split " + key);
                    continue;
                }
                const auto path = base_dir / value.get<std::string>();
                auto columns = read_loss_csv(path, constrained + 1, errors);
                if (columns.empty()) continue;
                for (int i = 0; i < constrained; ++i) {
                    for (double v : columns[i]) {
                        if (!(v >= 0.0 && v <= 1.0)) {
                            errors.push_back("config " + entry.manifest_id + ", " + key +
                                             ": constrained loss out of [0,1]");
                            break;
                        }
                    }
                }
                const Split split = split_of(key);
                auto [it, inserted] =
                    split_sizes_seen.emplace(split, columns.front().size());
                if (!inserted && it->second != columns.front().size()) {
                    errors.push_back("config " + entry.manifest_id + ", " + key +
                                     ": inconsistent sample count");
                }
                entry.losses[split] = std::move(columns);
            }
            if (!entry.losses.count(Split::validation) ||
                !entry.losses.count(Split::calibration)) {
                errors.push_back("config " + entry.manifest_id +
                                 ": needs validation and calibration losses");
            }
            entries.push_back(std::move(entry));
        }
    }

    if (!errors.empty()) {
        std::string joined = "manifest validation failed:";
        for (const auto& e : errors) joined += "\n  - " + e;
        throw std::runtime_error(joined);
    }

    // the listed configurations span the finite search space; pad any
    // degenerate dimension so the box stays well-formed
    Eigen::VectorXd lower = entries.front().lambda;
    Eigen::VectorXd upper = entries.front().lambda;
    for (const auto& e : entries) {
        lower = lower.cwiseMin(e.lambda);
        upper = upper.cwiseMax(e.lambda);
    }
    for (int j = 0; j < dim; ++j) {
        if (upper[j] - lower[j] <= 0.0) {
            lower[j] -= 0.5;
            upper[j] += 0.5;
        }
    }
    return std::make_unique<TableProvider>(SearchSpace(lower, upper), constrained,
                                           std::move(entries));
}

namespace {

struct ChildProcess {
    pid_t pid = -1;
    int stdin_fd = -1;
    int stdout_fd = -1;
    int stderr_fd = -1;
};

ChildProcess spawn_shell(const std::string& command) {
    int in_pipe[2];
    int out_pipe[2];
    int err_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0 || pipe(err_pipe) != 0) {
        throw std::runtime_error("pipe() failed");
    }
    const pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("fork() failed");
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        close(err_pipe[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[1]);
    ChildProcess child;
    child.pid = pid;
    child.stdin_fd = in_pipe[1];
    child.stdout_fd = out_pipe[0];
    child.stderr_fd = err_pipe[0];
    return child;
}

}  // namespace

LossSamples subprocess_evaluate(const std::string& command,
                                const Eigen::VectorXd& values, Split split,
                                std::size_t n_samples, std::uint64_t seed,
                                double timeout_s) {
    // a child that exits before reading must not kill us via SIGPIPE
    static std::once_flag sigpipe_once;
    std::call_once(sigpipe_once, [] { signal(SIGPIPE, SIG_IGN); });

    json request;
    request["lambda"] = std::vector<double>(values.data(), values.data() + values.size());
    request["split"] = std::string(split_name(split));
    request["n_samples"] = n_samples;
    request["seed"] = seed;
    const std::string request_line = request.dump() + "\n";

    ChildProcess child = spawn_shell(command);
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration<double>(timeout_s);

    const ssize_t written =
        write(child.stdin_fd, request_line.data(), request_line.size());
    close(child.stdin_fd);

    std::string stdout_data;
    std::string stderr_data;
    bool timed_out = false;
    {
        struct pollfd fds[2] = {{child.stdout_fd, POLLIN, 0},
                                {child.stderr_fd, POLLIN, 0}};
        bool open_fds[2] = {true, true};
        char buffer[4096];
        while (open_fds[0] || open_fds[1]) {
            const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (remaining.count() <= 0) {
                timed_out = true;
                break;
            }
            fds[0].events = open_fds[0] ? POLLIN : 0;
            fds[1].events = open_fds[1] ? POLLIN : 0;
            const int rc = poll(fds, 2, static_cast<int>(remaining.count()));
            if (rc < 0) {
                if (errno == EINTR) continue;
                timed_out = true;
                break;
            }
            if (rc == 0) {
                timed_out = true;
                break;
            }
            for (int i = 0; i < 2; ++i) {
                if (!open_fds[i] || fds[i].revents == 0) continue;
                const ssize_t n = read(fds[i].fd, buffer, sizeof(buffer));
                if (n > 0) {
                    (i == 0 ? stdout_data : stderr_data).append(buffer, n);
                } else {
                    open_fds[i] = false;
                }
            }
        }
    }
    close(child.stdout_fd);
    close(child.stderr_fd);

    // reap within the remaining deadline; a child that closed its pipes but
    // keeps running still counts as a timeout
    int status = 0;
    bool exited = false;
    while (!timed_out) {
        const pid_t rc = waitpid(child.pid, &status, WNOHANG);
        if (rc == child.pid) {
            exited = true;
            break;
        }
        if (rc < 0) break;
        if (std::chrono::steady_clock::now() >= deadline) {
            timed_out = true;
            break;
        }
        usleep(1000);
    }
    if (timed_out || !exited) {
        kill(child.pid, SIGKILL);
        waitpid(child.pid, &status, 0);
        throw std::runtime_error("objective subprocess timed out; stderr: " +
                                 stderr_data);
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw std::runtime_error("objective subprocess failed; stderr: " +
                                 stderr_data);
    }
    if (written != static_cast<ssize_t>(request_line.size())) {
        throw std::runtime_error(
            "failed to write the request to the objective subprocess; stderr: " +
            stderr_data);
    }

    const auto newline = stdout_data.find('\n');
    const std::string line =
        newline == std::string::npos ? stdout_data : stdout_data.substr(0, newline);
    json response;
    try {
        response = json::parse(line);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("malformed subprocess response: " +
                                 std::string(e.what()) + "; stderr: " + stderr_data);
    }
    if (!response.contains("losses") || !response["losses"].is_array() ||
        response["losses"].empty()) {
        throw std::runtime_error("subprocess response missing 'losses' arrays");
    }

    LossSamples out;
    out.split = split;
    for (const auto& arr : response["losses"]) {
        if (!arr.is_array() || arr.size() != n_samples) {
            throw std::runtime_error(
                "subprocess loss arrays must each hold n_samples values");
        }
        std::vector<double> column;
        column.reserve(n_samples);
        for (const auto& v : arr) {
            const double x = v.get<double>();
            if (!std::isfinite(x)) {
                throw std::runtime_error("subprocess returned a non-finite loss");
            }
            column.push_back(x);
        }
        out.per_objective.push_back(std::move(column));
    }
    return out;
}

SubprocessProvider::SubprocessProvider(std::string command, SearchSpace space,
                                       int constrained, double timeout_s)
    : command_(std::move(command)),
      space_(std::move(space)),
      constrained_(constrained),
      timeout_s_(timeout_s) {
    if (constrained_ < 1) {
        throw std::invalid_argument("need at least one constrained objective");
    }
}

LossSamples SubprocessProvider::evaluate_impl(const Configuration& config,
                                              Split split, std::size_t n_samples,
                                              std::uint64_t run_seed) const {
    const std::uint64_t seed =
        derive_seed(derive_seed(run_seed, split_name(split)), config.id);
    LossSamples out =
        subprocess_evaluate(command_, config.values, split, n_samples, seed, timeout_s_);
    if (static_cast<int>(out.per_objective.size()) != num_objectives()) {
        throw std::runtime_error("subprocess returned " +
                                 std::to_string(out.per_objective.size()) +
                                 " loss arrays, expected " +
                                 std::to_string(num_objectives()));
    }
    for (int i = 0; i < constrained_; ++i) {
        for (double v : out.per_objective[i]) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw std::runtime_error("subprocess constrained loss out of [0,1]");
            }
        }
    }
    out.config_id = config.id;
    return out;
}

EvalRecord evaluate_record(const ObjectiveProvider& provider,
                           const Configuration& config, std::size_t k,
                           std::uint64_t run_seed) {
    const LossSamples samples =
        provider.evaluate(config, Split::validation, k, run_seed);
    EvalRecord record;
    record.config = config;
    record.val_means = samples.means();
    record.provenance = provider.name();
    return record;
}

}  // namespace riskbo::objectives
