#pragma once

#include "rwl/attack.hpp"
#include "rwl/dataset.hpp"
#include "rwl/denoise.hpp"
#include "rwl/gcn.hpp"
#include "rwl/joint.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rwl {

/// Bad key, malformed value, or violated config invariant.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure inside a run, prefixed with the phase it happened in.
class PhaseError : public std::runtime_error {
public:
    PhaseError(std::string phase, const std::string& what)
        : std::runtime_error(phase + ": " + what), phase_(std::move(phase)) {}
    const std::string& phase() const noexcept { return phase_; }

private:
    std::string phase_;
};

enum class RunMode { gcn_only, two_stage, joint };
enum class AttackKind { none, random, external_edgelist };
enum class SplitSource { random, stored };

struct ExperimentConfig {
    std::string dataset;
    RunMode mode = RunMode::joint;
    AttackKind attack = AttackKind::none;
    double ptb_rate = 0.0;
    std::string attack_edges; ///< poisoned edge list for external-edgelist
    bool lcc = true;
    bool row_normalize = false;
    SplitSource split = SplitSource::random;
    SplitRatios ratios;

    double alpha = 1.0;
    double beta = 0.1;
    std::vector<double> beta_grid; ///< when nonempty, beta is picked by validation accuracy
    LinearTermForm c_form = LinearTermForm::exact;

    std::size_t stage1_iters = 200;   ///< T for the two-stage denoiser
    double stage1_kkt_tol = 1e-6;
    double stage1_obj_rel_tol = 1e-9;
    std::optional<double> stage1_step; ///< unset: 1/L1
    double w_lr = 1e-2;
    std::optional<double> l2_prime;
    std::size_t outer_epochs = 200;   ///< T for the joint trainer
    std::optional<std::size_t> inner_T; ///< unset: 2 under random attack, 1 otherwise

    std::size_t max_epochs = 1000;    ///< T' for GCN training on a fixed graph
    std::size_t patience = 200;
    OptimizerKind optimizer = OptimizerKind::adam;
    double theta_lr = 0.01;
    std::size_t hidden = 16;
    double dropout = 0.5;
    double weight_decay = 5e-4;

    std::uint64_t seed = 0;
    std::string output = "out";
};

/// Every settable key, in the order used by `to_config_text`.
const std::vector<std::string>& config_keys();

/// Parses `value` into the field named `key`. Throws ConfigError.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const ExperimentConfig& cfg, const std::string& key);

/// "key = value" lines for every key; parse_config_text inverts it exactly.
std::string to_config_text(const ExperimentConfig& cfg);

/// Flat key = value text; '#' starts a comment line, blank lines are skipped.
ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config_file(const std::filesystem::path& file, ExperimentConfig base = {});

/// Throws ConfigError on the first violated invariant.
void validate(const ExperimentConfig& cfg);

std::string to_string(RunMode mode);
std::string to_string(AttackKind attack);
RunMode parse_mode(const std::string& s);
AttackKind parse_attack(const std::string& s);

struct DatasetStats {
    std::size_t loaded_nodes = 0;
    std::size_t nodes = 0; ///< after LCC
    std::size_t edges = 0; ///< clean edges after LCC
    std::size_t features = 0;
    int classes = 0;
    std::size_t perturbed_edges = 0;
    std::size_t injected = 0;
    std::size_t removed = 0;
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

struct RunReport {
    std::string config_text;
    DatasetStats stats;
    double train_acc = 0;
    double val_acc = 0;
    double test_acc = 0;
    std::uint64_t seed = 0;
    double selected_beta = 0;
    std::size_t best_epoch = 0;
    std::vector<std::pair<std::string, double>> phase_seconds; ///< in execution order
    double total_seconds = 0;
    std::map<std::string, std::string> artifacts;

    nlohmann::json to_json() const;
};

/// Fraction of `nodes` whose eval-mode argmax prediction on graph A(w) matches the label.
double evaluate(const GcnParams& params, const EdgeWeightVector& w, const SparseMatrix& X,
                std::span<const int> labels, std::span<const int> nodes);

/// load_dataset, then the LCC and row normalization when enabled. The node
/// count before preprocessing goes to `loaded_nodes` when given.
Dataset load_preprocessed(const ExperimentConfig& cfg, std::size_t* loaded_nodes = nullptr);

/// The poisoned graph selected by cfg.attack. External edge lists use the node
/// ids of the loaded files; edges touching nodes outside the LCC are dropped.
PerturbedGraph apply_attack(const ExperimentConfig& cfg, const Dataset& ds, std::size_t loaded_nodes);

/// Loads, preprocesses, attacks, defends, trains and evaluates; writes
/// config.txt, report.json, metrics.jsonl and graph artifacts into cfg.output.
/// Errors are rethrown as PhaseError.
RunReport run_experiment(const ExperimentConfig& cfg);

struct CellStats {
    double mean = 0;
    double std = 0; ///< sample standard deviation, 0 for a single value
    std::size_t count = 0;
};

/// Throws std::invalid_argument for an empty input.
CellStats aggregate(std::span<const double> values);

struct SweepRun {
    RunMode mode;
    double ptb_rate;
    std::uint64_t seed;
    double test_acc;
};

struct SweepResult {
    std::vector<SweepRun> runs;
    std::vector<RunMode> modes;
    std::vector<double> rates;
};

/// One run per (mode, rate, seed), each writing under base.output. Cells run
/// on up to `jobs` threads. A failing cell aborts the sweep with its identity.
SweepResult sweep(const ExperimentConfig& base, std::span<const RunMode> modes,
                  std::span<const double> rates, std::span<const std::uint64_t> seeds, std::size_t jobs = 1);

/// Tab-separated table, one row per rate, mean and std columns per mode, in percent.
std::string sweep_table(const SweepResult& result);

} // namespace rwl
