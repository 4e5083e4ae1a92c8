#ifndef GRAPHDISTILL_EXPERIMENTS_HPP
#define GRAPHDISTILL_EXPERIMENTS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphdistill/dataset.hpp"
#include "graphdistill/nn.hpp"
#include "graphdistill/spectral.hpp"

namespace gd::experiments {

/// Shortest round-trip decimal form of a double, for stable CSV emission.
std::string format_double(double x);

struct RunRecord {
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::map<std::string, double> train_metrics, val_metrics, test_metrics;
    int best_epoch = 0;
    int epochs_run = 0;
    double wall_seconds = 0.0;
    std::string error;   // non-empty when the run failed

    bool failed() const { return !error.empty(); }
};

struct HyperParams {
    int num_steps = 16;
    int num_bins = 16;
    double t_min = 0.1;
    double t_max = 50.0;
    int kernel = 3;
    std::string aux_task;     // empty = no sampled auxiliary
    double aux_weight = 0.5;

    HksConfig hks() const { return HksConfig{num_steps, t_min, t_max, num_bins}; }
    nlohmann::json to_json() const;
};

struct SearchSpace {
    std::vector<int> steps_choices{16, 32, 64, 128};
    std::vector<int> bins_choices{16, 32, 64, 128};
    double t_min_lo = 0.0024787521766663585;   // e^-6
    double t_min_hi = 2.718281828459045;       // e^1
    double t_max_lo = 7.38905609893065;        // e^2
    double t_max_hi = 403.4287934927351;       // e^6
    std::vector<int> kernel_choices{3, 5, 7};
    std::vector<std::string> aux_choices;      // sampled when non-empty
    std::vector<double> aux_weight_choices{0.5};
    int num_trials = 20;
};

/// Draws one feasible configuration; infeasible kernel/bins/steps combinations
/// are resampled wholesale.
HyperParams sample_config(const SearchSpace& space, Rng& rng);

struct TrialSettings {
    std::string main_task;
    double main_weight = 1.0;
    int filters = 8;
    int fc_shared_units = 60;
    int head_units = 40;
    nn::TrainSchedule schedule;
};

std::vector<nn::TaskSpec> make_tasks(const data::LabeledDataset& ds, const std::string& main_task,
                                     const std::vector<std::string>& aux_tasks, double main_weight,
                                     double aux_weight);

nn::NetConfig build_net_config(int bins, int steps, int kernel, const TrialSettings& settings,
                               std::vector<nn::TaskSpec> tasks, std::uint64_t run_seed);

struct SearchSpec {
    SearchSpace space;
    TrialSettings settings;
    std::uint64_t seed = 0;
};

struct SearchResult {
    std::vector<RunRecord> trials;
    std::size_t best_index = 0;
    std::string metric_name;
    std::string main_task;
};

/// Random hyperparameter search: one shared 8:1:1 split, each trial featurized
/// from cached eigendecompositions, selected on the validation metric.
SearchResult random_search(const data::LabeledDataset& ds, const SearchSpec& spec);

struct LearningCurveSpec {
    std::string main_task = "diameter";
    std::vector<std::string> aux_tasks{"density"};
    std::vector<std::size_t> sizes{500, 1000, 2000, 4000};
    int num_seeds = 3;
    std::uint64_t base_seed = 0;
    double main_weight = 1.0;
    double aux_weight = 0.5;
    int kernel = 3;
    int filters = 8;
    int fc_shared_units = 60;
    int head_units = 40;
    nn::TrainSchedule schedule;
    bool single_task = true;
    bool multi_task = true;
};

struct CellResult {
    std::string variant;      // "single" or "multi"
    std::string main_task;
    std::size_t train_size = 0;
    std::uint64_t seed = 0;
    RunRecord record;
};

struct Aggregate {
    std::string variant;
    std::size_t train_size = 0;
    double mean = 0.0;
    double stderr_mean = 0.0;
    std::size_t count = 0;
};

struct LearningCurveResult {
    std::string metric_name;
    std::vector<CellResult> cells;        // sorted by (variant, train_size, seed)
    std::vector<Aggregate> aggregates;    // sorted by (variant, train_size)
};

/// One (variant, train size, seed) training run per cell; cells run in
/// parallel under GD_THREADS and are sorted before emission.
LearningCurveResult learning_curve(const data::LabeledDataset& ds,
                                   const LearningCurveSpec& spec);

struct CvSpec {
    int folds = 10;
    std::uint64_t seed = 0;
    std::string main_task = "class";
    std::vector<std::string> aux_tasks;
    double aux_weight = 0.5;
    int trials = 0;                      // >0 tunes on the first fold via random search
    SearchSpace space;                   // used when trials > 0
    HyperParams fixed;                   // used when trials == 0
    TrialSettings settings;
};

struct CvResult {
    std::string metric_name;
    std::string main_task;
    nlohmann::json chosen_config;
    std::vector<RunRecord> fold_records;
    double mean = 0.0;
    double stderr_mean = 0.0;
};

CvResult cross_validate(const data::LabeledDataset& ds, const CvSpec& spec);

std::string learning_curve_csv(const LearningCurveResult& result);
nlohmann::json learning_curve_json(const LearningCurveResult& result);
std::string search_csv(const SearchResult& result);
nlohmann::json search_json(const SearchResult& result);
std::string cv_csv(const CvResult& result);
nlohmann::json cv_json(const CvResult& result);

int run_cli(int argc, const char* const* argv);

} // namespace gd::experiments

#endif
