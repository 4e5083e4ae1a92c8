#include "graphdistill/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "graphdistill/errors.hpp"
#include "graphdistill/parallel.hpp"
#include "graphdistill/rng.hpp"

namespace gd::experiments {

std::string format_double(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) throw std::invalid_argument("cannot format value");
    return std::string(buf, ptr);
}

nlohmann::json HyperParams::to_json() const {
    nlohmann::json j;
    j["num_steps"] = num_steps;
    j["num_bins"] = num_bins;
    j["t_min"] = t_min;
    j["t_max"] = t_max;
    j["kernel"] = kernel;
    if (!aux_task.empty()) j["aux_task"] = aux_task;
    j["aux_weight"] = aux_weight;
    return j;
}

HyperParams sample_config(const SearchSpace& space, Rng& rng) {
    if (space.steps_choices.empty() || space.bins_choices.empty() ||
        space.kernel_choices.empty() || space.aux_weight_choices.empty())
        throw std::invalid_argument("search space choice lists must be non-empty");
    if (!(space.t_min_lo > 0.0) || !(space.t_min_hi >= space.t_min_lo) ||
        !(space.t_max_lo > 0.0) || !(space.t_max_hi >= space.t_max_lo))
        throw std::invalid_argument("search space time ranges are invalid");
    auto log_uniform = [&](double lo, double hi) {
        return std::exp(rng.uniform(std::log(lo), std::log(hi)));
    };
    for (int attempt = 0; attempt < 1000; ++attempt) {
        HyperParams hp;
        hp.num_steps = space.steps_choices[rng.below(space.steps_choices.size())];
        hp.t_min = log_uniform(space.t_min_lo, space.t_min_hi);
        hp.t_max = log_uniform(space.t_max_lo, space.t_max_hi);
        hp.num_bins = space.bins_choices[rng.below(space.bins_choices.size())];
        hp.kernel = space.kernel_choices[rng.below(space.kernel_choices.size())];
        if (!space.aux_choices.empty())
            hp.aux_task = space.aux_choices[rng.below(space.aux_choices.size())];
        hp.aux_weight = space.aux_weight_choices[rng.below(space.aux_weight_choices.size())];
        if (!(hp.t_min < hp.t_max)) continue;
        if (!nn::shapes_feasible(hp.num_bins, hp.num_steps, hp.kernel)) continue;
        return hp;
    }
    throw std::invalid_argument("search space admits no feasible configuration");
}

namespace {

nn::TaskSpec task_from_info(const data::TaskInfo& info, double weight) {
    if (info.kind == nn::TaskKind::kRegression)
        return nn::TaskSpec::regression(info.name, weight);
    return nn::TaskSpec::classification(info.name, info.num_classes, weight);
}

} // namespace

std::vector<nn::TaskSpec> make_tasks(const data::LabeledDataset& ds, const std::string& main_task,
                                     const std::vector<std::string>& aux_tasks, double main_weight,
                                     double aux_weight) {
    std::vector<nn::TaskSpec> tasks;
    tasks.push_back(task_from_info(ds.task(main_task), main_weight));
    for (const std::string& aux : aux_tasks) {
        if (aux == main_task)
            throw std::invalid_argument("auxiliary task duplicates the main task: " + aux);
        tasks.push_back(task_from_info(ds.task(aux), aux_weight));
    }
    return tasks;
}

nn::NetConfig build_net_config(int bins, int steps, int kernel,
                               const TrialSettings& settings,
                               std::vector<nn::TaskSpec> tasks, std::uint64_t run_seed) {
    nn::NetConfig cfg;
    cfg.input_bins = bins;
    cfg.input_steps = steps;
    cfg.conv1 = {kernel, settings.filters};
    cfg.conv2 = {kernel, settings.filters};
    cfg.fc_shared_units = settings.fc_shared_units;
    cfg.head_units = settings.head_units;
    cfg.tasks = std::move(tasks);
    cfg.rng_seed = run_seed;
    return cfg;
}

namespace {

std::string metric_label(const data::LabeledDataset& ds, const std::string& main_task,
                         const char* prefix) {
    return std::string(prefix) +
           (ds.task(main_task).kind == nn::TaskKind::kRegression ? "mse" : "accuracy");
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

nlohmann::json net_config_json(const nn::NetConfig& cfg, const nn::TrainSchedule& schedule) {
    nlohmann::json tasks = nlohmann::json::array();
    for (const nn::TaskSpec& t : cfg.tasks)
        tasks.push_back({{"name", t.name},
                         {"kind", t.kind == nn::TaskKind::kRegression ? "regression"
                                                                      : "classification"},
                         {"num_classes", t.num_classes},
                         {"weight", t.weight}});
    return nlohmann::json{{"input_bins", cfg.input_bins},
                          {"input_steps", cfg.input_steps},
                          {"kernel", cfg.conv1.kernel},
                          {"filters", cfg.conv1.filters},
                          {"fc_shared_units", cfg.fc_shared_units},
                          {"head_units", cfg.head_units},
                          {"rng_seed", cfg.rng_seed},
                          {"tasks", std::move(tasks)},
                          {"batch_size", schedule.batch_size},
                          {"max_epochs", schedule.max_epochs},
                          {"patience", schedule.patience}};
}

// Trains one model and fills a RunRecord; exceptions become record.error.
RunRecord run_trial(const nn::NetConfig& cfg, const nn::TrainSchedule& schedule,
                    const nn::SampleSet& train_set, const nn::SampleSet& val_set,
                    const nn::SampleSet* test_set, bool with_train_metrics,
                    std::uint64_t seed) {
    RunRecord record;
    record.seed = seed;
    record.config = net_config_json(cfg, schedule);
    Timer timer;
    try {
        nn::MultiTaskNet net(cfg);
        nn::TrainHistory history = nn::train(net, train_set, val_set, schedule);
        record.best_epoch = history.best_epoch;
        record.epochs_run = history.epochs_run;
        if (with_train_metrics) record.train_metrics = nn::evaluate(net, train_set);
        record.val_metrics = nn::evaluate(net, val_set);
        if (test_set) record.test_metrics = nn::evaluate(net, *test_set);
    } catch (const std::exception& e) {
        record.error = e.what();
    }
    record.wall_seconds = timer.seconds();
    return record;
}

nlohmann::json record_json(const RunRecord& r) {
    nlohmann::json j;
    j["config"] = r.config;
    j["seed"] = r.seed;
    j["train_metrics"] = r.train_metrics;
    j["val_metrics"] = r.val_metrics;
    j["test_metrics"] = r.test_metrics;
    j["best_epoch"] = r.best_epoch;
    j["epochs_run"] = r.epochs_run;
    j["wall_seconds"] = r.wall_seconds;
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

// Mean and standard error of the mean (n-1 denominator; 0 when n < 2).
std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double sum = 0.0;
    for (double x : xs) sum += x;
    double mean = sum / static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double sq = 0.0;
    for (double x : xs) {
        double d = x - mean;
        sq += d * d;
    }
    double var = sq / static_cast<double>(xs.size() - 1);
    return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

} // namespace

SearchResult random_search(const data::LabeledDataset& ds, const SearchSpec& spec) {
    if (spec.space.num_trials < 1) throw std::invalid_argument("search needs at least one trial");
    if (spec.settings.main_task.empty()) throw std::invalid_argument("search needs a main task");
    ds.task(spec.settings.main_task);
    for (const std::string& aux : spec.space.aux_choices) ds.task(aux);

    data::SplitSpec split_spec;
    split_spec.shuffle_seed = spec.seed;
    data::SplitIndices idx = data::split_indices(ds.size(), split_spec);

    std::vector<std::size_t> needed = idx.train;
    needed.insert(needed.end(), idx.val.begin(), idx.val.end());

    // Eigendecompositions do not depend on the trial's HKS settings, so they
    // are computed once and shared by every trial.
    std::vector<SpectralDecomposition> decomps(ds.size());
    parallel_for(needed.size(), [&](std::size_t i) {
        std::size_t g = needed[i];
        decomps[g] = eig_sym(laplacian(ds.examples[g].graph));
    });

    Rng sample_rng(mix_seed(spec.seed, 0));
    std::vector<HyperParams> configs;
    configs.reserve(static_cast<std::size_t>(spec.space.num_trials));
    for (int t = 0; t < spec.space.num_trials; ++t)
        configs.push_back(sample_config(spec.space, sample_rng));

    SearchResult result;
    result.metric_name = metric_label(ds, spec.settings.main_task, "val_");
    result.main_task = spec.settings.main_task;
    bool regression_main =
        ds.task(spec.settings.main_task).kind == nn::TaskKind::kRegression;

    auto build_samples = [&](const std::vector<std::size_t>& rows, const HksConfig& hks_cfg,
                             nn::SampleSet& out) {
        out.assign(rows.size(), nn::Sample{});
        std::vector<double> times = hks_cfg.times();
        parallel_for(rows.size(), [&](std::size_t i) {
            std::size_t g = rows[i];
            HksMatrix h = hks_at_times(decomps[g], times);
            HksHistogram hist = hks_histogram(h, hks_cfg);
            nn::Tensor t({1, hks_cfg.num_bins, hks_cfg.num_steps});
            t.v = std::move(hist.values);
            out[i].input = std::move(t);
            out[i].labels = ds.examples[g].labels;
        });
    };

    for (int t = 0; t < spec.space.num_trials; ++t) {
        const HyperParams& hp = configs[static_cast<std::size_t>(t)];
        std::uint64_t run_seed = mix_seed(spec.seed, static_cast<std::uint64_t>(t) + 1);
        RunRecord record;
        record.seed = run_seed;
        Timer timer;
        try {
            HksConfig hks_cfg = hp.hks();
            hks_cfg.validate();
            nn::SampleSet train_set, val_set;
            build_samples(idx.train, hks_cfg, train_set);
            build_samples(idx.val, hks_cfg, val_set);
            std::vector<std::string> aux =
                hp.aux_task.empty() ? std::vector<std::string>{} : std::vector{hp.aux_task};
            nn::NetConfig cfg = build_net_config(
                hks_cfg.num_bins, hks_cfg.num_steps, hp.kernel, spec.settings,
                make_tasks(ds, spec.settings.main_task, aux, spec.settings.main_weight,
                           hp.aux_weight),
                run_seed);
            record = run_trial(cfg, spec.settings.schedule, train_set, val_set, nullptr, false,
                               run_seed);
        } catch (const std::exception& e) {
            record.error = e.what();
            record.wall_seconds = timer.seconds();
        }
        record.config["hyperparams"] = hp.to_json();
        result.trials.push_back(std::move(record));
    }

    bool found = false;
    for (std::size_t t = 0; t < result.trials.size(); ++t) {
        const RunRecord& r = result.trials[t];
        if (r.failed()) continue;
        auto it = r.val_metrics.find(spec.settings.main_task);
        if (it == r.val_metrics.end()) continue;
        if (!found) {
            result.best_index = t;
            found = true;
            continue;
        }
        double best = result.trials[result.best_index].val_metrics.at(spec.settings.main_task);
        bool better = regression_main ? it->second < best : it->second > best;
        if (better) result.best_index = t;
    }
    if (!found) {
        std::string last = result.trials.back().error;
        throw NumericError("every search trial failed; last error: " + last);
    }
    return result;
}

LearningCurveResult learning_curve(const data::LabeledDataset& ds,
                                   const LearningCurveSpec& spec) {
    if (!ds.feature_config)
        throw std::invalid_argument("learning curve needs a featurized dataset");
    if (spec.sizes.empty()) throw std::invalid_argument("train-size ladder must be non-empty");
    for (std::size_t i = 1; i < spec.sizes.size(); ++i)
        if (spec.sizes[i] <= spec.sizes[i - 1])
            throw std::invalid_argument("train-size ladder must be strictly increasing");
    if (spec.sizes.front() < 1) throw std::invalid_argument("train sizes must be >= 1");
    if (spec.num_seeds < 1) throw std::invalid_argument("need at least one seed");
    if (!spec.single_task && !spec.multi_task)
        throw std::invalid_argument("at least one variant must be enabled");
    ds.task(spec.main_task);
    auto n_train =
        static_cast<std::size_t>(0.8 * static_cast<double>(ds.size()));
    if (spec.sizes.back() > n_train)
        throw std::invalid_argument("largest ladder size exceeds the train split size");

    struct Cell {
        bool multi = false;
        std::size_t train_size = 0;
        std::uint64_t seed = 0;
    };
    std::vector<Cell> plan;
    for (int variant = 0; variant < 2; ++variant) {
        if (variant == 0 && !spec.single_task) continue;
        if (variant == 1 && !spec.multi_task) continue;
        for (std::size_t s : spec.sizes)
            for (int si = 0; si < spec.num_seeds; ++si)
                plan.push_back(Cell{variant == 1, s,
                                    spec.base_seed + static_cast<std::uint64_t>(si)});
    }

    const int bins = ds.feature_config->num_bins;
    const int steps = ds.feature_config->num_steps;
    TrialSettings settings;
    settings.main_task = spec.main_task;
    settings.main_weight = spec.main_weight;
    settings.filters = spec.filters;
    settings.fc_shared_units = spec.fc_shared_units;
    settings.head_units = spec.head_units;
    settings.schedule = spec.schedule;

    std::vector<CellResult> cells(plan.size());
    parallel_for(plan.size(), [&](std::size_t c) {
        const Cell& cell = plan[c];
        CellResult& out = cells[c];
        out.variant = cell.multi ? "multi" : "single";
        out.main_task = spec.main_task;
        out.train_size = cell.train_size;
        out.seed = cell.seed;
        try {
            data::SplitSpec split_spec;
            split_spec.shuffle_seed = cell.seed;
            split_spec.main_task_budget = cell.train_size;
            split_spec.main_task = spec.main_task;
            data::DatasetSplit parts = data::split(ds, split_spec);
            nn::SampleSet train_set = data::to_samples(parts.train);
            nn::SampleSet val_set = data::to_samples(parts.val);
            nn::SampleSet test_set = data::to_samples(parts.test);
            std::vector<std::string> aux =
                cell.multi ? spec.aux_tasks : std::vector<std::string>{};
            nn::NetConfig cfg = build_net_config(
                bins, steps, spec.kernel, settings,
                make_tasks(ds, spec.main_task, aux, spec.main_weight, spec.aux_weight),
                cell.seed);
            out.record = run_trial(cfg, spec.schedule, train_set, val_set, &test_set, true,
                                   cell.seed);
        } catch (const std::exception& e) {
            out.record.error = e.what();
            out.record.seed = cell.seed;
        }
    });

    std::sort(cells.begin(), cells.end(), [](const CellResult& a, const CellResult& b) {
        if (a.variant != b.variant) return a.variant < b.variant;
        if (a.train_size != b.train_size) return a.train_size < b.train_size;
        return a.seed < b.seed;
    });

    LearningCurveResult result;
    result.metric_name = metric_label(ds, spec.main_task, "test_");
    result.cells = std::move(cells);

    for (std::size_t i = 0; i < result.cells.size();) {
        std::size_t j = i;
        std::vector<double> values;
        while (j < result.cells.size() && result.cells[j].variant == result.cells[i].variant &&
               result.cells[j].train_size == result.cells[i].train_size) {
            const CellResult& cell = result.cells[j];
            if (!cell.record.failed()) {
                auto it = cell.record.test_metrics.find(spec.main_task);
                if (it != cell.record.test_metrics.end()) values.push_back(it->second);
            }
            ++j;
        }
        auto [mean, se] = mean_stderr(values);
        result.aggregates.push_back(Aggregate{result.cells[i].variant,
                                              result.cells[i].train_size, mean, se,
                                              values.size()});
        i = j;
    }
    return result;
}

CvResult cross_validate(const data::LabeledDataset& ds, const CvSpec& spec) {
    if (spec.folds < 2) throw std::invalid_argument("cross-validation needs k >= 2");
    ds.task(spec.main_task);
    for (const std::string& aux : spec.aux_tasks) ds.task(aux);

    std::vector<std::vector<std::size_t>> folds =
        data::kfold_indices(ds.size(), spec.folds, spec.seed);
    auto train_indices_for = [&](std::size_t f) {
        std::vector<std::size_t> idx;
        idx.reserve(ds.size() - folds[f].size());
        for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g == f) continue;
            idx.insert(idx.end(), folds[g].begin(), folds[g].end());
        }
        return idx;
    };

    HyperParams chosen = spec.fixed;
    if (spec.trials > 0) {
        data::LabeledDataset fold0 = data::subset(ds, train_indices_for(0));
        SearchSpec search_spec;
        search_spec.space = spec.space;
        search_spec.space.num_trials = spec.trials;
        if (search_spec.space.aux_choices.empty()) search_spec.space.aux_choices = spec.aux_tasks;
        search_spec.settings = spec.settings;
        search_spec.settings.main_task = spec.main_task;
        search_spec.seed = spec.seed;
        SearchResult search = random_search(fold0, search_spec);
        const nlohmann::json& hp = search.trials[search.best_index].config.at("hyperparams");
        chosen.num_steps = hp.at("num_steps").get<int>();
        chosen.num_bins = hp.at("num_bins").get<int>();
        chosen.t_min = hp.at("t_min").get<double>();
        chosen.t_max = hp.at("t_max").get<double>();
        chosen.kernel = hp.at("kernel").get<int>();
        chosen.aux_task = hp.value("aux_task", std::string{});
        chosen.aux_weight = hp.at("aux_weight").get<double>();
    }

    std::vector<std::string> aux_tasks =
        chosen.aux_task.empty() ? spec.aux_tasks : std::vector{chosen.aux_task};
    double aux_weight = chosen.aux_task.empty() ? spec.aux_weight : chosen.aux_weight;

    data::LabeledDataset featurized;
    const data::LabeledDataset* source = &ds;
    HksConfig hks_cfg = chosen.hks();
    hks_cfg.validate();
    bool features_match = ds.feature_config && ds.feature_config->num_steps == hks_cfg.num_steps &&
                          ds.feature_config->num_bins == hks_cfg.num_bins &&
                          ds.feature_config->t_min == hks_cfg.t_min &&
                          ds.feature_config->t_max == hks_cfg.t_max;
    if (!features_match) {
        featurized = ds;
        data::featurize_dataset(featurized, hks_cfg);
        source = &featurized;
    }

    CvResult result;
    result.metric_name = metric_label(ds, spec.main_task, "test_");
    result.main_task = spec.main_task;
    result.chosen_config = chosen.to_json();
    result.chosen_config["folds"] = spec.folds;
    result.chosen_config["searched_trials"] = spec.trials;

    std::vector<double> fold_values;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> train_idx = train_indices_for(f);
        std::size_t n_val = std::max<std::size_t>(1, train_idx.size() / 9);
        if (n_val >= train_idx.size())
            throw std::invalid_argument("fold too small to carve a validation set");
        std::vector<std::size_t> val_idx(train_idx.end() - static_cast<std::ptrdiff_t>(n_val),
                                         train_idx.end());
        train_idx.resize(train_idx.size() - n_val);

        nn::SampleSet train_set = data::to_samples(data::subset(*source, train_idx));
        nn::SampleSet val_set = data::to_samples(data::subset(*source, val_idx));
        nn::SampleSet test_set = data::to_samples(data::subset(*source, folds[f]));

        std::uint64_t run_seed = mix_seed(spec.seed, 100 + static_cast<std::uint64_t>(f));
        nn::NetConfig cfg = build_net_config(
            hks_cfg.num_bins, hks_cfg.num_steps, chosen.kernel, spec.settings,
            make_tasks(ds, spec.main_task, aux_tasks, spec.settings.main_weight, aux_weight),
            run_seed);
        RunRecord record = run_trial(cfg, spec.settings.schedule, train_set, val_set, &test_set,
                                     false, run_seed);
        if (!record.failed()) {
            auto it = record.test_metrics.find(spec.main_task);
            if (it != record.test_metrics.end()) fold_values.push_back(it->second);
        }
        result.fold_records.push_back(std::move(record));
    }
    auto [mean, se] = mean_stderr(fold_values);
    result.mean = mean;
    result.stderr_mean = se;
    return result;
}

std::string learning_curve_csv(const LearningCurveResult& result) {
    std::string out = "variant,main_task,train_size,seed,metric_name,metric_value,best_epoch,"
                      "wall_seconds\n";
    for (const CellResult& cell : result.cells) {
        if (cell.record.failed()) continue;
        auto it = cell.record.test_metrics.find(cell.main_task);
        if (it == cell.record.test_metrics.end()) continue;
        out += cell.variant + ',' + csv_field(cell.main_task) + ',' +
               std::to_string(cell.train_size) + ',' + std::to_string(cell.seed) + ',' +
               result.metric_name + ',' + format_double(it->second) + ',' +
               std::to_string(cell.record.best_epoch) + ",0\n";
    }
    for (const Aggregate& agg : result.aggregates) {
        out += agg.variant + ',' + csv_field(result.cells.front().main_task) + ',' +
               std::to_string(agg.train_size) + ",," + result.metric_name + "_mean," +
               format_double(agg.mean) + ",,0\n";
        out += agg.variant + ',' + csv_field(result.cells.front().main_task) + ',' +
               std::to_string(agg.train_size) + ",," + result.metric_name + "_stderr," +
               format_double(agg.stderr_mean) + ",,0\n";
    }
    return out;
}

nlohmann::json learning_curve_json(const LearningCurveResult& result) {
    nlohmann::json cells = nlohmann::json::array();
    for (const CellResult& cell : result.cells) {
        nlohmann::json j = record_json(cell.record);
        j["variant"] = cell.variant;
        j["main_task"] = cell.main_task;
        j["train_size"] = cell.train_size;
        cells.push_back(std::move(j));
    }
    nlohmann::json aggs = nlohmann::json::array();
    for (const Aggregate& a : result.aggregates)
        aggs.push_back({{"variant", a.variant},
                        {"train_size", a.train_size},
                        {"mean", a.mean},
                        {"stderr", a.stderr_mean},
                        {"count", a.count}});
    return nlohmann::json{
        {"metric_name", result.metric_name}, {"cells", std::move(cells)},
        {"aggregates", std::move(aggs)}};
}

std::string search_csv(const SearchResult& result) {
    std::string out =
        "trial,num_steps,num_bins,t_min,t_max,kernel,aux_task,aux_weight,metric_name,"
        "metric_value,best_epoch,is_best,error\n";
    for (std::size_t t = 0; t < result.trials.size(); ++t) {
        const RunRecord& r = result.trials[t];
        const nlohmann::json& hp = r.config.at("hyperparams");
        out += std::to_string(t) + ',';
        out += std::to_string(hp.at("num_steps").get<int>()) + ',';
        out += std::to_string(hp.at("num_bins").get<int>()) + ',';
        out += format_double(hp.at("t_min").get<double>()) + ',';
        out += format_double(hp.at("t_max").get<double>()) + ',';
        out += std::to_string(hp.at("kernel").get<int>()) + ',';
        out += csv_field(hp.value("aux_task", std::string{})) + ',';
        out += format_double(hp.at("aux_weight").get<double>()) + ',';
        out += result.metric_name + ',';
        auto it = r.val_metrics.find(result.main_task);
        if (!r.failed() && it != r.val_metrics.end()) out += format_double(it->second);
        out += ',';
        out += std::to_string(r.best_epoch) + ',';
        out += (t == result.best_index ? "1" : "0");
        out += ',';
        out += csv_field(r.error) + '\n';
    }
    return out;
}

nlohmann::json search_json(const SearchResult& result) {
    nlohmann::json trials = nlohmann::json::array();
    for (const RunRecord& r : result.trials) trials.push_back(record_json(r));
    return nlohmann::json{{"metric_name", result.metric_name},
                          {"best_index", result.best_index},
                          {"trials", std::move(trials)}};
}

std::string cv_csv(const CvResult& result) {
    std::string out = "fold,metric_name,metric_value,best_epoch,wall_seconds\n";
    for (std::size_t f = 0; f < result.fold_records.size(); ++f) {
        const RunRecord& r = result.fold_records[f];
        out += std::to_string(f) + ',' + result.metric_name + ',';
        auto it = r.test_metrics.find(result.main_task);
        if (!r.failed() && it != r.test_metrics.end()) out += format_double(it->second);
        out += ',' + std::to_string(r.best_epoch) + ",0\n";
    }
    out += "mean," + result.metric_name + ',' + format_double(result.mean) + ",,0\n";
    out += "stderr," + result.metric_name + ',' + format_double(result.stderr_mean) + ",,0\n";
    return out;
}

nlohmann::json cv_json(const CvResult& result) {
    nlohmann::json folds = nlohmann::json::array();
    for (const RunRecord& r : result.fold_records) folds.push_back(record_json(r));
    return nlohmann::json{{"metric_name", result.metric_name},
                          {"chosen_config", result.chosen_config},
                          {"folds", std::move(folds)},
                          {"mean", result.mean},
                          {"stderr", result.stderr_mean}};
}

} // namespace gd::experiments
