#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphdistill/checkpoint.hpp"
#include "graphdistill/dataset.hpp"
#include "graphdistill/errors.hpp"
#include "graphdistill/experiments.hpp"
#include "graphdistill/nn.hpp"
#include "graphdistill/parallel.hpp"
#include "graphdistill/spectral.hpp"

namespace gd::experiments {

namespace {

void log_line(const std::string& msg) {
    std::fprintf(stderr, "[graphdistill] %s\n", msg.c_str());
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open output file for writing: " + path);
    out << content;
    if (!out.good()) throw DataError("failed writing output file: " + path);
}

void write_json(const std::string& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

std::string json_sibling(const std::string& path) {
    auto slash = path.find_last_of('/');
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return path + ".json";
    return path.substr(0, dot) + ".json";
}

// Uses stored features when they match the wanted config; otherwise recomputes.
void ensure_features(data::LabeledDataset& ds, const HksConfig& want) {
    if (ds.feature_config && ds.feature_config->num_steps == want.num_steps &&
        ds.feature_config->num_bins == want.num_bins && ds.feature_config->t_min == want.t_min &&
        ds.feature_config->t_max == want.t_max)
        return;
    log_line("featurizing " + std::to_string(ds.size()) + " graphs (bins=" +
             std::to_string(want.num_bins) + ", steps=" + std::to_string(want.num_steps) + ")");
    data::featurize_dataset(ds, want);
}

std::string default_main_task(const data::LabeledDataset& ds) {
    if (ds.has_task("class")) return "class";
    if (ds.has_task("diameter")) return "diameter";
    if (ds.tasks.empty()) throw DataError("dataset has no tasks");
    return ds.tasks.front().name;
}

std::vector<std::string> default_aux_tasks(const data::LabeledDataset& ds,
                                           const std::string& main_task) {
    std::vector<std::string> aux;
    for (const data::TaskInfo& t : ds.tasks)
        if (t.kind == nn::TaskKind::kRegression && t.name != main_task) aux.push_back(t.name);
    return aux;
}

struct ScheduleFlags {
    int batch_size = 32;
    int max_epochs = 200;
    int patience = 10;

    void attach(CLI::App* cmd) {
        cmd->add_option("--batch-size", batch_size, "Minibatch size")->check(CLI::PositiveNumber);
        cmd->add_option("--max-epochs", max_epochs, "Epoch cap")->check(CLI::PositiveNumber);
        cmd->add_option("--patience", patience, "Early-stopping patience in epochs")
            ->check(CLI::NonNegativeNumber);
    }
    nn::TrainSchedule schedule() const { return {batch_size, max_epochs, patience}; }
};

struct GenerateArgs {
    std::string model = "er";
    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::string out;
};

struct ParseTuArgs {
    std::string dir, name, out;
};

struct HksArgs {
    std::string in, out;
    int bins = 16, steps = 16;
    double tmin = 0.1, tmax = 50.0;
};

struct TrainArgs {
    std::string data, main_task, config_path, out_model, out_metrics;
    std::vector<std::string> aux;
    std::int64_t budget = -1;
    std::uint64_t seed = 0;
};

struct EvaluateArgs {
    std::string model, data, out;
};

struct CurveArgs {
    std::string data, main_task, out;
    std::vector<std::string> aux;
    std::vector<std::size_t> sizes{500, 1000, 2000, 4000};
    int seeds = 3;
    std::uint64_t seed = 0;
    double aux_weight = 0.5;
    int kernel = 3, filters = 8;
    int bins = 16, steps = 16;
    double tmin = 0.1, tmax = 50.0;
    bool single_only = false, multi_only = false;
    ScheduleFlags schedule;
};

struct SearchArgs {
    std::string data, out, main_task;
    std::vector<std::string> aux;
    std::vector<double> alphas{0.5};
    int trials = 20;
    std::uint64_t seed = 0;
    ScheduleFlags schedule;
};

struct CvArgs {
    std::string data, out, main_task;
    std::vector<std::string> aux;
    int folds = 10;
    int trials = 0;
    std::uint64_t seed = 0;
    double aux_weight = 0.5;
    int kernel = 3, filters = 8;
    int bins = 16, steps = 16;
    double tmin = 0.1, tmax = 50.0;
    ScheduleFlags schedule;
};

int cmd_generate(const GenerateArgs& args) {
    data::SyntheticSpec spec;
    spec.family = data::family_from_name(args.model);
    spec.count = args.count;
    spec.seed = args.seed;
    data::LabeledDataset ds = data::generate_synthetic(spec);
    data::save_dataset(ds, args.out);
    log_line("generated " + std::to_string(ds.size()) + " " + args.model + " graphs -> " +
             args.out);
    return 0;
}

int cmd_parse_tu(const ParseTuArgs& args) {
    data::LabeledDataset ds = data::parse_tu(args.dir, args.name);
    data::save_dataset(ds, args.out);
    log_line("parsed " + std::to_string(ds.size()) + " graphs from " + args.name + " -> " +
             args.out);
    return 0;
}

int cmd_hks(const HksArgs& args) {
    data::LabeledDataset ds = data::load_dataset(args.in);
    HksConfig cfg{args.steps, args.tmin, args.tmax, args.bins};
    cfg.validate();
    data::featurize_dataset(ds, cfg);
    data::save_dataset(ds, args.out);
    log_line("featurized " + std::to_string(ds.size()) + " graphs -> " + args.out);
    return 0;
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open config file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid JSON in " + path + ": " + e.what());
    }
}

int cmd_train(const TrainArgs& args) {
    nlohmann::json config = nlohmann::json::object();
    if (!args.config_path.empty()) config = load_json_file(args.config_path);

    data::LabeledDataset ds = data::load_dataset(args.data);
    ds.task(args.main_task);
    for (const std::string& aux : args.aux) ds.task(aux);

    HksConfig hks_cfg{config.value("steps", 16), config.value("tmin", 0.1),
                      config.value("tmax", 50.0), config.value("bins", 16)};
    hks_cfg.validate();
    ensure_features(ds, hks_cfg);
    hks_cfg = *ds.feature_config;

    data::SplitSpec split_spec;
    split_spec.shuffle_seed = args.seed;
    if (args.budget >= 0) {
        split_spec.main_task_budget = static_cast<std::size_t>(args.budget);
        split_spec.main_task = args.main_task;
    }
    data::DatasetSplit parts = data::split(ds, split_spec);
    nn::SampleSet train_set = data::to_samples(parts.train);
    nn::SampleSet val_set = data::to_samples(parts.val);
    nn::SampleSet test_set = data::to_samples(parts.test);

    TrialSettings settings;
    settings.main_task = args.main_task;
    settings.main_weight = config.value("main_weight", 1.0);
    settings.filters = config.value("filters", 8);
    settings.fc_shared_units = config.value("fc_shared_units", 60);
    settings.head_units = config.value("head_units", 40);
    settings.schedule = nn::TrainSchedule{config.value("batch_size", 32),
                                          config.value("max_epochs", 200),
                                          config.value("patience", 10)};
    double aux_weight = config.value("aux_weight", 0.5);

    nn::NetConfig cfg = build_net_config(
        hks_cfg.num_bins, hks_cfg.num_steps, config.value("kernel", 3), settings,
        make_tasks(ds, args.main_task, args.aux, settings.main_weight, aux_weight), args.seed);

    nn::MultiTaskNet net(cfg);
    auto started = std::chrono::steady_clock::now();
    nn::TrainHistory history = nn::train(net, train_set, val_set, settings.schedule);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    nlohmann::json extras;
    extras["hks"] = {{"num_steps", hks_cfg.num_steps},
                     {"t_min", hks_cfg.t_min},
                     {"t_max", hks_cfg.t_max},
                     {"num_bins", hks_cfg.num_bins}};
    extras["main_task"] = args.main_task;
    extras["aux_tasks"] = args.aux;
    nn::save_model(net, args.out_model, extras);

    nlohmann::json metrics;
    metrics["train"] = nn::evaluate(net, train_set);
    metrics["val"] = nn::evaluate(net, val_set);
    metrics["test"] = nn::evaluate(net, test_set);
    metrics["best_epoch"] = history.best_epoch;
    metrics["epochs_run"] = history.epochs_run;
    metrics["best_val_loss"] = history.best_val_loss;
    metrics["train_loss"] = history.train_loss;
    metrics["val_loss"] = history.val_loss;
    metrics["wall_seconds"] = wall;
    write_json(args.out_metrics, metrics);
    log_line("trained " + std::to_string(history.epochs_run) + " epochs (best " +
             std::to_string(history.best_epoch) + ") -> " + args.out_model);
    return 0;
}

int cmd_evaluate(const EvaluateArgs& args) {
    nn::LoadedModel loaded = nn::load_model(args.model);
    data::LabeledDataset ds = data::load_dataset(args.data);
    if (!loaded.extras.contains("hks"))
        throw DataError("model file lacks the hks feature settings: " + args.model);
    const nlohmann::json& h = loaded.extras.at("hks");
    HksConfig hks_cfg{h.at("num_steps").get<int>(), h.at("t_min").get<double>(),
                      h.at("t_max").get<double>(), h.at("num_bins").get<int>()};
    ensure_features(ds, hks_cfg);
    nn::SampleSet samples = data::to_samples(ds);
    std::map<std::string, double> metrics = nn::evaluate(loaded.net, samples);
    nlohmann::json out;
    out["metrics"] = metrics;
    out["examples"] = ds.size();
    write_json(args.out, out);
    for (const auto& [name, value] : metrics)
        log_line("  " + name + ": " + format_double(value));
    return 0;
}

int cmd_learning_curve(const CurveArgs& args) {
    if (args.single_only && args.multi_only)
        throw std::invalid_argument("--single-only and --multi-only are mutually exclusive");
    data::LabeledDataset ds = data::load_dataset(args.data);
    HksConfig hks_cfg{args.steps, args.tmin, args.tmax, args.bins};
    hks_cfg.validate();
    if (ds.feature_config) hks_cfg = *ds.feature_config;
    ensure_features(ds, hks_cfg);

    LearningCurveSpec spec;
    spec.main_task = args.main_task.empty() ? default_main_task(ds) : args.main_task;
    spec.aux_tasks = args.aux.empty() ? default_aux_tasks(ds, spec.main_task) : args.aux;
    spec.sizes = args.sizes;
    spec.num_seeds = args.seeds;
    spec.base_seed = args.seed;
    spec.aux_weight = args.aux_weight;
    spec.kernel = args.kernel;
    spec.filters = args.filters;
    spec.schedule = args.schedule.schedule();
    spec.single_task = !args.multi_only;
    spec.multi_task = !args.single_only;

    LearningCurveResult result = learning_curve(ds, spec);
    write_text(args.out, learning_curve_csv(result));
    write_json(json_sibling(args.out), learning_curve_json(result));
    for (const Aggregate& a : result.aggregates)
        log_line(a.variant + " s=" + std::to_string(a.train_size) + " " + result.metric_name +
                 " mean=" + format_double(a.mean) + " stderr=" + format_double(a.stderr_mean));
    log_line("wrote " + args.out + " and " + json_sibling(args.out));
    return 0;
}

int cmd_search(const SearchArgs& args) {
    data::LabeledDataset ds = data::load_dataset(args.data);
    SearchSpec spec;
    spec.settings.main_task = args.main_task.empty() ? default_main_task(ds) : args.main_task;
    spec.space.aux_choices =
        args.aux.empty() ? default_aux_tasks(ds, spec.settings.main_task) : args.aux;
    spec.space.aux_weight_choices = args.alphas;
    spec.space.num_trials = args.trials;
    spec.settings.schedule = args.schedule.schedule();
    spec.seed = args.seed;
    SearchResult result = random_search(ds, spec);
    write_text(args.out, search_csv(result));
    write_json(json_sibling(args.out), search_json(result));
    const RunRecord& best = result.trials[result.best_index];
    log_line("best trial " + std::to_string(result.best_index) + " (" + result.metric_name +
             " " + format_double(best.val_metrics.at(spec.settings.main_task)) + ")");
    return 0;
}

int cmd_cv(const CvArgs& args) {
    data::LabeledDataset ds = data::load_dataset(args.data);
    CvSpec spec;
    spec.folds = args.folds;
    spec.seed = args.seed;
    spec.main_task = args.main_task.empty() ? default_main_task(ds) : args.main_task;
    spec.aux_tasks = args.aux.empty() ? default_aux_tasks(ds, spec.main_task) : args.aux;
    spec.aux_weight = args.aux_weight;
    spec.trials = args.trials;
    spec.fixed = HyperParams{args.steps, args.bins, args.tmin, args.tmax, args.kernel,
                             std::string{}, args.aux_weight};
    spec.settings.main_task = spec.main_task;
    spec.settings.filters = args.filters;
    spec.settings.schedule = args.schedule.schedule();
    CvResult result = cross_validate(ds, spec);
    write_text(args.out, cv_csv(result));
    write_json(json_sibling(args.out), cv_json(result));
    log_line("cv " + result.metric_name + " mean=" + format_double(result.mean) +
             " stderr=" + format_double(result.stderr_mean));
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Multi-task knowledge distillation on graph-level prediction"};
    app.require_subcommand(1);

    GenerateArgs gen;
    CLI::App* generate = app.add_subcommand("generate", "Generate a synthetic labelled corpus");
    generate->add_option("--model", gen.model, "Graph family: er or ba")
        ->check(CLI::IsMember({"er", "ba"}));
    generate->add_option("--count", gen.count, "Number of graphs")
        ->required()
        ->check(CLI::PositiveNumber);
    generate->add_option("--seed", gen.seed, "Base RNG seed");
    generate->add_option("--out", gen.out, "Output dataset path (JSONL)")->required();

    ParseTuArgs tu;
    CLI::App* parse_tu = app.add_subcommand("parse-tu", "Parse a TU-format benchmark");
    parse_tu->add_option("--dir", tu.dir, "Directory holding the benchmark files")->required();
    parse_tu->add_option("--name", tu.name, "Dataset name prefix, e.g. NCI1")->required();
    parse_tu->add_option("--out", tu.out, "Output dataset path (JSONL)")->required();

    HksArgs hks;
    CLI::App* hks_cmd = app.add_subcommand("hks", "Attach HKS histogram features to a dataset");
    hks_cmd->add_option("--in", hks.in, "Input dataset path")->required();
    hks_cmd->add_option("--bins", hks.bins, "Histogram bins B")->check(CLI::PositiveNumber);
    hks_cmd->add_option("--steps", hks.steps, "Diffusion time steps T")
        ->check(CLI::PositiveNumber);
    hks_cmd->add_option("--tmin", hks.tmin, "Smallest diffusion time");
    hks_cmd->add_option("--tmax", hks.tmax, "Largest diffusion time");
    hks_cmd->add_option("--out", hks.out, "Output dataset path")->required();

    TrainArgs tr;
    CLI::App* train_cmd = app.add_subcommand("train", "Train one model on a dataset split");
    train_cmd->add_option("--data", tr.data, "Dataset path")->required();
    train_cmd->add_option("--main", tr.main_task, "Main task name")->required();
    train_cmd->add_option("--aux", tr.aux, "Auxiliary task names")->delimiter(',');
    train_cmd->add_option("--budget", tr.budget, "Main-task label budget on the train split");
    train_cmd->add_option("--seed", tr.seed, "Run seed");
    train_cmd->add_option("--config", tr.config_path, "JSON config path");
    train_cmd->add_option("--out-model", tr.out_model, "Model checkpoint output path")
        ->required();
    train_cmd->add_option("--out-metrics", tr.out_metrics, "Metrics JSON output path")
        ->required();

    EvaluateArgs ev;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
    eval_cmd->add_option("--model", ev.model, "Model checkpoint path")->required();
    eval_cmd->add_option("--data", ev.data, "Dataset path")->required();
    eval_cmd->add_option("--out", ev.out, "Metrics JSON output path")->required();

    CurveArgs lc;
    CLI::App* curve = app.add_subcommand("learning-curve",
                                         "Single- vs multi-task learning curves");
    curve->add_option("--data", lc.data, "Dataset path")->required();
    curve->add_option("--main", lc.main_task, "Main task name");
    curve->add_option("--aux", lc.aux, "Auxiliary task names")->delimiter(',');
    curve->add_option("--sizes", lc.sizes, "Train-size ladder")->delimiter(',');
    curve->add_option("--seeds", lc.seeds, "Seeds per cell")->check(CLI::PositiveNumber);
    curve->add_option("--seed", lc.seed, "Base seed");
    curve->add_option("--aux-weight", lc.aux_weight, "Auxiliary loss weight");
    curve->add_option("--kernel", lc.kernel, "Conv kernel size")
        ->check(CLI::IsMember({3, 5, 7}));
    curve->add_option("--filters", lc.filters, "Conv filters")->check(CLI::PositiveNumber);
    curve->add_option("--bins", lc.bins, "Histogram bins when featurizing");
    curve->add_option("--steps", lc.steps, "Time steps when featurizing");
    curve->add_option("--tmin", lc.tmin, "Smallest diffusion time when featurizing");
    curve->add_option("--tmax", lc.tmax, "Largest diffusion time when featurizing");
    curve->add_flag("--single-only", lc.single_only, "Run only the single-task variant");
    curve->add_flag("--multi-only", lc.multi_only, "Run only the multi-task variant");
    curve->add_option("--out", lc.out, "CSV output path")->required();
    lc.schedule.attach(curve);

    SearchArgs se;
    CLI::App* search_cmd = app.add_subcommand("search", "Random hyperparameter search");
    search_cmd->add_option("--data", se.data, "Dataset path")->required();
    search_cmd->add_option("--trials", se.trials, "Number of sampled configurations")
        ->check(CLI::PositiveNumber);
    search_cmd->add_option("--seed", se.seed, "Search seed");
    search_cmd->add_option("--main", se.main_task, "Main task name");
    search_cmd->add_option("--aux", se.aux, "Auxiliary task choices")->delimiter(',');
    search_cmd->add_option("--alphas", se.alphas, "Auxiliary weight choices")->delimiter(',');
    search_cmd->add_option("--out", se.out, "CSV output path")->required();
    se.schedule.attach(search_cmd);

    CvArgs cv;
    CLI::App* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation");
    cv_cmd->add_option("--data", cv.data, "Dataset path")->required();
    cv_cmd->add_option("--folds", cv.folds, "Fold count")->check(CLI::Range(2, 1000));
    cv_cmd->add_option("--seed", cv.seed, "Fold shuffle and run seed");
    cv_cmd->add_option("--main", cv.main_task, "Main task name");
    cv_cmd->add_option("--aux", cv.aux, "Auxiliary task names")->delimiter(',');
    cv_cmd->add_option("--aux-weight", cv.aux_weight, "Auxiliary loss weight");
    cv_cmd->add_option("--trials", cv.trials, "Random-search trials on fold 1 (0 = none)")
        ->check(CLI::NonNegativeNumber);
    cv_cmd->add_option("--kernel", cv.kernel, "Conv kernel size")
        ->check(CLI::IsMember({3, 5, 7}));
    cv_cmd->add_option("--filters", cv.filters, "Conv filters")->check(CLI::PositiveNumber);
    cv_cmd->add_option("--bins", cv.bins, "Histogram bins");
    cv_cmd->add_option("--steps", cv.steps, "Time steps");
    cv_cmd->add_option("--tmin", cv.tmin, "Smallest diffusion time");
    cv_cmd->add_option("--tmax", cv.tmax, "Largest diffusion time");
    cv_cmd->add_option("--out", cv.out, "CSV output path")->required();
    cv.schedule.attach(cv_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\nRun with --help for usage.\n", e.what());
        return 1;
    }

    try {
        if (generate->parsed()) return cmd_generate(gen);
        if (parse_tu->parsed()) return cmd_parse_tu(tu);
        if (hks_cmd->parsed()) return cmd_hks(hks);
        if (train_cmd->parsed()) return cmd_train(tr);
        if (eval_cmd->parsed()) return cmd_evaluate(ev);
        if (curve->parsed()) return cmd_learning_curve(lc);
        if (search_cmd->parsed()) return cmd_search(se);
        if (cv_cmd->parsed()) return cmd_cv(cv);
        std::fprintf(stderr, "no subcommand given\n");
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid arguments: %s\n", e.what());
        return 1;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "invalid arguments: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

} // namespace gd::experiments
