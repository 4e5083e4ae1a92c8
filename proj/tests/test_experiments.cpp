#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include "graphdistill/dataset.hpp"
#include "graphdistill/errors.hpp"
#include "graphdistill/experiments.hpp"

using namespace gd;
using namespace gd::experiments;

namespace {

data::LabeledDataset small_corpus(std::size_t count, std::uint64_t seed = 5,
                                  bool featurized = true) {
    data::SyntheticSpec spec;
    spec.family = data::GraphFamily::kEr;
    spec.count = count;
    spec.seed = seed;
    spec.er.n_mean = 9.0;
    spec.er.n_std = 1.5;
    data::LabeledDataset ds = data::generate_synthetic(spec);
    if (featurized) data::featurize_dataset(ds, HksConfig{8, 0.1, 20.0, 8});
    return ds;
}

SearchSpace tiny_space() {
    SearchSpace space;
    space.steps_choices = {8};
    space.bins_choices = {8};
    space.kernel_choices = {3};
    return space;
}

nn::TrainSchedule tiny_schedule() { return nn::TrainSchedule{16, 2, 2}; }

} // namespace

TEST_CASE("format_double emits shortest round trip forms") {
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(-2.25) == "-2.25");
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        double x = rng.normal(0.0, 100.0);
        CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
    }
}

TEST_CASE("sample_config draws stay inside the space") {
    SearchSpace space;
    space.aux_choices = {"density"};
    space.aux_weight_choices = {0.25, 0.5};
    Rng rng(9);
    std::set<int> seen_kernels;
    for (int i = 0; i < 1000; ++i) {
        HyperParams hp = sample_config(space, rng);
        CHECK((hp.num_steps == 16 || hp.num_steps == 32 || hp.num_steps == 64 ||
               hp.num_steps == 128));
        CHECK((hp.num_bins == 16 || hp.num_bins == 32 || hp.num_bins == 64 ||
               hp.num_bins == 128));
        CHECK(hp.t_min >= space.t_min_lo);
        CHECK(hp.t_min <= space.t_min_hi);
        CHECK(hp.t_max >= space.t_max_lo);
        CHECK(hp.t_max <= space.t_max_hi);
        CHECK(hp.t_min < hp.t_max);
        CHECK((hp.kernel == 3 || hp.kernel == 5 || hp.kernel == 7));
        seen_kernels.insert(hp.kernel);
        CHECK(nn::shapes_feasible(hp.num_bins, hp.num_steps, hp.kernel));
        CHECK(hp.aux_task == "density");
        CHECK((hp.aux_weight == 0.25 || hp.aux_weight == 0.5));
    }
    CHECK(seen_kernels.size() == 3);

    Rng a(4), b(4);
    for (int i = 0; i < 20; ++i) {
        HyperParams x = sample_config(space, a);
        HyperParams y = sample_config(space, b);
        CHECK(x.num_steps == y.num_steps);
        CHECK(x.t_min == y.t_min);
        CHECK(x.aux_weight == y.aux_weight);
    }

    SearchSpace empty_aux;
    Rng c(5);
    CHECK(sample_config(empty_aux, c).aux_task.empty());

    SearchSpace impossible;
    impossible.steps_choices = {8};
    impossible.bins_choices = {8};
    impossible.kernel_choices = {7};
    Rng d(6);
    CHECK_THROWS_AS(sample_config(impossible, d), std::invalid_argument);
}

TEST_CASE("random search runs trials and picks the best by validation metric") {
    data::LabeledDataset ds = small_corpus(60, 5, false);
    SearchSpec spec;
    spec.space = tiny_space();
    spec.space.num_trials = 3;
    spec.space.aux_choices = {"density"};
    spec.settings.main_task = "diameter";
    spec.settings.schedule = tiny_schedule();
    spec.seed = 12;

    SearchResult result = random_search(ds, spec);
    CHECK(result.metric_name == "val_mse");
    CHECK(result.main_task == "diameter");
    REQUIRE(result.trials.size() == 3);
    REQUIRE(result.best_index < 3);
    double best = result.trials[result.best_index].val_metrics.at("diameter");
    for (const RunRecord& r : result.trials) {
        REQUIRE_FALSE(r.failed());
        CHECK(r.val_metrics.at("diameter") >= best);
        CHECK(r.config.contains("hyperparams"));
        CHECK(r.epochs_run >= 1);
    }

    // Identical seeds reproduce the CSV byte for byte.
    SearchResult again = random_search(ds, spec);
    CHECK(search_csv(result) == search_csv(again));

    // Successful trials leave the trailing error column empty, so the winner's
    // row ends ",1," and the rest end ",0,".
    std::string csv = search_csv(result);
    std::size_t best_marks = 0;
    std::size_t pos = 0;
    while ((pos = csv.find(",1,\n", pos)) != std::string::npos) {
        ++best_marks;
        pos += 4;
    }
    CHECK(best_marks == 1);
}

TEST_CASE("random search surfaces total failure as a numeric error") {
    data::LabeledDataset ds = small_corpus(60, 6, false);
    SearchSpec spec;
    spec.space = tiny_space();
    spec.space.num_trials = 2;
    spec.space.aux_choices = {"diameter"}; // duplicates the main task
    spec.settings.main_task = "diameter";
    spec.settings.schedule = tiny_schedule();
    CHECK_THROWS_AS(random_search(ds, spec), NumericError);
}

TEST_CASE("random search validates its inputs") {
    data::LabeledDataset ds = small_corpus(60, 7, false);
    SearchSpec spec;
    spec.space = tiny_space();
    spec.settings.main_task = "volume";
    CHECK_THROWS_AS(random_search(ds, spec), std::invalid_argument);
    spec.settings.main_task = "diameter";
    spec.space.num_trials = 0;
    CHECK_THROWS_AS(random_search(ds, spec), std::invalid_argument);
}

TEST_CASE("learning curve produces sorted cells and aggregates") {
    data::LabeledDataset ds = small_corpus(60);
    LearningCurveSpec spec;
    spec.main_task = "diameter";
    spec.aux_tasks = {"density"};
    spec.sizes = {8, 16};
    spec.num_seeds = 2;
    spec.base_seed = 3;
    spec.schedule = tiny_schedule();

    LearningCurveResult result = learning_curve(ds, spec);
    CHECK(result.metric_name == "test_mse");
    REQUIRE(result.cells.size() == 8);
    REQUIRE(result.aggregates.size() == 4);

    for (std::size_t i = 1; i < result.cells.size(); ++i) {
        const CellResult& a = result.cells[i - 1];
        const CellResult& b = result.cells[i];
        bool ordered = a.variant < b.variant ||
                       (a.variant == b.variant && a.train_size < b.train_size) ||
                       (a.variant == b.variant && a.train_size == b.train_size &&
                        a.seed < b.seed);
        CHECK(ordered);
    }
    CHECK(result.cells.front().variant == "multi");
    CHECK(result.cells.back().variant == "single");
    for (const CellResult& cell : result.cells) {
        REQUIRE_FALSE(cell.record.failed());
        CHECK(cell.record.test_metrics.count("diameter") == 1);
        CHECK(cell.record.train_metrics.count("diameter") == 1);
    }
    for (const Aggregate& agg : result.aggregates) {
        CHECK(agg.count == 2);
        CHECK(agg.stderr_mean >= 0.0);
    }
}

TEST_CASE("learning curve csv is deterministic and wall clock free") {
    data::LabeledDataset ds = small_corpus(60);
    LearningCurveSpec spec;
    spec.main_task = "diameter";
    spec.aux_tasks = {"density"};
    spec.sizes = {8, 16};
    spec.num_seeds = 2;
    spec.base_seed = 1;
    spec.schedule = tiny_schedule();

    std::string first = learning_curve_csv(learning_curve(ds, spec));

    // A different worker count must not change a single byte.
    setenv("GD_THREADS", "3", 1);
    std::string second = learning_curve_csv(learning_curve(ds, spec));
    unsetenv("GD_THREADS");
    CHECK(first == second);

    // Header plus 8 cell rows plus mean and stderr rows for 4 aggregates.
    std::size_t lines = 0;
    for (char c : first)
        if (c == '\n') ++lines;
    CHECK(lines == 17);

    // Every row ends with the placeholder wall-clock column.
    std::size_t pos = first.find('\n') + 1;
    while (pos < first.size()) {
        std::size_t end = first.find('\n', pos);
        std::string row = first.substr(pos, end - pos);
        CHECK(row.substr(row.size() - 2) == ",0");
        pos = end + 1;
    }
}

TEST_CASE("zero weight auxiliaries reproduce the single task runs") {
    data::LabeledDataset ds = small_corpus(60);
    LearningCurveSpec spec;
    spec.main_task = "diameter";
    spec.aux_tasks = {"density"};
    spec.aux_weight = 0.0;
    spec.sizes = {12};
    spec.num_seeds = 2;
    spec.base_seed = 8;
    spec.schedule = nn::TrainSchedule{8, 4, 4};

    LearningCurveResult result = learning_curve(ds, spec);
    REQUIRE(result.cells.size() == 4);
    for (int si = 0; si < 2; ++si) {
        const CellResult& multi = result.cells[static_cast<std::size_t>(si)];
        const CellResult& single = result.cells[static_cast<std::size_t>(2 + si)];
        REQUIRE(multi.variant == "multi");
        REQUIRE(single.variant == "single");
        CHECK(multi.seed == single.seed);
        double m = multi.record.test_metrics.at("diameter");
        double s = single.record.test_metrics.at("diameter");
        CHECK(std::abs(m - s) <= 1e-9);
    }
}

TEST_CASE("learning curve validates the ladder") {
    data::LabeledDataset ds = small_corpus(20);
    LearningCurveSpec spec;
    spec.main_task = "diameter";
    spec.schedule = tiny_schedule();
    spec.sizes = {};
    CHECK_THROWS_AS(learning_curve(ds, spec), std::invalid_argument);
    spec.sizes = {8, 8};
    CHECK_THROWS_AS(learning_curve(ds, spec), std::invalid_argument);
    spec.sizes = {1000};
    CHECK_THROWS_AS(learning_curve(ds, spec), std::invalid_argument);
    spec.sizes = {8};
    spec.single_task = false;
    spec.multi_task = false;
    CHECK_THROWS_AS(learning_curve(ds, spec), std::invalid_argument);

    data::LabeledDataset raw = small_corpus(20, 5, false);
    LearningCurveSpec plain;
    plain.main_task = "diameter";
    plain.sizes = {8};
    CHECK_THROWS_AS(learning_curve(raw, plain), std::invalid_argument);
}

TEST_CASE("cross validation with a fixed configuration") {
    data::LabeledDataset ds = small_corpus(40, 11);
    CvSpec spec;
    spec.folds = 4;
    spec.seed = 2;
    spec.main_task = "diameter";
    spec.aux_tasks = {"density"};
    spec.trials = 0;
    spec.fixed = HyperParams{8, 8, 0.1, 20.0, 3, std::string{}, 0.5};
    spec.settings.main_task = "diameter";
    spec.settings.schedule = tiny_schedule();

    CvResult result = cross_validate(ds, spec);
    CHECK(result.metric_name == "test_mse");
    CHECK(result.main_task == "diameter");
    REQUIRE(result.fold_records.size() == 4);
    double lo = 1e300, hi = -1e300;
    for (const RunRecord& r : result.fold_records) {
        REQUIRE_FALSE(r.failed());
        double v = r.test_metrics.at("diameter");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(result.mean >= lo);
    CHECK(result.mean <= hi);
    CHECK(result.stderr_mean >= 0.0);
    CHECK(result.chosen_config.at("num_bins").get<int>() == 8);

    CvResult again = cross_validate(ds, spec);
    CHECK(cv_csv(result) == cv_csv(again));

    std::size_t lines = 0;
    std::string csv = cv_csv(result);
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == 7); // header + 4 folds + mean + stderr
}

TEST_CASE("cross validation can tune on the first fold") {
    data::LabeledDataset ds = small_corpus(40, 13);
    CvSpec spec;
    spec.folds = 3;
    spec.seed = 4;
    spec.main_task = "diameter";
    spec.aux_tasks = {"density"};
    spec.trials = 2;
    spec.space = tiny_space();
    spec.settings.main_task = "diameter";
    spec.settings.schedule = tiny_schedule();

    CvResult result = cross_validate(ds, spec);
    REQUIRE(result.fold_records.size() == 3);
    CHECK(result.chosen_config.at("searched_trials").get<int>() == 2);
    CHECK(result.chosen_config.at("num_bins").get<int>() == 8);
    for (const RunRecord& r : result.fold_records) REQUIRE_FALSE(r.failed());
}

TEST_CASE("cross validation validates inputs") {
    data::LabeledDataset ds = small_corpus(40, 15);
    CvSpec spec;
    spec.folds = 1;
    spec.main_task = "diameter";
    CHECK_THROWS_AS(cross_validate(ds, spec), std::invalid_argument);
    spec.folds = 4;
    spec.main_task = "volume";
    CHECK_THROWS_AS(cross_validate(ds, spec), std::invalid_argument);
}
