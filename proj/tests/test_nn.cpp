#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "graphdistill/errors.hpp"
#include "graphdistill/nn.hpp"
#include "graphdistill/rng.hpp"

using namespace gd;
using namespace gd::nn;

namespace {

Tensor random_inputs(int n, int bins, int steps, Rng& rng) {
    Tensor t({n, 1, bins, steps});
    for (double& x : t.v) x = rng.uniform(0.0, 1.0);
    return t;
}

Batch make_batch(Tensor inputs, std::vector<TaskLabels> labels) {
    Batch b;
    b.inputs = std::move(inputs);
    b.labels = std::move(labels);
    return b;
}

double fd_max_rel_err(MultiTaskNet& net, const Batch& batch) {
    Gradients analytic = backward(net, batch);
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t p = 0; p < net.params.size(); ++p) {
        for (std::size_t i = 0; i < net.params[p].value.size(); ++i) {
            double orig = net.params[p].value.v[i];
            net.params[p].value.v[i] = orig + h;
            double up = batch_loss(net, batch);
            net.params[p].value.v[i] = orig - h;
            double dn = batch_loss(net, batch);
            net.params[p].value.v[i] = orig;
            double fd = (up - dn) / (2.0 * h);
            double a = analytic.tensors[p].v[i];
            double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

double sample_variance(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return sq / static_cast<double>(xs.size());
}

} // namespace

TEST_CASE("pooled dimensions and layer shapes") {
    CHECK(pooled_dim(1) == 1);
    CHECK(pooled_dim(2) == 1);
    CHECK(pooled_dim(3) == 1);
    CHECK(pooled_dim(4) == 2);
    CHECK(pooled_dim(5) == 2);
    CHECK(pooled_dim(8) == 4);

    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 4};
    cfg.conv2 = {3, 4};
    cfg.tasks = {TaskSpec::regression("y")};
    CHECK(cfg.conv1_h() == 6);
    CHECK(cfg.pool1_h() == 3);
    CHECK(cfg.conv2_h() == 1);
    CHECK(cfg.pool2_h() == 1);
    CHECK(cfg.flat_dim() == 4);
    cfg.validate();
}

TEST_CASE("shape feasibility") {
    CHECK(shapes_feasible(8, 8, 3));
    CHECK(shapes_feasible(16, 16, 5));
    CHECK(shapes_feasible(16, 16, 3));
    CHECK_FALSE(shapes_feasible(8, 8, 7));
    CHECK_FALSE(shapes_feasible(16, 16, 7));
    CHECK(shapes_feasible(32, 32, 7));
    CHECK_FALSE(shapes_feasible(2, 16, 3));
}

TEST_CASE("task validation") {
    CHECK_THROWS_AS(validate_tasks({}), std::invalid_argument);
    CHECK_THROWS_AS(validate_tasks({TaskSpec::regression("a"), TaskSpec::regression("a")}),
                    std::invalid_argument);
    CHECK_THROWS_AS(validate_tasks({TaskSpec::classification("c", 1)}), std::invalid_argument);
    CHECK_THROWS_AS(validate_tasks({TaskSpec::regression("a", -0.5)}), std::invalid_argument);
    validate_tasks({TaskSpec::regression("a"), TaskSpec::classification("c", 3, 0.0)});
}

TEST_CASE("initialization is glorot bounded with zero biases") {
    NetConfig cfg;
    cfg.input_bins = 12;
    cfg.input_steps = 12;
    cfg.conv1 = {3, 4};
    cfg.conv2 = {3, 4};
    cfg.fc_shared_units = 10;
    cfg.head_units = 6;
    cfg.tasks = {TaskSpec::regression("y"), TaskSpec::classification("c", 3)};
    cfg.rng_seed = 2024;
    MultiTaskNet net(cfg);

    CHECK(net.step_count == 0);
    REQUIRE(net.params.size() == 6 + 4 * 2);
    REQUIRE(net.stats.size() == 2);
    CHECK(net.stats[0].mean == 0.0);
    CHECK(net.stats[0].stddev == 1.0);

    auto check_bounded = [&](int idx, double fan_in, double fan_out) {
        double limit = std::sqrt(6.0 / (fan_in + fan_out));
        double peak = 0.0;
        for (double w : net.params[idx].value.v) {
            CHECK(std::abs(w) <= limit);
            peak = std::max(peak, std::abs(w));
        }
        CHECK(peak > 0.25 * limit); // draws actually span the interval
    };
    check_bounded(MultiTaskNet::kConv1W, 9, 4 * 9);
    check_bounded(MultiTaskNet::kConv2W, 4 * 9, 4 * 9);
    check_bounded(MultiTaskNet::kFcW, cfg.flat_dim(), 10);
    for (double b : net.params[MultiTaskNet::kConv1B].value.v) CHECK(b == 0.0);
    for (double b : net.params[MultiTaskNet::kFcB].value.v) CHECK(b == 0.0);
    for (double b : net.params[net.head_base(0) + 1].value.v) CHECK(b == 0.0);
    for (double b : net.params[net.head_base(1) + 3].value.v) CHECK(b == 0.0);

    MultiTaskNet same(cfg);
    for (std::size_t p = 0; p < net.params.size(); ++p)
        CHECK(net.params[p].value.v == same.params[p].value.v);
    cfg.rng_seed = 2025;
    MultiTaskNet other(cfg);
    CHECK(net.params[0].value.v != other.params[0].value.v);
}

TEST_CASE("all zero parameters give all zero outputs") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 5;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::regression("y"), TaskSpec::classification("c", 2)};
    MultiTaskNet net(cfg);
    for (Param& p : net.params) p.value.fill(0.0);

    Rng rng(1);
    auto outs = forward(net, random_inputs(3, 8, 8, rng));
    REQUIRE(outs.size() == 2);
    for (const Tensor& t : outs)
        for (double x : t.v) CHECK(x == 0.0);
}

TEST_CASE("forward and forward_cached agree") {
    NetConfig cfg;
    cfg.input_bins = 10;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 3};
    cfg.conv2 = {3, 3};
    cfg.fc_shared_units = 7;
    cfg.head_units = 5;
    cfg.tasks = {TaskSpec::regression("y")};
    cfg.rng_seed = 9;
    MultiTaskNet net(cfg);
    Rng rng(2);
    Tensor x = random_inputs(4, 10, 8, rng);
    auto a = forward(net, x);
    ForwardCache cache;
    forward_cached(net, x, cache);
    REQUIRE(cache.outputs.size() == 1);
    CHECK(a[0].v == cache.outputs[0].v);
}

TEST_CASE("multitask loss matches the hand computed display") {
    std::vector<TaskSpec> tasks{TaskSpec::regression("a", 1.0), TaskSpec::regression("b", 0.5)};
    std::vector<Tensor> outputs;
    Tensor oa({3, 1});
    oa.v = {2.0, 0.0, 99.0};
    Tensor ob({3, 1});
    ob.v = {7.0, 7.0, 3.0};
    outputs.push_back(oa);
    outputs.push_back(ob);

    Batch batch;
    batch.inputs = Tensor({3, 1, 1, 1});
    batch.labels.resize(2);
    batch.labels[0].values = {1.0, 1.0, 0.0};
    batch.labels[0].mask = {1, 1, 0};
    batch.labels[1].values = {0.0, 0.0, 2.0};
    batch.labels[1].mask = {0, 0, 1};

    // Task a: mean of (2-1)^2 and (0-1)^2 over its two labeled rows = 1.
    // Task b: (3-2)^2 over its single labeled row = 1, weighted by 0.5.
    double loss = multitask_loss(outputs, batch, tasks);
    CHECK(std::abs(loss - 1.5) <= 1e-12);
}

TEST_CASE("cross entropy of uniform logits is log of the class count") {
    std::vector<TaskSpec> tasks{TaskSpec::classification("c", 4)};
    Tensor o({1, 4});
    Batch batch;
    batch.inputs = Tensor({1, 1, 1, 1});
    batch.labels.resize(1);
    batch.labels[0].values = {2.0};
    batch.labels[0].mask = {1};
    double loss = multitask_loss({o}, batch, tasks);
    CHECK(std::abs(loss - std::log(4.0)) <= 1e-12);
}

TEST_CASE("loss decomposes as the weighted sum of per-task means") {
    Rng rng(33);
    std::vector<TaskSpec> tasks{TaskSpec::regression("a", 0.7), TaskSpec::regression("b", 0.3)};
    Tensor oa({5, 1}), ob({5, 1});
    Batch batch;
    batch.inputs = Tensor({5, 1, 1, 1});
    batch.labels.resize(2);
    for (int i = 0; i < 5; ++i) {
        oa.v[i] = rng.uniform(-2.0, 2.0);
        ob.v[i] = rng.uniform(-2.0, 2.0);
        batch.labels[0].values.push_back(rng.uniform(-2.0, 2.0));
        batch.labels[0].mask.push_back(i < 3 ? 1 : 0);
        batch.labels[1].values.push_back(rng.uniform(-2.0, 2.0));
        batch.labels[1].mask.push_back(1);
    }
    double mean_a = 0.0;
    for (int i = 0; i < 3; ++i) {
        double d = oa.v[i] - batch.labels[0].values[i];
        mean_a += d * d;
    }
    mean_a /= 3.0;
    double mean_b = 0.0;
    for (int i = 0; i < 5; ++i) {
        double d = ob.v[i] - batch.labels[1].values[i];
        mean_b += d * d;
    }
    mean_b /= 5.0;
    double loss = multitask_loss({oa, ob}, batch, tasks);
    CHECK(std::abs(loss - (0.7 * mean_a + 0.3 * mean_b)) <= 1e-12);
}

TEST_CASE("zero weight tasks are skipped exactly") {
    std::vector<TaskSpec> on{TaskSpec::regression("a", 1.0)};
    std::vector<TaskSpec> both{TaskSpec::regression("a", 1.0), TaskSpec::regression("b", 0.0)};
    Tensor oa({2, 1});
    oa.v = {1.0, -1.0};
    Tensor ob({2, 1});
    ob.v = {5.0, 5.0};

    Batch single;
    single.inputs = Tensor({2, 1, 1, 1});
    single.labels.resize(1);
    single.labels[0].values = {0.5, 0.5};
    single.labels[0].mask = {1, 1};

    Batch dual = single;
    dual.labels.resize(2);
    dual.labels[1].values = {3.0, 3.0};
    dual.labels[1].mask = {1, 1};

    CHECK(multitask_loss({oa}, single, on) == multitask_loss({oa, ob}, dual, both));
}

TEST_CASE("a batch with no labels anywhere is rejected") {
    std::vector<TaskSpec> tasks{TaskSpec::regression("a")};
    Tensor oa({2, 1});
    Batch batch;
    batch.inputs = Tensor({2, 1, 1, 1});
    batch.labels.resize(1);
    batch.labels[0].values = {0.0, 0.0};
    batch.labels[0].mask = {0, 0};
    CHECK_THROWS_AS(multitask_loss({oa}, batch, tasks), std::invalid_argument);
}

TEST_CASE("an empty mask for one task contributes zero") {
    std::vector<TaskSpec> tasks{TaskSpec::regression("a", 1.0), TaskSpec::regression("b", 9.0)};
    Tensor oa({1, 1});
    oa.v = {2.0};
    Tensor ob({1, 1});
    ob.v = {100.0};
    Batch batch;
    batch.inputs = Tensor({1, 1, 1, 1});
    batch.labels.resize(2);
    batch.labels[0].values = {0.0};
    batch.labels[0].mask = {1};
    batch.labels[1].values = {0.0};
    batch.labels[1].mask = {0};
    CHECK(multitask_loss({oa, ob}, batch, tasks) == 4.0);
}

TEST_CASE("analytic gradients match central differences") {
    // Three architectures covering regression, classification, and a
    // mixed pair with partial masks.
    double worst_overall = 0.0;

    {
        NetConfig cfg;
        cfg.input_bins = 8;
        cfg.input_steps = 8;
        cfg.conv1 = {3, 2};
        cfg.conv2 = {3, 2};
        cfg.fc_shared_units = 7;
        cfg.head_units = 5;
        cfg.tasks = {TaskSpec::regression("y")};
        // Seed picked so no pre-activation sits within 1e-4 of a ReLU kink;
        // all-positive inputs make fully dead channels (exact zeros) common.
        cfg.rng_seed = 103;
        MultiTaskNet net(cfg);
        Rng rng(11);
        Batch batch = make_batch(random_inputs(3, 8, 8, rng), {});
        batch.labels.resize(1);
        batch.labels[0].values = {0.4, -1.2, 2.0};
        batch.labels[0].mask = {1, 1, 1};
        worst_overall = std::max(worst_overall, fd_max_rel_err(net, batch));
    }
    {
        NetConfig cfg;
        cfg.input_bins = 12;
        cfg.input_steps = 10;
        cfg.conv1 = {3, 3};
        cfg.conv2 = {3, 3};
        cfg.fc_shared_units = 9;
        cfg.head_units = 6;
        cfg.tasks = {TaskSpec::classification("c", 3)};
        cfg.rng_seed = 202;
        MultiTaskNet net(cfg);
        Rng rng(12);
        Batch batch = make_batch(random_inputs(4, 12, 10, rng), {});
        batch.labels.resize(1);
        batch.labels[0].values = {0.0, 2.0, 1.0, 0.0};
        batch.labels[0].mask = {1, 1, 0, 1};
        worst_overall = std::max(worst_overall, fd_max_rel_err(net, batch));
    }
    {
        NetConfig cfg;
        cfg.input_bins = 14;
        cfg.input_steps = 14;
        cfg.conv1 = {5, 2};
        cfg.conv2 = {5, 2};
        cfg.fc_shared_units = 8;
        cfg.head_units = 4;
        cfg.tasks = {TaskSpec::regression("y", 1.0), TaskSpec::classification("c", 2, 0.7)};
        cfg.rng_seed = 303;
        MultiTaskNet net(cfg);
        Rng rng(13);
        Batch batch = make_batch(random_inputs(3, 14, 14, rng), {});
        batch.labels.resize(2);
        batch.labels[0].values = {1.0, 0.0, -0.5};
        batch.labels[0].mask = {1, 0, 1};
        batch.labels[1].values = {0.0, 1.0, 0.0};
        batch.labels[1].mask = {0, 1, 1};
        worst_overall = std::max(worst_overall, fd_max_rel_err(net, batch));
    }

    CHECK(worst_overall <= 1e-4);
}

TEST_CASE("gradients of a zero weight head are exactly zero") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 6;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::regression("y", 1.0), TaskSpec::regression("z", 0.0)};
    cfg.rng_seed = 5;
    MultiTaskNet net(cfg);
    Rng rng(6);
    Batch batch = make_batch(random_inputs(2, 8, 8, rng), {});
    batch.labels.resize(2);
    batch.labels[0].values = {1.0, -1.0};
    batch.labels[0].mask = {1, 1};
    batch.labels[1].values = {4.0, 4.0};
    batch.labels[1].mask = {1, 1};

    Gradients grads = backward(net, batch);
    int base = net.head_base(1);
    for (int off = 0; off < 4; ++off)
        for (double g : grads.tensors[base + off].v) CHECK(g == 0.0);

    // And the trunk gradients equal the single-task ones bit for bit.
    NetConfig solo = cfg;
    solo.tasks = {TaskSpec::regression("y", 1.0)};
    MultiTaskNet net_solo(solo);
    for (int p = 0; p < 6; ++p) net_solo.params[p].value.v = net.params[p].value.v;
    for (int off = 0; off < 4; ++off)
        net_solo.params[6 + off].value.v = net.params[net.head_base(0) + off].value.v;
    Batch solo_batch = batch;
    solo_batch.labels.resize(1);
    Gradients solo_grads = backward(net_solo, solo_batch);
    for (int p = 0; p < 6; ++p) CHECK(grads.tensors[p].v == solo_grads.tensors[p].v);
    CHECK(grads.loss == solo_grads.loss);
}

TEST_CASE("duplicating every example leaves loss and gradients unchanged") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 5;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::regression("y")};
    cfg.rng_seed = 7;
    MultiTaskNet net(cfg);
    Rng rng(8);
    Tensor once = random_inputs(2, 8, 8, rng);
    Tensor twice({4, 1, 8, 8});
    std::copy(once.v.begin(), once.v.end(), twice.v.begin());
    std::copy(once.v.begin(), once.v.end(), twice.v.begin() + once.v.size());

    Batch b1 = make_batch(once, {});
    b1.labels.resize(1);
    b1.labels[0].values = {1.0, -2.0};
    b1.labels[0].mask = {1, 1};
    Batch b2 = make_batch(twice, {});
    b2.labels.resize(1);
    b2.labels[0].values = {1.0, -2.0, 1.0, -2.0};
    b2.labels[0].mask = {1, 1, 1, 1};

    Gradients g1 = backward(net, b1);
    Gradients g2 = backward(net, b2);
    CHECK(std::abs(g1.loss - g2.loss) <= 1e-12);
    for (std::size_t p = 0; p < g1.tensors.size(); ++p)
        for (std::size_t i = 0; i < g1.tensors[p].size(); ++i)
            CHECK(std::abs(g1.tensors[p].v[i] - g2.tensors[p].v[i]) <= 1e-12);
}

TEST_CASE("adam ignores zero gradients and tracks the first step size") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 5;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::regression("y")};
    cfg.rng_seed = 15;
    MultiTaskNet net(cfg);

    Gradients zero;
    for (const Param& p : net.params) zero.tensors.emplace_back(p.value.shape);
    std::vector<std::vector<double>> before;
    for (const Param& p : net.params) before.push_back(p.value.v);
    adam_step(net, zero);
    CHECK(net.step_count == 1);
    for (std::size_t p = 0; p < net.params.size(); ++p)
        CHECK(net.params[p].value.v == before[p]);

    // Fresh net: a unit gradient moves every entry by -lr after bias
    // correction, up to the epsilon in the denominator.
    MultiTaskNet net2(cfg);
    Gradients ones;
    for (const Param& p : net2.params) {
        Tensor t(p.value.shape);
        t.fill(1.0);
        ones.tensors.push_back(std::move(t));
    }
    std::vector<std::vector<double>> start;
    for (const Param& p : net2.params) start.push_back(p.value.v);
    adam_step(net2, ones);
    for (std::size_t p = 0; p < net2.params.size(); ++p)
        for (std::size_t i = 0; i < net2.params[p].value.size(); ++i) {
            double delta = net2.params[p].value.v[i] - start[p][i];
            CHECK(std::abs(delta + 0.001) <= 1e-6);
        }
}

TEST_CASE("adam updates are deterministic") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 5;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::regression("y")};
    cfg.rng_seed = 16;
    MultiTaskNet a(cfg), b(cfg);
    Rng rng(17);
    Batch batch = make_batch(random_inputs(3, 8, 8, rng), {});
    batch.labels.resize(1);
    batch.labels[0].values = {0.1, 0.2, 0.3};
    batch.labels[0].mask = {1, 1, 1};
    for (int step = 0; step < 5; ++step) {
        adam_step(a, backward(a, batch));
        adam_step(b, backward(b, batch));
    }
    for (std::size_t p = 0; p < a.params.size(); ++p)
        CHECK(a.params[p].value.v == b.params[p].value.v);
}

namespace {

SampleSet regression_samples(int n, int bins, int steps, Rng& rng, double noise = 0.0) {
    SampleSet out;
    for (int i = 0; i < n; ++i) {
        Sample s;
        s.input = Tensor({1, bins, steps});
        double mean = 0.0;
        for (double& x : s.input.v) {
            x = rng.uniform(0.0, 1.0);
            mean += x;
        }
        mean /= static_cast<double>(s.input.size());
        s.labels["y"] = 5.0 * mean + 1.0 + (noise > 0 ? rng.normal(0.0, noise) : 0.0);
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace

TEST_CASE("patience zero trains exactly one epoch") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 5;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::regression("y")};
    cfg.rng_seed = 21;
    MultiTaskNet net(cfg);
    Rng rng(22);
    SampleSet data = regression_samples(12, 8, 8, rng);
    TrainHistory h = train(net, data, data, TrainSchedule{4, 50, 0});
    CHECK(h.epochs_run == 1);
    CHECK(h.best_epoch == 1);
    CHECK(h.train_loss.size() == 1);
}

TEST_CASE("training is bitwise deterministic") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 6;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::regression("y")};
    cfg.rng_seed = 23;
    Rng rng(24);
    SampleSet train_set = regression_samples(20, 8, 8, rng);
    SampleSet val_set = regression_samples(6, 8, 8, rng);

    MultiTaskNet a(cfg), b(cfg);
    TrainHistory ha = train(a, train_set, val_set, TrainSchedule{8, 12, 12});
    TrainHistory hb = train(b, train_set, val_set, TrainSchedule{8, 12, 12});
    CHECK(ha.train_loss == hb.train_loss);
    CHECK(ha.val_loss == hb.val_loss);
    CHECK(ha.best_epoch == hb.best_epoch);
    for (std::size_t p = 0; p < a.params.size(); ++p)
        CHECK(a.params[p].value.v == b.params[p].value.v);
}

TEST_CASE("early stopping restores the best parameters") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 6;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::regression("y")};
    cfg.rng_seed = 25;
    MultiTaskNet net(cfg);
    Rng rng(26);
    SampleSet train_set = regression_samples(24, 8, 8, rng, 0.5);
    SampleSet val_set = regression_samples(8, 8, 8, rng, 0.5);
    TrainHistory h = train(net, train_set, val_set, TrainSchedule{8, 40, 3});
    CHECK(h.best_epoch >= 1);
    CHECK(h.best_epoch <= h.epochs_run);
    CHECK(h.best_val_loss == *std::min_element(h.val_loss.begin(), h.val_loss.end()));
    // The restored parameters reproduce the recorded best validation loss.
    CHECK(std::abs(dataset_loss(net, val_set, 8) - h.best_val_loss) <= 1e-12);
}

TEST_CASE("training fits a learnable regression target") {
    NetConfig cfg;
    cfg.input_bins = 12;
    cfg.input_steps = 12;
    cfg.conv1 = {3, 4};
    cfg.conv2 = {3, 4};
    cfg.fc_shared_units = 20;
    cfg.head_units = 10;
    cfg.tasks = {TaskSpec::regression("y")};
    cfg.rng_seed = 27;
    MultiTaskNet net(cfg);
    Rng rng(28);
    SampleSet data = regression_samples(32, 12, 12, rng);
    std::vector<double> labels;
    for (const Sample& s : data) labels.push_back(s.labels.at("y"));

    train(net, data, data, TrainSchedule{8, 500, 500});
    double mse = evaluate(net, data).at("y");
    CHECK(mse < 0.05 * sample_variance(labels));
}

TEST_CASE("training separates an easy two class problem") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 3};
    cfg.conv2 = {3, 3};
    cfg.fc_shared_units = 12;
    cfg.head_units = 8;
    cfg.tasks = {TaskSpec::classification("c", 2)};
    cfg.rng_seed = 29;
    MultiTaskNet net(cfg);
    Rng rng(30);
    SampleSet data;
    for (int i = 0; i < 24; ++i) {
        Sample s;
        s.input = Tensor({1, 8, 8});
        double level = (i % 2 == 0) ? 0.25 : 0.75;
        for (double& x : s.input.v) x = rng.uniform(level - 0.2, level + 0.2);
        s.labels["c"] = (i % 2 == 0) ? 0.0 : 1.0;
        data.push_back(std::move(s));
    }
    train(net, data, data, TrainSchedule{8, 300, 300});
    CHECK(evaluate(net, data).at("c") == 1.0);
}

TEST_CASE("constant labels fall back to unit spread") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 5;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::regression("y")};
    cfg.rng_seed = 31;
    MultiTaskNet net(cfg);
    Rng rng(32);
    SampleSet data = regression_samples(12, 8, 8, rng);
    for (Sample& s : data) s.labels["y"] = 3.5;
    train(net, data, data, TrainSchedule{4, 300, 50});
    CHECK(net.stats[0].mean == 3.5);
    CHECK(net.stats[0].stddev == 1.0);
    CHECK(evaluate(net, data).at("y") < 1e-2);
}

TEST_CASE("examples without positively weighted labels are skipped") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 5;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::regression("y")};
    cfg.rng_seed = 33;
    Rng rng(34);
    SampleSet data = regression_samples(10, 8, 8, rng);
    for (int i = 5; i < 10; ++i) data[i].labels.clear();
    MultiTaskNet net(cfg);
    TrainHistory h = train(net, data, data, TrainSchedule{4, 2, 2});
    CHECK(h.epochs_run >= 1);

    for (int i = 0; i < 5; ++i) data[i].labels.clear();
    MultiTaskNet net2(cfg);
    CHECK_THROWS_AS(train(net2, data, data, TrainSchedule{4, 2, 2}), std::invalid_argument);
}

TEST_CASE("evaluate reports de-standardized regression error") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 5;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::regression("y")};
    MultiTaskNet net(cfg);
    for (Param& p : net.params) p.value.fill(0.0);

    SampleSet data;
    for (double label : {0.0, 2.0}) {
        Sample s;
        s.input = Tensor({1, 8, 8});
        s.labels["y"] = label;
        data.push_back(std::move(s));
    }
    // Default stats: prediction is 0, so mse = (0 + 4) / 2.
    CHECK(evaluate(net, data).at("y") == 2.0);

    // With stats mean 10, sd 2 the constant prediction de-standardizes to 10.
    net.stats[0] = TaskStats{10.0, 2.0};
    data[0].labels["y"] = 8.0;
    data[1].labels["y"] = 12.0;
    CHECK(evaluate(net, data).at("y") == 4.0);
}

TEST_CASE("evaluate breaks classification ties toward the lowest class") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 5;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::classification("c", 3)};
    MultiTaskNet net(cfg);
    for (Param& p : net.params) p.value.fill(0.0);

    SampleSet data;
    for (double label : {0.0, 1.0, 0.0}) {
        Sample s;
        s.input = Tensor({1, 8, 8});
        s.labels["c"] = label;
        data.push_back(std::move(s));
    }
    // All logits tie at zero, so every prediction is class 0.
    CHECK(evaluate(net, data).at("c") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("evaluate skips unlabeled examples and rejects unlabeled tasks") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 5;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::regression("y")};
    MultiTaskNet net(cfg);
    for (Param& p : net.params) p.value.fill(0.0);

    SampleSet data;
    for (int i = 0; i < 4; ++i) {
        Sample s;
        s.input = Tensor({1, 8, 8});
        if (i == 0) s.labels["y"] = 3.0;
        data.push_back(std::move(s));
    }
    CHECK(evaluate(net, data).at("y") == 9.0);

    data[0].labels.clear();
    CHECK_THROWS_AS(evaluate(net, data), std::invalid_argument);
}

TEST_CASE("dataset loss applies task weights to per-task means") {
    NetConfig cfg;
    cfg.input_bins = 8;
    cfg.input_steps = 8;
    cfg.conv1 = {3, 2};
    cfg.conv2 = {3, 2};
    cfg.fc_shared_units = 5;
    cfg.head_units = 4;
    cfg.tasks = {TaskSpec::regression("y", 0.5)};
    MultiTaskNet net(cfg);
    for (Param& p : net.params) p.value.fill(0.0);

    SampleSet data;
    for (double label : {0.0, 2.0}) {
        Sample s;
        s.input = Tensor({1, 8, 8});
        s.labels["y"] = label;
        data.push_back(std::move(s));
    }
    // Standardized targets are raw here (default stats), predictions 0:
    // mean squared error 2, weighted by 0.5.
    CHECK(dataset_loss(net, data) == 1.0);
}
