#ifndef GRAPHDISTILL_NN_HPP
#define GRAPHDISTILL_NN_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "graphdistill/tensor.hpp"

namespace gd::nn {

enum class TaskKind { kRegression, kClassification };

/// One prediction target attached to the shared trunk.
struct TaskSpec {
    std::string name;
    TaskKind kind = TaskKind::kRegression;
    int num_classes = 0;   // classification only
    double weight = 1.0;   // loss weight, >= 0

    static TaskSpec regression(std::string name, double weight = 1.0);
    static TaskSpec classification(std::string name, int num_classes, double weight = 1.0);

    int output_dim() const { return kind == TaskKind::kRegression ? 1 : num_classes; }
};

void validate_tasks(const std::vector<TaskSpec>& tasks);

struct ConvSpec {
    int kernel = 3;   // square, one of 3/5/7
    int filters = 8;
};

/// Pool halves a dimension but never below 1; a trailing odd row/column is dropped
/// and a size-1 input keeps its single element.
inline int pooled_dim(int d) { return d / 2 > 0 ? d / 2 : 1; }

struct NetConfig {
    int input_bins = 16;    // histogram rows B
    int input_steps = 16;   // time columns T
    ConvSpec conv1;
    ConvSpec conv2;
    int fc_shared_units = 60;
    int head_units = 40;
    std::vector<TaskSpec> tasks;
    std::uint64_t rng_seed = 0;

    int conv1_h() const { return input_bins - conv1.kernel + 1; }
    int conv1_w() const { return input_steps - conv1.kernel + 1; }
    int pool1_h() const { return pooled_dim(conv1_h()); }
    int pool1_w() const { return pooled_dim(conv1_w()); }
    int conv2_h() const { return pool1_h() - conv2.kernel + 1; }
    int conv2_w() const { return pool1_w() - conv2.kernel + 1; }
    int pool2_h() const { return pooled_dim(conv2_h()); }
    int pool2_w() const { return pooled_dim(conv2_w()); }
    int flat_dim() const { return conv2.filters * pool2_h() * pool2_w(); }

    void validate() const;
};

/// True when both conv layers fit the given input plane.
bool shapes_feasible(int bins, int steps, int kernel);

struct Param {
    std::string name;
    Tensor value;
    Tensor m;   // Adam first moment
    Tensor v;   // Adam second moment
};

/// Train-set label statistics used to standardize regression targets.
struct TaskStats {
    double mean = 0.0;
    double stddev = 1.0;
};

struct MultiTaskNet {
    NetConfig cfg;
    std::vector<Param> params;       // conv1.w/b, conv2.w/b, fc.w/b, then per-task head.w/b, out.w/b
    std::vector<TaskStats> stats;    // aligned with cfg.tasks
    std::int64_t step_count = 0;     // Adam updates applied so far

    MultiTaskNet() = default;
    explicit MultiTaskNet(NetConfig config);

    static constexpr int kConv1W = 0, kConv1B = 1, kConv2W = 2, kConv2B = 3,
                         kFcW = 4, kFcB = 5;
    int head_base(int task) const { return 6 + 4 * task; }
};

/// Labels for one task over a batch; mask[i] == 0 marks a missing label.
struct TaskLabels {
    std::vector<double> values;
    std::vector<std::uint8_t> mask;
};

struct Batch {
    Tensor inputs;                   // [N, 1, B, T]
    std::vector<TaskLabels> labels;  // aligned with net tasks
    int size() const { return inputs.shape.empty() ? 0 : inputs.shape[0]; }
};

/// Intermediate activations kept for the backward pass; reusable across batches.
struct ForwardCache {
    Tensor conv1_pre, act1, pool1;
    Tensor conv2_pre, act2, pool2;
    Tensor fc_pre, fc_act;
    std::vector<int> pool1_arg, pool2_arg;
    std::vector<Tensor> head_pre, head_act, outputs;
    // backward scratch, sized on first use
    Tensor d_out, d_head_pre, d_fc_act, d_fc_pre;
    Tensor d_pool2, d_act2, d_pool1, d_act1;
};

struct Gradients {
    std::vector<Tensor> tensors;   // same order and shapes as net.params
    double loss = 0.0;
};

void forward_cached(const MultiTaskNet& net, const Tensor& inputs, ForwardCache& cache);
std::vector<Tensor> forward(const MultiTaskNet& net, const Tensor& inputs);

/// Weighted sum over tasks of per-task masked batch means.
double multitask_loss(const std::vector<Tensor>& outputs, const Batch& batch,
                      const std::vector<TaskSpec>& tasks);

double batch_loss(const MultiTaskNet& net, const Batch& batch);

void backward_into(const MultiTaskNet& net, const Batch& batch, ForwardCache& cache,
                   Gradients& grads);
Gradients backward(const MultiTaskNet& net, const Batch& batch);

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

void adam_step(MultiTaskNet& net, const Gradients& grads, const AdamConfig& adam = {});

/// One featurized graph: input plane [1, B, T] plus whichever task labels exist.
struct Sample {
    Tensor input;
    std::map<std::string, double> labels;
};

using SampleSet = std::vector<Sample>;

struct TrainSchedule {
    int batch_size = 32;
    int max_epochs = 200;
    int patience = 10;
};

struct TrainHistory {
    std::vector<double> train_loss;   // per epoch, mean over batches
    std::vector<double> val_loss;     // per epoch, full validation set
    int best_epoch = 0;               // 1-based epoch restored into the net
    int epochs_run = 0;
    double best_val_loss = 0.0;
};

/// Mini-batch Adam with early stopping on the weighted validation loss.
/// Restores the best-epoch parameters before returning.
TrainHistory train(MultiTaskNet& net, const SampleSet& train_set, const SampleSet& val_set,
                   const TrainSchedule& schedule = {});

/// Weighted validation-style loss over a whole sample set (per-task means).
double dataset_loss(const MultiTaskNet& net, const SampleSet& data, int batch_size = 32);

/// Per-task metric over labeled examples: de-standardized MSE for regression,
/// accuracy for classification. Keys are task names.
std::map<std::string, double> evaluate(const MultiTaskNet& net, const SampleSet& data,
                                       int batch_size = 32);

} // namespace gd::nn

#endif
