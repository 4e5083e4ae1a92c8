#ifndef GRAPHDISTILL_DATASET_HPP
#define GRAPHDISTILL_DATASET_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graphdistill/graph.hpp"
#include "graphdistill/nn.hpp"
#include "graphdistill/spectral.hpp"

namespace gd::data {

struct TaskInfo {
    std::string name;
    nn::TaskKind kind = nn::TaskKind::kRegression;
    int num_classes = 0;

    bool operator==(const TaskInfo&) const = default;
};

struct LabeledExample {
    Graph graph;
    std::map<std::string, double> labels;           // absent key = missing label
    std::optional<nn::Tensor> features;             // [1, B, T] once featurized
};

struct LabeledDataset {
    std::vector<TaskInfo> tasks;
    std::vector<LabeledExample> examples;
    std::optional<HksConfig> feature_config;        // present iff features stored

    std::size_t size() const { return examples.size(); }
    const TaskInfo& task(const std::string& name) const;
    bool has_task(const std::string& name) const;
};

enum class GraphFamily { kEr, kBa };

GraphFamily family_from_name(const std::string& name);
std::string family_name(GraphFamily f);

struct SyntheticSpec {
    GraphFamily family = GraphFamily::kEr;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    ErParams er;
    BaParams ba;
};

/// `count` random graphs labeled with their density and diameter.
/// Per-graph seed is spec.seed + index, so generation order is immaterial.
LabeledDataset generate_synthetic(const SyntheticSpec& spec);

/// Reads the three-file benchmark layout `name`_A.txt / _graph_indicator.txt /
/// _graph_labels.txt from `dir`. Class labels are remapped ascending to 0..C-1
/// under the task name "class"; density and diameter labels are computed.
LabeledDataset parse_tu(const std::string& dir, const std::string& name);

/// Computes the HKS histogram feature plane for every example (parallel per graph).
void featurize_dataset(LabeledDataset& ds, const HksConfig& cfg);

void save_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

struct SplitSpec {
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
    std::uint64_t shuffle_seed = 0;
    std::optional<std::size_t> main_task_budget;    // labels kept on first s train rows
    std::string main_task;                          // which label the budget trims
};

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

SplitIndices split_indices(std::size_t n, const SplitSpec& spec);

struct DatasetSplit {
    LabeledDataset train, val, test;
};

DatasetSplit split(const LabeledDataset& ds, const SplitSpec& spec);

/// Copy of the chosen examples, preserving catalog and feature config.
LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& indices);

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, int k, std::uint64_t seed);

struct Fold {
    LabeledDataset train, test;
};

std::vector<Fold> kfold(const LabeledDataset& ds, int k, std::uint64_t seed);

/// Converts featurized examples to training samples; throws if unfeaturized.
nn::SampleSet to_samples(const LabeledDataset& ds);

} // namespace gd::data

#endif
