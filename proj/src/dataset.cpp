#include "graphdistill/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string_view>

#include <json.hpp>

#include "graphdistill/checkpoint.hpp"
#include "graphdistill/errors.hpp"
#include "graphdistill/parallel.hpp"
#include "graphdistill/rng.hpp"

namespace gd::data {

const TaskInfo& LabeledDataset::task(const std::string& name) const {
    for (const TaskInfo& t : tasks)
        if (t.name == name) return t;
    throw std::invalid_argument("unknown task: " + name);
}

bool LabeledDataset::has_task(const std::string& name) const {
    for (const TaskInfo& t : tasks)
        if (t.name == name) return true;
    return false;
}

GraphFamily family_from_name(const std::string& name) {
    if (name == "er") return GraphFamily::kEr;
    if (name == "ba") return GraphFamily::kBa;
    throw std::invalid_argument("unknown graph family: '" + name + "' (expected er or ba)");
}

std::string family_name(GraphFamily f) {
    return f == GraphFamily::kEr ? "er" : "ba";
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.count < 1) throw std::invalid_argument("synthetic count must be >= 1");
    LabeledDataset ds;
    ds.tasks = {{"density", nn::TaskKind::kRegression, 0},
                {"diameter", nn::TaskKind::kRegression, 0}};
    ds.examples.resize(spec.count);
    parallel_for(spec.count, [&](std::size_t i) {
        Rng rng(spec.seed + i);
        Graph g = spec.family == GraphFamily::kEr ? generate_er(spec.er, rng)
                                                  : generate_ba(spec.ba, rng);
        LabeledExample& ex = ds.examples[i];
        ex.labels["density"] = density(g);
        ex.labels["diameter"] = static_cast<double>(diameter(g));
        ex.graph = std::move(g);
    });
    return ds;
}

namespace {

std::string_view trimmed(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

bool parse_int(std::string_view s, long long& out) {
    s = trimmed(s);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line, const std::string& msg) {
    throw DataError(path + ":" + std::to_string(line) + ": " + msg);
}

std::ifstream open_or_fail(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing file: " + path);
    return in;
}

} // namespace

LabeledDataset parse_tu(const std::string& dir, const std::string& name) {
    const std::string base = dir + "/" + name;
    const std::string indicator_path = base + "_graph_indicator.txt";
    const std::string edges_path = base + "_A.txt";
    const std::string labels_path = base + "_graph_labels.txt";

    // node -> graph id, local index
    std::vector<long long> node_graph;
    std::vector<int> node_local;
    std::vector<int> graph_sizes;
    {
        std::ifstream in = open_or_fail(indicator_path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trimmed(line).empty()) continue;
            long long gid = 0;
            if (!parse_int(line, gid))
                parse_fail(indicator_path, lineno, "expected an integer graph id");
            if (gid < 1) parse_fail(indicator_path, lineno, "graph ids must be >= 1");
            if (gid > static_cast<long long>(graph_sizes.size()))
                graph_sizes.resize(static_cast<std::size_t>(gid), 0);
            node_graph.push_back(gid);
            node_local.push_back(graph_sizes[static_cast<std::size_t>(gid - 1)]++);
        }
    }
    if (node_graph.empty()) throw DataError(indicator_path + ": no nodes listed");
    std::size_t num_graphs = graph_sizes.size();
    for (std::size_t g = 0; g < num_graphs; ++g)
        if (graph_sizes[g] == 0)
            throw DataError(indicator_path + ": graph id " + std::to_string(g + 1) +
                            " has no nodes");

    std::vector<std::set<std::pair<int, int>>> edges(num_graphs);
    {
        std::ifstream in = open_or_fail(edges_path);
        std::string line;
        std::size_t lineno = 0;
        long long num_nodes = static_cast<long long>(node_graph.size());
        while (std::getline(in, line)) {
            ++lineno;
            std::string_view sv = trimmed(line);
            if (sv.empty()) continue;
            std::size_t comma = sv.find(',');
            if (comma == std::string_view::npos)
                parse_fail(edges_path, lineno, "expected 'node, node'");
            long long u = 0, v = 0;
            if (!parse_int(sv.substr(0, comma), u) || !parse_int(sv.substr(comma + 1), v))
                parse_fail(edges_path, lineno, "expected integer node ids");
            if (u < 1 || u > num_nodes || v < 1 || v > num_nodes)
                parse_fail(edges_path, lineno, "node id out of range");
            if (u == v) parse_fail(edges_path, lineno, "self-loop is not allowed");
            long long gu = node_graph[static_cast<std::size_t>(u - 1)];
            long long gv = node_graph[static_cast<std::size_t>(v - 1)];
            if (gu != gv)
                parse_fail(edges_path, lineno,
                           "edge crosses graphs " + std::to_string(gu) + " and " +
                               std::to_string(gv));
            int lu = node_local[static_cast<std::size_t>(u - 1)];
            int lv = node_local[static_cast<std::size_t>(v - 1)];
            edges[static_cast<std::size_t>(gu - 1)].emplace(std::min(lu, lv), std::max(lu, lv));
        }
    }

    std::vector<long long> raw_labels;
    {
        std::ifstream in = open_or_fail(labels_path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trimmed(line).empty()) continue;
            long long y = 0;
            if (!parse_int(line, y))
                parse_fail(labels_path, lineno, "expected an integer class label");
            if (raw_labels.size() == num_graphs)
                parse_fail(labels_path, lineno, "more labels than graphs");
            raw_labels.push_back(y);
        }
    }
    if (raw_labels.size() != num_graphs)
        throw DataError(labels_path + ": expected " + std::to_string(num_graphs) +
                        " labels, found " + std::to_string(raw_labels.size()));

    std::vector<long long> distinct = raw_labels;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    auto class_index = [&](long long y) {
        return static_cast<double>(
            std::lower_bound(distinct.begin(), distinct.end(), y) - distinct.begin());
    };

    LabeledDataset ds;
    ds.tasks = {{"class", nn::TaskKind::kClassification, static_cast<int>(distinct.size())},
                {"density", nn::TaskKind::kRegression, 0},
                {"diameter", nn::TaskKind::kRegression, 0}};
    ds.examples.reserve(num_graphs);
    for (std::size_t g = 0; g < num_graphs; ++g) {
        std::vector<std::pair<int, int>> edge_list(edges[g].begin(), edges[g].end());
        LabeledExample ex;
        ex.graph = Graph(graph_sizes[g], edge_list);
        ex.labels["class"] = class_index(raw_labels[g]);
        if (graph_sizes[g] >= 2) ex.labels["density"] = density(ex.graph);
        ex.labels["diameter"] = static_cast<double>(diameter(ex.graph));
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

void featurize_dataset(LabeledDataset& ds, const HksConfig& cfg) {
    cfg.validate();
    parallel_for(ds.examples.size(), [&](std::size_t i) {
        HksHistogram hist = featurize(ds.examples[i].graph, cfg);
        nn::Tensor t({1, cfg.num_bins, cfg.num_steps});
        t.v = std::move(hist.values);
        ds.examples[i].features = std::move(t);
    });
    ds.feature_config = cfg;
}

namespace {

const char* kind_name(nn::TaskKind k) {
    return k == nn::TaskKind::kRegression ? "regression" : "classification";
}

nn::TaskKind kind_from_name(const std::string& s) {
    if (s == "regression") return nn::TaskKind::kRegression;
    if (s == "classification") return nn::TaskKind::kClassification;
    throw DataError("unknown task kind: '" + s + "'");
}

} // namespace

void save_dataset(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open dataset file for writing: " + path);
    nlohmann::json header;
    header["format"] = 1;
    nlohmann::json tasks = nlohmann::json::array();
    for (const TaskInfo& t : ds.tasks)
        tasks.push_back(
            {{"name", t.name}, {"kind", kind_name(t.kind)}, {"num_classes", t.num_classes}});
    header["tasks"] = std::move(tasks);
    if (ds.feature_config) {
        header["feature_config"] = {{"num_steps", ds.feature_config->num_steps},
                                    {"t_min", ds.feature_config->t_min},
                                    {"t_max", ds.feature_config->t_max},
                                    {"num_bins", ds.feature_config->num_bins}};
    }
    out << header.dump() << '\n';
    for (const LabeledExample& ex : ds.examples) {
        nlohmann::json row;
        row["n"] = ex.graph.node_count();
        nlohmann::json edges = nlohmann::json::array();
        for (const auto& [u, v] : ex.graph.edges()) edges.push_back({u, v});
        row["edges"] = std::move(edges);
        row["labels"] = ex.labels;
        if (ex.features) {
            nlohmann::json hks = nlohmann::json::array();
            for (double x : ex.features->v) hks.push_back(nn::f64_to_hex(x));
            row["hks"] = std::move(hks);
        }
        out << row.dump() << '\n';
    }
    if (!out.good()) throw DataError("failed writing dataset file: " + path);
}

LabeledDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file: " + path);
    std::string line;
    std::size_t lineno = 0;
    auto parse_line = [&](const std::string& text) {
        try {
            return nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            parse_fail(path, lineno, std::string("bad JSON: ") + e.what());
        }
    };

    if (!std::getline(in, line)) throw DataError(path + ": empty dataset file");
    ++lineno;
    nlohmann::json header = parse_line(line);
    LabeledDataset ds;
    try {
        if (header.at("format").get<int>() != 1)
            throw DataError(path + ": unsupported dataset format");
        for (const nlohmann::json& t : header.at("tasks")) {
            TaskInfo info;
            info.name = t.at("name").get<std::string>();
            info.kind = kind_from_name(t.at("kind").get<std::string>());
            info.num_classes = t.at("num_classes").get<int>();
            ds.tasks.push_back(std::move(info));
        }
        if (header.contains("feature_config")) {
            const nlohmann::json& fc = header.at("feature_config");
            HksConfig cfg;
            cfg.num_steps = fc.at("num_steps").get<int>();
            cfg.t_min = fc.at("t_min").get<double>();
            cfg.t_max = fc.at("t_max").get<double>();
            cfg.num_bins = fc.at("num_bins").get<int>();
            cfg.validate();
            ds.feature_config = cfg;
        }
    } catch (const nlohmann::json::exception& e) {
        parse_fail(path, lineno, std::string("bad header: ") + e.what());
    }

    while (std::getline(in, line)) {
        ++lineno;
        if (trimmed(line).empty()) continue;
        nlohmann::json row = parse_line(line);
        try {
            int n = row.at("n").get<int>();
            std::vector<std::pair<int, int>> edges;
            for (const nlohmann::json& e : row.at("edges"))
                edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
            LabeledExample ex;
            ex.graph = Graph(n, edges);
            for (const auto& [key, value] : row.at("labels").items()) {
                if (!ds.has_task(key))
                    parse_fail(path, lineno, "label '" + key + "' is not in the task catalog");
                ex.labels[key] = value.get<double>();
            }
            if (row.contains("hks")) {
                if (!ds.feature_config)
                    parse_fail(path, lineno, "hks values present but header has no feature_config");
                const nlohmann::json& hks = row.at("hks");
                std::size_t want = static_cast<std::size_t>(ds.feature_config->num_bins) *
                                   ds.feature_config->num_steps;
                if (hks.size() != want)
                    parse_fail(path, lineno, "hks length does not match feature_config");
                nn::Tensor t({1, ds.feature_config->num_bins, ds.feature_config->num_steps});
                for (std::size_t i = 0; i < want; ++i)
                    t.v[i] = nn::hex_to_f64(hks[i].get<std::string>());
                ex.features = std::move(t);
            }
            ds.examples.push_back(std::move(ex));
        } catch (const nlohmann::json::exception& e) {
            parse_fail(path, lineno, std::string("bad row: ") + e.what());
        } catch (const std::invalid_argument& e) {
            parse_fail(path, lineno, std::string("bad graph: ") + e.what());
        }
    }
    return ds;
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
    if (n < 10) throw std::invalid_argument("split needs at least 10 examples");
    double sum = spec.train_fraction + spec.val_fraction + spec.test_fraction;
    if (spec.train_fraction <= 0.0 || spec.val_fraction < 0.0 || spec.test_fraction < 0.0 ||
        std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must be nonnegative and sum to 1");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(spec.shuffle_seed);
    rng.shuffle(idx);
    auto n_train = static_cast<std::size_t>(spec.train_fraction * static_cast<double>(n));
    auto n_trainval = static_cast<std::size_t>(
        (spec.train_fraction + spec.val_fraction) * static_cast<double>(n));
    SplitIndices out;
    out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                   idx.begin() + static_cast<std::ptrdiff_t>(n_trainval));
    out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_trainval), idx.end());
    if (out.train.empty() || (spec.val_fraction > 0.0 && out.val.empty()) ||
        (spec.test_fraction > 0.0 && out.test.empty()))
        throw std::invalid_argument("split produces an empty subset");
    if (spec.main_task_budget) {
        if (spec.main_task.empty())
            throw std::invalid_argument("main_task must be set when a budget is given");
        if (*spec.main_task_budget > out.train.size())
            throw std::invalid_argument("main task budget exceeds the train split size");
    }
    return out;
}

LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& indices) {
    LabeledDataset out;
    out.tasks = ds.tasks;
    out.feature_config = ds.feature_config;
    out.examples.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= ds.examples.size()) throw std::invalid_argument("subset index out of range");
        out.examples.push_back(ds.examples[i]);
    }
    return out;
}

DatasetSplit split(const LabeledDataset& ds, const SplitSpec& spec) {
    SplitIndices idx = split_indices(ds.size(), spec);
    if (spec.main_task_budget && !ds.has_task(spec.main_task))
        throw std::invalid_argument("unknown main task: " + spec.main_task);
    DatasetSplit out{subset(ds, idx.train), subset(ds, idx.val), subset(ds, idx.test)};
    if (spec.main_task_budget) {
        for (std::size_t i = *spec.main_task_budget; i < out.train.examples.size(); ++i)
            out.train.examples[i].labels.erase(spec.main_task);
    }
    return out;
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("k-fold needs k >= 2");
    if (n < static_cast<std::size_t>(k))
        throw std::invalid_argument("k-fold needs at least k examples");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    std::size_t base = n / static_cast<std::size_t>(k);
    std::size_t rem = n % static_cast<std::size_t>(k);
    std::size_t at = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::size_t len = base + (f < rem ? 1 : 0);
        folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(at),
                        idx.begin() + static_cast<std::ptrdiff_t>(at + len));
        at += len;
    }
    return folds;
}

std::vector<Fold> kfold(const LabeledDataset& ds, int k, std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> folds = kfold_indices(ds.size(), k, seed);
    std::vector<Fold> out;
    out.reserve(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> train_idx;
        train_idx.reserve(ds.size() - folds[f].size());
        for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g == f) continue;
            train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
        }
        out.push_back(Fold{subset(ds, train_idx), subset(ds, folds[f])});
    }
    return out;
}

nn::SampleSet to_samples(const LabeledDataset& ds) {
    nn::SampleSet samples;
    samples.reserve(ds.size());
    for (const LabeledExample& ex : ds.examples) {
        if (!ex.features)
            throw std::invalid_argument("dataset is not featurized; run the hks step first");
        samples.push_back(nn::Sample{*ex.features, ex.labels});
    }
    return samples;
}

} // namespace gd::data
