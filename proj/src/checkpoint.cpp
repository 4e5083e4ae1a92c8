#include "graphdistill/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "graphdistill/errors.hpp"

namespace gd::nn {

std::string f64_to_hex(double x) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(bits));
    return std::string(buf, 16);
}

double hex_to_f64(const std::string& s) {
    if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos)
        throw DataError("invalid float encoding: '" + s + "'");
    std::uint64_t bits = std::stoull(s, nullptr, 16);
    return std::bit_cast<double>(bits);
}

namespace {

const char* kind_name(TaskKind k) {
    return k == TaskKind::kRegression ? "regression" : "classification";
}

TaskKind kind_from_name(const std::string& s) {
    if (s == "regression") return TaskKind::kRegression;
    if (s == "classification") return TaskKind::kClassification;
    throw DataError("unknown task kind: '" + s + "'");
}

nlohmann::json conv_to_json(const ConvSpec& c) {
    return {{"kernel", c.kernel}, {"filters", c.filters}};
}

ConvSpec conv_from_json(const nlohmann::json& j) {
    ConvSpec c;
    c.kernel = j.at("kernel").get<int>();
    c.filters = j.at("filters").get<int>();
    return c;
}

} // namespace

void save_model(const MultiTaskNet& net, const std::string& path, const nlohmann::json& extras) {
    nlohmann::json cfg;
    cfg["input_bins"] = net.cfg.input_bins;
    cfg["input_steps"] = net.cfg.input_steps;
    cfg["conv1"] = conv_to_json(net.cfg.conv1);
    cfg["conv2"] = conv_to_json(net.cfg.conv2);
    cfg["fc_shared_units"] = net.cfg.fc_shared_units;
    cfg["head_units"] = net.cfg.head_units;
    cfg["rng_seed"] = net.cfg.rng_seed;
    nlohmann::json tasks = nlohmann::json::array();
    for (const TaskSpec& t : net.cfg.tasks) {
        tasks.push_back({{"name", t.name},
                         {"kind", kind_name(t.kind)},
                         {"num_classes", t.num_classes},
                         {"weight", t.weight}});
    }
    cfg["tasks"] = std::move(tasks);

    nlohmann::json stats = nlohmann::json::array();
    for (const TaskStats& s : net.stats)
        stats.push_back({{"mean", f64_to_hex(s.mean)}, {"stddev", f64_to_hex(s.stddev)}});

    nlohmann::json params = nlohmann::json::array();
    for (const Param& p : net.params) {
        nlohmann::json values = nlohmann::json::array();
        for (double x : p.value.v) values.push_back(f64_to_hex(x));
        params.push_back(
            {{"name", p.name}, {"shape", p.value.shape}, {"values", std::move(values)}});
    }

    nlohmann::json j;
    j["format"] = 1;
    j["config"] = std::move(cfg);
    j["task_stats"] = std::move(stats);
    j["step_count"] = net.step_count;
    j["extras"] = extras;
    j["params"] = std::move(params);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open model file for writing: " + path);
    out << j.dump() << '\n';
    if (!out.good()) throw DataError("failed writing model file: " + path);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid model file " + path + ": " + e.what());
    }
    try {
        if (j.at("format").get<int>() != 1)
            throw DataError("unsupported model format in " + path);
        const nlohmann::json& cfg_j = j.at("config");
        NetConfig cfg;
        cfg.input_bins = cfg_j.at("input_bins").get<int>();
        cfg.input_steps = cfg_j.at("input_steps").get<int>();
        cfg.conv1 = conv_from_json(cfg_j.at("conv1"));
        cfg.conv2 = conv_from_json(cfg_j.at("conv2"));
        cfg.fc_shared_units = cfg_j.at("fc_shared_units").get<int>();
        cfg.head_units = cfg_j.at("head_units").get<int>();
        cfg.rng_seed = cfg_j.at("rng_seed").get<std::uint64_t>();
        for (const nlohmann::json& t : cfg_j.at("tasks")) {
            TaskSpec spec;
            spec.name = t.at("name").get<std::string>();
            spec.kind = kind_from_name(t.at("kind").get<std::string>());
            spec.num_classes = t.at("num_classes").get<int>();
            spec.weight = t.at("weight").get<double>();
            cfg.tasks.push_back(std::move(spec));
        }

        LoadedModel loaded;
        loaded.net = MultiTaskNet(cfg);
        MultiTaskNet& net = loaded.net;

        const nlohmann::json& params = j.at("params");
        if (params.size() != net.params.size())
            throw DataError("parameter count mismatch in " + path);
        for (std::size_t i = 0; i < net.params.size(); ++i) {
            const nlohmann::json& p = params[i];
            if (p.at("name").get<std::string>() != net.params[i].name)
                throw DataError("parameter name mismatch in " + path + ": expected " +
                                net.params[i].name);
            std::vector<int> shape = p.at("shape").get<std::vector<int>>();
            if (shape != net.params[i].value.shape)
                throw DataError("parameter shape mismatch for " + net.params[i].name);
            const nlohmann::json& values = p.at("values");
            if (values.size() != net.params[i].value.size())
                throw DataError("parameter value count mismatch for " + net.params[i].name);
            for (std::size_t v = 0; v < values.size(); ++v)
                net.params[i].value.v[v] = hex_to_f64(values[v].get<std::string>());
        }

        const nlohmann::json& stats = j.at("task_stats");
        if (stats.size() != net.cfg.tasks.size())
            throw DataError("task stats count mismatch in " + path);
        for (std::size_t k = 0; k < stats.size(); ++k) {
            net.stats[k].mean = hex_to_f64(stats[k].at("mean").get<std::string>());
            net.stats[k].stddev = hex_to_f64(stats[k].at("stddev").get<std::string>());
        }

        net.step_count = j.value("step_count", std::int64_t{0});
        loaded.extras = j.value("extras", nlohmann::json::object());
        return loaded;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid model file " + path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError("invalid model config in " + path + ": " + e.what());
    }
}

} // namespace gd::nn
