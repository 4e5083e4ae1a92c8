#ifndef GRAPHDISTILL_CHECKPOINT_HPP
#define GRAPHDISTILL_CHECKPOINT_HPP

#include <string>

#include <json.hpp>

#include "graphdistill/nn.hpp"

namespace gd::nn {

/// Lossless text encoding of a 64-bit float (16 hex digits of the bit pattern).
std::string f64_to_hex(double x);
double hex_to_f64(const std::string& s);

struct LoadedModel {
    MultiTaskNet net;
    nlohmann::json extras;
};

/// Writes a versioned JSON checkpoint: config, label stats, every parameter
/// tensor with bit-exact values, plus caller-owned extras.
void save_model(const MultiTaskNet& net, const std::string& path,
                const nlohmann::json& extras = nlohmann::json::object());

LoadedModel load_model(const std::string& path);

} // namespace gd::nn

#endif
