// JSON run configuration shared by the CLI: generation parameters, flow
// training hyperparameters, mixture manifest, seeds. Round-trips
// losslessly; a content hash stamps every output tree.

#ifndef VFORGE_CONFIG_HPP
#define VFORGE_CONFIG_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "vforge/compose.hpp"
#include "vforge/sampler.hpp"

namespace vforge::config {

using nlohmann::json;

json to_json(const drand::DrandConfig& c);
drand::DrandConfig drand_from_json(const json& j);

struct FlowTrainConfig {
    int hidden = 16;
    int embed = 8;
    int classes = 24;  // ids 0..23
    int steps = 3000;
    double lr = 0.05;
    int batch = 4;
    int toy_per_class = 8;
    int toy_side = 16;
    uint64_t seed = 0;
};
json to_json(const FlowTrainConfig& c);
FlowTrainConfig flow_from_json(const json& j);

struct ManifestSource {
    std::string kind;  // "drand" | "real" | "flow"
    int class_id = 0;
    int64_t count = 0;
    std::string dir;  // for real/flow: %06d_img.nii.gz / %06d_lbl.nii.gz
};

struct Manifest {
    std::vector<ManifestSource> sources;
    std::vector<int> exclude_classes;
    drand::DrandConfig drand = drand::DrandConfig::defaults();
};
Manifest manifest_from_json(const json& j);
json to_json(const Manifest& m);

// FNV-1a over the canonical dump; stamped into output paths and sidecars.
std::string content_hash(const json& j);

json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const json& j);

}  // namespace vforge::config

#endif
