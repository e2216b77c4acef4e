#include "vforge/config.hpp"

#include <cstdio>
#include <fstream>

namespace vforge::config {

namespace {

json range_json(const drand::Range& r) { return json{r.lo, r.hi}; }
drand::Range range_from(const json& j) { return {j.at(0).get<float>(), j.at(1).get<float>()}; }
json irange_json(const drand::IntRange& r) { return json{r.lo, r.hi}; }
drand::IntRange irange_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }
json shape_json(const Shape& s) { return json{s.d, s.h, s.w}; }
Shape shape_from(const json& j) {
    return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()};
}

}  // namespace

json to_json(const drand::DrandConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["target"] = shape_json(c.target);
    j["patch_dir"] = c.patch_dir;

    json tree;
    tree["n_trees"] = irange_json(c.tree.n_trees);
    tree["steps"] = irange_json(c.tree.steps);
    tree["branch_prob"] = c.tree.branch_prob;
    tree["radius"] = range_json(c.tree.radius);
    tree["taper"] = c.tree.taper;
    tree["tortuosity"] = c.tree.tortuosity;
    tree["bounds"] = shape_json(c.tree.bounds);
    tree["min_fraction"] = c.tree.min_fraction;
    tree["max_fraction"] = c.tree.max_fraction;
    tree["max_retries"] = c.tree.max_retries;
    tree["max_branches"] = c.tree.max_branches;
    j["tree"] = tree;

    json sp;
    sp["crop_target"] = shape_json(c.spatial.crop_target);
    sp["flip_rotate"] = c.spatial.flip_rotate;
    sp["dilation_radius"] = irange_json(c.spatial.dilation_radius);
    sp["zoom"] = range_json(c.spatial.zoom);
    sp["elastic_spacing"] = c.spatial.elastic_spacing;
    sp["elastic_sigma"] = range_json(c.spatial.elastic_sigma);
    sp["elastic_magnitude"] = range_json(c.spatial.elastic_magnitude);
    sp["smooth_sigma"] = range_json(c.spatial.smooth_sigma);
    sp["smooth_threshold"] = c.spatial.smooth_threshold;
    sp["max_retries"] = c.spatial.max_retries;
    j["spatial"] = sp;

    json ar;
    ar["bias_amplitude"] = range_json(c.artifact.bias_amplitude);
    ar["noise_sigma"] = range_json(c.artifact.noise_sigma);
    ar["smooth_sigma"] = range_json(c.artifact.smooth_sigma);
    ar["dropout_max_fraction"] = c.artifact.dropout_max_fraction;
    ar["dropout_blob_radius"] = irange_json(c.artifact.dropout_blob_radius);
    ar["shift_max"] = c.artifact.shift_max;
    ar["weights"] = c.artifact.weights;
    j["artifact"] = ar;

    json bg;
    bg["geometry_weights"] = c.background.geometry_weights;
    bg["n_spheres"] = irange_json(c.background.n_spheres);
    bg["sphere_radius"] = range_json(c.background.sphere_radius);
    bg["n_voronoi_seeds"] = irange_json(c.background.n_voronoi_seeds);
    bg["plain_prob"] = c.background.plain_prob;
    bg["perlin_octaves"] = irange_json(c.background.perlin.octaves);
    bg["perlin_base_freq"] = json{c.background.perlin.base_freq_lo, c.background.perlin.base_freq_hi};
    bg["perlin_persistence"] = c.background.perlin.persistence;
    bg["per_region_redraw"] = c.background.per_region_redraw;
    bg["sphere_trials_factor"] = c.background.sphere_trials_factor;
    j["background"] = bg;

    json mg;
    mg["mode_weights"] = c.merge.mode_weights;
    mg["delta"] = c.merge.delta;
    j["merge"] = mg;

    json ch;
    ch["p_bias"] = c.chain.p_bias;
    ch["bias_amplitude"] = range_json(c.chain.bias_amplitude);
    ch["p_noise"] = c.chain.p_noise;
    ch["noise_sigma"] = range_json(c.chain.noise_sigma);
    ch["p_spike"] = c.chain.p_spike;
    ch["n_spikes"] = irange_json(c.chain.n_spikes);
    ch["spike_factor"] = range_json(c.chain.spike_factor);
    ch["p_contrast"] = c.chain.p_contrast;
    ch["gamma"] = range_json(c.chain.gamma);
    ch["p_smooth"] = c.chain.p_smooth;
    ch["smooth_sigma"] = range_json(c.chain.smooth_sigma);
    ch["shared_sigma_prob"] = c.chain.shared_sigma_prob;
    ch["p_rician"] = c.chain.p_rician;
    ch["rician_sigma"] = range_json(c.chain.rician_sigma);
    ch["p_gibbs"] = c.chain.p_gibbs;
    ch["gibbs_cutoff"] = range_json(c.chain.gibbs_cutoff);
    ch["p_sharpen"] = c.chain.p_sharpen;
    ch["sharpen_alpha"] = range_json(c.chain.sharpen_alpha);
    ch["sharpen_sigma"] = range_json(c.chain.sharpen_sigma);
    ch["p_hist"] = c.chain.p_hist;
    ch["hist_points"] = irange_json(c.chain.hist_points);
    j["chain"] = ch;
    return j;
}

drand::DrandConfig drand_from_json(const json& j) {
    drand::DrandConfig c;
    c.seed = j.value("seed", uint64_t(0));
    if (j.contains("target")) c.target = shape_from(j.at("target"));
    c.patch_dir = j.value("patch_dir", std::string());

    if (j.contains("tree")) {
        const json& t = j.at("tree");
        if (t.contains("n_trees")) c.tree.n_trees = irange_from(t.at("n_trees"));
        if (t.contains("steps")) c.tree.steps = irange_from(t.at("steps"));
        c.tree.branch_prob = t.value("branch_prob", c.tree.branch_prob);
        if (t.contains("radius")) c.tree.radius = range_from(t.at("radius"));
        c.tree.taper = t.value("taper", c.tree.taper);
        c.tree.tortuosity = t.value("tortuosity", c.tree.tortuosity);
        if (t.contains("bounds")) c.tree.bounds = shape_from(t.at("bounds"));
        c.tree.min_fraction = t.value("min_fraction", c.tree.min_fraction);
        c.tree.max_fraction = t.value("max_fraction", c.tree.max_fraction);
        c.tree.max_retries = t.value("max_retries", c.tree.max_retries);
        c.tree.max_branches = t.value("max_branches", c.tree.max_branches);
    }
    if (j.contains("spatial")) {
        const json& t = j.at("spatial");
        if (t.contains("crop_target")) c.spatial.crop_target = shape_from(t.at("crop_target"));
        c.spatial.flip_rotate = t.value("flip_rotate", c.spatial.flip_rotate);
        if (t.contains("dilation_radius"))
            c.spatial.dilation_radius = irange_from(t.at("dilation_radius"));
        if (t.contains("zoom")) c.spatial.zoom = range_from(t.at("zoom"));
        c.spatial.elastic_spacing = t.value("elastic_spacing", c.spatial.elastic_spacing);
        if (t.contains("elastic_sigma")) c.spatial.elastic_sigma = range_from(t.at("elastic_sigma"));
        if (t.contains("elastic_magnitude"))
            c.spatial.elastic_magnitude = range_from(t.at("elastic_magnitude"));
        if (t.contains("smooth_sigma")) c.spatial.smooth_sigma = range_from(t.at("smooth_sigma"));
        c.spatial.smooth_threshold = t.value("smooth_threshold", c.spatial.smooth_threshold);
        c.spatial.max_retries = t.value("max_retries", c.spatial.max_retries);
    }
    if (j.contains("artifact")) {
        const json& t = j.at("artifact");
        if (t.contains("bias_amplitude")) c.artifact.bias_amplitude = range_from(t.at("bias_amplitude"));
        if (t.contains("noise_sigma")) c.artifact.noise_sigma = range_from(t.at("noise_sigma"));
        if (t.contains("smooth_sigma")) c.artifact.smooth_sigma = range_from(t.at("smooth_sigma"));
        c.artifact.dropout_max_fraction =
            t.value("dropout_max_fraction", c.artifact.dropout_max_fraction);
        if (t.contains("dropout_blob_radius"))
            c.artifact.dropout_blob_radius = irange_from(t.at("dropout_blob_radius"));
        c.artifact.shift_max = t.value("shift_max", c.artifact.shift_max);
        if (t.contains("weights")) c.artifact.weights = t.at("weights").get<std::array<double, 7>>();
    }
    if (j.contains("background")) {
        const json& t = j.at("background");
        if (t.contains("geometry_weights"))
            c.background.geometry_weights = t.at("geometry_weights").get<std::array<double, 3>>();
        if (t.contains("n_spheres")) c.background.n_spheres = irange_from(t.at("n_spheres"));
        if (t.contains("sphere_radius")) c.background.sphere_radius = range_from(t.at("sphere_radius"));
        if (t.contains("n_voronoi_seeds"))
            c.background.n_voronoi_seeds = irange_from(t.at("n_voronoi_seeds"));
        c.background.plain_prob = t.value("plain_prob", c.background.plain_prob);
        if (t.contains("perlin_octaves"))
            c.background.perlin.octaves = irange_from(t.at("perlin_octaves"));
        if (t.contains("perlin_base_freq")) {
            c.background.perlin.base_freq_lo = t.at("perlin_base_freq").at(0).get<double>();
            c.background.perlin.base_freq_hi = t.at("perlin_base_freq").at(1).get<double>();
        }
        c.background.perlin.persistence =
            t.value("perlin_persistence", c.background.perlin.persistence);
        c.background.per_region_redraw =
            t.value("per_region_redraw", c.background.per_region_redraw);
        c.background.sphere_trials_factor =
            t.value("sphere_trials_factor", c.background.sphere_trials_factor);
    }
    if (j.contains("merge")) {
        const json& t = j.at("merge");
        if (t.contains("mode_weights"))
            c.merge.mode_weights = t.at("mode_weights").get<std::array<double, 3>>();
        c.merge.delta = t.value("delta", c.merge.delta);
    }
    if (j.contains("chain")) {
        const json& t = j.at("chain");
        c.chain.p_bias = t.value("p_bias", c.chain.p_bias);
        if (t.contains("bias_amplitude")) c.chain.bias_amplitude = range_from(t.at("bias_amplitude"));
        c.chain.p_noise = t.value("p_noise", c.chain.p_noise);
        if (t.contains("noise_sigma")) c.chain.noise_sigma = range_from(t.at("noise_sigma"));
        c.chain.p_spike = t.value("p_spike", c.chain.p_spike);
        if (t.contains("n_spikes")) c.chain.n_spikes = irange_from(t.at("n_spikes"));
        if (t.contains("spike_factor")) c.chain.spike_factor = range_from(t.at("spike_factor"));
        c.chain.p_contrast = t.value("p_contrast", c.chain.p_contrast);
        if (t.contains("gamma")) c.chain.gamma = range_from(t.at("gamma"));
        c.chain.p_smooth = t.value("p_smooth", c.chain.p_smooth);
        if (t.contains("smooth_sigma")) c.chain.smooth_sigma = range_from(t.at("smooth_sigma"));
        c.chain.shared_sigma_prob = t.value("shared_sigma_prob", c.chain.shared_sigma_prob);
        c.chain.p_rician = t.value("p_rician", c.chain.p_rician);
        if (t.contains("rician_sigma")) c.chain.rician_sigma = range_from(t.at("rician_sigma"));
        c.chain.p_gibbs = t.value("p_gibbs", c.chain.p_gibbs);
        if (t.contains("gibbs_cutoff")) c.chain.gibbs_cutoff = range_from(t.at("gibbs_cutoff"));
        c.chain.p_sharpen = t.value("p_sharpen", c.chain.p_sharpen);
        if (t.contains("sharpen_alpha")) c.chain.sharpen_alpha = range_from(t.at("sharpen_alpha"));
        if (t.contains("sharpen_sigma")) c.chain.sharpen_sigma = range_from(t.at("sharpen_sigma"));
        c.chain.p_hist = t.value("p_hist", c.chain.p_hist);
        if (t.contains("hist_points")) c.chain.hist_points = irange_from(t.at("hist_points"));
    }
    return c;
}

json to_json(const FlowTrainConfig& c) {
    return json{{"hidden", c.hidden},   {"embed", c.embed},
                {"classes", c.classes}, {"steps", c.steps},
                {"lr", c.lr},           {"batch", c.batch},
                {"toy_per_class", c.toy_per_class}, {"toy_side", c.toy_side},
                {"seed", c.seed}};
}

FlowTrainConfig flow_from_json(const json& j) {
    FlowTrainConfig c;
    c.hidden = j.value("hidden", c.hidden);
    c.embed = j.value("embed", c.embed);
    c.classes = j.value("classes", c.classes);
    c.steps = j.value("steps", c.steps);
    c.lr = j.value("lr", c.lr);
    c.batch = j.value("batch", c.batch);
    c.toy_per_class = j.value("toy_per_class", c.toy_per_class);
    c.toy_side = j.value("toy_side", c.toy_side);
    c.seed = j.value("seed", c.seed);
    return c;
}

Manifest manifest_from_json(const json& j) {
    Manifest m;
    for (const auto& s : j.at("sources")) {
        ManifestSource src;
        src.kind = s.at("kind").get<std::string>();
        if (src.kind != "drand" && src.kind != "real" && src.kind != "flow")
            throw Error("bad-manifest", "unknown source kind: " + src.kind);
        src.class_id = s.value("class", 0);
        src.count = s.value("count", int64_t(0));
        src.dir = s.value("dir", std::string());
        m.sources.push_back(src);
    }
    if (j.contains("exclude_classes"))
        m.exclude_classes = j.at("exclude_classes").get<std::vector<int>>();
    if (j.contains("drand")) m.drand = drand_from_json(j.at("drand"));
    return m;
}

json to_json(const Manifest& m) {
    json sources = json::array();
    for (const auto& s : m.sources)
        sources.push_back(
            json{{"kind", s.kind}, {"class", s.class_id}, {"count", s.count}, {"dir", s.dir}});
    return json{{"sources", sources},
                {"exclude_classes", m.exclude_classes},
                {"drand", to_json(m.drand)}};
}

std::string content_hash(const json& j) {
    std::string s = j.dump();
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf, 16);
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io-failure", "cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error("bad-json", "invalid JSON in " + path);
    return j;
}

void save_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("io-failure", "cannot open " + path);
    out << j.dump(2) << "\n";
}

}  // namespace vforge::config
