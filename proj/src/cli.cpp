#include "vforge/cli.hpp"

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vforge/compose.hpp"
#include "vforge/config.hpp"
#include "vforge/flow.hpp"
#include "vforge/metrics.hpp"
#include "vforge/nifti.hpp"
#include "vforge/preprocess.hpp"
#include "vforge/sampler.hpp"

namespace vforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SeedFlag {
    uint64_t value = 0;
    bool set = false;
};

void add_seed_flag(CLI::App* cmd, SeedFlag& seed) {
    cmd->add_option_function<uint64_t>(
        "--seed", [&seed](uint64_t v) { seed.value = v; seed.set = true; },
        "Base seed (overrides VESSELFORGE_SEED and config)");
}

uint64_t resolve_seed(const SeedFlag& flag, uint64_t config_seed) {
    if (flag.set) return flag.value;
    if (const char* env = std::getenv("VESSELFORGE_SEED")) return std::strtoull(env, nullptr, 10);
    return config_seed;
}

std::string sample_name(int64_t index, const char* role) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%06lld_%s.nii.gz", static_cast<long long>(index), role);
    return buf;
}

json meta_json(const drand::DrandMeta& m, const std::string& hash, int class_id) {
    json stages = json::array();
    for (int i = 0; i < drand::kChainStages; ++i)
        if (m.chain_applied[size_t(i)]) stages.push_back(drand::kChainStageNames[i]);
    return json{{"seed", m.seed},
                {"stream", m.index},
                {"config_hash", hash},
                {"class", class_id},
                {"artifact", drand::artifact_name(m.artifact)},
                {"geometry", drand::geometry_name(m.geometry)},
                {"merge", drand::merge_name(m.merge)},
                {"chain_stages", stages},
                {"i_m", m.i_m},
                {"i_b_mu", m.i_b_mu}};
}

drand::DrandConfig load_drand_config(const std::string& config_path, int size,
                                     const SeedFlag& seed) {
    drand::DrandConfig cfg =
        config_path.empty() ? drand::DrandConfig::defaults(size)
                            : config::drand_from_json(config::load_json_file(config_path));
    cfg.seed = resolve_seed(seed, cfg.seed);
    return cfg;
}

int run_gen_drand(const std::string& config_path, int size, const SeedFlag& seed, int64_t count,
                  const std::string& out, int workers, bool masks_only) {
    drand::DrandConfig cfg = load_drand_config(config_path, size, seed);
    std::string hash = config::content_hash(config::to_json(cfg));
    fs::path dir = fs::path(out) / hash;
    fs::create_directories(dir);
    config::save_json_file((dir / "config.json").string(), config::to_json(cfg));

    drand::PatchSet patches;
    if (!cfg.patch_dir.empty()) patches = drand::scan_patch_dir(cfg.patch_dir);
    const drand::PatchSet* patch_ptr = patches.empty() ? nullptr : &patches;

    std::string failure;
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (int64_t i = 0; i < count; ++i) {
        try {
            if (masks_only) {
                Rng rng(cfg.seed, uint64_t(i));
                BinaryMask patch = patch_ptr ? drand::load_patch(*patch_ptr, rng)
                                             : drand::generate_vessel_patch(cfg.tree, rng);
                BinaryMask label = drand::apply_spatial_mask_transforms(patch, cfg.spatial, rng);
                io::write_mask((dir / sample_name(i, "mask")).string(), label);
                json meta{{"seed", cfg.seed}, {"stream", i}, {"config_hash", hash}};
                config::save_json_file((dir / (sample_name(i, "mask") + ".json")).string(), meta);
            } else {
                drand::DrandSample s = drand::generate_drand_pair(cfg, uint64_t(i), patch_ptr);
                io::write_volume((dir / sample_name(i, "img")).string(), s.image);
                io::write_mask((dir / sample_name(i, "lbl")).string(), s.label);
                config::save_json_file((dir / (sample_name(i, "img") + ".json")).string(),
                                       meta_json(s.meta, hash, s.class_id));
            }
        } catch (const std::exception& e) {
#pragma omp critical
            failure = e.what();
        }
    }
    if (!failure.empty()) throw Error("generation-failed", failure);
    std::printf("wrote %lld %s to %s\n", static_cast<long long>(count),
                masks_only ? "masks" : "pairs", dir.string().c_str());
    return 0;
}

int run_train_toy(const config::FlowTrainConfig& cfg_in, const SeedFlag& seed,
                  const std::string& out) {
    config::FlowTrainConfig cfg = cfg_in;
    cfg.seed = resolve_seed(seed, cfg.seed);
    std::string hash = config::content_hash(config::to_json(cfg));
    fs::path dir = fs::path(out) / hash;
    fs::create_directories(dir);
    config::save_json_file((dir / "config.json").string(), config::to_json(cfg));

    Shape shape{cfg.toy_side, cfg.toy_side, cfg.toy_side};
    auto data = flow::make_toy_dataset(shape, cfg.toy_per_class, cfg.seed);
    flow::MlpField field(cfg.hidden, cfg.embed, cfg.classes, cfg.seed);
    Rng rng(cfg.seed, 1);
    flow::TrainResult result = flow::train_toy(field, data, cfg.steps, cfg.lr, cfg.batch, rng);

    flow::write_loss_trace_csv((dir / "loss.csv").string(), result.trace);
    if (result.diverged) throw Error("divergence", "training loss exceeded 1e6");
    flow::save_field(field, (dir / "field.vff").string());
    std::printf("trained field: %s final loss %.6f\n", (dir / "field.vff").string().c_str(),
                result.trace.empty() ? 0.0 : result.trace.back());
    return 0;
}

int run_fm_sample(const std::string& field_path, const std::string& mask_path, int class_id,
                  int steps, const SeedFlag& seed, const std::string& out) {
    auto field = flow::load_field(field_path);
    BinaryMask mask = io::read_mask(mask_path);
    uint64_t s = resolve_seed(seed, 0);
    Rng rng(s, 0);
    Volume x0(mask.shape);
    for (auto& v : x0.data) v = float(rng.normal());
    Volume img = flow::euler_sample(*field, std::move(x0), mask, class_id,
                                    flow::EulerSchedule{steps});
    io::write_volume(out, img);
    json meta{{"field", field_path}, {"mask", mask_path},  {"class", class_id},
              {"tilde", true},       {"steps", steps},     {"seed", s}};
    config::save_json_file(out + ".json", meta);
    std::printf("sampled %s (class ~%d, %d steps)\n", out.c_str(), class_id, steps);
    return 0;
}

int run_metrics(bool want_cldice, const std::string& pred_path, const std::string& gt_path,
                const std::string& csv) {
    BinaryMask pred = io::read_mask(pred_path);
    BinaryMask gt = io::read_mask(gt_path);
    if (!want_cldice) {
        std::printf("dice %.6f\n", metrics::dice(pred, gt));
        return 0;
    }
    metrics::MetricReport r = metrics::cldice(pred, gt);
    std::printf("dice %.6f\ncldice %.6f\ntprec %.6f\ntsens %.6f\n", r.dice, r.cldice, r.tprec,
                r.tsens);
    std::printf("pred %lld gt %lld inter %lld skel_pred %lld skel_gt %lld\n",
                static_cast<long long>(r.n_pred), static_cast<long long>(r.n_gt),
                static_cast<long long>(r.n_inter), static_cast<long long>(r.skel_pred),
                static_cast<long long>(r.skel_gt));
    if (!csv.empty()) {
        bool fresh = !fs::exists(csv);
        FILE* f = std::fopen(csv.c_str(), "a");
        if (!f) throw Error("io-failure", "cannot open " + csv);
        if (fresh) std::fprintf(f, "pred,gt,dice,cldice,tprec,tsens\n");
        std::fprintf(f, "%s,%s,%.6f,%.6f,%.6f,%.6f\n", pred_path.c_str(), gt_path.c_str(), r.dice,
                     r.cldice, r.tprec, r.tsens);
        std::fclose(f);
    }
    return 0;
}

Spacing parse_spacing(const std::string& text) {
    Spacing sp;
    if (std::sscanf(text.c_str(), "%f,%f,%f", &sp.z, &sp.y, &sp.x) != 3)
        throw Error("bad-spacing", "expected z,y,x");
    return sp;
}

int run_mix(const std::string& manifest_path, const std::string& weights_text, int64_t count,
            const SeedFlag& seed, const std::string& out) {
    config::Manifest manifest = config::manifest_from_json(config::load_json_file(manifest_path));
    sampler::SourceWeights weights;
    if (std::sscanf(weights_text.c_str(), "%lf,%lf,%lf", &weights.drand, &weights.real,
                    &weights.flow) != 3)
        throw Error("bad-weights", "expected drand,real,flow");
    weights.validate();

    uint64_t s = resolve_seed(seed, manifest.drand.seed);
    json run_cfg = config::to_json(manifest);
    run_cfg["weights"] = {weights.drand, weights.real, weights.flow};
    run_cfg["seed"] = s;
    std::string hash = config::content_hash(run_cfg);
    fs::path dir = fs::path(out) / hash;
    fs::create_directories(dir);
    config::save_json_file((dir / "config.json").string(), run_cfg);

    drand::DrandConfig drand_cfg = manifest.drand;
    drand_cfg.seed = s;

    std::vector<sampler::SourceRegistration> sources;
    for (const auto& ms : manifest.sources) {
        sampler::SourceRegistration reg;
        reg.class_id = ms.class_id;
        reg.count = ms.count;
        if (ms.kind == "drand") {
            reg.kind = sampler::SourceKind::Drand;
            reg.class_id = 0;
            reg.fetch = [drand_cfg](int64_t idx) {
                drand::DrandSample smp = drand::generate_drand_pair(drand_cfg, uint64_t(idx));
                return std::make_pair(std::move(smp.image), std::move(smp.label));
            };
        } else {
            reg.kind = ms.kind == "real" ? sampler::SourceKind::Real : sampler::SourceKind::Flow;
            std::string base = ms.dir;
            reg.fetch = [base](int64_t idx) {
                Volume img = io::read_image((fs::path(base) / sample_name(idx, "img")).string());
                BinaryMask lbl = io::read_mask((fs::path(base) / sample_name(idx, "lbl")).string());
                return std::make_pair(std::move(img), std::move(lbl));
            };
        }
        sources.push_back(std::move(reg));
    }

    sampler::ClassCatalog catalog;
    for (int c : manifest.exclude_classes) catalog.excluded.insert(c);
    sampler::EpochStream stream(std::move(sources), weights, catalog, {}, s);

    for (int64_t k = 0; k < count; ++k) {
        sampler::StreamItem item = stream.next();
        io::write_volume((dir / sample_name(k, "img")).string(), item.image);
        io::write_mask((dir / sample_name(k, "lbl")).string(), item.label);
        json prov{{"position", item.provenance.position},
                  {"source", sampler::source_name(item.provenance.kind)},
                  {"class", item.provenance.class_id},
                  {"index", item.provenance.index},
                  {"tilde", item.provenance.synthetic_origin},
                  {"config_hash", hash},
                  {"seed", s}};
        config::save_json_file((dir / (sample_name(k, "img") + ".json")).string(), prov);
    }
    std::printf("wrote %lld mixed samples to %s\n", static_cast<long long>(count),
                dir.string().c_str());
    return 0;
}

int dispatch_impl(int argc, const char* const* argv) {
    CLI::App app{"vesselforge: synthetic 3D vessel image-mask generation, "
                 "flow-matching toys, metrics, and preprocessing"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate synthetic masks or image-mask pairs");
    gen->require_subcommand(1);
    struct {
        std::string config, out = "out";
        int64_t count = 1;
        int size = 128, workers = 1;
        SeedFlag seed;
    } g;
    for (const char* name : {"masks", "drand"}) {
        auto* cmd = gen->add_subcommand(name);
        cmd->add_option("--count", g.count, "Number of samples");
        cmd->add_option("--config", g.config, "DrandConfig JSON file");
        cmd->add_option("--out", g.out, "Output directory (hash subdir created)");
        cmd->add_option("--size", g.size, "Cubic target side when no config given");
        cmd->add_option("--workers", g.workers, "Parallel workers over sample indices");
        add_seed_flag(cmd, g.seed);
    }

    // fm
    auto* fm = app.add_subcommand("fm", "Flow-matching toy training and sampling");
    fm->require_subcommand(1);
    config::FlowTrainConfig ft;
    struct {
        std::string out = "out";
        SeedFlag seed;
    } t;
    auto* train = fm->add_subcommand("train-toy", "Train the reference field on the toy dataset");
    train->add_option("--steps", ft.steps, "SGD steps");
    train->add_option("--lr", ft.lr, "Learning rate");
    train->add_option("--batch", ft.batch, "Batch size");
    train->add_option("--hidden", ft.hidden, "Hidden units");
    train->add_option("--embed", ft.embed, "Embedding width");
    train->add_option("--per-class", ft.toy_per_class, "Toy samples per class");
    train->add_option("--side", ft.toy_side, "Toy volume side");
    train->add_option("--out", t.out, "Output directory (hash subdir created)");
    add_seed_flag(train, t.seed);

    struct {
        std::string field, mask, out = "sample.nii.gz";
        int class_id = 1, steps = 100;
        SeedFlag seed;
    } fs_;
    auto* sample = fm->add_subcommand("sample", "Euler-sample an image conditioned on a mask");
    sample->add_option("--field", fs_.field, "Field file (.vff)")->required();
    sample->add_option("--mask", fs_.mask, "Conditioning mask volume")->required();
    sample->add_option("--class", fs_.class_id, "Class id");
    sample->add_option("--steps", fs_.steps, "Euler steps N");
    sample->add_option("--out", fs_.out, "Output image path");
    add_seed_flag(sample, fs_.seed);

    // metrics
    auto* met = app.add_subcommand("metrics", "Dice / clDice between two masks");
    met->require_subcommand(1);
    struct {
        std::string pred, gt, csv;
    } m;
    for (const char* name : {"dice", "cldice"}) {
        auto* cmd = met->add_subcommand(name);
        cmd->add_option("--pred", m.pred, "Prediction mask")->required();
        cmd->add_option("--gt", m.gt, "Ground-truth mask")->required();
        if (std::string(name) == "cldice") cmd->add_option("--csv", m.csv, "Append a CSV row");
    }

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "Dataset conditioning operations");
    pre->require_subcommand(1);
    struct {
        std::string in, out, image, label, out_dir = "patches";
        double low = 0.0, high = 98.0;
        std::string spacing = "1,1,1";
        float sigma = 1.f, tau = 0.5f;
        float delta = 0.1f, thresh = 0.9f;
        int size = 11;
        int64_t min_size = 64;
        int target = 128, stride = 128;
        bool no_pad = false;
    } p;
    auto* clip = pre->add_subcommand("clip", "Percentile clip + rescale to [0,1]");
    clip->add_option("--in", p.in)->required();
    clip->add_option("--out", p.out)->required();
    clip->add_option("--low", p.low, "Low percentile");
    clip->add_option("--high", p.high, "High percentile");

    auto* resample = pre->add_subcommand("resample", "Resample to a target voxel spacing");
    resample->add_option("--in", p.in)->required();
    resample->add_option("--out", p.out)->required();
    resample->add_option("--spacing", p.spacing, "Target spacing z,y,x")->required();

    auto* smooth = pre->add_subcommand("smooth-labels", "Gaussian smoothing + threshold");
    smooth->add_option("--in", p.in)->required();
    smooth->add_option("--out", p.out)->required();
    smooth->add_option("--sigma", p.sigma);
    smooth->add_option("--tau", p.tau);

    auto* improve = pre->add_subcommand("improve-labels", "Bright-structure label repair");
    improve->add_option("--in", p.in)->required();
    improve->add_option("--out", p.out)->required();
    improve->add_option("--delta", p.delta, "Intensity delta");
    improve->add_option("--threshold", p.thresh, "High-intensity threshold");
    improve->add_option("--size", p.size, "Median filter size");
    improve->add_option("--min-size", p.min_size, "Minimum component size");

    auto* patches = pre->add_subcommand("extract-patches", "Patch grid with reflective padding");
    patches->add_option("--image", p.image)->required();
    patches->add_option("--label", p.label)->required();
    patches->add_option("--out", p.out_dir, "Output directory (hash subdir created)");
    patches->add_option("--target", p.target, "Cubic patch side");
    patches->add_option("--stride", p.stride);
    patches->add_flag("--no-pad", p.no_pad, "Disable reflective padding");

    // mix
    auto* mix = app.add_subcommand("mix", "Materialize the weighted source mixture");
    struct {
        std::string manifest, weights = "0.7,0.2,0.1", out = "out";
        int64_t count = 1;
        SeedFlag seed;
    } x;
    mix->add_option("--manifest", x.manifest, "Manifest JSON")->required();
    mix->add_option("--weights", x.weights, "drand,real,flow weights");
    mix->add_option("--count", x.count, "Stream items to materialize");
    mix->add_option("--out", x.out, "Output directory (hash subdir created)");
    add_seed_flag(mix, x.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        std::fputs(app.help().c_str(), stderr);
        return 2;
    }

    if (gen->parsed()) {
        bool masks_only = gen->get_subcommand("masks")->parsed();
        return run_gen_drand(g.config, g.size, g.seed, g.count, g.out, g.workers, masks_only);
    }
    if (fm->parsed()) {
        if (train->parsed()) return run_train_toy(ft, t.seed, t.out);
        return run_fm_sample(fs_.field, fs_.mask, fs_.class_id, fs_.steps, fs_.seed, fs_.out);
    }
    if (met->parsed())
        return run_metrics(met->get_subcommand("cldice")->parsed(), m.pred, m.gt, m.csv);
    if (pre->parsed()) {
        if (clip->parsed()) {
            bool constant = false;
            Volume v = io::read_image(p.in);
            Volume out = preprocess::clip_rescale(v, {p.low, p.high}, &constant);
            if (constant) std::fprintf(stderr, "warning: constant input, wrote zeros\n");
            io::write_volume(p.out, out);
            return 0;
        }
        if (resample->parsed()) {
            Spacing target = parse_spacing(p.spacing);
            io::VolumeFile vf = io::read_volume_file(p.in);
            if (vf.datatype == io::kDatatypeU8) {
                BinaryMask mask = io::read_mask(p.in);
                io::write_mask(p.out, preprocess::resample_spacing(mask, target));
            } else {
                io::write_volume(
                    p.out, preprocess::resample_spacing(vf.image, target, ops::Interp::Trilinear));
            }
            return 0;
        }
        if (smooth->parsed()) {
            io::write_mask(p.out, preprocess::smooth_labels(io::read_mask(p.in), p.sigma, p.tau));
            return 0;
        }
        if (improve->parsed()) {
            preprocess::LabelImproveParams params;
            params.intensity_delta = p.delta;
            params.threshold = p.thresh;
            params.filter_size = p.size;
            params.min_component = p.min_size;
            io::write_mask(p.out, preprocess::improve_labels_hr(io::read_image(p.in), params));
            return 0;
        }
        // extract-patches
        Volume img = io::read_image(p.image);
        BinaryMask lbl = io::read_mask(p.label);
        json cfg{{"image", p.image}, {"label", p.label},   {"target", p.target},
                 {"stride", p.stride}, {"pad", !p.no_pad}};
        fs::path dir = fs::path(p.out_dir) / config::content_hash(cfg);
        fs::create_directories(dir);
        config::save_json_file((dir / "config.json").string(), cfg);
        auto grid = preprocess::extract_patches(img, lbl, {p.target, p.target, p.target}, p.stride,
                                                !p.no_pad);
        for (size_t i = 0; i < grid.size(); ++i) {
            io::write_volume((dir / sample_name(int64_t(i), "img")).string(), grid[i].image);
            io::write_mask((dir / sample_name(int64_t(i), "lbl")).string(), grid[i].label);
        }
        std::printf("wrote %zu patches to %s\n", grid.size(), dir.string().c_str());
        return 0;
    }
    if (mix->parsed()) return run_mix(x.manifest, x.weights, x.count, x.seed, x.out);
    return 2;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
    try {
        return dispatch_impl(argc, argv);
    } catch (const Error& e) {
        std::fprintf(stderr, "error code=%s msg=%s\n", e.code().c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error code=internal msg=%s\n", e.what());
        return 1;
    }
}

}  // namespace vforge::cli
