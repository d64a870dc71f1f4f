// dthcp command-line driver. Talks to the library only through dthcp.h.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dthcp/dthcp.h"

namespace {

// Exit codes: 0 ok, 1 internal/invariant, 2 bad input.
int exit_code(dthcp_status s) {
    if (s == DTHCP_OK) return 0;
    if (s == DTHCP_ERR_BAD_INPUT) return 2;
    return 1;
}

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string seed;
    std::string stages;
    std::vector<double> thresholds;
    std::string scale;
    bool no_cls_ign = false;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "config file (key = value lines or JSON)");
    app->add_option("--set", c.sets, "override one config key, key=value")->take_all();
    app->add_option("--seed", c.seed, "master seed");
    app->add_option("--stages", c.stages, "number of refinement stages K");
    app->add_option("--thresholds", c.thresholds, "tau_low tau_high")->expected(2);
    app->add_option("--scale", c.scale, "low box scale factor r");
    app->add_flag("--no-cls-ign", c.no_cls_ign, "train without the classification-ignored loss");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

dthcp_status apply(dthcp_config* cfg, const Common& c) {
    dthcp_status s = DTHCP_OK;
    auto set = [&](const std::string& k, const std::string& v) {
        if (s == DTHCP_OK) s = dthcp_config_set(cfg, k.c_str(), v.c_str());
    };
    if (!c.config.empty()) s = dthcp_config_load(cfg, c.config.c_str());
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            return DTHCP_ERR_BAD_INPUT;
        }
        set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!c.seed.empty()) set("seed", c.seed);
    if (!c.stages.empty()) set("stages", c.stages);
    if (c.thresholds.size() == 2) {
        set("tau_low", fmt(c.thresholds[0]));
        set("tau_high", fmt(c.thresholds[1]));
    }
    if (!c.scale.empty()) set("scale", c.scale);
    if (c.no_cls_ign) set("use_cls_ign", "false");
    return s;
}

const char* c_or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dual-threshold heatmap pseudo-GT clustering toolkit"};
    app.require_subcommand(1);

    Common common;
    std::string out, eval_dir, scene_dir, bundle, proposals, labels, overlay, dets, gts, pseudo;
    std::vector<std::string> heatmaps;
    int count = -1;
    int zoom = 0;

    auto* synth = app.add_subcommand("synth", "generate synthetic scene bundles");
    add_common(synth, common);
    synth->add_option("--out", out, "output directory")->required();
    synth->add_option("-n,--count", count, "number of scenes");

    auto* cluster = app.add_subcommand("cluster", "build pseudo-GT clusters");
    add_common(cluster, common);
    cluster->add_option("--bundle", bundle, "scene bundle directory");
    cluster->add_option("--heatmap", heatmaps, "heatmap grid, one per present class in class order");
    cluster->add_option("--proposals", proposals, "proposals CSV");
    cluster->add_option("--labels", labels, "image label file (0/1 per class)");
    cluster->add_option("--out", out, "clusters JSON")->required();
    cluster->add_option("--overlay", overlay, "overlay PPM");
    cluster->add_option("--zoom", zoom, "overlay pixels per heatmap cell");

    auto* train = app.add_subcommand("train", "run the toy trainer");
    add_common(train, common);
    train->add_option("--scenes", scene_dir, "scene directory from synth")->required();
    train->add_option("--eval-scenes", eval_dir, "scene directory for the mAP curve");
    train->add_option("--out", out, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "evaluate detections");
    add_common(eval, common);
    eval->add_option("--detections", dets, "detections CSV")->required();
    eval->add_option("--gt", gts, "ground truth CSV")->required();
    eval->add_option("--pseudo-gt", pseudo, "pseudo-GT CSV");
    eval->add_option("--out", out, "metrics JSON")->required();

    auto* dump = app.add_subcommand("config", "print the effective configuration");
    add_common(dump, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    dthcp_config* cfg = nullptr;
    if (dthcp_config_create(&cfg) != DTHCP_OK) {
        std::fprintf(stderr, "error: %s\n", dthcp_last_error());
        return 1;
    }
    dthcp_status s = apply(cfg, common);
    if (s == DTHCP_OK && count >= 0) s = dthcp_config_set(cfg, "scene_count", std::to_string(count).c_str());

    if (s == DTHCP_OK) {
        if (synth->parsed()) {
            s = dthcp_run_synth(cfg, out.c_str());
        } else if (cluster->parsed()) {
            std::vector<const char*> paths;
            for (const auto& h : heatmaps) paths.push_back(h.c_str());
            dthcp_cluster_args a{c_or_null(bundle), paths.data(), paths.size(), c_or_null(proposals),
                                 c_or_null(labels), out.c_str(),  c_or_null(overlay), zoom};
            s = dthcp_run_cluster(cfg, &a);
        } else if (train->parsed()) {
            s = dthcp_run_train(cfg, scene_dir.c_str(), c_or_null(eval_dir), out.c_str());
        } else if (eval->parsed()) {
            s = dthcp_run_eval(cfg, dets.c_str(), gts.c_str(), c_or_null(pseudo), out.c_str());
        } else if (dump->parsed()) {
            char* json = nullptr;
            s = dthcp_config_to_json(cfg, &json);
            if (s == DTHCP_OK) {
                std::printf("%s\n", json);
                dthcp_string_free(json);
            }
        }
    }
    if (s != DTHCP_OK) std::fprintf(stderr, "error: %s\n", dthcp_last_error());
    dthcp_config_destroy(cfg);
    return exit_code(s);
}
