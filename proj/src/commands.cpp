#include "dthcp/commands.hpp"

#include <filesystem>
#include <map>

#include "dthcp/error.hpp"
#include "dthcp/evalmetrics.hpp"
#include "dthcp/io.hpp"
#include "dthcp/rng.hpp"
#include "dthcp/trainer.hpp"
#include "json.hpp"

namespace dthcp::cmd {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InvalidInput("cannot create " + dir + ": " + ec.message());
}

std::string scene_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%04d", i);
    return buf;
}

ordered_json optional_list(const std::vector<std::optional<double>>& v) {
    auto out = ordered_json::array();
    for (const auto& x : v) out.push_back(x ? ordered_json(*x) : ordered_json(nullptr));
    return out;
}

}  // namespace

void run_synth(const RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    ensure_dir(out_dir);
    ordered_json manifest;
    manifest["rng"] = SplitMix64::kAlgorithm;
    manifest["seed"] = cfg.seed;
    manifest["num_classes"] = cfg.synth.num_classes;
    auto& scenes = manifest["scenes"] = ordered_json::array();
    std::vector<GroundTruth> gts;
    for (int i = 0; i < cfg.scene_count; ++i) {
        const std::string name = scene_name(i);
        const auto seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i));
        const SceneBundle b = generate_scene(cfg.synth, seed, name);
        io::write_bundle((fs::path(out_dir) / name).string(), b);
        scenes.push_back({{"id", name}, {"dir", name}, {"seed", seed}});
        gts.insert(gts.end(), b.ground_truth.begin(), b.ground_truth.end());
    }
    io::write_file((fs::path(out_dir) / "ground_truth.csv").string(), io::format_ground_truth(gts));
    io::write_file((fs::path(out_dir) / "manifest.json").string(), manifest.dump(1) + "\n");
}

std::vector<SceneBundle> load_scene_dir(const std::string& dir) {
    const std::string path = (fs::path(dir) / "manifest.json").string();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(path + ": " + e.what());
    }
    std::vector<SceneBundle> out;
    try {
        for (const auto& s : j.at("scenes")) {
            out.push_back(io::read_bundle((fs::path(dir) / s.at("dir").get<std::string>()).string()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(path + ": " + e.what());
    }
    return out;
}

void run_cluster(const RunConfig& cfg, const ClusterInput& in) {
    cfg.hgps.validate();
    if (in.out.empty()) throw InvalidInput("cluster: an output path is required");
    std::vector<Heatmap> maps;
    std::vector<Box> proposals;
    std::vector<int> labels;
    Extent extent{0, 0};
    if (!in.bundle_dir.empty()) {
        SceneBundle b = io::read_bundle(in.bundle_dir);
        maps = std::move(b.heatmaps);
        proposals = std::move(b.proposals);
        labels = std::move(b.image_labels);
        extent = b.scene.extent;
    } else {
        if (in.labels.empty()) throw InvalidInput("cluster: --labels is required without a bundle");
        labels = io::parse_labels(io::read_file(in.labels));
        if (!in.proposals.empty()) proposals = io::read_proposals(in.proposals);
        std::size_t next = 0;
        for (std::size_t c = 0; c < labels.size(); ++c) {
            if (labels[c] != 1) continue;
            if (next >= in.heatmaps.size()) {
                throw InvalidInput("cluster: no heatmap file for present class " + std::to_string(c));
            }
            maps.push_back(io::read_heatmap(in.heatmaps[next++], static_cast<int>(c)));
        }
        if (next != in.heatmaps.size()) throw InvalidInput("cluster: more heatmap files than present classes");
        if (!maps.empty()) extent = {static_cast<double>(maps.front().cols()), static_cast<double>(maps.front().rows())};
    }
    const ClusterSet set = build_clusters(maps, labels, proposals, extent, cfg.hgps);
    io::write_file(in.out, io::cluster_json(set));

    if (!in.overlay.empty()) {
        if (maps.empty()) throw InvalidInput("cluster: overlay needs at least one present class");
        std::string body;
        int W = 0, H = 0;
        for (const auto& h : maps) {
            const std::string ppm = io::render_overlay(h, set, in.overlay_zoom);
            // strip the per-panel header: "P6\nW H\n255\n"
            std::size_t pos = 0;
            for (int nl = 0; nl < 3; ++nl) pos = ppm.find('\n', pos) + 1;
            body += ppm.substr(pos);
            W = h.cols() * in.overlay_zoom;
            H += h.rows() * in.overlay_zoom;
        }
        io::write_file(in.overlay, "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n" + body);
    }
}

void run_train(const RunConfig& cfg, const TrainInput& in) {
    cfg.validate();
    if (in.out_dir.empty()) throw InvalidInput("train: an output directory is required");
    const auto scenes = load_scene_dir(in.scene_dir);
    const auto eval = in.eval_dir.empty() ? scenes : load_scene_dir(in.eval_dir);
    const TrainResult res = train(scenes, eval, cfg);
    ensure_dir(in.out_dir);
    const fs::path out(in.out_dir);

    std::string loss = "iteration,loss\n";
    for (std::size_t i = 0; i < res.loss_curve.size(); ++i) {
        loss += std::to_string(i + 1) + "," + io::format_double(res.loss_curve[i]) + "\n";
    }
    std::string map = "iteration,epoch,map\n";
    for (const auto& p : res.map_curve) {
        map += std::to_string(p.iteration) + "," + std::to_string(p.epoch) + "," + io::format_double(p.map) + "\n";
    }
    std::vector<Detection> dets;
    for (const auto& s : eval) {
        auto d = detect(res.model, s, cfg.synth.num_classes, cfg.train.nms_iou);
        dets.insert(dets.end(), d.begin(), d.end());
    }
    io::write_file((out / "checkpoint.json").string(), io::checkpoint_json(res.model));
    io::write_file((out / "loss_curve.csv").string(), loss);
    io::write_file((out / "map_curve.csv").string(), map);
    io::write_file((out / "detections.csv").string(), io::format_detections(dets));
    io::write_file((out / "config.json").string(), cfg.to_json() + "\n");
}

void run_eval(const RunConfig& cfg, const EvalInput& in) {
    if (in.out.empty()) throw InvalidInput("eval: an output path is required");
    const auto dets = io::read_detections(in.detections);
    const auto gts = io::read_ground_truth(in.ground_truth);
    int C = cfg.synth.num_classes;
    for (const auto& g : gts) {
        if (g.class_id < 0) throw InvalidInput("eval: negative class id in ground truth");
        C = std::max(C, g.class_id + 1);
    }
    for (const auto& d : dets) {
        if (d.class_id < 0) throw InvalidInput("eval: negative class id in detections");
        C = std::max(C, d.class_id + 1);
    }
    const ApReport ap = mean_ap(dets, gts, C);
    const CorLocReport cl = corloc(top1_per_image_class(dets), gts, C);

    ordered_json j;
    j["num_classes"] = C;
    j["ap"] = optional_list(ap.per_class);
    j["map"] = ap.mean;
    j["corloc"] = optional_list(cl.per_class);
    j["mcorloc"] = cl.mean;
    if (!in.pseudo_gt.empty()) {
        std::map<std::string, std::vector<PseudoGt>> pseudo;
        std::map<std::string, std::vector<GroundTruth>> truth;
        for (const auto& p : io::read_ground_truth(in.pseudo_gt)) pseudo[p.image_id].push_back({p.box, 1.0, p.class_id, 0});
        for (const auto& g : gts) truth[g.image_id].push_back(g);
        for (const auto& [id, v] : pseudo) {
            if (!truth.count(id)) throw InvalidInput("eval: pseudo GT for unknown image " + id);
        }
        PseudoGtQuality q;
        q.classes.resize(static_cast<std::size_t>(C));
        for (int c = 0; c < C; ++c) q.classes[static_cast<std::size_t>(c)].class_id = c;
        for (const auto& [id, g] : truth) {
            const auto it = pseudo.find(id);
            const std::vector<PseudoGt> none;
            q.merge(pseudo_gt_quality(it == pseudo.end() ? none : it->second, g, C));
        }
        auto& per = j["pseudo_gt"]["per_class"] = ordered_json::array();
        for (const auto& c : q.classes) {
            per.push_back({{"class_id", c.class_id},
                           {"instances", c.instances},
                           {"recall", c.recall()},
                           {"mean_best_iou", c.mean_best_iou()},
                           {"pseudo_boxes", c.pseudo_boxes},
                           {"merges", c.merges},
                           {"part_only", c.part_only}});
        }
        const auto t = q.total();
        j["pseudo_gt"]["total"] = {{"instances", t.instances},       {"recall", t.recall()},
                                   {"mean_best_iou", t.mean_best_iou()}, {"pseudo_boxes", t.pseudo_boxes},
                                   {"merges", t.merges},             {"part_only", t.part_only}};
    }
    io::write_file(in.out, j.dump(1) + "\n");
}

}  // namespace dthcp::cmd
