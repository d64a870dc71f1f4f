#include "dthcp/dthcp.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "dthcp/commands.hpp"
#include "dthcp/config.hpp"
#include "dthcp/error.hpp"
#include "dthcp/io.hpp"
#include "dthcp/synth.hpp"

struct dthcp_config {
    dthcp::RunConfig cfg;
};
struct dthcp_heatmap {
    dthcp::Heatmap map;
};
struct dthcp_scene {
    dthcp::SceneBundle bundle;
};
struct dthcp_cluster_set {
    dthcp::ClusterSet set;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
dthcp_status guarded(F&& f) {
    try {
        f();
        g_last_error.clear();
        return DTHCP_OK;
    } catch (const dthcp::InvalidInput& e) {
        g_last_error = e.what();
        return DTHCP_ERR_BAD_INPUT;
    } catch (const dthcp::InvariantViolation& e) {
        g_last_error = e.what();
        return DTHCP_ERR_INVARIANT;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return DTHCP_ERR_NO_MEMORY;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DTHCP_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return DTHCP_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    if (p == nullptr) throw dthcp::InvalidInput(std::string(what) + " is null");
}

std::string opt(const char* s) { return s ? std::string(s) : std::string(); }

char* dup(const std::string& s) {
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void put_box(const dthcp::Box& b, double out[4]) {
    out[0] = b.x1();
    out[1] = b.y1();
    out[2] = b.x2();
    out[3] = b.y2();
}

}  // namespace

extern "C" {

const char* dthcp_version(void) { return "0.1.0"; }

const char* dthcp_last_error(void) { return g_last_error.c_str(); }

void dthcp_string_free(char* s) { std::free(s); }

dthcp_status dthcp_config_create(dthcp_config** out) {
    return guarded([&] {
        need(out, "out");
        *out = new dthcp_config{};
    });
}

void dthcp_config_destroy(dthcp_config* cfg) { delete cfg; }

dthcp_status dthcp_config_set(dthcp_config* cfg, const char* key, const char* value) {
    return guarded([&] {
        need(cfg, "config");
        need(key, "key");
        need(value, "value");
        dthcp::RunConfig next = cfg->cfg;
        next.set(key, value);
        cfg->cfg = next;
    });
}

dthcp_status dthcp_config_get(const dthcp_config* cfg, const char* key, char** out) {
    return guarded([&] {
        need(cfg, "config");
        need(key, "key");
        need(out, "out");
        *out = dup(cfg->cfg.get(key));
    });
}

dthcp_status dthcp_config_load(dthcp_config* cfg, const char* path) {
    return guarded([&] {
        need(cfg, "config");
        need(path, "path");
        dthcp::RunConfig next = cfg->cfg;
        next.apply_file(path);
        cfg->cfg = next;
    });
}

dthcp_status dthcp_config_to_json(const dthcp_config* cfg, char** out) {
    return guarded([&] {
        need(cfg, "config");
        need(out, "out");
        *out = dup(cfg->cfg.to_json());
    });
}

dthcp_status dthcp_iou(const double a[4], const double b[4], double* out) {
    return guarded([&] {
        need(a, "a");
        need(b, "b");
        need(out, "out");
        *out = dthcp::iou(dthcp::Box(a[0], a[1], a[2], a[3]), dthcp::Box(b[0], b[1], b[2], b[3]));
    });
}

dthcp_status dthcp_heatmap_create(int class_id, int rows, int cols, const double* values, dthcp_heatmap** out) {
    return guarded([&] {
        need(values, "values");
        need(out, "out");
        if (rows < 1 || cols < 1) throw dthcp::InvalidInput("heatmap dimensions must be positive");
        std::vector<double> v(values, values + static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
        *out = new dthcp_heatmap{dthcp::Heatmap(class_id, dthcp::Grid(rows, cols, std::move(v)))};
    });
}

dthcp_status dthcp_heatmap_load(const char* path, int class_id, dthcp_heatmap** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new dthcp_heatmap{dthcp::io::read_heatmap(path, class_id)};
    });
}

void dthcp_heatmap_destroy(dthcp_heatmap* h) { delete h; }

dthcp_status dthcp_scene_generate(const dthcp_config* cfg, uint64_t seed, dthcp_scene** out) {
    return guarded([&] {
        need(cfg, "config");
        need(out, "out");
        *out = new dthcp_scene{dthcp::generate_scene(cfg->cfg.synth, seed, "scene")};
    });
}

dthcp_status dthcp_scene_load(const char* dir, dthcp_scene** out) {
    return guarded([&] {
        need(dir, "dir");
        need(out, "out");
        *out = new dthcp_scene{dthcp::io::read_bundle(dir)};
    });
}

dthcp_status dthcp_scene_save(const dthcp_scene* scene, const char* dir) {
    return guarded([&] {
        need(scene, "scene");
        need(dir, "dir");
        dthcp::io::write_bundle(dir, scene->bundle);
    });
}

void dthcp_scene_destroy(dthcp_scene* scene) { delete scene; }

size_t dthcp_scene_num_proposals(const dthcp_scene* scene) { return scene ? scene->bundle.proposals.size() : 0; }

size_t dthcp_scene_num_instances(const dthcp_scene* scene) {
    return scene ? scene->bundle.scene.instances.size() : 0;
}

dthcp_status dthcp_scene_proposal(const dthcp_scene* scene, size_t i, double box[4]) {
    return guarded([&] {
        need(scene, "scene");
        need(box, "box");
        if (i >= scene->bundle.proposals.size()) throw dthcp::InvalidInput("proposal index out of range");
        put_box(scene->bundle.proposals[i], box);
    });
}

dthcp_status dthcp_scene_instance(const dthcp_scene* scene, size_t i, int* class_id, double box[4]) {
    return guarded([&] {
        need(scene, "scene");
        need(class_id, "class_id");
        need(box, "box");
        const auto& inst = scene->bundle.scene.instances;
        if (i >= inst.size()) throw dthcp::InvalidInput("instance index out of range");
        *class_id = inst[i].class_id;
        put_box(inst[i].box, box);
    });
}

dthcp_status dthcp_clusters_from_scene(const dthcp_config* cfg, const dthcp_scene* scene, dthcp_cluster_set** out) {
    return guarded([&] {
        need(cfg, "config");
        need(scene, "scene");
        need(out, "out");
        const auto& b = scene->bundle;
        *out = new dthcp_cluster_set{
            dthcp::build_clusters(b.heatmaps, b.image_labels, b.proposals, b.scene.extent, cfg->cfg.hgps)};
    });
}

dthcp_status dthcp_clusters_build(const dthcp_config* cfg, const dthcp_heatmap* const* maps, size_t num_maps,
                                  const int* labels, size_t num_classes, const double* proposals,
                                  size_t num_proposals, double width, double height, dthcp_cluster_set** out) {
    return guarded([&] {
        need(cfg, "config");
        need(out, "out");
        if (num_maps) need(maps, "maps");
        if (num_classes) need(labels, "labels");
        if (num_proposals) need(proposals, "proposals");
        std::vector<dthcp::Heatmap> hs;
        for (size_t i = 0; i < num_maps; ++i) {
            need(maps[i], "heatmap");
            hs.push_back(maps[i]->map);
        }
        std::vector<int> ls(labels, labels + num_classes);
        std::vector<dthcp::Box> ps;
        for (size_t i = 0; i < num_proposals; ++i) {
            const double* p = proposals + 4 * i;
            ps.emplace_back(p[0], p[1], p[2], p[3]);
        }
        *out = new dthcp_cluster_set{dthcp::build_clusters(hs, ls, ps, {width, height}, cfg->cfg.hgps)};
    });
}

void dthcp_clusters_destroy(dthcp_cluster_set* set) { delete set; }

size_t dthcp_clusters_count(const dthcp_cluster_set* set) { return set ? set->set.clusters().size() : 0; }

dthcp_status dthcp_clusters_info(const dthcp_cluster_set* set, size_t i, int* class_id, size_t* num_members) {
    return guarded([&] {
        need(set, "cluster set");
        need(class_id, "class_id");
        need(num_members, "num_members");
        const auto& cs = set->set.clusters();
        if (i >= cs.size()) throw dthcp::InvalidInput("cluster index out of range");
        *class_id = cs[i].class_id;
        *num_members = cs[i].members.size();
    });
}

dthcp_status dthcp_clusters_member(const dthcp_cluster_set* set, size_t i, size_t j, dthcp_member_kind* kind,
                                   size_t* row, double box[4]) {
    return guarded([&] {
        need(set, "cluster set");
        need(kind, "kind");
        need(row, "row");
        need(box, "box");
        const auto& cs = set->set.clusters();
        if (i >= cs.size() || j >= cs[i].members.size()) throw dthcp::InvalidInput("member index out of range");
        const auto& m = cs[i].members[j];
        switch (m.kind) {
            case dthcp::MemberKind::Proposal: *kind = DTHCP_MEMBER_PROPOSAL; break;
            case dthcp::MemberKind::LowBox: *kind = DTHCP_MEMBER_LOW_BOX; break;
            case dthcp::MemberKind::ScaledHighBox: *kind = DTHCP_MEMBER_SCALED_HIGH_BOX; break;
        }
        *row = m.row;
        put_box(m.box, box);
    });
}

dthcp_status dthcp_clusters_to_json(const dthcp_cluster_set* set, char** out) {
    return guarded([&] {
        need(set, "cluster set");
        need(out, "out");
        *out = dup(dthcp::io::cluster_json(set->set));
    });
}

dthcp_status dthcp_run_synth(const dthcp_config* cfg, const char* out_dir) {
    return guarded([&] {
        need(cfg, "config");
        need(out_dir, "out_dir");
        dthcp::cmd::run_synth(cfg->cfg, out_dir);
    });
}

dthcp_status dthcp_run_cluster(const dthcp_config* cfg, const dthcp_cluster_args* args) {
    return guarded([&] {
        need(cfg, "config");
        need(args, "args");
        dthcp::cmd::ClusterInput in;
        in.bundle_dir = opt(args->bundle_dir);
        if (args->num_heatmaps) need(args->heatmaps, "heatmaps");
        for (size_t i = 0; i < args->num_heatmaps; ++i) {
            need(args->heatmaps[i], "heatmap path");
            in.heatmaps.emplace_back(args->heatmaps[i]);
        }
        in.proposals = opt(args->proposals);
        in.labels = opt(args->labels);
        in.out = opt(args->out);
        in.overlay = opt(args->overlay);
        if (args->overlay_zoom > 0) in.overlay_zoom = args->overlay_zoom;
        dthcp::cmd::run_cluster(cfg->cfg, in);
    });
}

dthcp_status dthcp_run_train(const dthcp_config* cfg, const char* scene_dir, const char* eval_dir,
                             const char* out_dir) {
    return guarded([&] {
        need(cfg, "config");
        need(scene_dir, "scene_dir");
        dthcp::cmd::run_train(cfg->cfg, {scene_dir, opt(eval_dir), opt(out_dir)});
    });
}

dthcp_status dthcp_run_eval(const dthcp_config* cfg, const char* detections, const char* ground_truth,
                            const char* pseudo_gt, const char* out) {
    return guarded([&] {
        need(cfg, "config");
        need(detections, "detections");
        need(ground_truth, "ground_truth");
        dthcp::cmd::run_eval(cfg->cfg, {detections, ground_truth, opt(pseudo_gt), opt(out)});
    });
}

}  // extern "C"
