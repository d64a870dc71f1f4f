#include "dthcp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dthcp/error.hpp"
#include "dthcp/rng.hpp"
#include "json.hpp"

namespace dthcp::io {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

namespace {

double to_double(const std::string& s, const std::string& what) {
    double out = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    if (b < e && *b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || ptr != e || b == e) throw InvalidInput("invalid number in " + what + ": '" + s + "'");
    return out;
}

int to_int(const std::string& s, const std::string& what) {
    const double d = to_double(s, what);
    if (d != static_cast<int>(d)) throw InvalidInput("expected an integer in " + what + ": '" + s + "'");
    return static_cast<int>(d);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& path, std::size_t min_cols, std::size_t max_cols) {
    std::istringstream in(read_file(path));
    std::string line;
    std::vector<std::vector<std::string>> rows;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = split(line, ',');
        if (first) {
            first = false;
            // header
            if (!cells.empty() && (cells[0] == "image_id" || cells[0] == "x1")) continue;
        }
        if (cells.size() < min_cols || cells.size() > max_cols) {
            throw InvalidInput(path + ": expected " + std::to_string(min_cols) + " columns, got '" + line + "'");
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

Box box_from(const std::vector<std::string>& cells, std::size_t at, const std::string& what) {
    return Box(to_double(cells[at], what), to_double(cells[at + 1], what), to_double(cells[at + 2], what),
               to_double(cells[at + 3], what));
}

ordered_json box_json(const Box& b) { return ordered_json::array({b.x1(), b.y1(), b.x2(), b.y2()}); }

Box json_box(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4) throw InvalidInput("box must be an array of 4 numbers");
    return Box(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

nlohmann::json parse_json(const std::string& text, const std::string& what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(what + ": " + e.what());
    }
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InvalidInput("cannot write " + path);
        out << contents;
        if (!out) throw InvalidInput("write failed: " + path);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw InvalidInput("cannot rename " + tmp + ": " + ec.message());
}

std::string format_grid(const Grid& g) {
    std::string out = std::to_string(g.rows()) + " " + std::to_string(g.cols()) + "\n";
    for (int r = 0; r < g.rows(); ++r) {
        for (int c = 0; c < g.cols(); ++c) {
            if (c) out += ' ';
            out += format_double(g.at(r, c));
        }
        out += '\n';
    }
    return out;
}

Grid parse_grid(const std::string& text) {
    std::istringstream in(text);
    long long rows = 0, cols = 0;
    if (!(in >> rows >> cols) || rows < 1 || cols < 1 || rows * cols > (1LL << 26)) {
        throw InvalidInput("grid header must be 'rows cols' with positive sizes");
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(rows * cols));
    std::string tok;
    while (in >> tok) values.push_back(to_double(tok, "grid"));
    if (values.size() != static_cast<std::size_t>(rows * cols)) {
        throw InvalidInput("grid has " + std::to_string(values.size()) + " values, expected " +
                           std::to_string(rows * cols));
    }
    return Grid(static_cast<int>(rows), static_cast<int>(cols), std::move(values));
}

Heatmap read_heatmap(const std::string& path, int class_id) { return Heatmap(class_id, parse_grid(read_file(path))); }

void write_heatmap(const std::string& path, const Heatmap& h) { write_file(path, format_grid(h.grid())); }

std::vector<Box> read_proposals(const std::string& path) {
    std::vector<Box> out;
    for (const auto& row : csv_rows(path, 4, 4)) out.push_back(box_from(row, 0, path));
    return out;
}

std::string format_proposals(std::span<const Box> boxes) {
    std::string out = "x1,y1,x2,y2\n";
    for (const auto& b : boxes) {
        out += format_double(b.x1()) + "," + format_double(b.y1()) + "," + format_double(b.x2()) + "," +
               format_double(b.y2()) + "\n";
    }
    return out;
}

std::vector<Detection> read_detections(const std::string& path) {
    std::vector<Detection> out;
    for (const auto& row : csv_rows(path, 7, 7)) {
        out.push_back({row[0], to_int(row[1], path), box_from(row, 2, path), to_double(row[6], path)});
    }
    return out;
}

std::vector<GroundTruth> read_ground_truth(const std::string& path) {
    std::vector<GroundTruth> out;
    for (const auto& row : csv_rows(path, 6, 6)) out.push_back({row[0], to_int(row[1], path), box_from(row, 2, path)});
    return out;
}

namespace {
std::string box_cells(const Box& b) {
    return format_double(b.x1()) + "," + format_double(b.y1()) + "," + format_double(b.x2()) + "," +
           format_double(b.y2());
}
}  // namespace

std::string format_detections(std::span<const Detection> dets) {
    std::string out = "image_id,class_id,x1,y1,x2,y2,score\n";
    for (const auto& d : dets) {
        out += d.image_id + "," + std::to_string(d.class_id) + "," + box_cells(d.box) + "," + format_double(d.score) +
               "\n";
    }
    return out;
}

std::string format_ground_truth(std::span<const GroundTruth> gts) {
    std::string out = "image_id,class_id,x1,y1,x2,y2\n";
    for (const auto& g : gts) out += g.image_id + "," + std::to_string(g.class_id) + "," + box_cells(g.box) + "\n";
    return out;
}

std::vector<int> parse_labels(const std::string& text) {
    std::string t = text;
    std::replace(t.begin(), t.end(), ',', ' ');
    std::istringstream in(t);
    std::vector<int> out;
    std::string tok;
    while (in >> tok) {
        if (tok != "0" && tok != "1") throw InvalidInput("image labels must be 0 or 1, got '" + tok + "'");
        out.push_back(tok == "1");
    }
    return out;
}

void write_bundle(const std::string& dir, const SceneBundle& b) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InvalidInput("cannot create " + dir + ": " + ec.message());
    ordered_json j;
    j["id"] = b.scene.id;
    j["seed"] = b.scene.seed;
    j["rng"] = SplitMix64::kAlgorithm;
    j["width"] = b.scene.extent.width;
    j["height"] = b.scene.extent.height;
    j["image_labels"] = b.image_labels;
    auto& inst = j["instances"] = ordered_json::array();
    for (const auto& i : b.scene.instances) inst.push_back({{"class_id", i.class_id}, {"box", box_json(i.box)}});
    auto& pairs = j["adjacent_pairs"] = ordered_json::array();
    for (const auto& [a, c] : b.scene.adjacent_pairs) pairs.push_back({a, c});
    auto& props = j["proposals"] = ordered_json::array();
    for (const auto& p : b.proposals) props.push_back(box_json(p));
    auto& feats = j["features"] = ordered_json::array();
    for (Eigen::Index r = 0; r < b.features.rows(); ++r) {
        auto row = ordered_json::array();
        for (Eigen::Index c = 0; c < b.features.cols(); ++c) row.push_back(b.features(r, c));
        feats.push_back(std::move(row));
    }
    auto& maps = j["heatmaps"] = ordered_json::array();
    for (const auto& h : b.heatmaps) {
        const std::string name = "heatmap_" + std::to_string(h.class_id()) + ".txt";
        maps.push_back({{"class_id", h.class_id()}, {"file", name}});
        write_heatmap((fs::path(dir) / name).string(), h);
    }
    write_file((fs::path(dir) / "scene.json").string(), j.dump() + "\n");
}

SceneBundle read_bundle(const std::string& dir) {
    const std::string path = (fs::path(dir) / "scene.json").string();
    const auto j = parse_json(read_file(path), path);
    SceneBundle b;
    try {
        b.scene.id = j.at("id").get<std::string>();
        b.scene.seed = j.at("seed").get<std::uint64_t>();
        b.scene.extent = {j.at("width").get<double>(), j.at("height").get<double>()};
        b.image_labels = j.at("image_labels").get<std::vector<int>>();
        for (const auto& i : j.at("instances")) {
            b.scene.instances.push_back({i.at("class_id").get<int>(), json_box(i.at("box"))});
        }
        for (const auto& p : j.at("adjacent_pairs")) {
            b.scene.adjacent_pairs.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
        }
        for (const auto& p : j.at("proposals")) b.proposals.push_back(json_box(p));
        const auto& feats = j.at("features");
        const std::size_t dim = feats.empty() ? 0 : feats.at(0).size();
        b.features.resize(static_cast<Eigen::Index>(feats.size()), static_cast<Eigen::Index>(dim));
        for (std::size_t r = 0; r < feats.size(); ++r) {
            if (feats[r].size() != dim) throw InvalidInput(path + ": ragged feature matrix");
            for (std::size_t c = 0; c < dim; ++c) b.features(r, c) = feats[r][c].get<double>();
        }
        for (const auto& h : j.at("heatmaps")) {
            const int cls = h.at("class_id").get<int>();
            b.heatmaps.push_back(read_heatmap((fs::path(dir) / h.at("file").get<std::string>()).string(), cls));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(path + ": " + e.what());
    }
    if (b.features.rows() != static_cast<Eigen::Index>(b.proposals.size())) {
        throw InvalidInput(path + ": feature rows do not match proposals");
    }
    for (const auto& i : b.scene.instances) b.ground_truth.push_back({b.scene.id, i.class_id, i.box});
    return b;
}

std::string cluster_json(const ClusterSet& set) {
    ordered_json j;
    j["num_proposals"] = set.num_proposals();
    j["num_rows"] = set.num_rows();
    auto& classes = j["classes"] = ordered_json::array();
    for (const auto& t : set.thresholds()) {
        ordered_json c;
        c["class_id"] = t.class_id;
        auto& lows = c["low_boxes"] = ordered_json::array();
        for (const auto& b : t.low_boxes) lows.push_back(box_json(b));
        auto& highs = c["high_boxes"] = ordered_json::array();
        for (const auto& b : t.high_boxes) highs.push_back(box_json(b));
        c["low_of_high"] = t.low_of_high;
        auto& clusters = c["clusters"] = ordered_json::array();
        for (const auto& cl : set.clusters()) {
            if (cl.class_id != t.class_id) continue;
            ordered_json e;
            e["low_region"] = cl.low_region;
            e["high_region"] = cl.high_region ? ordered_json(*cl.high_region) : ordered_json(nullptr);
            auto& members = e["members"] = ordered_json::array();
            for (const auto& m : cl.members) {
                members.push_back({{"kind", to_string(m.kind)}, {"row", m.row}, {"box", box_json(m.box)}});
            }
            clusters.push_back(std::move(e));
        }
        classes.push_back(std::move(c));
    }
    return j.dump(1) + "\n";
}

std::string checkpoint_json(const DetectorModel& model) {
    ordered_json j;
    j["step"] = model.step;
    auto& heads = j["heads"] = ordered_json::array();
    for (const LinearHead* h : model.heads()) {
        ordered_json e;
        e["role"] = to_string(h->role);
        e["stage"] = h->stage;
        e["in_dim"] = h->in_dim();
        e["out_dim"] = h->out_dim();
        auto& w = e["weight"] = ordered_json::array();
        for (Eigen::Index r = 0; r < h->weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < h->weight.cols(); ++c) w.push_back(h->weight(r, c));
        }
        auto& bias = e["bias"] = ordered_json::array();
        for (Eigen::Index k = 0; k < h->bias.size(); ++k) bias.push_back(h->bias(k));
        heads.push_back(std::move(e));
    }
    return j.dump(1) + "\n";
}

DetectorModel parse_checkpoint(const std::string& text) {
    const auto j = parse_json(text, "checkpoint");
    DetectorModel m;
    try {
        m.step = j.at("step").get<long long>();
        bool have_cls = false, have_wgt = false;
        for (const auto& e : j.at("heads")) {
            const int in = e.at("in_dim").get<int>();
            const int out = e.at("out_dim").get<int>();
            if (in < 1 || out < 1) throw InvalidInput("checkpoint head dims must be positive");
            LinearHead h = LinearHead::zeros(head_role_from_string(e.at("role").get<std::string>()),
                                             e.at("stage").get<int>(), in, out);
            const auto& w = e.at("weight");
            const auto& bias = e.at("bias");
            if (w.size() != static_cast<std::size_t>(in) * out || bias.size() != static_cast<std::size_t>(out)) {
                throw InvalidInput("checkpoint head has wrong parameter count");
            }
            for (int r = 0; r < in; ++r) {
                for (int c = 0; c < out; ++c) h.weight(r, c) = w[static_cast<std::size_t>(r) * out + c].get<double>();
            }
            for (int k = 0; k < out; ++k) h.bias(k) = bias[k].get<double>();
            switch (h.role) {
                case HeadRole::Cls: m.cls = std::move(h); have_cls = true; break;
                case HeadRole::Wgt: m.wgt = std::move(h); have_wgt = true; break;
                case HeadRole::Refine: m.refine.push_back(std::move(h)); break;
            }
        }
        if (!have_cls || !have_wgt) throw InvalidInput("checkpoint lacks the base heads");
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("checkpoint: ") + e.what());
    }
    return m;
}

std::string render_overlay(const Heatmap& h, const ClusterSet& clusters, int zoom) {
    if (zoom < 1) throw InvalidInput("overlay zoom must be >= 1");
    const int W = h.cols() * zoom;
    const int H = h.rows() * zoom;
    std::vector<unsigned char> px(static_cast<std::size_t>(W) * H * 3);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const auto v = static_cast<unsigned char>(std::lround(h.at(y / zoom, x / zoom) * 255.0));
            auto* p = &px[(static_cast<std::size_t>(y) * W + x) * 3];
            p[0] = p[1] = p[2] = v;
        }
    }
    auto rect = [&](const Box& b, unsigned char r, unsigned char g, unsigned char bl) {
        const int x1 = std::clamp(static_cast<int>(std::floor(b.x1() * zoom)), 0, W - 1);
        const int y1 = std::clamp(static_cast<int>(std::floor(b.y1() * zoom)), 0, H - 1);
        const int x2 = std::clamp(static_cast<int>(std::ceil(b.x2() * zoom)) - 1, 0, W - 1);
        const int y2 = std::clamp(static_cast<int>(std::ceil(b.y2() * zoom)) - 1, 0, H - 1);
        auto put = [&](int x, int y) {
            auto* p = &px[(static_cast<std::size_t>(y) * W + x) * 3];
            p[0] = r;
            p[1] = g;
            p[2] = bl;
        };
        for (int x = x1; x <= x2; ++x) put(x, y1), put(x, y2);
        for (int y = y1; y <= y2; ++y) put(x1, y), put(x2, y);
    };
    for (const auto& t : clusters.thresholds()) {
        if (t.class_id != h.class_id()) continue;
        for (const auto& b : t.low_boxes) rect(b, 40, 90, 255);
        for (const auto& b : t.high_boxes) rect(b, 255, 40, 40);
    }
    for (const auto& c : clusters.clusters()) {
        if (c.class_id == h.class_id() && !c.members.empty()) rect(c.members.front().box, 40, 220, 40);
    }
    std::string out = "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
    out.append(reinterpret_cast<const char*>(px.data()), px.size());
    return out;
}

}  // namespace dthcp::io
