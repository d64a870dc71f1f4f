#include "dthcp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dthcp/error.hpp"
#include "dthcp/rng.hpp"
#include "json.hpp"

namespace dthcp {

void TrainerConfig::validate() const {
    if (epochs < 0) throw InvalidInput("epochs must be >= 0");
    if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
    if (!(lr >= 0.0)) throw InvalidInput("lr must be >= 0");
    if (lr_decay_epoch < 0) throw InvalidInput("lr_decay_epoch must be >= 0");
    if (!(lr_decay_factor > 0.0)) throw InvalidInput("lr_decay_factor must be > 0");
    if (!(weight_decay >= 0.0)) throw InvalidInput("weight_decay must be >= 0");
    if (eval_every < 0) throw InvalidInput("eval_every must be >= 0");
    if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw InvalidInput("nms_iou must lie in (0, 1]");
    if (threads < 1) throw InvalidInput("threads must be >= 1");
}

void RunConfig::validate() const {
    hgps.validate();
    synth.validate();
    train.validate();
    if (scene_count < 0) throw InvalidInput("scene_count must be >= 0");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw InvalidInput("invalid number for " + key + ": '" + v + "'");
    return out;
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw InvalidInput("invalid integer for " + key + ": '" + v + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw InvalidInput("invalid unsigned integer for " + key + ": '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw InvalidInput("invalid boolean for " + key + ": '" + v + "'");
}

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
    enum class Kind { Number, Bool, String } kind;
};

template <typename T>
Field number(T RunConfig::*section, double T::*member) {
    return {[=](RunConfig& c, const std::string& k, const std::string& v) { (c.*section).*member = parse_double(k, v); },
            [=](const RunConfig& c) { return fmt_double((c.*section).*member); }, Field::Kind::Number};
}

template <typename T>
Field integer(T RunConfig::*section, int T::*member) {
    return {[=](RunConfig& c, const std::string& k, const std::string& v) {
                (c.*section).*member = static_cast<int>(parse_int(k, v));
            },
            [=](const RunConfig& c) { return std::to_string((c.*section).*member); }, Field::Kind::Number};
}

template <typename T>
Field boolean(T RunConfig::*section, bool T::*member) {
    return {[=](RunConfig& c, const std::string& k, const std::string& v) { (c.*section).*member = parse_bool(k, v); },
            [=](const RunConfig& c) { return std::string((c.*section).*member ? "true" : "false"); }, Field::Kind::Bool};
}

const std::vector<std::pair<std::string, Field>>& registry() {
    static const std::vector<std::pair<std::string, Field>> fields = [] {
        using H = HgpsConfig;
        using S = SynthConfig;
        using T = TrainerConfig;
        std::vector<std::pair<std::string, Field>> f;
        f.emplace_back("seed", Field{[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); },
                                     [](const RunConfig& c) { return std::to_string(c.seed); }, Field::Kind::Number});
        f.emplace_back("scene_count",
                       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                 c.scene_count = static_cast<int>(parse_int(k, v));
                             },
                             [](const RunConfig& c) { return std::to_string(c.scene_count); }, Field::Kind::Number});
        f.emplace_back("tau_high", number(&RunConfig::hgps, &H::tau_high));
        f.emplace_back("tau_low", number(&RunConfig::hgps, &H::tau_low));
        f.emplace_back("scale", number(&RunConfig::hgps, &H::scale));
        f.emplace_back("tau_iou1", number(&RunConfig::hgps, &H::tau_iou1));
        f.emplace_back("tau_iou2", number(&RunConfig::hgps, &H::tau_iou2));
        f.emplace_back("stages", integer(&RunConfig::hgps, &H::stages));
        f.emplace_back("stage1_weight",
                       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                 if (v == "s") {
                                     c.hgps.stage1_weight_from_ws = false;
                                 } else if (v == "ws") {
                                     c.hgps.stage1_weight_from_ws = true;
                                 } else {
                                     throw InvalidInput(k + " must be 's' or 'ws'");
                                 }
                             },
                             [](const RunConfig& c) { return std::string(c.hgps.stage1_weight_from_ws ? "ws" : "s"); },
                             Field::Kind::String});
        f.emplace_back("connectivity",
                       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                 const auto n = parse_int(k, v);
                                 if (n != 4 && n != 8) throw InvalidInput(k + " must be 4 or 8");
                                 c.hgps.connectivity = n == 4 ? Connectivity::Four : Connectivity::Eight;
                             },
                             [](const RunConfig& c) { return std::to_string(static_cast<int>(c.hgps.connectivity)); },
                             Field::Kind::Number});
        f.emplace_back("width", integer(&RunConfig::synth, &S::width));
        f.emplace_back("height", integer(&RunConfig::synth, &S::height));
        f.emplace_back("num_classes", integer(&RunConfig::synth, &S::num_classes));
        f.emplace_back("class_presence", number(&RunConfig::synth, &S::class_presence));
        f.emplace_back("max_instances_per_class", integer(&RunConfig::synth, &S::max_instances_per_class));
        f.emplace_back("min_instance_size", number(&RunConfig::synth, &S::min_instance_size));
        f.emplace_back("max_instance_size", number(&RunConfig::synth, &S::max_instance_size));
        f.emplace_back("min_gap", number(&RunConfig::synth, &S::min_gap));
        f.emplace_back("pair_probability", number(&RunConfig::synth, &S::pair_probability));
        f.emplace_back("pair_gap", number(&RunConfig::synth, &S::pair_gap));
        f.emplace_back("core_ratio", number(&RunConfig::synth, &S::core_ratio));
        f.emplace_back("falloff_ratio", number(&RunConfig::synth, &S::falloff_ratio));
        f.emplace_back("noise_amplitude", number(&RunConfig::synth, &S::noise_amplitude));
        f.emplace_back("include_tight_box", boolean(&RunConfig::synth, &S::include_tight_box));
        f.emplace_back("n_jitter", integer(&RunConfig::synth, &S::n_jitter));
        f.emplace_back("jitter_sigma", number(&RunConfig::synth, &S::jitter_sigma));
        f.emplace_back("n_part", integer(&RunConfig::synth, &S::n_part));
        f.emplace_back("n_merge", integer(&RunConfig::synth, &S::n_merge));
        f.emplace_back("n_random", integer(&RunConfig::synth, &S::n_random));
        f.emplace_back("max_proposals", integer(&RunConfig::synth, &S::max_proposals));
        f.emplace_back("feature_dim", integer(&RunConfig::synth, &S::feature_dim));
        f.emplace_back("feature_noise", number(&RunConfig::synth, &S::feature_noise));
        f.emplace_back("feature_seed",
                       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                 c.synth.feature_seed = parse_u64(k, v);
                             },
                             [](const RunConfig& c) { return std::to_string(c.synth.feature_seed); },
                             Field::Kind::Number});
        f.emplace_back("epochs", integer(&RunConfig::train, &T::epochs));
        f.emplace_back("batch_size", integer(&RunConfig::train, &T::batch_size));
        f.emplace_back("lr", number(&RunConfig::train, &T::lr));
        f.emplace_back("lr_decay_epoch", integer(&RunConfig::train, &T::lr_decay_epoch));
        f.emplace_back("lr_decay_factor", number(&RunConfig::train, &T::lr_decay_factor));
        f.emplace_back("weight_decay", number(&RunConfig::train, &T::weight_decay));
        f.emplace_back("use_cls_ign", boolean(&RunConfig::train, &T::use_cls_ign));
        f.emplace_back("eval_every", integer(&RunConfig::train, &T::eval_every));
        f.emplace_back("nms_iou", number(&RunConfig::train, &T::nms_iou));
        f.emplace_back("threads", integer(&RunConfig::train, &T::threads));
        return f;
    }();
    return fields;
}

const Field& field(const std::string& key) {
    for (const auto& [name, f] : registry()) {
        if (name == key) return f;
    }
    throw InvalidInput("unknown config key: " + key);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) { field(trim(key)).set(*this, trim(key), trim(value)); }

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [name, f] : registry()) out.push_back(name);
        return out;
    }();
    return names;
}

std::string RunConfig::to_json() const {
    nlohmann::ordered_json j;
    for (const auto& [name, f] : registry()) {
        const std::string v = f.get(*this);
        switch (f.kind) {
            case Field::Kind::Bool: j[name] = (v == "true"); break;
            case Field::Kind::String: j[name] = v; break;
            case Field::Kind::Number: j[name] = nlohmann::ordered_json::parse(v); break;
        }
    }
    j["rng"] = SplitMix64::kAlgorithm;
    return j.dump(2);
}

void RunConfig::apply_text(const std::string& text) {
    const std::string body = trim(text);
    if (!body.empty() && body.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInput(std::string("invalid JSON config: ") + e.what());
        }
        for (const auto& [key, value] : j.items()) {
            if (key == "rng") continue;
            if (value.is_string()) {
                set(key, value.get<std::string>());
            } else if (value.is_boolean()) {
                set(key, value.get<bool>() ? "true" : "false");
            } else if (value.is_number_integer() || value.is_number_unsigned()) {
                set(key, value.dump());
            } else if (value.is_number()) {
                set(key, fmt_double(value.get<double>()));
            } else {
                throw InvalidInput("config value for " + key + " must be a scalar");
            }
        }
        return;
    }
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidInput("config line " + std::to_string(lineno) + " is not key = value");
        }
        set(line.substr(0, eq), line.substr(eq + 1));
    }
}

void RunConfig::apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    apply_text(ss.str());
}

}  // namespace dthcp
