#include "crownfuse/config.hpp"

#include "crownfuse/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>

extern char** environ;

namespace crownfuse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string upper(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

std::string lower(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

json crown_json(const synth::Crown& c) {
    return {{"cx", c.cx}, {"cy", c.cy}, {"radius", c.radius}, {"green", c.green}};
}

json to_document(const PipelineConfig& c) {
    json d;
    d["green"] = {{"hue_min", c.green.hue_min}, {"hue_max", c.green.hue_max}, {"sat_min", c.green.sat_min},
                  {"val_min", c.green.val_min}};
    d["gabor"] = {{"orientations", c.gabor.orientations},
                  {"radial_frequencies", c.gabor.radial_frequencies},
                  {"bandwidth", c.gabor.bandwidth},
                  {"kernel_truncation", c.gabor.kernel_truncation},
                  {"reference_width", c.gabor.reference_width}};
    d["probmap"] = {{"w1", c.w1}, {"w2", c.w2}, {"open_radius", c.open_radius}, {"open_iterations", c.open_iterations}};
    d["segmentation"] = {{"th_area", c.th_area}, {"th_dist", c.th_dist}};
    d["wbf"] = {{"prefilter_score", c.wbf.prefilter_score},
                {"iou_cluster", c.wbf.iou_cluster},
                {"model_weights", c.wbf.model_weights},
                {"score_mode", c.wbf.score_mode == wbf::ScoreMode::Max ? "max" : "average"},
                {"cluster_count", c.wbf.cluster_count == wbf::ClusterCount::Boxes ? "boxes" : "models"},
                {"n_models", c.n_models}};
    const auto& i = c.integrate;
    d["integrate"] = {{"tau_a", i.tau_a},         {"expansion", i.expansion},
                      {"n_neighbors", i.n_neighbors}, {"tau_d", i.tau_d},
                      {"tau_c", i.tau_c},         {"local_crop", i.local_crop},
                      {"refine_open_radius", i.refine_open_radius},
                      {"fallback_w", i.fallback_w}, {"fallback_h", i.fallback_h}};
    const auto& s = c.synth;
    json crowns = s.crown_count;
    if (!s.crowns.empty()) {
        crowns = json::array();
        for (const auto& crown : s.crowns) crowns.push_back(crown_json(crown));
    }
    d["synth"] = {{"width", s.width},
                  {"height", s.height},
                  {"crowns", crowns},
                  {"radius_min", s.radius_min},
                  {"radius_max", s.radius_max},
                  {"separation_margin", s.separation_margin},
                  {"clutter", s.clutter},
                  {"background", s.background},
                  {"green_min", s.green_min},
                  {"green_max", s.green_max},
                  {"n_models", s.n_models},
                  {"drop_rate", s.drop_rate},
                  {"jitter", s.jitter},
                  {"seed", s.seed}};
    d["eval"] = {{"mode", c.eval_mode == EvalMode::Center ? "center" : "box"}, {"iou", c.eval_iou}};
    d["io"] = {{"out_dir", c.out_dir.string()}, {"workers", c.workers}};
    return d;
}

// Where each "section.key" value came from, for error records.
using Origins = std::map<std::string, std::string>;

void set_value(json& doc, Origins& origins, const std::string& section, const std::string& key, json value,
               const std::string& origin) {
    if (!doc.contains(section)) throw io::InputError(origin, section, "unknown section");
    if (!doc[section].contains(key)) throw io::InputError(origin, section + "." + key, "unknown key");
    doc[section][key] = std::move(value);
    origins[section + "." + key] = origin;
}

json parse_scalar(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;  // bare word
    }
}

class Reader {
public:
    Reader(const json& doc, const Origins& origins) : doc_(doc), origins_(origins) {}

    template <typename T>
    T get(const std::string& section, const std::string& key) const {
        const json& v = doc_.at(section).at(key);
        if constexpr (std::is_arithmetic_v<T> && !std::is_same_v<T, bool>) {
            if (!v.is_number()) fail(section, key, "expected a number");
            if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer() && !v.is_number_unsigned()) fail(section, key, "expected an integer");
                if constexpr (std::is_unsigned_v<T>)
                    if (v.is_number_integer() && v.get<std::int64_t>() < 0) fail(section, key, "must be >= 0");
            }
        }
        try {
            return v.get<T>();
        } catch (const json::exception&) {
            fail(section, key, "wrong type");
        }
    }

    [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& reason) const {
        const auto it = origins_.find(section + "." + key);
        throw io::InputError(it == origins_.end() ? "defaults" : it->second, section + "." + key, reason);
    }

    const json& raw(const std::string& section, const std::string& key) const { return doc_.at(section).at(key); }

private:
    const json& doc_;
    const Origins& origins_;
};

PipelineConfig from_document(const json& doc, const Origins& origins) {
    const Reader r(doc, origins);
    PipelineConfig c;
    c.green = {r.get<double>("green", "hue_min"), r.get<double>("green", "hue_max"), r.get<double>("green", "sat_min"),
               r.get<double>("green", "val_min")};
    c.gabor.orientations = r.get<std::vector<double>>("gabor", "orientations");
    c.gabor.radial_frequencies = r.get<std::vector<double>>("gabor", "radial_frequencies");
    c.gabor.bandwidth = r.get<double>("gabor", "bandwidth");
    c.gabor.kernel_truncation = r.get<double>("gabor", "kernel_truncation");
    c.gabor.reference_width = r.get<double>("gabor", "reference_width");
    c.w1 = r.get<double>("probmap", "w1");
    c.w2 = r.get<double>("probmap", "w2");
    c.open_radius = r.get<int>("probmap", "open_radius");
    c.open_iterations = r.get<int>("probmap", "open_iterations");
    c.th_area = r.get<int>("segmentation", "th_area");
    c.th_dist = r.get<double>("segmentation", "th_dist");

    c.wbf.prefilter_score = r.get<double>("wbf", "prefilter_score");
    c.wbf.iou_cluster = r.get<double>("wbf", "iou_cluster");
    c.wbf.model_weights = r.get<std::vector<double>>("wbf", "model_weights");
    const auto score_mode = r.get<std::string>("wbf", "score_mode");
    if (score_mode == "max")
        c.wbf.score_mode = wbf::ScoreMode::Max;
    else if (score_mode == "average")
        c.wbf.score_mode = wbf::ScoreMode::Average;
    else
        r.fail("wbf", "score_mode", "expected \"max\" or \"average\"");
    const auto cluster_count = r.get<std::string>("wbf", "cluster_count");
    if (cluster_count == "boxes")
        c.wbf.cluster_count = wbf::ClusterCount::Boxes;
    else if (cluster_count == "models")
        c.wbf.cluster_count = wbf::ClusterCount::Models;
    else
        r.fail("wbf", "cluster_count", "expected \"boxes\" or \"models\"");
    c.n_models = r.get<int>("wbf", "n_models");

    auto& i = c.integrate;
    i.tau_a = r.get<double>("integrate", "tau_a");
    i.expansion = r.get<double>("integrate", "expansion");
    i.n_neighbors = r.get<int>("integrate", "n_neighbors");
    i.tau_d = r.get<double>("integrate", "tau_d");
    i.tau_c = r.get<double>("integrate", "tau_c");
    i.local_crop = r.get<double>("integrate", "local_crop");
    i.refine_open_radius = r.get<int>("integrate", "refine_open_radius");
    i.fallback_w = r.get<double>("integrate", "fallback_w");
    i.fallback_h = r.get<double>("integrate", "fallback_h");

    auto& s = c.synth;
    s.width = r.get<int>("synth", "width");
    s.height = r.get<int>("synth", "height");
    const json& crowns = r.raw("synth", "crowns");
    if (crowns.is_array()) {
        for (std::size_t k = 0; k < crowns.size(); ++k) {
            const json& e = crowns[k];
            const std::string key = "crowns[" + std::to_string(k) + "]";
            if (!e.is_object()) r.fail("synth", key, "expected an object");
            for (const auto& [name, _] : e.items())
                if (name != "cx" && name != "cy" && name != "radius" && name != "green")
                    r.fail("synth", key + "." + name, "unknown key");
            synth::Crown crown;
            try {
                crown.cx = e.at("cx").get<double>();
                crown.cy = e.at("cy").get<double>();
                crown.radius = e.at("radius").get<double>();
                crown.green = e.value("green", crown.green);
            } catch (const json::exception&) {
                r.fail("synth", key, "expected numeric cx, cy, radius");
            }
            s.crowns.push_back(crown);
        }
        s.crown_count = static_cast<int>(s.crowns.size());
    } else {
        s.crown_count = r.get<int>("synth", "crowns");
    }
    s.radius_min = r.get<double>("synth", "radius_min");
    s.radius_max = r.get<double>("synth", "radius_max");
    s.separation_margin = r.get<double>("synth", "separation_margin");
    s.clutter = r.get<int>("synth", "clutter");
    const auto background = r.get<std::vector<int>>("synth", "background");
    if (background.size() != 3 ||
        std::any_of(background.begin(), background.end(), [](int v) { return v < 0 || v > 255; }))
        r.fail("synth", "background", "expected three values in [0,255]");
    for (int k = 0; k < 3; ++k) s.background[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(background[k]);
    s.green_min = r.get<double>("synth", "green_min");
    s.green_max = r.get<double>("synth", "green_max");
    s.n_models = r.get<int>("synth", "n_models");
    s.drop_rate = r.get<double>("synth", "drop_rate");
    s.jitter = r.get<double>("synth", "jitter");
    s.seed = r.get<std::uint64_t>("synth", "seed");

    const auto mode = r.get<std::string>("eval", "mode");
    if (mode == "center")
        c.eval_mode = EvalMode::Center;
    else if (mode == "box")
        c.eval_mode = EvalMode::Box;
    else
        r.fail("eval", "mode", "expected \"center\" or \"box\"");
    c.eval_iou = r.get<double>("eval", "iou");
    c.out_dir = r.get<std::string>("io", "out_dir");
    c.workers = r.get<unsigned>("io", "workers");

    try {
        c.validate();
    } catch (const io::InputError&) {
        throw;
    } catch (const Error& e) {
        throw io::InputError("config", "", e.what());
    }
    return c;
}

void check(bool ok, const std::string& field, const std::string& reason) {
    if (!ok) throw io::InputError("config", field, reason);
}

}  // namespace

void PipelineConfig::validate() const {
    const auto section = [](const char* name, auto&& fn) {
        try {
            fn();
        } catch (const io::InputError&) {
            throw;
        } catch (const Error& e) {
            throw io::InputError("config", name, e.what());
        }
    };
    section("green", [&] { green.validate(); });
    section("gabor", [&] { gabor.validate(); });
    section("wbf", [&] { wbf.validate(); });
    section("integrate", [&] { integration().validate(); });
    check(w1 >= 0.0 && w2 >= 0.0 && std::abs(w1 + w2 - 1.0) <= 1e-9, "probmap", "w1, w2 must be >= 0 and sum to 1");
    check(open_radius >= 1, "probmap.open_radius", "must be >= 1");
    check(open_iterations >= 1, "probmap.open_iterations", "must be >= 1");
    check(th_area >= 1, "segmentation.th_area", "must be >= 1");
    check(th_dist >= 1.0, "segmentation.th_dist", "must be >= 1");
    check(n_models >= 0, "wbf.n_models", "must be >= 0");
    check(synth.width >= 1 && synth.height >= 1, "synth", "width and height must be >= 1");
    check(synth.crown_count >= 0, "synth.crowns", "must be >= 0");
    check(synth.radius_min >= 2.0 && synth.radius_min <= synth.radius_max, "synth",
          "require 2 <= radius_min <= radius_max");
    check(synth.separation_margin >= 0.0, "synth.separation_margin", "must be >= 0");
    check(synth.clutter >= 0, "synth.clutter", "must be >= 0");
    check(synth.green_min >= 0.0 && synth.green_min <= synth.green_max && synth.green_max <= 255.0, "synth",
          "require 0 <= green_min <= green_max <= 255");
    check(synth.n_models >= 1, "synth.n_models", "must be >= 1");
    check(synth.drop_rate >= 0.0 && synth.drop_rate < 1.0, "synth.drop_rate", "must be in [0,1)");
    check(synth.jitter >= 0.0 && synth.jitter < 0.5, "synth.jitter", "must be in [0,0.5)");
    check(eval_iou > 0.0 && eval_iou <= 1.0, "eval.iou", "must be in (0,1]");
    check(!out_dir.empty(), "io.out_dir", "must not be empty");
}

traditional::Config PipelineConfig::traditional() const {
    traditional::Config c;
    c.green = green;
    c.gabor = gabor;
    c.w1 = w1;
    c.w2 = w2;
    c.open_radius = open_radius;
    c.open_iterations = open_iterations;
    c.th_area = th_area;
    c.th_dist = th_dist;
    c.workers = workers;
    return c;
}

integrate::IntegrationConfig PipelineConfig::integration() const {
    auto c = integrate;
    c.w1 = w1;
    c.w2 = w2;
    return c;
}

PipelineConfig load_config(const std::optional<fs::path>& file, const Overrides& flags,
                           const std::map<std::string, std::string>& environment) {
    json doc = to_document(PipelineConfig{});
    Origins origins;

    if (file) {
        const std::string name = file->string();
        std::ifstream in(*file);
        if (!in) throw io::InputError(name, "", "cannot open config file");
        json user;
        try {
            user = json::parse(in);
        } catch (const json::parse_error& e) {
            throw io::InputError(name, "", std::string("malformed JSON: ") + e.what());
        }
        if (!user.is_object()) throw io::InputError(name, "", "expected an object of sections");
        for (const auto& [section, body] : user.items()) {
            if (!doc.contains(section)) throw io::InputError(name, section, "unknown section");
            if (!body.is_object()) throw io::InputError(name, section, "expected an object");
            for (const auto& [key, value] : body.items()) set_value(doc, origins, section, key, value, name);
        }
    }

    for (const auto& [variable, value] : environment) {
        if (!variable.starts_with("CROWNFUSE_")) continue;
        const std::string rest = variable.substr(10);
        bool placed = false;
        for (const auto& [section, _] : doc.items()) {
            const std::string prefix = upper(section) + "_";
            if (!rest.starts_with(prefix)) continue;
            set_value(doc, origins, section, lower(rest.substr(prefix.size())), parse_scalar(value),
                      "env:" + variable);
            placed = true;
            break;
        }
        if (!placed) throw io::InputError("env:" + variable, "", "unknown configuration section");
    }

    for (const auto& [name, value] : flags) {
        const auto dot = name.find('.');
        if (dot == std::string::npos) throw io::InputError("flags", name, "expected section.key");
        set_value(doc, origins, name.substr(0, dot), name.substr(dot + 1), parse_scalar(value), "flag:" + name);
    }
    return from_document(doc, origins);
}

std::map<std::string, std::string> process_environment() {
    std::map<std::string, std::string> out;
    for (char** e = environ; e && *e; ++e) {
        const std::string entry(*e);
        const auto eq = entry.find('=');
        if (eq == std::string::npos || !entry.starts_with("CROWNFUSE_")) continue;
        out[entry.substr(0, eq)] = entry.substr(eq + 1);
    }
    return out;
}

std::string dump_config(const PipelineConfig& config) { return to_document(config).dump(2) + "\n"; }

}  // namespace crownfuse
