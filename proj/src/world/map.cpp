#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "neurotrail/error.hpp"
#include "neurotrail/trail_world.hpp"

namespace neurotrail::world {

TrailMap generate_map(const MapConfig& c) {
    if (c.length <= 0 || c.width <= 0 || c.control_spacing <= 0 || c.min_segment <= 0 ||
        c.max_segment < c.min_segment)
        throw ValidationError("map length, width, spacing and segment lengths must be positive");
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u01(0, 1);
    TrailMap m;
    m.width = c.width;
    m.seed = c.seed;
    m.road.noise = m.off.noise = c.noise;
    Vec2 p;
    double heading = 0;
    double travelled = 0;
    m.control_points.push_back(p);
    // A straight lead-in so every run starts on an easy section.
    double kappa = 0;
    double run = std::min(c.max_segment, 2 * c.min_segment);
    while (travelled < c.length) {
        for (double d = 0; d < run && travelled < c.length; d += c.control_spacing) {
            heading += kappa * c.control_spacing;
            if (std::fabs(heading) > c.max_heading) {
                heading = std::clamp(heading, -c.max_heading, c.max_heading);
                kappa = -kappa;
            }
            p.x += c.control_spacing * std::cos(heading);
            p.y += c.control_spacing * std::sin(heading);
            travelled += c.control_spacing;
            m.control_points.push_back(p);
        }
        run = c.min_segment + u01(rng) * (c.max_segment - c.min_segment);
        kappa = u01(rng) < c.straight_fraction ? 0.0 : (2 * u01(rng) - 1) * c.max_curvature;
    }
    return m;
}

namespace {

nlohmann::json color_json(const ColorModel& c) { return {{"mean", c.mean}, {"noise", c.noise}}; }

ColorModel color_from(const nlohmann::json& j) {
    ColorModel c;
    c.mean = j.at("mean").get<std::array<double, 3>>();
    c.noise = j.at("noise").get<double>();
    return c;
}

}  // namespace

std::string map_to_json(const TrailMap& m) {
    nlohmann::json j;
    j["format"] = "neurotrail-map";
    j["version"] = 1;
    j["seed"] = m.seed;
    j["width"] = m.width;
    j["road"] = color_json(m.road);
    j["off"] = color_json(m.off);
    j["sky"] = color_json(m.sky);
    auto& pts = j["control_points"] = nlohmann::json::array();
    for (const Vec2& v : m.control_points) pts.push_back({v.x, v.y});
    return j.dump();
}

TrailMap map_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.value("format", "") != "neurotrail-map") throw ParseError("not a trail map");
        if (j.at("version").get<int>() != 1) throw UnsupportedVersionError("map version is not supported");
        TrailMap m;
        m.seed = j.at("seed").get<uint64_t>();
        m.width = j.at("width").get<double>();
        m.road = color_from(j.at("road"));
        m.off = color_from(j.at("off"));
        m.sky = color_from(j.at("sky"));
        for (const auto& p : j.at("control_points")) m.control_points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        if (m.control_points.size() < 2) throw ValidationError("a trail map needs at least two control points");
        if (!(m.width > 0)) throw ValidationError("trail width must be positive");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad map file: ") + e.what());
    }
}

void save_map(const TrailMap& map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << map_to_json(map) << "\n";
}

TrailMap load_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return map_from_json(ss.str());
}

}  // namespace neurotrail::world
