#include <algorithm>
#include <bit>
#include <cmath>

#include "neurotrail/trail_world.hpp"

namespace neurotrail::world {

namespace {

uint64_t mix(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

uint8_t shade(double mean, double noise, uint64_t h) {
    double v = mean;
    if (noise > 0) v += noise * (2.0 * static_cast<double>(h >> 11) * 0x1.0p-53 - 1.0);
    return static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

Renderer::Renderer(const TrailMap& map, CameraConfig camera) : map_(map), geo_(map), cam_(camera) {
    const double f = 0.5 * cam_.width / std::tan(0.5 * cam_.hfov);
    const double cy = 0.5 * cam_.height;
    const double sa = std::sin(cam_.pitch), ca = std::cos(cam_.pitch);
    row_forward_.assign(cam_.height, -1);
    row_lateral_.assign(cam_.height, 0);
    horizon_ = cam_.height;
    for (int v = cam_.height - 1; v >= 0; --v) {
        const double b = (v + 0.5 - cy) / f;
        const double down = sa + b * ca;
        if (down <= 0) break;
        const double t = cam_.height_m / down;
        row_forward_[v] = t * (ca - b * sa);
        row_lateral_[v] = t / f;
        horizon_ = v;
    }
}

RgbImage Renderer::render(const pilot::Pose2& pose, const RenderOptions& opt) const {
    RgbImage img(cam_.width, cam_.height);
    const double ch = std::cos(pose.heading), sh = std::sin(pose.heading);
    const double cx = 0.5 * cam_.width;
    const uint64_t pose_key = mix(mix(mix(map_.seed ^ opt.noise_seed) ^ std::bit_cast<uint64_t>(pose.x)) ^
                                  std::bit_cast<uint64_t>(pose.y)) ^
                              std::bit_cast<uint64_t>(pose.heading);
    for (int v = 0; v < cam_.height; ++v) {
        const double fwd = row_forward_[v];
        for (int u = 0; u < cam_.width; ++u) {
            const ColorModel* c;
            if (fwd < 0) {
                c = &map_.sky;
            } else if (fwd > cam_.max_range) {
                c = &map_.off;
            } else {
                const double lat = (u + 0.5 - cx) * row_lateral_[v];
                const Vec2 p{pose.x + fwd * ch + lat * sh, pose.y + fwd * sh - lat * ch};
                c = geo_.on_road(p) ? &map_.road : &map_.off;
            }
            uint8_t* px = img.at(u, v);
            const uint64_t pix = mix(pose_key + static_cast<uint64_t>(v * cam_.width + u));
            for (int k = 0; k < 3; ++k) {
                const uint64_t h = opt.noise ? mix(pix + static_cast<uint64_t>(k)) : 0;
                px[k] = shade(c->mean[k], opt.noise ? c->noise : 0, h);
            }
        }
    }
    return img;
}

}  // namespace neurotrail::world
