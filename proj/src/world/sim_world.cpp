#include <cmath>

#include "neurotrail/trail_world.hpp"

namespace neurotrail::world {

SimWorld::SimWorld(const TrailMap& map, WorldConfig config)
    : map_(map), cfg_(config), renderer_(map, config.camera) {
    pose_ = geometry().pose_at(cfg_.start_s);
    best_s_ = cfg_.start_s;
}

int64_t SimWorld::timestamp_ms() const {
    return static_cast<int64_t>(std::llround(static_cast<double>(frames_) * cfg_.dt * 1000.0));
}

double SimWorld::progress() const { return best_s_ - cfg_.start_s; }

bool SimWorld::finished() const {
    if (best_s_ >= geometry().length() - cfg_.end_margin) return true;
    return cfg_.max_distance > 0 && progress() >= cfg_.max_distance;
}

std::optional<RgbImage> SimWorld::next_frame() {
    if (finished()) return std::nullopt;
    RenderOptions opt = cfg_.render;
    opt.noise_seed ^= frames_ * 0x9E3779B97F4A7C15ull;
    ++frames_;
    return renderer_.render(pose_, opt);
}

void SimWorld::reset_onto_trail(double ahead) {
    const TrackPoint tp = geometry().locate({pose_.x, pose_.y});
    pose_ = geometry().pose_at(std::max(tp.s, best_s_) + ahead);
}

void SimWorld::actuate(DriveCommand, const WheelSpeeds& wheels) {
    intervened_ = false;
    pose_ = step(pose_, wheels, cfg_.dt, cfg_.robot);
    const TrackPoint tp = geometry().locate({pose_.x, pose_.y});
    if (std::fabs(tp.lateral) > 0.5 * map_.width ||
        std::fabs(wrap_angle(tp.heading - pose_.heading)) > cfg_.reset_heading) {
        reset_onto_trail();
        ++interventions_;
        intervened_ = true;
    }
    best_s_ = std::max(best_s_, geometry().locate({pose_.x, pose_.y}).s);
}

}  // namespace neurotrail::world
