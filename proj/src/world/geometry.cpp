#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "neurotrail/error.hpp"
#include "neurotrail/trail_world.hpp"

namespace neurotrail::world {

double wrap_angle(double a) {
    a = std::remainder(a, 2 * std::numbers::pi);
    if (a <= -std::numbers::pi) a += 2 * std::numbers::pi;
    return a;
}

pilot::Pose2 step(const pilot::Pose2& pose, const WheelSpeeds& w, double dt, const RobotConfig& r) {
    const double v = 0.5 * (w.left + w.right) * r.v_max;
    const double omega = (w.right - w.left) * r.v_max / r.track_width;
    pilot::Pose2 out = pose;
    if (omega == 0) {
        out.x += v * dt * std::cos(pose.heading);
        out.y += v * dt * std::sin(pose.heading);
    } else {
        const double h1 = pose.heading + omega * dt;
        out.x += v / omega * (std::sin(h1) - std::sin(pose.heading));
        out.y -= v / omega * (std::cos(h1) - std::cos(pose.heading));
        out.heading = h1;
    }
    out.heading = wrap_angle(out.heading);
    return out;
}

namespace {

Vec2 catmull_rom(Vec2 p0, Vec2 p1, Vec2 p2, Vec2 p3, double t) {
    const double t2 = t * t, t3 = t2 * t;
    auto f = [&](double a, double b, double c, double d) {
        return 0.5 * (2 * b + (-a + c) * t + (2 * a - 5 * b + 4 * c - d) * t2 + (-a + 3 * b - 3 * c + d) * t3);
    };
    return {f(p0.x, p1.x, p2.x, p3.x), f(p0.y, p1.y, p2.y, p3.y)};
}


}  // namespace

TrailGeometry::TrailGeometry(const TrailMap& map, double spacing) : width_(map.width) {
    const auto& cp = map.control_points;
    if (cp.size() < 2) throw ValidationError("a trail map needs at least two control points");
    auto ctrl = [&](long i) {
        const long n = static_cast<long>(cp.size());
        if (i < 0) return Vec2{2 * cp[0].x - cp[1].x, 2 * cp[0].y - cp[1].y};
        if (i >= n) return Vec2{2 * cp[n - 1].x - cp[n - 2].x, 2 * cp[n - 1].y - cp[n - 2].y};
        return cp[static_cast<size_t>(i)];
    };
    for (size_t i = 0; i + 1 < cp.size(); ++i) {
        const double span = std::hypot(cp[i + 1].x - cp[i].x, cp[i + 1].y - cp[i].y);
        const int n = std::max(1, static_cast<int>(std::ceil(span / spacing)));
        const long k = static_cast<long>(i);
        for (int j = 0; j < n; ++j) pts_.push_back(catmull_rom(ctrl(k - 1), ctrl(k), ctrl(k + 1), ctrl(k + 2), double(j) / n));
    }
    pts_.push_back(cp.back());
    cum_.assign(pts_.size(), 0);
    for (size_t i = 1; i < pts_.size(); ++i)
        cum_[i] = cum_[i - 1] + std::hypot(pts_[i].x - pts_[i - 1].x, pts_[i].y - pts_[i - 1].y);

    // Each segment is registered in every cell within one trail width of it,
    // so any query point that close finds its nearest segment in its own cell.
    double minx = pts_[0].x, miny = pts_[0].y, maxx = minx, maxy = miny;
    for (const Vec2& p : pts_) {
        minx = std::min(minx, p.x);
        miny = std::min(miny, p.y);
        maxx = std::max(maxx, p.x);
        maxy = std::max(maxy, p.y);
    }
    const double pad = width_ + cell_;
    origin_ = {minx - pad, miny - pad};
    nx_ = static_cast<long>((maxx - minx + 2 * pad) / cell_) + 1;
    ny_ = static_cast<long>((maxy - miny + 2 * pad) / cell_) + 1;
    grid_.assign(static_cast<size_t>(nx_ * ny_), {});
    const double inflate = width_;
    for (size_t i = 0; i + 1 < pts_.size(); ++i) {
        const Vec2 a = pts_[i], b = pts_[i + 1];
        const auto [x0, y0] = cell_of({std::min(a.x, b.x) - inflate, std::min(a.y, b.y) - inflate});
        const auto [x1, y1] = cell_of({std::max(a.x, b.x) + inflate, std::max(a.y, b.y) + inflate});
        for (long cy = std::max(0L, y0); cy <= std::min(ny_ - 1, y1); ++cy)
            for (long cx = std::max(0L, x0); cx <= std::min(nx_ - 1, x1); ++cx)
                grid_[static_cast<size_t>(cy * nx_ + cx)].push_back(static_cast<uint32_t>(i));
    }
}

std::pair<long, long> TrailGeometry::cell_of(Vec2 p) const {
    return {static_cast<long>(std::floor((p.x - origin_.x) / cell_)),
            static_cast<long>(std::floor((p.y - origin_.y) / cell_))};
}

namespace {

struct Nearest {
    double dist2 = std::numeric_limits<double>::infinity();
    size_t seg = 0;
    double t = 0;
};

void try_segment(const std::vector<Vec2>& pts, size_t i, Vec2 p, Nearest& best) {
    const Vec2 a = pts[i], b = pts[i + 1];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0;
    t = std::clamp(t, 0.0, 1.0);
    const double qx = a.x + t * dx - p.x, qy = a.y + t * dy - p.y;
    const double d2 = qx * qx + qy * qy;
    if (d2 < best.dist2 || (d2 == best.dist2 && i < best.seg)) best = {d2, i, t};
}

}  // namespace

TrackPoint TrailGeometry::locate(Vec2 p) const {
    Nearest best;
    const auto [cx, cy] = cell_of(p);
    if (cx >= 0 && cy >= 0 && cx < nx_ && cy < ny_)
        for (uint32_t i : grid_[static_cast<size_t>(cy * nx_ + cx)]) try_segment(pts_, i, p, best);
    if (best.dist2 > width_ * width_)
        for (size_t i = 0; i + 1 < pts_.size(); ++i) try_segment(pts_, i, p, best);
    const Vec2 a = pts_[best.seg], b = pts_[best.seg + 1];
    TrackPoint tp;
    tp.heading = std::atan2(b.y - a.y, b.x - a.x);
    tp.point = {a.x + best.t * (b.x - a.x), a.y + best.t * (b.y - a.y)};
    tp.s = cum_[best.seg] + best.t * (cum_[best.seg + 1] - cum_[best.seg]);
    tp.lateral = (p.x - tp.point.x) * std::sin(tp.heading) - (p.y - tp.point.y) * std::cos(tp.heading);
    return tp;
}

bool TrailGeometry::on_road(Vec2 p) const {
    const auto [cx, cy] = cell_of(p);
    if (cx < 0 || cy < 0 || cx >= nx_ || cy >= ny_) return false;
    const double r2 = 0.25 * width_ * width_;
    for (uint32_t i : grid_[static_cast<size_t>(cy * nx_ + cx)]) {
        Nearest n;
        try_segment(pts_, i, p, n);
        if (n.dist2 <= r2) return true;
    }
    return false;
}

pilot::Pose2 TrailGeometry::pose_at(double s, double lateral) const {
    s = std::clamp(s, 0.0, length());
    size_t i = static_cast<size_t>(std::upper_bound(cum_.begin(), cum_.end(), s) - cum_.begin());
    i = std::clamp<size_t>(i, 1, pts_.size() - 1) - 1;
    const Vec2 a = pts_[i], b = pts_[i + 1];
    const double len = cum_[i + 1] - cum_[i];
    const double t = len > 0 ? (s - cum_[i]) / len : 0;
    const double h = std::atan2(b.y - a.y, b.x - a.x);
    return {a.x + t * (b.x - a.x) + lateral * std::sin(h), a.y + t * (b.y - a.y) - lateral * std::cos(h), h};
}

double TrailGeometry::curvature_at(double s) const {
    const double ds = 0.5;
    const double s0 = std::max(0.0, s - ds), s1 = std::min(length(), s + ds);
    if (s1 <= s0) return 0;
    return wrap_angle(pose_at(s1).heading - pose_at(s0).heading) / (s1 - s0);
}

double steering_signal(const TrailGeometry& geo, const pilot::Pose2& pose, const OracleConfig& c) {
    const TrackPoint tp = geo.locate({pose.x, pose.y});
    if (tp.s >= geo.length() - c.end_margin)
        throw EndOfTrail("pose is within " + std::to_string(c.end_margin) + " m of the trail end");
    return tp.lateral + c.k * wrap_angle(tp.heading - pose.heading);
}

DriveCommand oracle_pilot(const TrailGeometry& geo, const pilot::Pose2& pose, const OracleConfig& c) {
    const double s = steering_signal(geo, pose, c);
    if (s > c.deadband) return DriveCommand::Left;
    if (s < -c.deadband) return DriveCommand::Right;
    return DriveCommand::Forward;
}

}  // namespace neurotrail::world
