#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "neurotrail/image.hpp"
#include "neurotrail/pilot.hpp"
#include "neurotrail/types.hpp"

namespace neurotrail::world {

struct Vec2 {
    double x = 0;
    double y = 0;
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct ColorModel {
    std::array<double, 3> mean{0, 0, 0};
    double noise = 0;  // per-channel uniform noise amplitude
    friend bool operator==(const ColorModel&, const ColorModel&) = default;
};

struct TrailMap {
    std::vector<Vec2> control_points;  // meters; the centerline interpolates them
    double width = 1.2;
    ColorModel road{{180, 100, 80}, 25};
    ColorModel off{{70, 140, 60}, 25};
    ColorModel sky{{150, 190, 230}, 6};
    uint64_t seed = 0;
    friend bool operator==(const TrailMap&, const TrailMap&) = default;
};

struct MapConfig {
    double length = 300;          // meters of centerline
    double width = 1.2;
    double max_curvature = 0.15;  // 1/m
    double min_segment = 4;       // constant-curvature run length, meters
    double max_segment = 20;
    double straight_fraction = 0.3;
    double max_heading = 1.2;     // radians off the +x axis, keeps the trail from folding back
    double control_spacing = 1.0;
    double noise = 25;
    uint64_t seed = 1;
};

TrailMap generate_map(const MapConfig& config);
std::string map_to_json(const TrailMap& map);
TrailMap map_from_json(const std::string& text);  // ParseError on bad input
void save_map(const TrailMap& map, const std::string& path);
TrailMap load_map(const std::string& path);

// Where a point lies relative to the centerline.
struct TrackPoint {
    double s = 0;        // arc length of the closest centerline point
    double lateral = 0;  // signed distance, positive to the right of travel direction
    double heading = 0;  // centerline direction at s
    Vec2 point;          // closest centerline point
};

// Dense centerline with a uniform grid for nearest-segment queries. The
// centerline never turns back on itself, so the closest point is unique
// near the trail.
class TrailGeometry {
public:
    explicit TrailGeometry(const TrailMap& map, double sample_spacing = 0.2);

    double length() const { return cum_.back(); }
    double width() const { return width_; }
    TrackPoint locate(Vec2 p) const;
    bool on_road(Vec2 p) const;
    pilot::Pose2 pose_at(double s, double lateral = 0) const;
    double curvature_at(double s) const;
    const std::vector<Vec2>& polyline() const { return pts_; }

private:
    std::vector<size_t> cell_segments(long cx, long cy) const;
    std::pair<long, long> cell_of(Vec2 p) const;

    double width_;
    std::vector<Vec2> pts_;
    std::vector<double> cum_;
    double cell_ = 1.0;
    Vec2 origin_;
    long nx_ = 0, ny_ = 0;
    std::vector<std::vector<uint32_t>> grid_;
};

struct RobotConfig {
    double track_width = 0.4;  // meters
    double v_max = 1.0;        // m/s at wheel ratio 1
};

// Differential drive: v = (l + r)/2 * v_max, omega = (r - l) * v_max / track.
// Constant inputs are integrated exactly along the arc.
pilot::Pose2 step(const pilot::Pose2& pose, const WheelSpeeds& wheels, double dt, const RobotConfig& robot);

double wrap_angle(double a);  // into (-pi, pi]

struct CameraConfig {
    int width = 176;
    int height = 144;
    double height_m = 0.3;
    double pitch = 10.0 * std::numbers::pi / 180.0;  // downward
    double hfov = 60.0 * std::numbers::pi / 180.0;
    double max_range = 40.0;  // ground beyond this renders as off-road
};

struct RenderOptions {
    bool noise = true;
    uint64_t noise_seed = 0;  // mixed with the map seed and the pose
};

// Pinhole camera on the robot looking ahead, projected onto the ground plane.
class Renderer {
public:
    Renderer(const TrailMap& map, CameraConfig camera = {});
    RgbImage render(const pilot::Pose2& pose, const RenderOptions& options = {}) const;
    const TrailGeometry& geometry() const { return geo_; }
    const CameraConfig& camera() const { return cam_; }
    int horizon_row() const { return horizon_; }

private:
    TrailMap map_;
    TrailGeometry geo_;
    CameraConfig cam_;
    int horizon_ = 0;
    // Per image row below the horizon: forward distance and lateral meters
    // per column offset.
    std::vector<double> row_forward_, row_lateral_;
};

struct OracleConfig {
    double k = 0.35;        // meters of steering signal per radian of heading error
    double deadband = 0.06; // meters
    double end_margin = 3.0;
};

// s = e + k * psi with e the lateral offset and psi the centerline heading
// minus the robot heading. Left when s > deadband, Right when s < -deadband.
// Throws EndOfTrail within end_margin of the end of the centerline.
DriveCommand oracle_pilot(const TrailGeometry& geo, const pilot::Pose2& pose, const OracleConfig& config = {});
double steering_signal(const TrailGeometry& geo, const pilot::Pose2& pose, const OracleConfig& config = {});

struct WorldConfig {
    RobotConfig robot;
    CameraConfig camera;
    RenderOptions render;
    double dt = 1.0 / 30.0;
    double start_s = 2.0;
    // The run ends this far before the end of the centerline, or after
    // `max_distance` meters of progress when positive.
    double end_margin = 3.0;
    double max_distance = 0;
    // Auto-reset when the robot leaves the trail or turns more than this
    // far away from the trail direction.
    double reset_heading = 1.5707963267948966;
};

// Simulated robot on a trail map: renders camera frames and integrates
// actuation. Leaving the trail snaps the robot back onto the centerline a
// little further along and counts an intervention.
class SimWorld : public pilot::FrameSource {
public:
    SimWorld(const TrailMap& map, WorldConfig config = {});

    std::optional<RgbImage> next_frame() override;
    void actuate(DriveCommand cmd, const WheelSpeeds& wheels) override;
    std::optional<pilot::Pose2> pose() const override { return pose_; }
    bool intervened() const override { return intervened_; }

    void set_pose(const pilot::Pose2& p) { pose_ = p; }
    const Renderer& renderer() const { return renderer_; }
    const TrailGeometry& geometry() const { return renderer_.geometry(); }
    uint64_t interventions() const { return interventions_; }
    uint64_t frames() const { return frames_; }
    int64_t timestamp_ms() const;
    double progress() const;  // meters along the trail since start
    bool finished() const;
    // Puts the robot back on the centerline `ahead` meters past its
    // projection, aligned with the trail.
    void reset_onto_trail(double ahead = 0.5);

private:
    TrailMap map_;
    WorldConfig cfg_;
    Renderer renderer_;
    pilot::Pose2 pose_;
    double best_s_ = 0;
    uint64_t frames_ = 0;
    uint64_t interventions_ = 0;
    bool intervened_ = false;
};

}  // namespace neurotrail::world
