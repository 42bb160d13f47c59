#include "panosplat/synthetic.hpp"

#include "panosplat/error.hpp"
#include "panosplat/parallel.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace panosplat {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const std::array<Vec3, 6> kFaceBase = {Vec3(0.75, 0.45, 0.35), Vec3(0.35, 0.55, 0.75), Vec3(0.85, 0.85, 0.8),
                                       Vec3(0.45, 0.35, 0.25), Vec3(0.4, 0.7, 0.45), Vec3(0.7, 0.65, 0.4)};

} // namespace

RoomLayout3D BoxRoom::layout() const {
    RoomLayout3D l;
    l.floor_polygon = {Vec2(lo.x(), lo.z()), Vec2(hi.x(), lo.z()), Vec2(hi.x(), hi.z()), Vec2(lo.x(), hi.z())};
    l.floor_y = hi.y();
    l.ceil_y = lo.y();
    return l;
}

double BoxRoom::intersect(const Vec3& o, const Vec3& d, int* face) const {
    double best = std::numeric_limits<double>::infinity();
    int best_face = -1;
    for (int axis = 0; axis < 3; ++axis) {
        if (d[axis] == 0.0) continue;
        const double bound = d[axis] > 0.0 ? hi[axis] : lo[axis];
        const double t = (bound - o[axis]) / d[axis];
        if (t > 0.0 && t < best) {
            best = t;
            best_face = 2 * axis + (d[axis] > 0.0 ? 1 : 0);
        }
    }
    if (best_face < 0) throw InvalidParameterError("box room: ray does not hit the room from inside");
    if (face) *face = best_face;
    return best;
}

Vec3 BoxRoom::albedo(const Vec3& p, int face) const {
    const int axis = face / 2;
    const double u = p[(axis + 1) % 3], v = p[(axis + 2) % 3];
    const double k = kTwoPi / period;
    const double pattern = std::sin(k * u) * std::sin(k * v);
    const double stripes = std::cos(0.5 * k * (u + v) + face);
    Vec3 c = kFaceBase[static_cast<std::size_t>(face)];
    c += amplitude * Vec3(pattern, 0.6 * stripes, -pattern);
    return c.cwiseMax(0.0).cwiseMin(1.0);
}

Vec3 BoxRoom::face_normal(int face) {
    Vec3 n = Vec3::Zero();
    n[face / 2] = face % 2 == 0 ? 1.0 : -1.0;
    return n;
}

SyntheticView render_box_room(const BoxRoom& room, const PanoramaCamera& cam, int samples) {
    cam.validate();
    if (samples < 1) throw InvalidParameterError("render_box_room: samples must be >= 1");
    const Vec3 o = cam.center();
    if ((o.array() <= room.lo.array()).any() || (o.array() >= room.hi.array()).any()) {
        throw InvalidParameterError("render_box_room: camera must be inside the room");
    }
    const int h = cam.height, w = cam.width;
    SyntheticView view{Image(h, w, 3), Image(h, w, 1)};
    const Mat3 to_world = cam.rotation.transpose();
    parallel_for(static_cast<std::size_t>(h), 0, [&](std::size_t row) {
        const int r = static_cast<int>(row);
        for (int c = 0; c < w; ++c) {
            const Vec3 dc = to_world * pixel_to_direction(r + 0.5, c + 0.5, h, w);
            view.depth.at(r, c) = room.intersect(o, dc);
            Vec3 acc = Vec3::Zero();
            for (int sy = 0; sy < samples; ++sy) {
                for (int sx = 0; sx < samples; ++sx) {
                    const Vec3 d = to_world * pixel_to_direction(r + (sy + 0.5) / samples, c + (sx + 0.5) / samples, h, w);
                    int face = 0;
                    const double t = room.intersect(o, d, &face);
                    acc += room.albedo(o + t * d, face);
                }
            }
            acc /= static_cast<double>(samples * samples);
            for (int ch = 0; ch < 3; ++ch) view.color.at(r, c, ch) = acc[ch];
        }
    });
    return view;
}

std::vector<Vec3> default_box_centers() {
    return {Vec3(-1.0, 0.0, -0.7), Vec3(1.0, 0.1, -0.6), Vec3(1.1, -0.1, 0.7), Vec3(-0.9, 0.05, 0.8)};
}

std::vector<PanoramaInput> make_box_inputs(const BoxRoom& room, const std::vector<Vec3>& centers, int height,
                                           int width, int samples) {
    std::vector<PanoramaInput> out;
    const RoomLayout3D layout = room.layout();
    for (const Vec3& c : centers) {
        const auto cam = PanoramaCamera::at(c, height, width);
        SyntheticView v = render_box_room(room, cam, samples);
        LayoutBoundary b = layout_to_boundary(layout, cam, width);
        out.push_back({cam, std::move(v.color), std::move(b), std::move(v.depth)});
    }
    return out;
}

} // namespace panosplat
