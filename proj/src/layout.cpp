#include "panosplat/layout.hpp"

#include "panosplat/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <numbers>
#include <random>
#include <unordered_map>

namespace panosplat {

namespace {

constexpr double kPi = std::numbers::pi;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double column_longitude(int c, int width) { return (c + 0.5 - width / 2.0) * 2.0 * kPi / width; }

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

/// Douglas-Peucker on a closed polygon; returns indices of the kept vertices in order.
std::vector<std::size_t> simplify_closed(const std::vector<Vec2>& pts, double tol) {
    const std::size_t n = pts.size();
    if (n <= 3) {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        return all;
    }
    std::size_t far = 0;
    double best = -1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double d = (pts[i] - pts[0]).squaredNorm();
        if (d > best) {
            best = d;
            far = i;
        }
    }
    std::vector<char> keep(n, 0);
    keep[0] = keep[far] = 1;
    std::vector<std::pair<std::size_t, std::size_t>> stack = {{0, far}, {far, n}};
    while (!stack.empty()) {
        const auto [a, b] = stack.back();
        stack.pop_back();
        if (b <= a + 1) continue;
        const Vec2& pa = pts[a % n];
        const Vec2& pb = pts[b % n];
        double dmax = -1.0;
        std::size_t imax = a;
        for (std::size_t i = a + 1; i < b; ++i) {
            const double d = point_segment_distance(pts[i % n], pa, pb);
            if (d > dmax) {
                dmax = d;
                imax = i;
            }
        }
        if (dmax > tol) {
            keep[imax % n] = 1;
            stack.emplace_back(a, imax);
            stack.emplace_back(imax, b);
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i]) out.push_back(i);
    }
    return out;
}

struct Line2 {
    Vec2 point;
    Vec2 dir; ///< unit
};

Line2 fit_line(const std::vector<Vec2>& pts, std::size_t from, std::size_t count) {
    const std::size_t n = pts.size();
    Vec2 mean = Vec2::Zero();
    for (std::size_t k = 0; k < count; ++k) mean += pts[(from + k) % n];
    mean /= static_cast<double>(count);
    Mat2 cov = Mat2::Zero();
    for (std::size_t k = 0; k < count; ++k) {
        const Vec2 d = pts[(from + k) % n] - mean;
        cov += d * d.transpose();
    }
    // Principal direction of a symmetric 2x2 matrix in closed form.
    const double a = cov(0, 0), b = cov(0, 1), c = cov(1, 1);
    const double angle = 0.5 * std::atan2(2.0 * b, a - c);
    return {mean, Vec2(std::cos(angle), std::sin(angle))};
}

bool intersect_lines(const Line2& l1, const Line2& l2, Vec2& out) {
    const double den = cross2(l1.dir, l2.dir);
    if (std::abs(den) < 1e-9) return false;
    const double t = cross2(l2.point - l1.point, l2.dir) / den;
    out = l1.point + t * l1.dir;
    return true;
}

std::vector<Vec2> straighten(const std::vector<Vec2>& raw, double tol) {
    const std::size_t n = raw.size();
    std::vector<std::size_t> kept = simplify_closed(raw, tol);
    auto interior = [&](std::size_t j) {
        const std::size_t a = kept[j], b = kept[(j + 1) % kept.size()];
        return (b + n - a - 1) % n;
    };
    // Edges without enough support are corner artifacts: drop one endpoint.
    for (bool changed = true; changed && kept.size() > 3;) {
        changed = false;
        for (std::size_t j = 0; j < kept.size() && kept.size() > 3; ++j) {
            if (interior(j) < 2) {
                kept.erase(kept.begin() + static_cast<std::ptrdiff_t>((j + 1) % kept.size()));
                changed = true;
                break;
            }
        }
    }
    // Merge neighbouring edges that one line explains, e.g. a wall split at the start vertex.
    auto max_residual = [&](std::size_t from, std::size_t count) {
        const Line2 l = fit_line(raw, from, count);
        double worst = 0.0;
        for (std::size_t k = 0; k < count; ++k) {
            worst = std::max(worst, std::abs(cross2(l.dir, raw[(from + k) % n] - l.point)));
        }
        return worst;
    };
    for (bool changed = true; changed && kept.size() > 3;) {
        changed = false;
        for (std::size_t j = 0; j < kept.size() && kept.size() > 3; ++j) {
            const std::size_t prev = kept[(j + kept.size() - 1) % kept.size()];
            const std::size_t next = kept[(j + 1) % kept.size()];
            const std::size_t count = (next + n - prev) % n - 1;
            if (count >= 3 && max_residual(prev + 1, count) <= tol) {
                kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(j));
                changed = true;
                break;
            }
        }
    }
    const std::size_t m = kept.size();
    if (m < 3) return raw;
    std::vector<Line2> lines(m);
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t cnt = interior(j);
        if (cnt >= 2) {
            lines[j] = fit_line(raw, kept[j] + 1, cnt);
        } else {
            const Vec2 a = raw[kept[j]], b = raw[kept[(j + 1) % m]];
            lines[j] = {a, (b - a).normalized()};
        }
    }
    std::vector<Vec2> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        if (!intersect_lines(lines[(j + m - 1) % m], lines[j], out[j])) out[j] = raw[kept[j]];
    }
    if (signed_area(out) <= 0.0) return raw;
    return out;
}

std::vector<Vec2> drop_collinear(const std::vector<Vec2>& poly, double eps) {
    std::vector<Vec2> cur = poly;
    for (bool changed = true; changed && cur.size() > 3;) {
        changed = false;
        for (std::size_t i = 0; i < cur.size() && cur.size() > 3; ++i) {
            const Vec2& p = cur[(i + cur.size() - 1) % cur.size()];
            const Vec2& q = cur[i];
            const Vec2& r = cur[(i + 1) % cur.size()];
            if ((q - p).norm() <= eps || point_segment_distance(q, p, r) <= eps) {
                cur.erase(cur.begin() + static_cast<std::ptrdiff_t>(i));
                changed = true;
                break;
            }
        }
    }
    return cur;
}

} // namespace

void LayoutBoundary::validate() const {
    if (floor_lat.empty() || floor_lat.size() != ceil_lat.size()) {
        throw InvalidBoundaryError("layout boundary: floor and ceiling arrays must be non-empty and equal length");
    }
    if (!(camera_height > 0.0) || !std::isfinite(camera_height)) {
        throw InvalidBoundaryError("layout boundary: camera height must be positive");
    }
    for (std::size_t c = 0; c < floor_lat.size(); ++c) {
        if (!(floor_lat[c] < 0.0) || !(floor_lat[c] > -kPi / 2.0)) {
            throw InvalidBoundaryError("layout boundary: floor latitude must be in (-pi/2, 0) at column " +
                                       std::to_string(c));
        }
        if (!(ceil_lat[c] > 0.0) || !(ceil_lat[c] < kPi / 2.0)) {
            throw InvalidBoundaryError("layout boundary: ceiling latitude must be in (0, pi/2) at column " +
                                       std::to_string(c));
        }
    }
}

double signed_area(const std::vector<Vec2>& poly) {
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) s += cross2(poly[i], poly[(i + 1) % poly.size()]);
    return 0.5 * s;
}

bool point_in_polygon(const std::vector<Vec2>& poly, const Vec2& p) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (p.x() < x) inside = !inside;
        }
    }
    return inside;
}

std::vector<WallSegment> RoomLayout3D::walls() const {
    std::vector<WallSegment> w;
    for (std::size_t i = 0; i < floor_polygon.size(); ++i) {
        w.push_back({floor_polygon[i], floor_polygon[(i + 1) % floor_polygon.size()]});
    }
    return w;
}

double RoomLayout3D::area() const { return std::abs(signed_area(floor_polygon)); }

bool RoomLayout3D::contains(const Vec2& xz) const { return point_in_polygon(floor_polygon, xz); }

void RoomLayout3D::validate() const {
    if (floor_polygon.size() < 3) throw InvalidParameterError("room layout needs at least 3 floor vertices");
    if (!(signed_area(floor_polygon) > 0.0)) {
        throw InvalidParameterError("room layout floor polygon must be counter-clockwise");
    }
    if (!(ceil_y < floor_y)) throw InvalidParameterError("room layout ceiling must be above the floor");
}

void PointCloud::push_back(const Vec3& p, const Vec3& n, const Vec3& c, PointSource s) {
    points.push_back(p);
    normals.push_back(n);
    colors.push_back(c);
    source.push_back(s);
}

void PointCloud::append(const PointCloud& o) {
    points.insert(points.end(), o.points.begin(), o.points.end());
    normals.insert(normals.end(), o.normals.begin(), o.normals.end());
    colors.insert(colors.end(), o.colors.begin(), o.colors.end());
    source.insert(source.end(), o.source.begin(), o.source.end());
}

void PointCloud::validate() const {
    const std::size_t n = points.size();
    if (normals.size() != n || colors.size() != n || source.size() != n) {
        throw ShapeMismatchError("point cloud arrays differ in length");
    }
}

std::vector<Vec3> lift_floor_points(const LayoutBoundary& b, const PanoramaCamera& cam) {
    b.validate();
    const int w = b.width();
    std::vector<Vec3> out(static_cast<std::size_t>(w));
    for (int c = 0; c < w; ++c) {
        const Vec3 d = angles_to_direction(b.floor_lat[static_cast<std::size_t>(c)], column_longitude(c, w));
        out[static_cast<std::size_t>(c)] = cam.to_world(d * (b.camera_height / d.y()));
    }
    return out;
}

RoomLayout3D lift_boundary(const LayoutBoundary& b, const PanoramaCamera& cam, const LiftOptions& opt) {
    const auto floor = lift_floor_points(b, cam);
    const int w = b.width();
    RoomLayout3D room;
    std::vector<Vec2> raw(floor.size());
    double floor_y = 0.0, ceil_h = 0.0;
    for (int c = 0; c < w; ++c) {
        const auto k = static_cast<std::size_t>(c);
        raw[k] = Vec2(floor[k].x(), floor[k].z());
        floor_y += floor[k].y();
        const Vec3 pc = cam.to_camera(floor[k]);
        ceil_h += std::hypot(pc.x(), pc.z()) * std::tan(b.ceil_lat[k]);
    }
    room.floor_y = floor_y / w;
    room.ceil_y = cam.center().y() - ceil_h / w;
    if (signed_area(raw) < 0.0) std::reverse(raw.begin(), raw.end());
    room.floor_polygon = opt.simplify ? straighten(raw, opt.tolerance) : raw;
    return room;
}

LayoutBoundary layout_to_boundary(const RoomLayout3D& layout, const PanoramaCamera& cam, int width) {
    if (width <= 0) throw InvalidParameterError("layout_to_boundary: width must be positive");
    const Vec3 center = cam.center();
    const Vec2 o(center.x(), center.z());
    LayoutBoundary b;
    b.camera_height = layout.floor_y - center.y();
    b.floor_lat.resize(static_cast<std::size_t>(width));
    b.ceil_lat.resize(static_cast<std::size_t>(width));
    const auto walls = layout.walls();
    for (int c = 0; c < width; ++c) {
        const double phi = column_longitude(c, width);
        const Vec3 dw = cam.rotation.transpose() * Vec3(std::sin(phi), 0.0, std::cos(phi));
        const Vec2 dir = Vec2(dw.x(), dw.z()).normalized();
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : walls) {
            const Vec2 e = s.b - s.a;
            const double den = cross2(dir, e);
            if (std::abs(den) < 1e-15) continue;
            const double t = cross2(s.a - o, e) / den;
            const double u = cross2(s.a - o, dir) / den;
            if (t > 0.0 && u >= 0.0 && u <= 1.0) best = std::min(best, t);
        }
        if (!std::isfinite(best)) throw InvalidParameterError("layout_to_boundary: camera is outside the room");
        b.floor_lat[static_cast<std::size_t>(c)] = -std::atan2(layout.floor_y - center.y(), best);
        b.ceil_lat[static_cast<std::size_t>(c)] = std::atan2(center.y() - layout.ceil_y, best);
    }
    return b;
}

RoomLayout3D union_layouts(const std::vector<RoomLayout3D>& layouts, const UnionOptions& opt) {
    if (layouts.empty()) throw InvalidParameterError("union_layouts: no layouts");
    if (!(opt.cell > 0.0)) throw InvalidParameterError("union_layouts: cell size must be positive");
    Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    double area_sum = 0.0, floor_y = 0.0, ceil_y = 0.0;
    for (const auto& l : layouts) {
        if (l.floor_polygon.size() < 3) throw InvalidParameterError("union_layouts: polygon with < 3 vertices");
        for (const auto& p : l.floor_polygon) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        const double a = l.area();
        area_sum += a;
        floor_y += a * l.floor_y;
        ceil_y += a * l.ceil_y;
    }
    const double cell = opt.cell;
    lo -= Vec2::Constant(2.0 * cell);
    hi += Vec2::Constant(2.0 * cell);
    const auto nx = static_cast<long long>(std::ceil((hi.x() - lo.x()) / cell));
    const auto nz = static_cast<long long>(std::ceil((hi.y() - lo.y()) / cell));
    if (nx * nz > 100'000'000LL) throw InvalidParameterError("union_layouts: grid too large for the cell size");
    const int W = static_cast<int>(nx), H = static_cast<int>(nz);
    std::vector<char> occ(static_cast<std::size_t>(W) * H, 0);
    auto idx = [W](int i, int j) { return static_cast<std::size_t>(j) * W + i; };

    // Scanline fill at cell centers.
    std::vector<double> xs;
    for (int j = 0; j < H; ++j) {
        const double z = lo.y() + (j + 0.5) * cell;
        for (const auto& l : layouts) {
            xs.clear();
            const auto& poly = l.floor_polygon;
            for (std::size_t k = 0; k < poly.size(); ++k) {
                const Vec2& a = poly[k];
                const Vec2& b = poly[(k + 1) % poly.size()];
                if ((a.y() <= z && z < b.y()) || (b.y() <= z && z < a.y())) {
                    xs.push_back(a.x() + (z - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
                }
            }
            std::sort(xs.begin(), xs.end());
            for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
                const int i0 = std::max(0, static_cast<int>(std::ceil((xs[k] - lo.x()) / cell - 0.5)));
                const int i1 = std::min(W, static_cast<int>(std::ceil((xs[k + 1] - lo.x()) / cell - 0.5)));
                for (int i = i0; i < i1; ++i) occ[idx(i, j)] = 1;
            }
        }
    }

    // Largest 4-connected component.
    std::vector<int> label(occ.size(), -1);
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> queue;
    for (std::size_t s = 0; s < occ.size(); ++s) {
        if (!occ[s] || label[s] >= 0) continue;
        const int id = static_cast<int>(sizes.size());
        std::size_t count = 0;
        queue.assign(1, s);
        label[s] = id;
        while (!queue.empty()) {
            const std::size_t q = queue.back();
            queue.pop_back();
            ++count;
            const int i = static_cast<int>(q % W), j = static_cast<int>(q / W);
            const int ni[4] = {i - 1, i + 1, i, i};
            const int nj[4] = {j, j, j - 1, j + 1};
            for (int k = 0; k < 4; ++k) {
                if (ni[k] < 0 || nj[k] < 0 || ni[k] >= W || nj[k] >= H) continue;
                const std::size_t r = idx(ni[k], nj[k]);
                if (occ[r] && label[r] < 0) {
                    label[r] = id;
                    queue.push_back(r);
                }
            }
        }
        sizes.push_back(count);
    }
    if (sizes.empty()) throw InvalidParameterError("union_layouts: polygons cover no grid cell");
    const int keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    if (sizes.size() > 1) {
        spdlog::warn("union_layouts: {} disjoint regions, keeping the largest ({} of {} cells)", sizes.size(),
                     sizes[static_cast<std::size_t>(keep)], std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
    }
    auto inside = [&](int i, int j) {
        return i >= 0 && j >= 0 && i < W && j < H && label[idx(i, j)] == keep;
    };

    // Boundary edges between grid corners, interior on the left.
    const long long CW = W + 1;
    auto corner = [CW](int i, int j) { return static_cast<long long>(j) * CW + i; };
    std::unordered_multimap<long long, long long> out_edges;
    for (int j = 0; j < H; ++j) {
        for (int i = 0; i < W; ++i) {
            if (!inside(i, j)) continue;
            if (!inside(i, j - 1)) out_edges.emplace(corner(i, j), corner(i + 1, j));
            if (!inside(i + 1, j)) out_edges.emplace(corner(i + 1, j), corner(i + 1, j + 1));
            if (!inside(i, j + 1)) out_edges.emplace(corner(i + 1, j + 1), corner(i, j + 1));
            if (!inside(i - 1, j)) out_edges.emplace(corner(i, j + 1), corner(i, j));
        }
    }
    auto pos = [&](long long c) {
        return Vec2(lo.x() + static_cast<double>(c % CW) * cell, lo.y() + static_cast<double>(c / CW) * cell);
    };
    std::vector<Vec2> best_loop;
    double best_area = 0.0;
    while (!out_edges.empty()) {
        auto it = out_edges.begin();
        const long long start = it->first;
        long long prev = start, cur = it->second;
        out_edges.erase(it);
        std::vector<Vec2> loop = {pos(start)};
        for (int guard = 0; cur != start && guard < 100'000'000; ++guard) {
            loop.push_back(pos(cur));
            const Vec2 din = pos(cur) - pos(prev);
            auto range = out_edges.equal_range(cur);
            auto pick = range.first;
            double pick_turn = -std::numeric_limits<double>::infinity();
            for (auto e = range.first; e != range.second; ++e) {
                const Vec2 dout = pos(e->second) - pos(cur);
                const double turn = std::atan2(cross2(din, dout), din.dot(dout)); // left turns first
                if (turn > pick_turn) {
                    pick_turn = turn;
                    pick = e;
                }
            }
            if (pick == range.second) break;
            prev = cur;
            cur = pick->second;
            out_edges.erase(pick);
        }
        const double a = signed_area(loop);
        if (a > best_area) {
            best_area = a;
            best_loop = std::move(loop);
        }
    }

    std::vector<Vec2> poly = drop_collinear(best_loop, 1e-12);
    const auto kept = simplify_closed(poly, cell);
    std::vector<Vec2> simple;
    for (std::size_t k : kept) simple.push_back(poly[k]);

    // Snap to input vertices and crossings of input edges.
    std::vector<Vec2> anchors;
    for (const auto& l : layouts) anchors.insert(anchors.end(), l.floor_polygon.begin(), l.floor_polygon.end());
    for (std::size_t p = 0; p < layouts.size(); ++p) {
        for (std::size_t q = p + 1; q < layouts.size(); ++q) {
            for (const auto& s1 : layouts[p].walls()) {
                for (const auto& s2 : layouts[q].walls()) {
                    const Vec2 e1 = s1.b - s1.a, e2 = s2.b - s2.a;
                    const double den = cross2(e1, e2);
                    if (std::abs(den) < 1e-15) continue;
                    const double t = cross2(s2.a - s1.a, e2) / den;
                    const double u = cross2(s2.a - s1.a, e1) / den;
                    if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) anchors.push_back(s1.a + t * e1);
                }
            }
        }
    }
    const double snap = opt.snap_cells * cell;
    for (auto& v : simple) {
        double bd = snap;
        for (const auto& a : anchors) {
            const double d = (a - v).norm();
            if (d <= bd) {
                bd = d;
                v = a;
            }
        }
    }
    simple = drop_collinear(simple, 1e-9);
    if (simple.size() < 3 || signed_area(simple) <= 0.0) simple = drop_collinear(best_loop, 1e-12);

    RoomLayout3D room;
    room.floor_polygon = std::move(simple);
    room.floor_y = area_sum > 0.0 ? floor_y / area_sum : layouts.front().floor_y;
    room.ceil_y = area_sum > 0.0 ? ceil_y / area_sum : layouts.front().ceil_y;
    return room;
}

PointCloud sample_layout(const RoomLayout3D& layout, double density, std::uint64_t seed) {
    if (!(density > 0.0) || !std::isfinite(density)) throw InvalidParameterError("sample_layout: density must be positive");
    layout.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(0.0, 1.0);
    const double per_m = std::sqrt(density);
    const Vec3 gray(0.5, 0.5, 0.5);
    PointCloud cloud;

    Vec2 lo = layout.floor_polygon.front(), hi = lo;
    for (const auto& p : layout.floor_polygon) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const auto nx = static_cast<long long>(std::llround((hi.x() - lo.x()) * per_m));
    const auto nz = static_cast<long long>(std::llround((hi.y() - lo.y()) * per_m));
    for (const auto& [y, normal] : {std::pair{layout.floor_y, Vec3(0, -1, 0)}, std::pair{layout.ceil_y, Vec3(0, 1, 0)}}) {
        for (long long j = 0; j < nz; ++j) {
            for (long long i = 0; i < nx; ++i) {
                const double x = lo.x() + (static_cast<double>(i) + jitter(rng)) * (hi.x() - lo.x()) / static_cast<double>(nx);
                const double z = lo.y() + (static_cast<double>(j) + jitter(rng)) * (hi.y() - lo.y()) / static_cast<double>(nz);
                if (!layout.contains(Vec2(x, z))) continue;
                cloud.push_back(Vec3(x, y, z), normal, gray, PointSource::layout);
            }
        }
    }

    const double height = layout.floor_y - layout.ceil_y;
    const auto nv = static_cast<long long>(std::llround(height * per_m));
    for (const auto& wall : layout.walls()) {
        const Vec2 e = wall.b - wall.a;
        const double len = e.norm();
        if (len == 0.0) continue;
        const Vec3 normal = Vec3(-e.y(), 0.0, e.x()) / len;
        const auto nu = static_cast<long long>(std::llround(len * per_m));
        for (long long v = 0; v < nv; ++v) {
            for (long long u = 0; u < nu; ++u) {
                const double s = (static_cast<double>(u) + jitter(rng)) / static_cast<double>(nu);
                const double t = (static_cast<double>(v) + jitter(rng)) / static_cast<double>(nv);
                const Vec2 xz = wall.a + s * e;
                cloud.push_back(Vec3(xz.x(), layout.ceil_y + t * height, xz.y()), normal, gray, PointSource::layout);
            }
        }
    }
    return cloud;
}

PointCloud depth_to_cloud(const Image& depth, const Image& rgb, const PanoramaCamera& cam, int stride) {
    if (depth.channels != 1) throw ShapeMismatchError("depth_to_cloud: depth must have one channel");
    if (depth.height != cam.height || depth.width != cam.width) {
        throw ShapeMismatchError("depth_to_cloud: depth size differs from the camera");
    }
    if (!rgb.empty() && (rgb.height != depth.height || rgb.width != depth.width || rgb.channels != 3)) {
        throw ShapeMismatchError("depth_to_cloud: color image size differs from the depth map");
    }
    if (stride < 1) throw InvalidParameterError("depth_to_cloud: stride must be >= 1");
    const int h = depth.height, w = depth.width;
    auto valid = [&](int r, int c) {
        const double d = depth.at(r, c);
        return std::isfinite(d) && d > 0.0;
    };
    auto point_cam = [&](int r, int c) { return pixel_to_direction(r + 0.5, c + 0.5, h, w) * depth.at(r, c); };

    PointCloud cloud;
    for (int r = 0; r < h; r += stride) {
        for (int c = 0; c < w; c += stride) {
            if (!valid(r, c)) continue;
            const Vec3 p = point_cam(r, c);
            // Tangents from the nearest valid neighbours on each axis (central when possible).
            auto tangent = [&](int r0, int c0, int r1, int c1) -> Vec3 {
                const bool v0 = r0 >= 0 && r0 < h && valid(r0, (c0 + w) % w);
                const bool v1 = r1 >= 0 && r1 < h && valid(r1, (c1 + w) % w);
                if (v0 && v1) return point_cam(r1, (c1 + w) % w) - point_cam(r0, (c0 + w) % w);
                if (v1) return point_cam(r1, (c1 + w) % w) - p;
                if (v0) return p - point_cam(r0, (c0 + w) % w);
                return Vec3::Zero();
            };
            const Vec3 tu = tangent(r, c - 1, r, c + 1);
            const Vec3 tv = tangent(r - 1, c, r + 1, c);
            Vec3 n = tu.cross(tv);
            if (!(n.norm() > 1e-12)) n = -p;
            n.normalize();
            if (n.dot(-p) < 0.0) n = -n;
            const Vec3 color = rgb.empty() ? Vec3(0.5, 0.5, 0.5) : Vec3(rgb.at(r, c, 0), rgb.at(r, c, 1), rgb.at(r, c, 2));
            cloud.push_back(cam.to_world(p), cam.rotation.transpose() * n, color, PointSource::depth);
        }
    }
    return cloud;
}

double align_depth_scale(const PointCloud& cloud, const RoomLayout3D& layout, const PanoramaCamera& cam,
                         std::size_t min_points) {
    const Vec3 center = cam.center();
    std::vector<double> ratios;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.source[i] != PointSource::depth) continue;
        const Vec3 v = cloud.points[i] - center;
        if (!(v.y() > 1e-12)) continue;
        const double s = (layout.floor_y - center.y()) / v.y();
        if (!(s > 0.0)) continue;
        const Vec3 hit = center + s * v;
        if (!layout.contains(Vec2(hit.x(), hit.z()))) continue;
        ratios.push_back(s);
    }
    if (ratios.size() < min_points || ratios.empty()) {
        spdlog::warn("align_depth_scale: only {} floor-region points (need {}), using scale 1", ratios.size(),
                     min_points);
        return 1.0;
    }
    const std::size_t mid = ratios.size() / 2;
    std::nth_element(ratios.begin(), ratios.begin() + static_cast<std::ptrdiff_t>(mid), ratios.end());
    const double upper = ratios[mid];
    if (ratios.size() % 2 == 1) return upper;
    const double lower = *std::max_element(ratios.begin(), ratios.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

void scale_cloud(PointCloud& cloud, const Vec3& center, double scale) {
    for (auto& p : cloud.points) p = center + scale * (p - center);
}

PointCloud fuse_init(const PointCloud& layout_cloud, const std::vector<PointCloud>& depth_clouds, double voxel) {
    PointCloud out = layout_cloud;
    if (!(voxel > 0.0)) {
        for (const auto& d : depth_clouds) out.append(d);
        return out;
    }
    struct Acc {
        Vec3 p = Vec3::Zero(), n = Vec3::Zero(), c = Vec3::Zero();
        std::size_t count = 0;
    };
    std::map<std::array<long long, 3>, Acc> voxels;
    for (const auto& d : depth_clouds) {
        d.validate();
        for (std::size_t i = 0; i < d.size(); ++i) {
            const Vec3& p = d.points[i];
            const std::array<long long, 3> key = {static_cast<long long>(std::floor(p.x() / voxel)),
                                                  static_cast<long long>(std::floor(p.y() / voxel)),
                                                  static_cast<long long>(std::floor(p.z() / voxel))};
            Acc& a = voxels[key];
            a.p += p;
            a.n += d.normals[i];
            a.c += d.colors[i];
            ++a.count;
        }
    }
    for (const auto& [key, a] : voxels) {
        const double inv = 1.0 / static_cast<double>(a.count);
        Vec3 n = a.n;
        n = n.norm() > 1e-12 ? Vec3(n.normalized()) : Vec3(0, -1, 0);
        out.push_back(a.p * inv, n, a.c * inv, PointSource::depth);
    }
    return out;
}

} // namespace panosplat
