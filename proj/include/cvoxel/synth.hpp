#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cvoxel/camera.hpp"
#include "cvoxel/flow.hpp"
#include "cvoxel/grid.hpp"
#include "cvoxel/image.hpp"
#include "cvoxel/losses.hpp"
#include "cvoxel/sampling.hpp"

namespace cvoxel {

// Primitive coordinates are voxel coordinates; box-like ranges are
// half-open [x0, x1). Overlapping primitives resolve last-writer-wins.

struct BoxPrim {
    int x0, y0, z0, x1, y1, z1;
    Rgb color;
};

/// Box with one color per face (-x +x -y +y -z +z); every voxel takes the
/// color of its nearest face, ties in that axis order.
struct FaceBoxPrim {
    int x0, y0, z0, x1, y1, z1;
    std::array<Rgb, 6> colors;
};

struct SpherePrim {
    double cx, cy, cz, radius;
    Rgb color;
};

/// Box with a two-color 3D checkerboard texture of the given cell size.
struct CheckerPrim {
    int x0, y0, z0, x1, y1, z1;
    int cell;
    Rgb color_a, color_b;
};

/// L-shaped solid in the x-y plane extruded along z: a horizontal arm of
/// the given thickness along y0 plus a vertical arm along x0.
struct LBracketPrim {
    int x0, y0, z0, x1, y1, z1;
    int arm;
    Rgb color;
};

using ScenePrimitive = std::variant<BoxPrim, FaceBoxPrim, SpherePrim, CheckerPrim, LBracketPrim>;

struct SceneSpec {
    GridDims dims{32, 32, 32};
    GridFrame frame;
    std::vector<ScenePrimitive> primitives;
};

// Flat text format, one directive per line, '#' comments:
//   dims W H D
//   voxel_size S
//   origin X Y Z
//   box x0 y0 z0 x1 y1 z1 r g b
//   facebox x0 y0 z0 x1 y1 z1 then 6 rgb triples (-x +x -y +y -z +z)
//   sphere cx cy cz radius r g b
//   checker x0 y0 z0 x1 y1 z1 cell r1 g1 b1 r2 g2 b2
//   lbracket x0 y0 z0 x1 y1 z1 arm r g b
inline SceneSpec parse_scene(const std::string& text) {
    SceneSpec spec;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;

        auto fail = [&](const std::string& why) {
            throw std::runtime_error("scene spec line " + std::to_string(line_no) + ": " + why);
        };
        auto read_rgb = [&]() {
            Rgb c;
            if (!(ls >> c[0] >> c[1] >> c[2])) fail("expected r g b");
            return c;
        };

        if (word == "dims") {
            if (!(ls >> spec.dims.width >> spec.dims.height >> spec.dims.depth))
                fail("expected W H D");
        } else if (word == "voxel_size") {
            if (!(ls >> spec.frame.voxel_size)) fail("expected voxel size");
        } else if (word == "origin") {
            if (!(ls >> spec.frame.origin[0] >> spec.frame.origin[1] >> spec.frame.origin[2]))
                fail("expected X Y Z");
        } else if (word == "box") {
            BoxPrim p{};
            if (!(ls >> p.x0 >> p.y0 >> p.z0 >> p.x1 >> p.y1 >> p.z1)) fail("expected box bounds");
            p.color = read_rgb();
            spec.primitives.emplace_back(p);
        } else if (word == "facebox") {
            FaceBoxPrim p{};
            if (!(ls >> p.x0 >> p.y0 >> p.z0 >> p.x1 >> p.y1 >> p.z1))
                fail("expected facebox bounds");
            for (auto& c : p.colors) c = read_rgb();
            spec.primitives.emplace_back(p);
        } else if (word == "sphere") {
            SpherePrim p{};
            if (!(ls >> p.cx >> p.cy >> p.cz >> p.radius)) fail("expected sphere center/radius");
            p.color = read_rgb();
            spec.primitives.emplace_back(p);
        } else if (word == "checker") {
            CheckerPrim p{};
            if (!(ls >> p.x0 >> p.y0 >> p.z0 >> p.x1 >> p.y1 >> p.z1 >> p.cell))
                fail("expected checker bounds and cell");
            p.color_a = read_rgb();
            p.color_b = read_rgb();
            spec.primitives.emplace_back(p);
        } else if (word == "lbracket") {
            LBracketPrim p{};
            if (!(ls >> p.x0 >> p.y0 >> p.z0 >> p.x1 >> p.y1 >> p.z1 >> p.arm))
                fail("expected lbracket bounds and arm");
            p.color = read_rgb();
            spec.primitives.emplace_back(p);
        } else {
            fail("unknown directive '" + word + "'");
        }
    }
    if (!spec.dims.valid()) throw std::runtime_error("scene spec: missing or invalid dims");
    return spec;
}

inline SceneSpec read_scene_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_scene_file: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scene(buf.str());
}

namespace detail {

inline void require_box_bounds(int x0, int y0, int z0, int x1, int y1, int z1,
                               const GridDims& dims, const char* what) {
    if (x0 < 0 || y0 < 0 || z0 < 0 || x1 > dims.width || y1 > dims.height || z1 > dims.depth ||
        x0 >= x1 || y0 >= y1 || z0 >= z1) {
        throw std::invalid_argument(std::string(what) + ": bounds do not fit inside grid " +
                                    dims.str());
    }
}

} // namespace detail

/// Rasterizes the scene's primitives into aligned shape and color volumes.
/// All current primitives are deterministic; the seed is recorded by callers
/// and reserved for randomized primitives.
inline std::pair<ShapeVolume, ColorVolume> gen_scene(const SceneSpec& spec,
                                                     std::uint64_t seed = 0) {
    (void)seed;
    ShapeVolume shape(spec.dims, ShapeKind::GroundTruth);
    ColorVolume color(spec.dims);
    const GridDims& d = spec.dims;

    auto fill = [&](std::size_t i, const Rgb& c) {
        shape.set_value(i, 0, 1.0);
        color.set_vec(i, c);
    };

    for (const ScenePrimitive& prim : spec.primitives) {
        if (const auto* p = std::get_if<BoxPrim>(&prim)) {
            detail::require_box_bounds(p->x0, p->y0, p->z0, p->x1, p->y1, p->z1, d, "box");
            for (int z = p->z0; z < p->z1; ++z)
                for (int y = p->y0; y < p->y1; ++y)
                    for (int x = p->x0; x < p->x1; ++x) fill(d.to_linear(x, y, z), p->color);
        } else if (const auto* p = std::get_if<FaceBoxPrim>(&prim)) {
            detail::require_box_bounds(p->x0, p->y0, p->z0, p->x1, p->y1, p->z1, d, "facebox");
            for (int z = p->z0; z < p->z1; ++z) {
                for (int y = p->y0; y < p->y1; ++y) {
                    for (int x = p->x0; x < p->x1; ++x) {
                        const int dist[6] = {x - p->x0, p->x1 - 1 - x, y - p->y0,
                                             p->y1 - 1 - y, z - p->z0, p->z1 - 1 - z};
                        int face = 0;
                        for (int f = 1; f < 6; ++f) {
                            if (dist[f] < dist[face]) face = f;
                        }
                        fill(d.to_linear(x, y, z), p->colors[face]);
                    }
                }
            }
        } else if (const auto* p = std::get_if<SpherePrim>(&prim)) {
            if (p->cx - p->radius < 0 || p->cy - p->radius < 0 || p->cz - p->radius < 0 ||
                p->cx + p->radius > d.width || p->cy + p->radius > d.height ||
                p->cz + p->radius > d.depth || p->radius <= 0) {
                throw std::invalid_argument("sphere: does not fit inside grid " + d.str());
            }
            const double r2 = p->radius * p->radius;
            for (int z = 0; z < d.depth; ++z) {
                for (int y = 0; y < d.height; ++y) {
                    for (int x = 0; x < d.width; ++x) {
                        const double dx = x + 0.5 - p->cx;
                        const double dy = y + 0.5 - p->cy;
                        const double dz = z + 0.5 - p->cz;
                        if (dx * dx + dy * dy + dz * dz <= r2) fill(d.to_linear(x, y, z), p->color);
                    }
                }
            }
        } else if (const auto* p = std::get_if<CheckerPrim>(&prim)) {
            detail::require_box_bounds(p->x0, p->y0, p->z0, p->x1, p->y1, p->z1, d, "checker");
            if (p->cell < 1) throw std::invalid_argument("checker: cell must be at least 1");
            for (int z = p->z0; z < p->z1; ++z) {
                for (int y = p->y0; y < p->y1; ++y) {
                    for (int x = p->x0; x < p->x1; ++x) {
                        const int parity = ((x - p->x0) / p->cell + (y - p->y0) / p->cell +
                                            (z - p->z0) / p->cell) %
                                           2;
                        fill(d.to_linear(x, y, z), parity == 0 ? p->color_a : p->color_b);
                    }
                }
            }
        } else if (const auto* p = std::get_if<LBracketPrim>(&prim)) {
            detail::require_box_bounds(p->x0, p->y0, p->z0, p->x1, p->y1, p->z1, d, "lbracket");
            if (p->arm < 1 || p->y0 + p->arm > p->y1 || p->x0 + p->arm > p->x1) {
                throw std::invalid_argument("lbracket: arm thickness does not fit");
            }
            for (int z = p->z0; z < p->z1; ++z) {
                for (int y = p->y0; y < p->y1; ++y) {
                    for (int x = p->x0; x < p->x1; ++x) {
                        const bool horizontal = y < p->y0 + p->arm;
                        const bool vertical = x < p->x0 + p->arm;
                        if (horizontal || vertical) fill(d.to_linear(x, y, z), p->color);
                    }
                }
            }
        }
    }
    return {std::move(shape), std::move(color)};
}

/// Renders the grid with one ray per pixel center and exact DDA traversal;
/// the first occupied voxel's color wins. Background is white with mask off.
inline ViewImage render_view(const Camera& cam, const ShapeVolume& shape, const ColorVolume& color,
                             const GridFrame& frame) {
    detail::require_ground_truth(shape, "render_view");
    detail::require_same_dims(shape.dims(), color.dims(), "render_view");
    const GridDims& d = shape.dims();
    const double vs = frame.voxel_size;
    const Vec3 lo = frame.origin;
    const Vec3 hi = {lo[0] + d.width * vs, lo[1] + d.height * vs, lo[2] + d.depth * vs};

    const Vec3 cam_pos = cam.position();
    {
        const int cx = static_cast<int>(std::floor((cam_pos[0] - lo[0]) / vs));
        const int cy = static_cast<int>(std::floor((cam_pos[1] - lo[1]) / vs));
        const int cz = static_cast<int>(std::floor((cam_pos[2] - lo[2]) / vs));
        if (d.contains(cx, cy, cz) && shape.occupied(d.to_linear(cx, cy, cz))) {
            throw std::runtime_error("render_view: camera is inside an occupied voxel");
        }
    }

    // rows of R^T = columns of R
    const auto& r = cam.rotation;
    ViewImage view(cam.img_w, cam.img_h);
    for (double& v : view.rgb) v = 1.0;

    for (int py = 0; py < cam.img_h; ++py) {
        for (int px = 0; px < cam.img_w; ++px) {
            const double dx_c = (px - cam.cx) / cam.fx;
            const double dy_c = (py - cam.cy) / cam.fy;
            const Vec3 dir = {r[0] * dx_c + r[3] * dy_c + r[6],
                              r[1] * dx_c + r[4] * dy_c + r[7],
                              r[2] * dx_c + r[5] * dy_c + r[8]};

            // slab test against the grid bounds
            double t_enter = 0.0;
            double t_exit = std::numeric_limits<double>::infinity();
            bool miss = false;
            for (int a = 0; a < 3 && !miss; ++a) {
                if (dir[a] == 0.0) {
                    if (cam_pos[a] < lo[a] || cam_pos[a] > hi[a]) miss = true;
                } else {
                    double t0 = (lo[a] - cam_pos[a]) / dir[a];
                    double t1 = (hi[a] - cam_pos[a]) / dir[a];
                    if (t0 > t1) std::swap(t0, t1);
                    t_enter = std::max(t_enter, t0);
                    t_exit = std::min(t_exit, t1);
                }
            }
            if (miss || t_enter > t_exit) continue;

            const Vec3 entry = cam_pos + t_enter * dir;
            int cell[3];
            int step[3];
            double t_max[3];
            double t_delta[3];
            const int dim[3] = {d.width, d.height, d.depth};
            for (int a = 0; a < 3; ++a) {
                cell[a] = std::clamp(static_cast<int>(std::floor((entry[a] - lo[a]) / vs)), 0,
                                     dim[a] - 1);
                if (dir[a] > 0.0) {
                    step[a] = 1;
                    t_delta[a] = vs / dir[a];
                    t_max[a] = (lo[a] + (cell[a] + 1) * vs - cam_pos[a]) / dir[a];
                } else if (dir[a] < 0.0) {
                    step[a] = -1;
                    t_delta[a] = -vs / dir[a];
                    t_max[a] = (lo[a] + cell[a] * vs - cam_pos[a]) / dir[a];
                } else {
                    step[a] = 0;
                    t_delta[a] = std::numeric_limits<double>::infinity();
                    t_max[a] = std::numeric_limits<double>::infinity();
                }
            }

            while (true) {
                const std::size_t i = d.to_linear(cell[0], cell[1], cell[2]);
                if (shape.occupied(i)) {
                    view.set_pixel(px, py, color.vec(i));
                    view.set_foreground(px, py, true);
                    break;
                }
                const int a = (t_max[0] <= t_max[1] && t_max[0] <= t_max[2]) ? 0
                              : (t_max[1] <= t_max[2])                       ? 1
                                                                             : 2;
                cell[a] += step[a];
                if (cell[a] < 0 || cell[a] >= dim[a]) break;
                t_max[a] += t_delta[a];
            }
        }
    }
    return view;
}

/// Cameras on a horizontal ring around the grid center, looking at it.
/// Azimuth step is 360/n degrees. Radius and focal default to values that
/// keep the whole grid inside the frame.
inline std::vector<Camera> make_azimuth_cameras(int n, double elevation_deg, double radius,
                                                const GridDims& dims, const GridFrame& frame,
                                                int img_w = 128, int img_h = 128,
                                                double focal = 0.0) {
    if (n < 1) throw std::invalid_argument("make_azimuth_cameras: n must be at least 1");
    const Vec3 center = frame.grid_center(dims);
    const double half_diag = 0.5 * frame.voxel_size *
                             std::sqrt(static_cast<double>(dims.width) * dims.width +
                                       static_cast<double>(dims.height) * dims.height +
                                       static_cast<double>(dims.depth) * dims.depth);
    if (radius <= 0.0) radius = 2.2 * half_diag;
    if (focal <= 0.0) focal = 0.8 * (std::min(img_w, img_h) / 2.0) * radius / half_diag;

    constexpr double kPi = 3.14159265358979323846;
    const double elev = elevation_deg * kPi / 180.0;
    std::vector<Camera> cams;
    cams.reserve(n);
    for (int k = 0; k < n; ++k) {
        const double azim = 2.0 * kPi * k / n;
        const Vec3 pos = {center[0] + radius * std::cos(elev) * std::cos(azim),
                          center[1] + radius * std::sin(elev),
                          center[2] + radius * std::cos(elev) * std::sin(azim)};
        cams.push_back(look_at_camera(pos, center, {0.0, 1.0, 0.0}, focal, focal, img_w / 2.0,
                                      img_h / 2.0, img_w, img_h));
    }
    return cams;
}

// ---------------------------------------------------------------------------
// Direct-optimization demo
// ---------------------------------------------------------------------------

struct FitDemoConfig {
    int iters = 500;
    double lr = 0.5;
    double lr_decay = 0.99;          // per-iteration step multiplier
    std::uint64_t seed = 17;
    double flow_noise = 2.0;         // px, uniform init perturbation
    bool init_flow_at_target = false;
};

struct FitDemoReport {
    std::vector<double> shape_loss; // msfcel per iteration, incl. the final state
    std::vector<double> color_loss; // total color objective likewise
    std::vector<double> flow_loss;  // the flow sub-term of the color objective

    double shape_drop() const { return 1.0 - shape_loss.back() / shape_loss.front(); }
    double color_drop() const { return 1.0 - color_loss.back() / color_loss.front(); }
};

/// Fits prediction volumes directly to a synthetic scene by gradient descent
/// on the shape loss and the total color objective, exercising every
/// analytic gradient end to end. Steps undo the per-class / per-surface mean
/// normalization (class-balanced scaling) and decay geometrically; predicted
/// probabilities, colors and weights are projected back into their ranges
/// after each step.
inline FitDemoReport direct_fit_demo(const SceneSpec& spec, const Camera& cam,
                                     const FitDemoConfig& config) {
    if (config.iters < 1) throw std::invalid_argument("direct_fit_demo: iters must be >= 1");
    if (!(config.lr > 0.0)) throw std::invalid_argument("direct_fit_demo: lr must be positive");

    auto [gt_shape, gt_color] = gen_scene(spec, config.seed);
    const SurfaceIndex surf = extract_surface(gt_shape);
    detail::require_surface(surf, "direct_fit_demo");
    const ViewImage view = quantize_view(render_view(cam, gt_shape, gt_color, spec.frame));
    const FlowVolume tflow = target_flow(cam, gt_shape, gt_color, surf, view, spec.frame);
    const VisibilityMap vis = classify_visibility(cam, gt_shape, surf, spec.frame);

    const GridDims& d = spec.dims;
    ShapeVolume pred_shape(d, ShapeKind::Prediction, 0.5);
    ColorVolume regressed(d, 0.5);
    WeightVolume weights(d, 0.5);
    FlowVolume pred_flow(d);

    std::mt19937_64 rng(config.seed);
    for (std::size_t k = 0; k < surf.count(); ++k) {
        const std::size_t i = surf.voxels[k];
        Vec2 uv;
        if (config.init_flow_at_target) {
            uv = tflow.vec(i);
        } else {
            uv = {std::clamp(vis.projections[k].u, 0.0, cam.img_w - 1.0),
                  std::clamp(vis.projections[k].v, 0.0, cam.img_h - 1.0)};
        }
        uv[0] = std::clamp(uv[0] + uniform(rng, -config.flow_noise, config.flow_noise), 0.0,
                           cam.img_w - 1.0);
        uv[1] = std::clamp(uv[1] + uniform(rng, -config.flow_noise, config.flow_noise), 0.0,
                           cam.img_h - 1.0);
        pred_flow.set_vec(i, uv);
    }

    const double class_p = static_cast<double>(gt_shape.occupied_count());
    const double class_n = static_cast<double>(d.voxel_count()) - class_p;
    const double s_count = static_cast<double>(surf.count());

    FitDemoReport report;
    double step = config.lr;
    for (int iter = 0; iter <= config.iters; ++iter) {
        const LossReport shape_rep = msfcel(gt_shape, pred_shape);
        const ColorVolume sampled = sample_colors(view, pred_flow, surf, SampleMode::Bilinear);
        const LossReport color_rep =
            total_color_loss(tflow, pred_flow, gt_color, regressed, sampled, weights, surf);
        report.shape_loss.push_back(shape_rep.loss);
        report.color_loss.push_back(color_rep.loss);
        report.flow_loss.push_back(color_rep.term("l_flow"));
        if (!std::isfinite(shape_rep.loss) || !std::isfinite(color_rep.loss)) {
            throw std::runtime_error("direct_fit_demo: loss diverged at iteration " +
                                     std::to_string(iter));
        }
        if (iter == config.iters) break;

        const GradField& g_shape = shape_rep.grad("pred_shape");
        for (std::size_t i = 0; i < d.voxel_count(); ++i) {
            const double scale = gt_shape.occupied(i) ? class_p : class_n;
            const double v = pred_shape.value(i) - step * scale * g_shape.at(i);
            pred_shape.set_value(i, 0, std::clamp(v, 1e-6, 1.0 - 1e-6));
        }

        const GradField& g_flow = color_rep.grad("pred_flow");
        const GradField& g_regress = color_rep.grad("regressed");
        const GradField& g_weights = color_rep.grad("weights");
        for (std::size_t i : surf.voxels) {
            const double u =
                pred_flow.value(i, 0) - step * s_count * g_flow.at(i, 0);
            const double v =
                pred_flow.value(i, 1) - step * s_count * g_flow.at(i, 1);
            pred_flow.set_value(i, 0, std::clamp(u, 0.0, cam.img_w - 1.0));
            pred_flow.set_value(i, 1, std::clamp(v, 0.0, cam.img_h - 1.0));
            for (int c = 0; c < 3; ++c) {
                const double rc = regressed.value(i, c) - step * s_count * g_regress.at(i, c);
                regressed.set_value(i, c, clamp01(rc));
            }
            const double w = weights.value(i) - step * s_count * g_weights.at(i);
            weights.set_value(i, 0, clamp01(w));
        }
        step *= config.lr_decay;
    }
    return report;
}

} // namespace cvoxel
