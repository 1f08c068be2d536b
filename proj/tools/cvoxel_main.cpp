// cvoxel: command-line pipelines for colorful voxel reconstruction data:
// synthetic scenes, rendered views, appearance-flow targets, color sampling
// and blending, shape/color losses with gradient checks, and evaluation
// metrics. File formats: CVOL volumes, PPM/PGM views, flat-text cameras,
// scene specs, CSV reports and ASCII PLY point clouds.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "cvoxel/camera.hpp"
#include "cvoxel/cvol.hpp"
#include "cvoxel/flow.hpp"
#include "cvoxel/grid.hpp"
#include "cvoxel/image.hpp"
#include "cvoxel/losses.hpp"
#include "cvoxel/metrics.hpp"
#include "cvoxel/ply.hpp"
#include "cvoxel/sampling.hpp"
#include "cvoxel/synth.hpp"

namespace {

using namespace cvoxel;

constexpr double kDefaultAlpha = 0.2;
constexpr double kDefaultDeltaColor = 0.1;
constexpr double kDefaultThreshold = 0.5;
constexpr int kDefaultT1 = 50;
constexpr int kDefaultK = 128;
constexpr int kDefaultT2 = 5;
constexpr std::uint64_t kDefaultSeed = 17;

struct FrameOptions {
    double voxel_size = 1.0;
    std::vector<double> origin{0.0, 0.0, 0.0};

    GridFrame frame() const {
        GridFrame f;
        f.voxel_size = voxel_size;
        f.origin = {origin[0], origin[1], origin[2]};
        return f;
    }
};

void add_frame_options(CLI::App* cmd, FrameOptions& opts) {
    cmd->add_option("--voxel-size", opts.voxel_size, "world units per voxel")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--origin", opts.origin, "grid origin in world units")->expected(3);
}

void require_dims(const GridDims& got, const GridDims& expected, const std::string& path) {
    if (!(got == expected)) {
        throw std::runtime_error(path + ": dims " + got.str() + ", expected " + expected.str());
    }
}

ShapeVolume load_ground_truth_shape(const std::string& path) {
    ShapeVolume shape = read_shape_cvol(path);
    if (shape.kind() != ShapeKind::GroundTruth) {
        throw std::runtime_error(path +
                                 ": binary ground-truth occupancy required (threshold it first)");
    }
    return shape;
}

SurfaceIndex surface_from_file(const std::string& path, const GridDims& expected) {
    const ShapeVolume shape = load_ground_truth_shape(path);
    require_dims(shape.dims(), expected, path);
    return extract_surface(shape);
}

void append_csv_row(const std::string& path, const std::string& header, const std::string& row) {
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open " + path);
    if (fresh) out << header << "\n";
    out << row << "\n";
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void setup_gen_scene(CLI::App& app) {
    auto cmd = app.add_subcommand("gen-scene", "rasterize a scene spec into shape+color volumes");
    auto spec_path = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(kDefaultSeed);
    auto out_shape = std::make_shared<std::string>();
    auto out_color = std::make_shared<std::string>();
    cmd->add_option("--spec", *spec_path, "scene spec file")->required();
    cmd->add_option("--seed", *seed, "scene seed (recorded)");
    cmd->add_option("--out-shape", *out_shape, "output shape CVOL")->required();
    cmd->add_option("--out-color", *out_color, "output color CVOL")->required();
    cmd->callback([=]() {
        const SceneSpec spec = read_scene_file(*spec_path);
        const auto [shape, color] = gen_scene(spec, *seed);
        write_cvol(*out_shape, shape);
        write_cvol(*out_color, color);
        std::cout << "dims=" << spec.dims.str() << "\noccupied=" << shape.occupied_count()
                  << "\nseed=" << *seed << "\n";
    });
}

void setup_render(CLI::App& app) {
    auto cmd = app.add_subcommand("render", "render a view of a colorful volume");
    auto shape_path = std::make_shared<std::string>();
    auto color_path = std::make_shared<std::string>();
    auto camera_path = std::make_shared<std::string>();
    auto out_view = std::make_shared<std::string>();
    auto out_mask = std::make_shared<std::string>();
    auto frame_opts = std::make_shared<FrameOptions>();
    cmd->add_option("--shape", *shape_path, "shape CVOL")->required();
    cmd->add_option("--color", *color_path, "color CVOL")->required();
    cmd->add_option("--camera", *camera_path, "camera config file")->required();
    cmd->add_option("--out-view", *out_view, "output PPM")->required();
    cmd->add_option("--out-mask", *out_mask, "output PGM mask")->required();
    add_frame_options(cmd, *frame_opts);
    cmd->callback([=]() {
        const ShapeVolume shape = load_ground_truth_shape(*shape_path);
        const ColorVolume color = read_color_cvol(*color_path);
        require_dims(color.dims(), shape.dims(), *color_path);
        const Camera cam = read_camera_file(*camera_path);
        const ViewImage view = render_view(cam, shape, color, frame_opts->frame());
        write_ppm(*out_view, view);
        write_pgm_mask(*out_mask, view);
        std::cout << "foreground=" << view.foreground_count() << "\n";
    });
}

void setup_cameras(CLI::App& app) {
    auto cmd = app.add_subcommand("cameras", "write an azimuth ring of camera configs");
    auto n = std::make_shared<int>(12);
    auto elevation = std::make_shared<double>(20.0);
    auto radius = std::make_shared<double>(0.0);
    auto out_dir = std::make_shared<std::string>();
    auto dims_vec = std::make_shared<std::vector<int>>(std::vector<int>{32, 32, 32});
    auto img_w = std::make_shared<int>(128);
    auto img_h = std::make_shared<int>(128);
    auto focal = std::make_shared<double>(0.0);
    auto frame_opts = std::make_shared<FrameOptions>();
    cmd->add_option("--n", *n, "number of cameras");
    cmd->add_option("--elevation", *elevation, "elevation in degrees");
    cmd->add_option("--radius", *radius, "ring radius in world units (0 = auto)");
    cmd->add_option("--out", *out_dir, "output directory")->required();
    cmd->add_option("--dims", *dims_vec, "grid dims W H D")->expected(3);
    cmd->add_option("--img-w", *img_w, "image width");
    cmd->add_option("--img-h", *img_h, "image height");
    cmd->add_option("--focal", *focal, "focal length in pixels (0 = auto)");
    add_frame_options(cmd, *frame_opts);
    cmd->callback([=]() {
        const GridDims dims{(*dims_vec)[0], (*dims_vec)[1], (*dims_vec)[2]};
        const auto cams = make_azimuth_cameras(*n, *elevation, *radius, dims,
                                               frame_opts->frame(), *img_w, *img_h, *focal);
        std::filesystem::create_directories(*out_dir);
        for (std::size_t k = 0; k < cams.size(); ++k) {
            char name[32];
            std::snprintf(name, sizeof(name), "cam_%03zu.txt", k);
            const std::string path = (std::filesystem::path(*out_dir) / name).string();
            write_camera_file(path, cams[k]);
            std::cout << path << "\n";
        }
    });
}

void setup_flow_gen(CLI::App& app) {
    auto cmd = app.add_subcommand("flow-gen", "generate the ground-truth appearance flow field");
    auto shape_path = std::make_shared<std::string>();
    auto color_path = std::make_shared<std::string>();
    auto camera_path = std::make_shared<std::string>();
    auto view_path = std::make_shared<std::string>();
    auto mask_path = std::make_shared<std::string>();
    auto delta_color = std::make_shared<double>(kDefaultDeltaColor);
    auto out_path = std::make_shared<std::string>();
    auto out_ppm = std::make_shared<std::string>();
    auto frame_opts = std::make_shared<FrameOptions>();
    cmd->add_option("--shape", *shape_path, "shape CVOL")->required();
    cmd->add_option("--color", *color_path, "color CVOL")->required();
    cmd->add_option("--camera", *camera_path, "camera config")->required();
    cmd->add_option("--view", *view_path, "view PPM")->required();
    cmd->add_option("--mask", *mask_path, "mask PGM")->required();
    cmd->add_option("--delta-color", *delta_color, "color similarity tolerance");
    cmd->add_option("--out", *out_path, "output flow CVOL")->required();
    cmd->add_option("--out-ppm", *out_ppm, "optional flow visualization PPM");
    add_frame_options(cmd, *frame_opts);
    cmd->callback([=]() {
        const ShapeVolume shape = load_ground_truth_shape(*shape_path);
        const ColorVolume color = read_color_cvol(*color_path);
        require_dims(color.dims(), shape.dims(), *color_path);
        const Camera cam = read_camera_file(*camera_path);
        const ViewImage view = read_view(*view_path, *mask_path);
        const SurfaceIndex surf = extract_surface(shape);
        FlowConfig config;
        config.color_tolerance = *delta_color;
        const FlowVolume flow =
            target_flow(cam, shape, color, surf, view, frame_opts->frame(), config);
        write_cvol(*out_path, flow);
        if (!out_ppm->empty()) write_ppm(*out_ppm, flow_to_image(flow, cam.img_w, cam.img_h));
        std::cout << "surface=" << surf.count() << "\n";
    });
}

void setup_sample(CLI::App& app) {
    auto cmd = app.add_subcommand("sample", "sample view colors at flow coordinates");
    auto view_path = std::make_shared<std::string>();
    auto mask_path = std::make_shared<std::string>();
    auto flow_path = std::make_shared<std::string>();
    auto surface_from = std::make_shared<std::string>();
    auto mode = std::make_shared<std::string>("bilinear");
    auto out_path = std::make_shared<std::string>();
    cmd->add_option("--view", *view_path, "view PPM")->required();
    cmd->add_option("--mask", *mask_path, "mask PGM")->required();
    cmd->add_option("--flow", *flow_path, "flow CVOL")->required();
    cmd->add_option("--surface-from", *surface_from, "shape CVOL defining the surface")->required();
    cmd->add_option("--mode", *mode, "bilinear | nearest-fg")
        ->check(CLI::IsMember({"bilinear", "nearest-fg"}));
    cmd->add_option("--out", *out_path, "output color CVOL")->required();
    cmd->callback([=]() {
        const ViewImage view = read_view(*view_path, *mask_path);
        const FlowVolume flow = read_flow_cvol(*flow_path);
        const SurfaceIndex surf = surface_from_file(*surface_from, flow.dims());
        const SampleMode m =
            *mode == "bilinear" ? SampleMode::Bilinear : SampleMode::NearestForeground;
        write_cvol(*out_path, sample_colors(view, flow, surf, m));
    });
}

void setup_blend(CLI::App& app) {
    auto cmd = app.add_subcommand(
        "blend", "recalculate weights with alpha, then blend sampled and regressed colors");
    auto sampled_path = std::make_shared<std::string>();
    auto regressed_path = std::make_shared<std::string>();
    auto weights_path = std::make_shared<std::string>();
    auto alpha = std::make_shared<double>(kDefaultAlpha);
    auto out_path = std::make_shared<std::string>();
    auto surface_from = std::make_shared<std::string>();
    cmd->add_option("--sampled", *sampled_path, "sampled color CVOL")->required();
    cmd->add_option("--regressed", *regressed_path, "regressed color CVOL")->required();
    cmd->add_option("--weights", *weights_path, "blending weight CVOL")->required();
    cmd->add_option("--alpha", *alpha, "weight recalculation alpha; 1 keeps raw weights");
    cmd->add_option("--out", *out_path, "output color CVOL")->required();
    cmd->add_option("--surface-from", *surface_from,
                    "optional shape CVOL; restricts blending to its surface voxels");
    cmd->callback([=]() {
        const ColorVolume sampled = read_color_cvol(*sampled_path);
        const ColorVolume regressed = read_color_cvol(*regressed_path);
        const WeightVolume weights = read_weight_cvol(*weights_path);
        require_dims(regressed.dims(), sampled.dims(), *regressed_path);
        require_dims(weights.dims(), sampled.dims(), *weights_path);
        const WeightVolume recalced = recalc_weights(weights, *alpha);
        if (surface_from->empty()) {
            write_cvol(*out_path, blend_all(sampled, regressed, recalced));
        } else {
            const SurfaceIndex surf = surface_from_file(*surface_from, sampled.dims());
            write_cvol(*out_path, blend(sampled, regressed, recalced, surf));
        }
    });
}

struct LossOptions {
    std::string kind;
    std::string gt_shape, pred_shape;
    std::string gt_color, pred_color;
    std::string target_flow, pred_flow;
    std::string sampled, regressed, weights;
    std::string surface_from;
    std::string grad_out, grad_out_regressed, grad_out_weights;
};

void write_grad(const std::string& path, const GradField& grad) {
    cvol::write(path, grad.dims, grad.channels, grad.values);
    std::cout << "grad=" << path << "\n";
}

void setup_loss(CLI::App& app) {
    auto cmd = app.add_subcommand("loss", "evaluate a loss and report its terms");
    auto o = std::make_shared<LossOptions>();
    cmd->add_option("--kind", o->kind, "msfcel | ce | l2 | flow | clr | blend | total")
        ->required()
        ->check(CLI::IsMember({"msfcel", "ce", "l2", "flow", "clr", "blend", "total"}));
    cmd->add_option("--gt-shape", o->gt_shape, "ground-truth shape CVOL");
    cmd->add_option("--pred-shape", o->pred_shape, "predicted shape CVOL");
    cmd->add_option("--gt-color", o->gt_color, "ground-truth color CVOL");
    cmd->add_option("--pred-color", o->pred_color, "predicted (regressed) color CVOL");
    cmd->add_option("--target-flow", o->target_flow, "target flow CVOL");
    cmd->add_option("--pred-flow", o->pred_flow, "predicted flow CVOL");
    cmd->add_option("--sampled", o->sampled, "sampled color CVOL");
    cmd->add_option("--regressed", o->regressed, "regressed color CVOL");
    cmd->add_option("--weights", o->weights, "blending weight CVOL");
    cmd->add_option("--surface-from", o->surface_from, "shape CVOL defining the surface");
    cmd->add_option("--grad-out", o->grad_out, "write the primary gradient as CVOL");
    cmd->add_option("--grad-out-regressed", o->grad_out_regressed,
                    "total only: regressed-color gradient CVOL");
    cmd->add_option("--grad-out-weights", o->grad_out_weights,
                    "total only: weight gradient CVOL");
    cmd->callback([=]() {
        auto need = [&](const std::string& value, const char* flag) -> const std::string& {
            if (value.empty()) {
                throw std::runtime_error("loss --kind " + o->kind + " requires " + flag);
            }
            return value;
        };
        LossReport rep;
        std::string primary_grad;
        if (o->kind == "msfcel" || o->kind == "ce" || o->kind == "l2") {
            const ShapeVolume gt = load_ground_truth_shape(need(o->gt_shape, "--gt-shape"));
            ShapeVolume pred = read_shape_cvol(need(o->pred_shape, "--pred-shape"));
            require_dims(pred.dims(), gt.dims(), o->pred_shape);
            rep = o->kind == "msfcel" ? msfcel(gt, pred)
                  : o->kind == "ce"   ? cross_entropy_loss(gt, pred)
                                      : l2_shape_loss(gt, pred);
            primary_grad = "pred_shape";
        } else if (o->kind == "flow") {
            const FlowVolume target = read_flow_cvol(need(o->target_flow, "--target-flow"));
            const FlowVolume pred = read_flow_cvol(need(o->pred_flow, "--pred-flow"));
            require_dims(pred.dims(), target.dims(), o->pred_flow);
            const SurfaceIndex surf =
                surface_from_file(need(o->surface_from, "--surface-from"), target.dims());
            rep = flow_loss(target, pred, surf);
            primary_grad = "pred_flow";
        } else if (o->kind == "clr") {
            const ColorVolume gt = read_color_cvol(need(o->gt_color, "--gt-color"));
            const ColorVolume pred = read_color_cvol(need(o->pred_color, "--pred-color"));
            require_dims(pred.dims(), gt.dims(), o->pred_color);
            const SurfaceIndex surf =
                surface_from_file(need(o->surface_from, "--surface-from"), gt.dims());
            rep = clr_regress_loss(gt, pred, surf);
            primary_grad = "pred_color";
        } else if (o->kind == "blend") {
            const ColorVolume gt = read_color_cvol(need(o->gt_color, "--gt-color"));
            const ColorVolume sampled = read_color_cvol(need(o->sampled, "--sampled"));
            const ColorVolume regressed = read_color_cvol(need(o->regressed, "--regressed"));
            const WeightVolume weights = read_weight_cvol(need(o->weights, "--weights"));
            require_dims(sampled.dims(), gt.dims(), o->sampled);
            require_dims(regressed.dims(), gt.dims(), o->regressed);
            require_dims(weights.dims(), gt.dims(), o->weights);
            const SurfaceIndex surf =
                surface_from_file(need(o->surface_from, "--surface-from"), gt.dims());
            rep = blend_loss(gt, sampled, regressed, weights, surf);
            primary_grad = "weights";
        } else { // total
            const FlowVolume target = read_flow_cvol(need(o->target_flow, "--target-flow"));
            const FlowVolume pred_f = read_flow_cvol(need(o->pred_flow, "--pred-flow"));
            const ColorVolume gt = read_color_cvol(need(o->gt_color, "--gt-color"));
            const ColorVolume regressed = read_color_cvol(need(o->regressed, "--regressed"));
            const ColorVolume sampled = read_color_cvol(need(o->sampled, "--sampled"));
            const WeightVolume weights = read_weight_cvol(need(o->weights, "--weights"));
            require_dims(pred_f.dims(), target.dims(), o->pred_flow);
            require_dims(gt.dims(), target.dims(), o->gt_color);
            require_dims(regressed.dims(), target.dims(), o->regressed);
            require_dims(sampled.dims(), target.dims(), o->sampled);
            require_dims(weights.dims(), target.dims(), o->weights);
            const SurfaceIndex surf =
                surface_from_file(need(o->surface_from, "--surface-from"), target.dims());
            rep = total_color_loss(target, pred_f, gt, regressed, sampled, weights, surf);
            primary_grad = "pred_flow";
        }
        std::cout << format_loss_report(rep);
        if (!o->grad_out.empty()) write_grad(o->grad_out, rep.grad(primary_grad));
        if (!o->grad_out_regressed.empty()) write_grad(o->grad_out_regressed, rep.grad("regressed"));
        if (!o->grad_out_weights.empty()) write_grad(o->grad_out_weights, rep.grad("weights"));
    });
}

void setup_grad_check(CLI::App& app) {
    auto cmd = app.add_subcommand("grad-check",
                                  "compare analytic gradients against central differences");
    auto kind = std::make_shared<std::string>();
    auto step = std::make_shared<double>(1e-5);
    auto trials = std::make_shared<int>(20);
    auto dims_vec = std::make_shared<std::vector<int>>(std::vector<int>{8, 8, 8});
    auto seed = std::make_shared<std::uint64_t>(kDefaultSeed);
    auto tol = std::make_shared<double>(1e-4);
    cmd->add_option("--kind", *kind, "msfcel | ce | l2 | flow | clr | blend")
        ->required()
        ->check(CLI::IsMember({"msfcel", "ce", "l2", "flow", "clr", "blend"}));
    cmd->add_option("--step", *step, "finite-difference step")->check(CLI::PositiveNumber);
    cmd->add_option("--trials", *trials, "number of random instances");
    cmd->add_option("--dims", *dims_vec, "instance dims W H D")->expected(3);
    cmd->add_option("--seed", *seed, "base seed");
    cmd->add_option("--tol", *tol, "max relative error to accept");
    cmd->callback([=]() {
        const GridDims dims{(*dims_vec)[0], (*dims_vec)[1], (*dims_vec)[2]};
        const LossKind k = parse_loss_kind(*kind);
        double worst = 0.0;
        for (int t = 0; t < *trials; ++t) {
            const auto inst = make_grad_check_instance(k, dims, *seed + t);
            const GradCheckReport rep = grad_check(k, inst, *step);
            worst = std::max(worst, rep.max_rel_err);
            std::cout << "trial=" << t << " max_rel_err=" << rep.max_rel_err
                      << " compared=" << rep.compared << " skipped=" << rep.skipped << "\n";
        }
        std::cout << "worst=" << worst << " tol=" << *tol << "\n";
        if (worst >= *tol) throw std::runtime_error("gradient check failed");
    });
}

void setup_metrics(CLI::App& app) {
    auto cmd = app.add_subcommand("metrics", "IoU and surface PSNR, with an optional CSV row");
    auto gt_shape_path = std::make_shared<std::string>();
    auto gt_color_path = std::make_shared<std::string>();
    auto pred_shape_path = std::make_shared<std::string>();
    auto pred_color_path = std::make_shared<std::string>();
    auto threshold = std::make_shared<double>(kDefaultThreshold);
    auto out_csv = std::make_shared<std::string>();
    auto id = std::make_shared<std::string>("0");
    auto view_id = std::make_shared<std::string>("0");
    auto view_path = std::make_shared<std::string>();
    auto mask_path = std::make_shared<std::string>();
    auto t1 = std::make_shared<int>(kDefaultT1);
    auto k = std::make_shared<int>(kDefaultK);
    auto t2 = std::make_shared<int>(kDefaultT2);
    auto seed = std::make_shared<std::uint64_t>(kDefaultSeed);
    cmd->add_option("--gt-shape", *gt_shape_path, "ground-truth shape CVOL")->required();
    cmd->add_option("--gt-color", *gt_color_path, "ground-truth color CVOL")->required();
    cmd->add_option("--pred-shape", *pred_shape_path, "predicted shape CVOL")->required();
    cmd->add_option("--pred-color", *pred_color_path, "predicted color CVOL")->required();
    cmd->add_option("--threshold", *threshold, "occupancy binarization threshold");
    cmd->add_option("--out", *out_csv, "append a CSV row to this report file");
    cmd->add_option("--id", *id, "instance id for the CSV row");
    cmd->add_option("--view-id", *view_id, "view id for the CSV row");
    cmd->add_option("--view", *view_path, "view PPM for color complexity");
    cmd->add_option("--mask", *mask_path, "mask PGM for color complexity");
    cmd->add_option("--t1", *t1, "palette count filter");
    cmd->add_option("--k", *k, "palette size");
    cmd->add_option("--t2", *t2, "complexity assignment threshold");
    cmd->add_option("--seed", *seed, "palette seed");
    cmd->callback([=]() {
        const ShapeVolume gt_shape = load_ground_truth_shape(*gt_shape_path);
        const ColorVolume gt_color = read_color_cvol(*gt_color_path);
        require_dims(gt_color.dims(), gt_shape.dims(), *gt_color_path);
        ShapeVolume pred_shape = read_shape_cvol(*pred_shape_path);
        require_dims(pred_shape.dims(), gt_shape.dims(), *pred_shape_path);
        if (pred_shape.kind() == ShapeKind::Prediction) {
            pred_shape = threshold_occupancy(pred_shape, *threshold);
        }
        const ColorVolume pred_color = read_color_cvol(*pred_color_path);
        require_dims(pred_color.dims(), gt_shape.dims(), *pred_color_path);

        const double iou_value = iou(gt_shape, pred_shape);
        const double psnr_rgb =
            surface_psnr(gt_shape, gt_color, pred_shape, pred_color, ColorSpace::Rgb);
        const double psnr_ycc =
            surface_psnr(gt_shape, gt_color, pred_shape, pred_color, ColorSpace::YCbCr);
        std::string complexity;
        if (!view_path->empty()) {
            if (mask_path->empty()) throw std::runtime_error("--view requires --mask");
            const ViewImage view = read_view(*view_path, *mask_path);
            const ColorPalette palette = build_palette({view}, *t1, *k, *seed);
            complexity = std::to_string(color_complexity(view, palette, *t2));
        }

        std::cout << "iou=" << format_double(iou_value) << "\n"
                  << "psnr_rgb=" << format_double(psnr_rgb) << "\n"
                  << "psnr_ycbcr=" << format_double(psnr_ycc) << "\n";
        if (!complexity.empty()) std::cout << "color_complexity=" << complexity << "\n";
        if (!out_csv->empty()) {
            append_csv_row(*out_csv, "id,view,iou,psnr_rgb,psnr_ycbcr,color_complexity",
                           *id + "," + *view_id + "," + format_double(iou_value) + "," +
                               format_double(psnr_rgb) + "," + format_double(psnr_ycc) + "," +
                               complexity);
        }
    });
}

void setup_complexity(CLI::App& app) {
    auto cmd = app.add_subcommand("complexity",
                                  "dataset palette and per-view color complexity counts");
    auto views_dir = std::make_shared<std::string>();
    auto t1 = std::make_shared<int>(kDefaultT1);
    auto k = std::make_shared<int>(kDefaultK);
    auto t2 = std::make_shared<int>(kDefaultT2);
    auto seed = std::make_shared<std::uint64_t>(kDefaultSeed);
    auto out_csv = std::make_shared<std::string>();
    cmd->add_option("--views", *views_dir,
                    "directory of <name>.ppm views with matching <name>.pgm masks")
        ->required();
    cmd->add_option("--t1", *t1, "color count filter");
    cmd->add_option("--k", *k, "palette size");
    cmd->add_option("--t2", *t2, "assignment threshold");
    cmd->add_option("--seed", *seed, "k-means seed");
    cmd->add_option("--out", *out_csv, "optional CSV output");
    cmd->callback([=]() {
        std::vector<std::string> stems;
        for (const auto& entry : std::filesystem::directory_iterator(*views_dir)) {
            if (entry.path().extension() == ".ppm") {
                stems.push_back((entry.path().parent_path() / entry.path().stem()).string());
            }
        }
        std::sort(stems.begin(), stems.end());
        if (stems.empty()) throw std::runtime_error(*views_dir + ": no .ppm views found");

        std::vector<ViewImage> views;
        views.reserve(stems.size());
        for (const std::string& stem : stems) {
            views.push_back(read_view(stem + ".ppm", stem + ".pgm"));
        }
        const ColorPalette palette = build_palette(views, *t1, *k, *seed);
        std::cout << "palette_size=" << palette.centers.size() << "\nseed=" << *seed << "\n";
        for (std::size_t i = 0; i < views.size(); ++i) {
            const int c = color_complexity(views[i], palette, *t2);
            const std::string name = std::filesystem::path(stems[i]).filename().string();
            std::cout << name << " complexity=" << c << "\n";
            if (!out_csv->empty()) {
                append_csv_row(*out_csv, "view,color_complexity", name + "," + std::to_string(c));
            }
        }
    });
}

void setup_fit_demo(CLI::App& app) {
    auto cmd = app.add_subcommand("fit-demo",
                                  "fit prediction volumes to a synthetic scene by gradient descent");
    auto spec_path = std::make_shared<std::string>();
    auto iters = std::make_shared<int>(500);
    auto lr = std::make_shared<double>(0.5);
    auto seed = std::make_shared<std::uint64_t>(kDefaultSeed);
    cmd->add_option("--spec", *spec_path, "scene spec file")->required();
    cmd->add_option("--iters", *iters, "iterations");
    cmd->add_option("--lr", *lr, "base step size")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", *seed, "init seed");
    cmd->callback([=]() {
        const SceneSpec spec = read_scene_file(*spec_path);
        const Camera cam =
            make_azimuth_cameras(1, 20.0, 0.0, spec.dims, spec.frame).front();
        FitDemoConfig config;
        config.iters = *iters;
        config.lr = *lr;
        config.seed = *seed;
        const FitDemoReport report = direct_fit_demo(spec, cam, config);
        std::cout << "shape_initial=" << report.shape_loss.front() << "\n"
                  << "shape_final=" << report.shape_loss.back() << "\n"
                  << "shape_drop=" << format_double(report.shape_drop()) << "\n"
                  << "color_initial=" << report.color_loss.front() << "\n"
                  << "color_final=" << report.color_loss.back() << "\n"
                  << "color_drop=" << format_double(report.color_drop()) << "\n";
    });
}

void setup_export_ply(CLI::App& app) {
    auto cmd = app.add_subcommand("export-ply", "export surface voxels as a colored point cloud");
    auto shape_path = std::make_shared<std::string>();
    auto color_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto frame_opts = std::make_shared<FrameOptions>();
    cmd->add_option("--shape", *shape_path, "shape CVOL")->required();
    cmd->add_option("--color", *color_path, "color CVOL")->required();
    cmd->add_option("--out", *out_path, "output PLY")->required();
    add_frame_options(cmd, *frame_opts);
    cmd->callback([=]() {
        const ShapeVolume shape = load_ground_truth_shape(*shape_path);
        const ColorVolume color = read_color_cvol(*color_path);
        require_dims(color.dims(), shape.dims(), *color_path);
        write_surface_ply(*out_path, shape, color, frame_opts->frame());
    });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"colorful voxel reconstruction toolkit"};
    app.require_subcommand(1);

    setup_gen_scene(app);
    setup_render(app);
    setup_cameras(app);
    setup_flow_gen(app);
    setup_sample(app);
    setup_blend(app);
    setup_loss(app);
    setup_grad_check(app);
    setup_metrics(app);
    setup_complexity(app);
    setup_fit_demo(app);
    setup_export_ply(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
