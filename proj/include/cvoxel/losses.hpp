#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cvoxel/grid.hpp"
#include "cvoxel/math.hpp"

namespace cvoxel {

constexpr double kCrossEntropyEpsilon = 1e-7; // clamp for log arguments
constexpr double kNormEpsilon = 1e-12;        // zero-subgradient threshold for L2 norms

/// Per-voxel gradient payload of a loss, channel-interleaved like the volume
/// it differentiates.
struct GradField {
    GridDims dims;
    int channels = 0;
    std::vector<double> values;

    GradField() = default;
    GradField(GridDims d, int c) : dims(d), channels(c), values(d.voxel_count() * c, 0.0) {}

    double at(std::size_t voxel, int channel = 0) const { return values[voxel * channels + channel]; }
    double& at(std::size_t voxel, int channel = 0) { return values[voxel * channels + channel]; }
};

/// Scalar loss with named sub-terms and named gradient fields.
struct LossReport {
    double loss = 0.0;
    std::vector<std::pair<std::string, double>> terms;
    std::vector<std::pair<std::string, GradField>> grads;

    double term(std::string_view name) const {
        for (const auto& [k, v] : terms) {
            if (k == name) return v;
        }
        throw std::invalid_argument("LossReport: no term named " + std::string(name));
    }

    const GradField& grad(std::string_view name) const {
        for (const auto& [k, v] : grads) {
            if (k == name) return v;
        }
        throw std::invalid_argument("LossReport: no gradient named " + std::string(name));
    }
};

namespace detail {

inline double clamp_prob(double p) {
    return std::clamp(p, kCrossEntropyEpsilon, 1.0 - kCrossEntropyEpsilon);
}

// -[g log p + (1-g) log(1-p)], the general form so soft labels keep working
inline double ce_term(double g, double p) {
    return -(g * std::log(p) + (1.0 - g) * std::log(1.0 - p));
}

// d(ce_term)/dp
inline double ce_term_grad(double g, double p) {
    return (1.0 - g) / (1.0 - p) - g / p;
}

struct FalseCrossEntropy {
    double fpce = 0.0;  // mean cross-entropy over unoccupied voxels, 0 when none
    double fnce = 0.0;  // mean cross-entropy over occupied voxels, 0 when none
    std::size_t unoccupied = 0;
    std::size_t occupied = 0;
};

inline FalseCrossEntropy false_cross_entropy(const ShapeVolume& gt, const ShapeVolume& pred) {
    require_same_dims(gt.dims(), pred.dims(), "msfcel");
    FalseCrossEntropy out;
    double sum_n = 0.0, sum_p = 0.0;
    for (std::size_t i = 0; i < gt.voxel_count(); ++i) {
        const double g = gt.value(i);
        const double p = clamp_prob(pred.value(i));
        if (gt.occupied(i)) {
            sum_p += ce_term(g, p);
            ++out.occupied;
        } else {
            sum_n += ce_term(g, p);
            ++out.unoccupied;
        }
    }
    if (out.unoccupied > 0) out.fpce = sum_n / static_cast<double>(out.unoccupied);
    if (out.occupied > 0) out.fnce = sum_p / static_cast<double>(out.occupied);
    return out;
}

} // namespace detail

/// Mean squared false cross-entropy: FPCE^2 + FNCE^2, where FPCE/FNCE are the
/// per-class mean cross-entropies of the unoccupied/occupied voxels. The
/// per-class means keep sparse volumes from drowning the occupied class.
inline LossReport msfcel(const ShapeVolume& gt, const ShapeVolume& pred) {
    const auto fce = detail::false_cross_entropy(gt, pred);
    LossReport rep;
    rep.loss = fce.fpce * fce.fpce + fce.fnce * fce.fnce;
    rep.terms = {{"fpce", fce.fpce}, {"fnce", fce.fnce}};

    GradField grad(gt.dims(), 1);
    const double inv_n = fce.unoccupied > 0 ? 1.0 / static_cast<double>(fce.unoccupied) : 0.0;
    const double inv_p = fce.occupied > 0 ? 1.0 / static_cast<double>(fce.occupied) : 0.0;
    for (std::size_t i = 0; i < gt.voxel_count(); ++i) {
        const double g = gt.value(i);
        const double p = detail::clamp_prob(pred.value(i));
        if (gt.occupied(i)) {
            grad.at(i) = 2.0 * fce.fnce * inv_p * detail::ce_term_grad(g, p);
        } else {
            grad.at(i) = 2.0 * fce.fpce * inv_n * detail::ce_term_grad(g, p);
        }
    }
    rep.grads.emplace_back("pred_shape", std::move(grad));
    return rep;
}

/// Both sides of the rewrite identity:
/// FPCE^2 + FNCE^2 = 1/2 [(FPCE+FNCE)^2 + (FPCE-FNCE)^2].
inline std::pair<double, double> msfcel_decomposition(const ShapeVolume& gt,
                                                      const ShapeVolume& pred) {
    const auto fce = detail::false_cross_entropy(gt, pred);
    const double lhs = fce.fpce * fce.fpce + fce.fnce * fce.fnce;
    const double sum = fce.fpce + fce.fnce;
    const double diff = fce.fpce - fce.fnce;
    const double rhs = 0.5 * (sum * sum + diff * diff);
    return {lhs, rhs};
}

/// Plain cross-entropy summed over all voxels, no normalization.
inline LossReport cross_entropy_loss(const ShapeVolume& gt, const ShapeVolume& pred) {
    detail::require_same_dims(gt.dims(), pred.dims(), "cross_entropy_loss");
    LossReport rep;
    GradField grad(gt.dims(), 1);
    for (std::size_t i = 0; i < gt.voxel_count(); ++i) {
        const double g = gt.value(i);
        const double p = detail::clamp_prob(pred.value(i));
        rep.loss += detail::ce_term(g, p);
        grad.at(i) = detail::ce_term_grad(g, p);
    }
    rep.grads.emplace_back("pred_shape", std::move(grad));
    return rep;
}

/// Sum of squared occupancy errors over all voxels, no normalization.
inline LossReport l2_shape_loss(const ShapeVolume& gt, const ShapeVolume& pred) {
    detail::require_same_dims(gt.dims(), pred.dims(), "l2_shape_loss");
    LossReport rep;
    GradField grad(gt.dims(), 1);
    for (std::size_t i = 0; i < gt.voxel_count(); ++i) {
        const double d = gt.value(i) - pred.value(i);
        rep.loss += d * d;
        grad.at(i) = -2.0 * d;
    }
    rep.grads.emplace_back("pred_shape", std::move(grad));
    return rep;
}

namespace detail {

/// Mean Euclidean-norm loss over surface voxels for N-channel volumes, with
/// the normalized-difference gradient and a zero subgradient at zero norm.
template <int C, class Tag>
LossReport mean_norm_loss(const VolumeGrid<C, Tag>& target, const VolumeGrid<C, Tag>& pred,
                          const SurfaceIndex& surf, const char* what, const char* grad_name) {
    require_same_dims(target.dims(), pred.dims(), what);
    require_same_dims(target.dims(), surf.dims, what);
    require_surface(surf, what);

    LossReport rep;
    GradField grad(target.dims(), C);
    const double inv_s = 1.0 / static_cast<double>(surf.count());
    for (std::size_t i : surf.voxels) {
        std::array<double, C> d;
        double sq = 0.0;
        for (int c = 0; c < C; ++c) {
            d[c] = pred.value(i, c) - target.value(i, c);
            sq += d[c] * d[c];
        }
        const double n = std::sqrt(sq);
        rep.loss += n * inv_s;
        if (n > kNormEpsilon) {
            for (int c = 0; c < C; ++c) grad.at(i, c) = d[c] * inv_s / n;
        }
    }
    rep.grads.emplace_back(grad_name, std::move(grad));
    return rep;
}

} // namespace detail

/// Mean Euclidean flow error over surface voxels.
inline LossReport flow_loss(const FlowVolume& target, const FlowVolume& pred,
                            const SurfaceIndex& surf) {
    return detail::mean_norm_loss(target, pred, surf, "flow_loss", "pred_flow");
}

/// Mean Euclidean color error of the regressed colors over surface voxels.
inline LossReport clr_regress_loss(const ColorVolume& gt_color, const ColorVolume& pred_color,
                                   const SurfaceIndex& surf) {
    return detail::mean_norm_loss(gt_color, pred_color, surf, "clr_regress_loss", "pred_color");
}

/// Mean Euclidean error of the blended colors over surface voxels. Gradients
/// are reported for the weights (the learned quantity) and additionally for
/// the two color sources, which the fit demo consumes.
inline LossReport blend_loss(const ColorVolume& gt_color, const ColorVolume& sampled,
                             const ColorVolume& regressed, const WeightVolume& weights,
                             const SurfaceIndex& surf) {
    detail::require_same_dims(gt_color.dims(), sampled.dims(), "blend_loss");
    detail::require_same_dims(gt_color.dims(), regressed.dims(), "blend_loss");
    detail::require_same_dims(gt_color.dims(), weights.dims(), "blend_loss");
    detail::require_same_dims(gt_color.dims(), surf.dims, "blend_loss");
    detail::require_surface(surf, "blend_loss");

    LossReport rep;
    GradField grad_w(gt_color.dims(), 1);
    GradField grad_s(gt_color.dims(), 3);
    GradField grad_r(gt_color.dims(), 3);
    const double inv_s = 1.0 / static_cast<double>(surf.count());
    for (std::size_t i : surf.voxels) {
        const Rgb s = sampled.vec(i);
        const Rgb r = regressed.vec(i);
        const double w = weights.value(i);
        double sq = 0.0;
        Rgb d; // blended minus ground truth
        for (int c = 0; c < 3; ++c) {
            d[c] = w * s[c] + (1.0 - w) * r[c] - gt_color.value(i, c);
            sq += d[c] * d[c];
        }
        const double n = std::sqrt(sq);
        rep.loss += n * inv_s;
        if (n > kNormEpsilon) {
            double dw = 0.0;
            for (int c = 0; c < 3; ++c) {
                dw += d[c] * (s[c] - r[c]);
                grad_s.at(i, c) = d[c] * w * inv_s / n;
                grad_r.at(i, c) = d[c] * (1.0 - w) * inv_s / n;
            }
            grad_w.at(i) = dw * inv_s / n;
        }
    }
    rep.grads.emplace_back("weights", std::move(grad_w));
    rep.grads.emplace_back("sampled", std::move(grad_s));
    rep.grads.emplace_back("regressed", std::move(grad_r));
    return rep;
}

/// Overall color objective: flow + regression + blend losses, terms reported
/// separately, gradients merged per differentiated volume.
inline LossReport total_color_loss(const FlowVolume& target_flow, const FlowVolume& pred_flow,
                                   const ColorVolume& gt_color, const ColorVolume& regressed,
                                   const ColorVolume& sampled, const WeightVolume& weights,
                                   const SurfaceIndex& surf) {
    LossReport flow_rep = flow_loss(target_flow, pred_flow, surf);
    LossReport clr_rep = clr_regress_loss(gt_color, regressed, surf);
    LossReport blend_rep = blend_loss(gt_color, sampled, regressed, weights, surf);

    LossReport rep;
    rep.loss = flow_rep.loss + clr_rep.loss + blend_rep.loss;
    rep.terms = {{"l_flow", flow_rep.loss},
                 {"l_clr_regress", clr_rep.loss},
                 {"l_blend", blend_rep.loss}};

    // the regressed volume feeds both the regression and the blend term
    GradField grad_r = clr_rep.grad("pred_color");
    const GradField& blend_r = blend_rep.grad("regressed");
    for (std::size_t j = 0; j < grad_r.values.size(); ++j) grad_r.values[j] += blend_r.values[j];

    rep.grads.emplace_back("pred_flow", flow_rep.grad("pred_flow"));
    rep.grads.emplace_back("regressed", std::move(grad_r));
    rep.grads.emplace_back("weights", blend_rep.grad("weights"));
    rep.grads.emplace_back("sampled", blend_rep.grad("sampled"));
    return rep;
}

// ---------------------------------------------------------------------------
// Finite-difference verification harness
// ---------------------------------------------------------------------------

enum class LossKind { Msfcel, CrossEntropy, L2Shape, Flow, ColorRegress, Blend };

inline LossKind parse_loss_kind(std::string_view name) {
    if (name == "msfcel") return LossKind::Msfcel;
    if (name == "ce") return LossKind::CrossEntropy;
    if (name == "l2") return LossKind::L2Shape;
    if (name == "flow") return LossKind::Flow;
    if (name == "clr") return LossKind::ColorRegress;
    if (name == "blend") return LossKind::Blend;
    throw std::invalid_argument("unknown loss kind: " + std::string(name));
}

/// One randomly generated problem instance; only the volumes a given loss
/// kind needs are meaningful. Instances are built away from the loss kinks
/// (per-voxel norms and clamped probabilities) so central differences are
/// well posed.
struct GradCheckInstance {
    ShapeVolume gt_shape;
    ShapeVolume pred_shape;
    ColorVolume gt_color;
    ColorVolume pred_color;
    ColorVolume sampled;
    ColorVolume regressed;
    FlowVolume target_flow;
    FlowVolume pred_flow;
    WeightVolume weights;
    SurfaceIndex surf;
};

inline GradCheckInstance make_grad_check_instance(LossKind kind, const GridDims& dims,
                                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GradCheckInstance inst;
    inst.surf.dims = dims;
    for (std::size_t i = 0; i < dims.voxel_count(); ++i) {
        if (uniform01(rng) < 0.4) inst.surf.voxels.push_back(i);
    }
    if (inst.surf.voxels.empty()) inst.surf.voxels.push_back(0);

    switch (kind) {
    case LossKind::Msfcel:
    case LossKind::CrossEntropy:
    case LossKind::L2Shape: {
        inst.gt_shape = ShapeVolume(dims, ShapeKind::GroundTruth);
        inst.pred_shape = ShapeVolume(dims, ShapeKind::Prediction);
        for (std::size_t i = 0; i < dims.voxel_count(); ++i) {
            inst.gt_shape.set_value(i, 0, uniform01(rng) < 0.5 ? 1.0 : 0.0);
            inst.pred_shape.set_value(i, 0, uniform(rng, 0.1, 0.9));
        }
        break;
    }
    case LossKind::Flow: {
        inst.target_flow = FlowVolume(dims);
        inst.pred_flow = FlowVolume(dims);
        for (std::size_t i = 0; i < dims.voxel_count(); ++i) {
            const Vec2 t{uniform(rng, 0.0, 20.0), uniform(rng, 0.0, 20.0)};
            const double angle = uniform(rng, 0.0, 2.0 * 3.14159265358979323846);
            const double mag = uniform(rng, 0.5, 3.0);
            inst.target_flow.set_vec(i, t);
            inst.pred_flow.set_vec(i, {t[0] + mag * std::cos(angle), t[1] + mag * std::sin(angle)});
        }
        break;
    }
    case LossKind::ColorRegress: {
        inst.gt_color = ColorVolume(dims);
        inst.pred_color = ColorVolume(dims);
        for (std::size_t i = 0; i < dims.voxel_count(); ++i) {
            Rgb g, dir;
            double sq = 0.0;
            for (int c = 0; c < 3; ++c) {
                g[c] = uniform(rng, 0.2, 0.8);
                dir[c] = uniform(rng, -1.0, 1.0);
                sq += dir[c] * dir[c];
            }
            const double n = std::sqrt(std::max(sq, 1e-12));
            inst.gt_color.set_vec(i, g);
            inst.pred_color.set_vec(
                i, {g[0] + 0.15 * dir[0] / n, g[1] + 0.15 * dir[1] / n, g[2] + 0.15 * dir[2] / n});
        }
        break;
    }
    case LossKind::Blend: {
        inst.gt_color = ColorVolume(dims);
        inst.sampled = ColorVolume(dims);
        inst.regressed = ColorVolume(dims);
        inst.weights = WeightVolume(dims);
        for (std::size_t i = 0; i < dims.voxel_count(); ++i) {
            Rgb s, r, dir;
            double sq = 0.0;
            for (int c = 0; c < 3; ++c) {
                s[c] = uniform(rng, 0.3, 0.7);
                r[c] = uniform(rng, 0.3, 0.7);
                dir[c] = uniform(rng, -1.0, 1.0);
                sq += dir[c] * dir[c];
            }
            const double w = uniform(rng, 0.1, 0.9);
            const double n = std::sqrt(std::max(sq, 1e-12));
            Rgb g;
            for (int c = 0; c < 3; ++c) {
                g[c] = w * s[c] + (1.0 - w) * r[c] + 0.2 * dir[c] / n;
            }
            inst.sampled.set_vec(i, s);
            inst.regressed.set_vec(i, r);
            inst.weights.set_value(i, 0, w);
            inst.gt_color.set_vec(i, g);
        }
        break;
    }
    }
    return inst;
}

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t compared = 0;
    std::size_t skipped = 0; // coordinates with |analytic| <= 1e-8
};

namespace detail {

template <class Eval>
GradCheckReport fd_check(std::vector<double>& params, const GradField& analytic, double step,
                         Eval&& eval) {
    GradCheckReport rep;
    for (std::size_t j = 0; j < params.size(); ++j) {
        const double a = analytic.values[j];
        if (std::abs(a) <= 1e-8) {
            ++rep.skipped;
            continue;
        }
        const double saved = params[j];
        params[j] = saved + step;
        const double f_plus = eval();
        params[j] = saved - step;
        const double f_minus = eval();
        params[j] = saved;
        const double fd = (f_plus - f_minus) / (2.0 * step);
        const double rel = std::abs(fd - a) / std::max(std::abs(a), std::abs(fd));
        rep.max_rel_err = std::max(rep.max_rel_err, rel);
        ++rep.compared;
    }
    return rep;
}

} // namespace detail

/// Central-difference check of the analytic gradient of one loss on one
/// instance. Reports the max relative error over coordinates whose analytic
/// gradient exceeds 1e-8 in magnitude.
inline GradCheckReport grad_check(LossKind kind, GradCheckInstance inst, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
    switch (kind) {
    case LossKind::Msfcel: {
        const GradField analytic = msfcel(inst.gt_shape, inst.pred_shape).grad("pred_shape");
        auto params = std::vector<double>(inst.pred_shape.raw().begin(), inst.pred_shape.raw().end());
        return detail::fd_check(params, analytic, step, [&]() {
            std::copy(params.begin(), params.end(), inst.pred_shape.raw().begin());
            return msfcel(inst.gt_shape, inst.pred_shape).loss;
        });
    }
    case LossKind::CrossEntropy: {
        const GradField analytic =
            cross_entropy_loss(inst.gt_shape, inst.pred_shape).grad("pred_shape");
        auto params = std::vector<double>(inst.pred_shape.raw().begin(), inst.pred_shape.raw().end());
        return detail::fd_check(params, analytic, step, [&]() {
            std::copy(params.begin(), params.end(), inst.pred_shape.raw().begin());
            return cross_entropy_loss(inst.gt_shape, inst.pred_shape).loss;
        });
    }
    case LossKind::L2Shape: {
        const GradField analytic = l2_shape_loss(inst.gt_shape, inst.pred_shape).grad("pred_shape");
        auto params = std::vector<double>(inst.pred_shape.raw().begin(), inst.pred_shape.raw().end());
        return detail::fd_check(params, analytic, step, [&]() {
            std::copy(params.begin(), params.end(), inst.pred_shape.raw().begin());
            return l2_shape_loss(inst.gt_shape, inst.pred_shape).loss;
        });
    }
    case LossKind::Flow: {
        const GradField analytic =
            flow_loss(inst.target_flow, inst.pred_flow, inst.surf).grad("pred_flow");
        auto params = std::vector<double>(inst.pred_flow.raw().begin(), inst.pred_flow.raw().end());
        return detail::fd_check(params, analytic, step, [&]() {
            std::copy(params.begin(), params.end(), inst.pred_flow.raw().begin());
            return flow_loss(inst.target_flow, inst.pred_flow, inst.surf).loss;
        });
    }
    case LossKind::ColorRegress: {
        const GradField analytic =
            clr_regress_loss(inst.gt_color, inst.pred_color, inst.surf).grad("pred_color");
        auto params = std::vector<double>(inst.pred_color.raw().begin(), inst.pred_color.raw().end());
        return detail::fd_check(params, analytic, step, [&]() {
            std::copy(params.begin(), params.end(), inst.pred_color.raw().begin());
            return clr_regress_loss(inst.gt_color, inst.pred_color, inst.surf).loss;
        });
    }
    case LossKind::Blend: {
        const GradField analytic =
            blend_loss(inst.gt_color, inst.sampled, inst.regressed, inst.weights, inst.surf)
                .grad("weights");
        auto params = std::vector<double>(inst.weights.raw().begin(), inst.weights.raw().end());
        return detail::fd_check(params, analytic, step, [&]() {
            std::copy(params.begin(), params.end(), inst.weights.raw().begin());
            return blend_loss(inst.gt_color, inst.sampled, inst.regressed, inst.weights, inst.surf)
                .loss;
        });
    }
    }
    throw std::logic_error("grad_check: unreachable");
}

/// key=value serialization of a report; gradient payloads are written as CVOL
/// files by the callers that want them.
inline std::string format_loss_report(const LossReport& rep) {
    std::ostringstream out;
    out.precision(12);
    out << "loss=" << rep.loss << "\n";
    for (const auto& [k, v] : rep.terms) out << k << "=" << v << "\n";
    return out.str();
}

} // namespace cvoxel
