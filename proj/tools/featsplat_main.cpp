// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synth, render, lift, train-ae, sample,
// export-tokens, eval, verify. Exit codes: 0 success, 1 validation failure,
// 2 I/O failure, 3 verification failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "featsplat/autoenc.hpp"
#include "featsplat/errors.hpp"
#include "featsplat/io.hpp"
#include "featsplat/lift.hpp"
#include "featsplat/project.hpp"
#include "featsplat/raster.hpp"
#include "featsplat/rng.hpp"
#include "featsplat/sample.hpp"
#include "featsplat/scene.hpp"
#include "featsplat/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitVerification = 3;

struct GlobalOptions {
    std::string precision = "f64";
    std::string threads = "auto";
    int verbosity = 1;
};

fsplat::Precision parse_precision(const std::string& p) {
    if (p == "f32") return fsplat::Precision::f32;
    if (p == "f64") return fsplat::Precision::f64;
    throw fsplat::validation_error("unknown precision '" + p + "' (expected f32 or f64)");
}

void apply_threads(const std::string& threads) {
    if (threads == "auto") return;
    int n = 0;
    try {
        n = std::stoi(threads);
    } catch (const std::exception&) {
        throw fsplat::validation_error("--threads expects a count or 'auto'");
    }
    if (n < 1) throw fsplat::validation_error("--threads must be at least 1");
    omp_set_num_threads(n);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    fsplat::AtomicWriter atomic(path);
    std::ofstream out(atomic.temp_path());
    if (!out) throw fsplat::io_error(path.string() + ": cannot open for writing");
    out << text;
    out.flush();
    if (!out) throw fsplat::io_error(path.string() + ": write failed");
    out.close();
    atomic.commit();
}

// Every command records its resolved configuration next to its outputs.
void echo_config(const fs::path& out_dir, const std::string& command, const json& params,
                 const GlobalOptions& global) {
    json root;
    root["command"] = command;
    root["params"] = params;
    root["precision"] = global.precision;
    root["threads"] = global.threads;
    write_text_atomic(out_dir / "config.json", root.dump(2) + "\n");
}

fs::path ensure_out_dir(const std::string& out) {
    if (out.empty()) throw fsplat::validation_error("--out is required");
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw fsplat::io_error(out + ": cannot create output directory: " + ec.message());
    return dir;
}

void write_ppm(const fs::path& path, const std::vector<double>& rgb, int width,
               int height) {
    fsplat::AtomicWriter atomic(path);
    std::ofstream out(atomic.temp_path(), std::ios::binary);
    if (!out) throw fsplat::io_error(path.string() + ": cannot open for writing");
    out << "P6\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(width) * 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    out.flush();
    if (!out) throw fsplat::io_error(path.string() + ": write failed");
    out.close();
    atomic.commit();
}

std::vector<std::size_t> load_index_list(const fs::path& path, std::size_t field_size) {
    std::ifstream in(path);
    if (!in) throw fsplat::io_error(path.string() + ": cannot open for reading");
    std::vector<std::size_t> indices;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::size_t idx;
        while (ls >> idx) {
            if (idx >= field_size) {
                throw fsplat::validation_error(path.string() + ":" +
                                               std::to_string(line_no) + ": index " +
                                               std::to_string(idx) + " out of range");
            }
            indices.push_back(idx);
        }
    }
    return indices;
}

std::string strategy_name(fsplat::Strategy s) {
    switch (s) {
        case fsplat::Strategy::entropy: return "entropy";
        case fsplat::Strategy::random: return "random";
        case fsplat::Strategy::density: return "density";
        case fsplat::Strategy::fps: return "fps";
        case fsplat::Strategy::explicit_list: return "explicit";
    }
    return "unknown";
}

fsplat::Strategy parse_strategy(const std::string& s) {
    if (s == "entropy") return fsplat::Strategy::entropy;
    if (s == "random") return fsplat::Strategy::random;
    if (s == "density") return fsplat::Strategy::density;
    if (s == "fps") return fsplat::Strategy::fps;
    throw fsplat::validation_error("unknown strategy '" + s +
                                   "' (expected entropy|random|density|fps)");
}

// ---------------------------------------------------------------------------
// Evaluation report

struct ViewMetrics {
    double rgb_mse = 0.0;
    double feature_mse = 0.0;
    double mean_cosine = 0.0;
    double coverage = 0.0;
    std::size_t covered = 0;
};

std::string format_psnr(double mse) {
    if (mse == 0.0) return "exact";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", 10.0 * std::log10(1.0 / mse));
    return buf;
}

std::string eval_report(const std::vector<fsplat::FeatureMap>& rendered,
                        const std::vector<fsplat::FeatureMap>& gt,
                        const std::vector<fsplat::FeatureMap>* rendered_rgb,
                        const std::vector<fsplat::FeatureMap>* gt_rgb,
                        const std::vector<fsplat::FeatureMap>* alpha) {
    if (rendered.size() != gt.size()) {
        throw fsplat::validation_error("eval: rendered and gt stacks differ in view count");
    }
    std::ostringstream report;
    report << "view  coverage  feature_mse  mean_cosine  psnr\n";

    double total_rgb_se = 0.0, total_feat_se = 0.0, total_cos = 0.0;
    std::size_t total_rgb_count = 0, total_covered = 0, total_cos_count = 0,
                total_pixels = 0;

    for (std::size_t t = 0; t < rendered.size(); ++t) {
        const fsplat::FeatureMap& r = rendered[t];
        const fsplat::FeatureMap& g = gt[t];
        if (r.width != g.width || r.height != g.height || r.dim != g.dim) {
            throw fsplat::validation_error("eval: view " + std::to_string(t) +
                                           " shapes differ between rendered and gt");
        }
        const std::size_t n_pixels = static_cast<std::size_t>(r.width) * r.height;
        ViewMetrics m;
        double feat_se = 0.0, cos_sum = 0.0;
        std::size_t covered = 0, cos_count = 0;
        for (std::size_t p = 0; p < n_pixels; ++p) {
            bool is_covered;
            if (alpha) {
                is_covered = (*alpha)[t].data[p] > fsplat::kCoverageEps;
            } else {
                double norm_sq = 0.0;
                for (int d = 0; d < r.dim; ++d) {
                    const double v = r.data[p * r.dim + d];
                    norm_sq += v * v;
                }
                is_covered = norm_sq > 0.0;
            }
            if (!is_covered) continue;
            ++covered;
            double diff_sq = 0.0, dot = 0.0, r_sq = 0.0, g_sq = 0.0;
            for (int d = 0; d < r.dim; ++d) {
                const double rv = r.data[p * r.dim + d];
                const double gv = g.data[p * r.dim + d];
                diff_sq += (rv - gv) * (rv - gv);
                dot += rv * gv;
                r_sq += rv * rv;
                g_sq += gv * gv;
            }
            feat_se += diff_sq;
            if (r_sq > 1e-24 && g_sq > 1e-24) {
                cos_sum += dot / (std::sqrt(r_sq) * std::sqrt(g_sq));
                ++cos_count;
            }
        }
        m.covered = covered;
        m.coverage = n_pixels > 0 ? static_cast<double>(covered) / n_pixels : 0.0;
        m.feature_mse = covered > 0 ? feat_se / covered : 0.0;
        m.mean_cosine = cos_count > 0 ? cos_sum / cos_count : 0.0;

        std::string psnr_str = "n/a";
        if (rendered_rgb && gt_rgb) {
            const fsplat::FeatureMap& rr = (*rendered_rgb)[t];
            const fsplat::FeatureMap& gr = (*gt_rgb)[t];
            double se = 0.0;
            for (std::size_t k = 0; k < rr.data.size(); ++k) {
                se += (rr.data[k] - gr.data[k]) * (rr.data[k] - gr.data[k]);
            }
            m.rgb_mse = rr.data.empty() ? 0.0 : se / rr.data.size();
            psnr_str = format_psnr(m.rgb_mse);
            total_rgb_se += se;
            total_rgb_count += rr.data.size();
        }

        total_feat_se += feat_se;
        total_covered += covered;
        total_cos += cos_sum;
        total_cos_count += cos_count;
        total_pixels += n_pixels;

        char line[160];
        std::snprintf(line, sizeof(line), "%4zu  %8.4f  %11.6g  %11.6f  %s\n", t,
                      m.coverage, m.feature_mse, m.mean_cosine, psnr_str.c_str());
        report << line;
    }

    const double feature_mse = total_covered > 0 ? total_feat_se / total_covered : 0.0;
    const double mean_cosine = total_cos_count > 0 ? total_cos / total_cos_count : 0.0;
    const double coverage =
        total_pixels > 0 ? static_cast<double>(total_covered) / total_pixels : 0.0;
    report << "\ntotal\n";
    report << "  coverage_fraction " << coverage << "\n";
    report << "  feature_mse " << feature_mse << "\n";
    report << "  mean_cosine " << mean_cosine << "\n";
    if (total_rgb_count > 0) {
        report << "  psnr " << format_psnr(total_rgb_se / total_rgb_count) << "\n";
    }
    return report.str();
}

// ---------------------------------------------------------------------------
// Commands

int cmd_synth(const GlobalOptions& global, const std::string& out,
              std::size_t n_gaussians, std::size_t n_prototypes, int dim, int views,
              std::vector<double> extent, double orbit_radius, double orbit_height,
              int width, int height, std::uint64_t seed) {
    fsplat::SceneSpec spec;
    spec.n_gaussians = n_gaussians;
    spec.n_prototypes = n_prototypes;
    spec.feature_dim = dim;
    spec.n_views = views;
    if (extent.size() != 3) throw fsplat::validation_error("--extent needs 3 values");
    spec.extent = {extent[0], extent[1], extent[2]};
    spec.orbit_radius = orbit_radius;
    spec.orbit_height = orbit_height;
    spec.image_width = width;
    spec.image_height = height;
    spec.seed = seed;

    const fsplat::SceneBundle bundle = fsplat::synth_scene(spec);
    const fs::path dir = ensure_out_dir(out);

    fsplat::save_field(dir / "field.gsf", bundle.field);
    fsplat::save_cameras(dir / "cameras.cam", bundle.cameras);
    fsplat::save_maps(dir / "feature_maps.fmt", bundle.gt_feature_maps);
    fsplat::save_maps(dir / "rgb.fmt", bundle.gt_rgb);

    fsplat::Tensor protos;
    protos.dims = {static_cast<std::uint32_t>(spec.n_prototypes),
                   static_cast<std::uint32_t>(spec.feature_dim)};
    protos.data = bundle.prototype_table;
    fsplat::save_tensor(dir / "prototypes.fmt", protos);

    json assignment = json::array();
    for (std::size_t a : bundle.assignment) assignment.push_back(a);
    write_text_atomic(dir / "assignment.json", assignment.dump() + "\n");

    json params;
    params["n"] = n_gaussians;
    params["prototypes"] = n_prototypes;
    params["dim"] = dim;
    params["views"] = views;
    params["extent"] = extent;
    params["orbit_radius"] = orbit_radius;
    params["orbit_height"] = orbit_height;
    params["width"] = width;
    params["height"] = height;
    params["seed"] = seed;
    echo_config(dir, "synth", params, global);

    if (global.verbosity > 0) {
        std::cout << "synth: wrote " << bundle.field.size() << " gaussians, "
                  << bundle.cameras.size() << " views to " << dir.string() << "\n";
    }
    return kExitOk;
}

int cmd_render(const GlobalOptions& global, const std::string& out,
               const std::string& field_path, const std::string& cameras_path,
               const std::string& gt_maps_path, const std::string& gt_rgb_path) {
    const fsplat::GaussianField field = fsplat::load_field(field_path);
    const std::vector<fsplat::Camera> cameras = fsplat::load_cameras(cameras_path);
    if (cameras.empty()) throw fsplat::validation_error("render: camera list is empty");

    fsplat::RenderOptions opts;
    opts.precision = parse_precision(global.precision);

    std::vector<fsplat::FeatureMap> features, rgb, alpha, depth;
    for (std::size_t t = 0; t < cameras.size(); ++t) {
        fsplat::RenderOutput r = fsplat::render(field, cameras[t], opts);
        r.features.frame_id = static_cast<int>(t);
        features.push_back(std::move(r.features));
        fsplat::FeatureMap rgb_map(r.width, r.height, 3, static_cast<int>(t));
        rgb_map.data = r.rgb;
        fsplat::FeatureMap alpha_map(r.width, r.height, 1, static_cast<int>(t));
        alpha_map.data = r.alpha;
        fsplat::FeatureMap depth_map(r.width, r.height, 1, static_cast<int>(t));
        depth_map.data = r.depth;
        rgb.push_back(std::move(rgb_map));
        alpha.push_back(std::move(alpha_map));
        depth.push_back(std::move(depth_map));
    }

    const fs::path dir = ensure_out_dir(out);
    fsplat::save_maps(dir / "features.fmt", features);
    fsplat::save_maps(dir / "rgb.fmt", rgb);
    fsplat::save_maps(dir / "alpha.fmt", alpha);
    fsplat::save_maps(dir / "depth.fmt", depth);
    for (std::size_t t = 0; t < rgb.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "view_%03zu.ppm", t);
        write_ppm(dir / name, rgb[t].data, rgb[t].width, rgb[t].height);
    }

    if (!gt_maps_path.empty()) {
        const std::vector<fsplat::FeatureMap> gt = fsplat::load_maps(gt_maps_path);
        std::optional<std::vector<fsplat::FeatureMap>> gt_rgb;
        if (!gt_rgb_path.empty()) gt_rgb = fsplat::load_maps(gt_rgb_path);
        const std::string report =
            eval_report(features, gt, gt_rgb ? &rgb : nullptr,
                        gt_rgb ? &*gt_rgb : nullptr, &alpha);
        write_text_atomic(dir / "eval.txt", report);
        if (global.verbosity > 0) std::cout << report;
    }

    json params;
    params["field"] = field_path;
    params["cameras"] = cameras_path;
    params["gt_maps"] = gt_maps_path;
    params["gt_rgb"] = gt_rgb_path;
    echo_config(dir, "render", params, global);

    if (global.verbosity > 0) {
        std::cout << "render: wrote " << cameras.size() << " views to " << dir.string()
                  << "\n";
    }
    return kExitOk;
}

int cmd_lift(const GlobalOptions& global, const std::string& out,
             const std::string& field_path, const std::string& maps_path,
             const std::string& cameras_path, const std::string& mode, int iters,
             double lambda_reg, const std::string& resp_mode, double lr, int max_steps,
             double grad_tol) {
    fsplat::LiftProblem problem;
    problem.field = fsplat::load_field(field_path);
    const std::vector<fsplat::Camera> cameras = fsplat::load_cameras(cameras_path);
    std::vector<fsplat::FeatureMap> maps = fsplat::load_maps(maps_path);
    if (cameras.size() != maps.size()) {
        throw fsplat::validation_error("lift: camera and map counts differ");
    }
    problem.views.reserve(cameras.size());
    for (std::size_t t = 0; t < cameras.size(); ++t) {
        problem.views.push_back({cameras[t], std::move(maps[t])});
    }
    problem.options.iters = iters;
    problem.options.lambda_reg = lambda_reg;
    if (resp_mode == "mixture") {
        problem.options.responsibility_mode = fsplat::RespMode::mixture;
    } else if (resp_mode != "compositing") {
        throw fsplat::validation_error("--resp-mode expects compositing|mixture");
    }

    fsplat::LiftResult result;
    double used_lr = lr;
    if (mode == "em") {
        result = fsplat::em_lift(problem);
    } else if (mode == "gd") {
        if (used_lr <= 0.0) {
            // Auto step size: safely inside the stability bound 1/(mass + reg).
            const fsplat::LiftResult probe = fsplat::em_lift(problem);
            double max_mass = 0.0;
            for (double m : probe.mass) max_mass = std::max(max_mass, m);
            used_lr = 0.45 / (max_mass + lambda_reg);
        }
        result = fsplat::gd_lift(problem, used_lr, max_steps, grad_tol);
    } else {
        throw fsplat::validation_error("--mode expects em|gd");
    }

    fsplat::GaussianField lifted = problem.field;
    fsplat::apply_features(lifted, result.features);

    const fs::path dir = ensure_out_dir(out);
    fsplat::save_field(dir / "lifted.gsf", lifted);

    // Lift report: loss history, uncovered indices, mass histogram.
    std::ostringstream report;
    report << "loss_history\n";
    for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
        report << "  " << i << " " << result.loss_history[i] << "\n";
    }
    report << "uncovered (" << result.uncovered.size() << ")\n";
    for (std::size_t i : result.uncovered) report << "  " << i << "\n";
    report << "mass_histogram\n";
    const double buckets[] = {0.0, 1e-6, 1e-3, 1e-1, 1.0, 10.0, 100.0, 1e300};
    for (int b = 0; b + 1 < 8; ++b) {
        std::size_t count = 0;
        for (double m : result.mass) {
            if (m >= buckets[b] && m < buckets[b + 1]) ++count;
        }
        report << "  [" << buckets[b] << ", " << buckets[b + 1] << ") " << count << "\n";
    }
    write_text_atomic(dir / "lift_report.txt", report.str());

    json params;
    params["field"] = field_path;
    params["maps"] = maps_path;
    params["cameras"] = cameras_path;
    params["mode"] = mode;
    params["iters"] = iters;
    params["lambda_reg"] = lambda_reg;
    params["resp_mode"] = resp_mode;
    params["lr"] = used_lr;
    params["max_steps"] = max_steps;
    params["grad_tol"] = grad_tol;
    echo_config(dir, "lift", params, global);

    if (global.verbosity > 0) {
        std::cout << "lift (" << mode << "): final loss "
                  << (result.loss_history.empty() ? 0.0 : result.loss_history.back())
                  << ", " << result.uncovered.size() << " uncovered, wrote "
                  << dir.string() << "\n";
    }
    return kExitOk;
}

int cmd_train_ae(const GlobalOptions& global, const std::string& out,
                 const std::string& data_path, const std::string& config_path) {
    const fsplat::Tensor data_tensor = fsplat::load_tensor(data_path);
    if (data_tensor.dims.size() != 2) {
        throw fsplat::validation_error("train-ae: data must be a rank-2 tensor");
    }
    fsplat::Batch data(static_cast<int>(data_tensor.dims[0]),
                       static_cast<int>(data_tensor.dims[1]));
    data.data = data_tensor.data;

    const fsplat::AEConfig config = fsplat::parse_ae_config(config_path);
    const fsplat::TrainResult result = fsplat::train(config, data);

    const fs::path dir = ensure_out_dir(out);
    fsplat::save_model(dir / "checkpoint.aec", result.model);

    std::ostringstream curve;
    curve << "epoch  mean_loss\n";
    for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
        curve << e << "  " << result.loss_history[e] << "\n";
    }
    write_text_atomic(dir / "loss.txt", curve.str());

    json params;
    params["data"] = data_path;
    params["config"] = config_path;
    params["encoder_dims"] = config.encoder_dims;
    params["decoder_dims"] = config.decoder_dims;
    params["lr"] = config.lr;
    params["weight_decay"] = config.weight_decay;
    params["batch_size"] = config.batch_size;
    params["epochs"] = config.epochs;
    params["seed"] = config.seed;
    params["mse_weight"] = config.mse_weight;
    params["cosine_weight"] = config.cosine_weight;
    echo_config(dir, "train-ae", params, global);

    if (global.verbosity > 0) {
        std::cout << "train-ae: final loss " << result.loss_history.back() << ", wrote "
                  << dir.string() << "\n";
    }
    return kExitOk;
}

int cmd_sample(const GlobalOptions& global, const std::string& out,
               const std::string& field_path, const std::string& strategy,
               std::size_t k, std::uint64_t seed, double density_radius) {
    const fsplat::GaussianField field = fsplat::load_field(field_path);
    fsplat::SampleRequest req;
    req.k = k;
    req.strategy = parse_strategy(strategy);
    req.seed = seed;
    req.density_radius = density_radius;
    const std::vector<std::size_t> indices = fsplat::sample_indices(field, req);

    const fs::path dir = ensure_out_dir(out);
    std::ostringstream text;
    for (std::size_t i : indices) text << i << "\n";
    write_text_atomic(dir / "indices.txt", text.str());

    json params;
    params["field"] = field_path;
    params["strategy"] = strategy;
    params["k"] = k;
    params["seed"] = seed;
    params["density_radius"] = density_radius;
    echo_config(dir, "sample", params, global);

    if (global.verbosity > 0) {
        std::cout << "sample (" << strategy << "): " << indices.size()
                  << " indices to " << dir.string() << "\n";
    }
    return kExitOk;
}

int cmd_export_tokens(const GlobalOptions& global, const std::string& out,
                      const std::string& field_path, const std::string& checkpoint_path,
                      const std::string& indices_path, const std::string& strategy,
                      std::size_t k, std::uint64_t seed, double density_radius) {
    const fsplat::GaussianField field = fsplat::load_field(field_path);
    const fsplat::AEModel model = fsplat::load_model(checkpoint_path);

    std::vector<std::size_t> indices;
    fsplat::Strategy used_strategy = fsplat::Strategy::explicit_list;
    if (!indices_path.empty()) {
        indices = load_index_list(indices_path, field.size());
    } else {
        fsplat::SampleRequest req;
        req.k = k;
        req.strategy = parse_strategy(strategy);
        req.seed = seed;
        req.density_radius = density_radius;
        indices = fsplat::sample_indices(field, req);
        used_strategy = req.strategy;
    }

    const fsplat::TokenSet tokens =
        fsplat::export_tokens(field, model, indices, used_strategy, seed);
    const fs::path dir = ensure_out_dir(out);
    fsplat::save_tokens(dir / "tokens.tok", tokens);

    json params;
    params["field"] = field_path;
    params["checkpoint"] = checkpoint_path;
    params["indices"] = indices_path;
    params["strategy"] = strategy_name(used_strategy);
    params["k"] = k;
    params["seed"] = seed;
    params["density_radius"] = density_radius;
    echo_config(dir, "export-tokens", params, global);

    if (global.verbosity > 0) {
        std::cout << "export-tokens: " << tokens.size() << " tokens of dim "
                  << tokens.d_hi << " to " << dir.string() << "\n";
    }
    return kExitOk;
}

int cmd_eval(const GlobalOptions& global, const std::string& out,
             const std::string& rendered_dir, const std::string& gt_maps_path,
             const std::string& gt_rgb_path) {
    const fs::path rdir(rendered_dir);
    const std::vector<fsplat::FeatureMap> rendered =
        fsplat::load_maps(rdir / "features.fmt");
    const std::vector<fsplat::FeatureMap> alpha = fsplat::load_maps(rdir / "alpha.fmt");
    const std::vector<fsplat::FeatureMap> gt = fsplat::load_maps(gt_maps_path);

    std::optional<std::vector<fsplat::FeatureMap>> rendered_rgb, gt_rgb;
    if (!gt_rgb_path.empty()) {
        rendered_rgb = fsplat::load_maps(rdir / "rgb.fmt");
        gt_rgb = fsplat::load_maps(gt_rgb_path);
    }

    const std::string report =
        eval_report(rendered, gt, rendered_rgb ? &*rendered_rgb : nullptr,
                    gt_rgb ? &*gt_rgb : nullptr, &alpha);
    std::cout << report;

    if (!out.empty()) {
        const fs::path dir = ensure_out_dir(out);
        write_text_atomic(dir / "eval.txt", report);
        json params;
        params["rendered"] = rendered_dir;
        params["gt_maps"] = gt_maps_path;
        params["gt_rgb"] = gt_rgb_path;
        echo_config(dir, "eval", params, global);
    }
    return kExitOk;
}

// Oracle suite: brute-force render equivalence, EM-vs-GD, gradient checks.
int cmd_verify(const GlobalOptions& global, std::uint64_t seed, bool quick) {
    bool all_ok = true;
    const auto report = [&](const std::string& name, bool ok, const std::string& detail) {
        std::cout << (ok ? "PASS" : "FAIL") << "  " << name;
        if (!detail.empty()) std::cout << "  (" << detail << ")";
        std::cout << "\n";
        all_ok = all_ok && ok;
    };

    // Render equivalence on random scenes.
    {
        const int n_scenes = quick ? 3 : 8;
        double max_diff = 0.0;
        for (int s = 0; s < n_scenes; ++s) {
            fsplat::SceneSpec spec;
            spec.n_gaussians = 60 + 20 * static_cast<std::size_t>(s % 3);
            spec.n_prototypes = 4;
            spec.feature_dim = 8;
            spec.n_views = 1;
            spec.image_width = spec.image_height = 32;
            spec.seed = seed + static_cast<std::uint64_t>(s);
            const fsplat::SceneBundle bundle = fsplat::synth_scene(spec);
            const fsplat::RenderOutput tiled =
                fsplat::render(bundle.field, bundle.cameras[0]);
            const fsplat::RenderOutput brute =
                fsplat::render_brute_force(bundle.field, bundle.cameras[0]);
            for (std::size_t k = 0; k < tiled.rgb.size(); ++k) {
                max_diff = std::max(max_diff, std::abs(tiled.rgb[k] - brute.rgb[k]));
            }
            for (std::size_t k = 0; k < tiled.features.data.size(); ++k) {
                max_diff = std::max(
                    max_diff, std::abs(tiled.features.data[k] - brute.features.data[k]));
            }
        }
        report("render == brute_force (max |diff| < 1e-5)", max_diff < 1e-5,
               "max diff " + std::to_string(max_diff));
    }

    // EM vs GD on a seeded scene.
    {
        fsplat::SceneSpec spec;
        spec.n_gaussians = 24;
        spec.n_prototypes = 4;
        spec.feature_dim = 8;
        spec.n_views = 6;
        spec.image_width = spec.image_height = 24;
        spec.seed = seed + 100;
        const fsplat::SceneBundle bundle = fsplat::synth_scene(spec);
        fsplat::LiftProblem problem;
        problem.field = bundle.field;
        for (std::size_t t = 0; t < bundle.cameras.size(); ++t) {
            problem.views.push_back({bundle.cameras[t], bundle.gt_feature_maps[t]});
        }
        const fsplat::LiftResult em = fsplat::em_lift(problem);
        double max_mass = 0.0;
        for (double m : em.mass) max_mass = std::max(max_mass, m);
        const double lr = 0.45 / (max_mass + problem.options.lambda_reg);
        const fsplat::LiftResult gd =
            fsplat::gd_lift(problem, lr, quick ? 20000 : 200000, 1e-8);
        double max_diff = 0.0;
        const int dim = problem.field.feature_dim;
        for (std::size_t i = 0; i < em.mass.size(); ++i) {
            if (em.mass[i] <= 1e-3) continue;
            for (int d = 0; d < dim; ++d) {
                max_diff = std::max(max_diff,
                                    std::abs(em.features[i * dim + d] -
                                             gd.features[i * dim + d]));
            }
        }
        const double grad_norm = fsplat::lift_gradient_maxnorm(problem, em.features);
        report("em_lift == gd_lift (max |diff| < 1e-4)", max_diff < 1e-4,
               "max diff " + std::to_string(max_diff));
        report("em_lift stationarity (grad max-norm < 1e-6)", grad_norm < 1e-6,
               "grad norm " + std::to_string(grad_norm));
    }

    // Autoencoder gradient checks.
    {
        const int n_models = quick ? 5 : 20;
        double worst = 0.0;
        fsplat::Rng rng(seed + 200);
        for (int m = 0; m < n_models; ++m) {
            fsplat::AEConfig config;
            config.encoder_dims = {6, 5, 3};
            config.decoder_dims = {3, 5, 6};
            config.seed = rng.next_u64();
            const fsplat::AEModel model = fsplat::build_model(config);
            fsplat::Batch x(4, 6);
            for (double& v : x.data) v = rng.normal();
            worst = std::max(worst, fsplat::grad_check(model, x, 1e-5));
        }
        report("autoencoder grad_check (max rel err < 1e-4)", worst < 1e-4,
               "max rel err " + std::to_string(worst));
    }

    if (global.verbosity > 0) {
        std::cout << (all_ok ? "verify: all checks passed\n"
                             : "verify: FAILURES detected\n");
    }
    return all_ok ? kExitOk : kExitVerification;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"featsplat: gaussian feature-field rendering, lifting and token export"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--precision", global.precision, "f32 or f64 accumulation")
        ->default_val("f64");
    app.add_option("--threads", global.threads, "worker thread count or 'auto'")
        ->default_val("auto");
    app.add_option("-v,--verbosity", global.verbosity, "0 = quiet")->default_val(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic scene bundle");
    std::string synth_out;
    std::size_t synth_n = 200, synth_protos = 8;
    int synth_dim = 16, synth_views = 8, synth_w = 64, synth_h = 64;
    std::vector<double> synth_extent{2.0, 2.0, 2.0};
    double synth_orbit_r = 0.0, synth_orbit_h = 0.0;
    std::uint64_t synth_seed = 1;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--n", synth_n, "gaussian count");
    synth->add_option("--prototypes", synth_protos, "planted prototype count");
    synth->add_option("--dim", synth_dim, "feature dimension");
    synth->add_option("--views", synth_views, "camera count");
    synth->add_option("--extent", synth_extent, "scene half-sizes (3 values)")
        ->expected(3);
    synth->add_option("--orbit-radius", synth_orbit_r, "0 = derive from extent");
    synth->add_option("--orbit-height", synth_orbit_h, "0 = derive from extent");
    synth->add_option("--width", synth_w, "image width");
    synth->add_option("--height", synth_h, "image height");
    synth->add_option("--seed", synth_seed, "rng seed");

    // render
    auto* render_cmd = app.add_subcommand("render", "render rgb + feature maps");
    std::string render_out, render_field, render_cams, render_gt_maps, render_gt_rgb;
    render_cmd->add_option("--out", render_out, "output directory")->required();
    render_cmd->add_option("--field", render_field, ".gsf field")->required();
    render_cmd->add_option("--cameras", render_cams, ".cam camera list")->required();
    render_cmd->add_option("--gt-maps", render_gt_maps, "optional gt feature maps");
    render_cmd->add_option("--gt-rgb", render_gt_rgb, "optional gt rgb maps");

    // lift
    auto* lift_cmd = app.add_subcommand("lift", "solve per-gaussian features");
    std::string lift_out, lift_field, lift_maps, lift_cams, lift_mode = "em",
                lift_resp = "compositing";
    int lift_iters = 1, lift_max_steps = 200000;
    double lift_lambda = 1e-6, lift_lr = 0.0, lift_grad_tol = 1e-8;
    lift_cmd->add_option("--out", lift_out, "output directory")->required();
    lift_cmd->add_option("--field", lift_field, ".gsf field")->required();
    lift_cmd->add_option("--maps", lift_maps, ".fmt pseudo-gt maps")->required();
    lift_cmd->add_option("--cameras", lift_cams, ".cam camera list")->required();
    lift_cmd->add_option("--mode", lift_mode, "em or gd");
    lift_cmd->add_option("--iters", lift_iters, "em cycles");
    lift_cmd->add_option("--lambda", lift_lambda, "damping");
    lift_cmd->add_option("--resp-mode", lift_resp, "compositing or mixture");
    lift_cmd->add_option("--lr", lift_lr, "gd learning rate, 0 = auto");
    lift_cmd->add_option("--max-steps", lift_max_steps, "gd step budget");
    lift_cmd->add_option("--grad-tol", lift_grad_tol, "gd stop tolerance");

    // train-ae
    auto* train_cmd = app.add_subcommand("train-ae", "train the feature autoencoder");
    std::string train_out, train_data, train_config;
    train_cmd->add_option("--out", train_out, "output directory")->required();
    train_cmd->add_option("--data", train_data, "rank-2 .fmt tensor")->required();
    train_cmd->add_option("--config", train_config, "key = value config file")->required();

    // sample
    auto* sample_cmd = app.add_subcommand("sample", "select gaussian token indices");
    std::string sample_out, sample_field, sample_strategy = "entropy";
    std::size_t sample_k = 100;
    std::uint64_t sample_seed = 0;
    double sample_radius = 0.5;
    sample_cmd->add_option("--out", sample_out, "output directory")->required();
    sample_cmd->add_option("--field", sample_field, ".gsf field")->required();
    sample_cmd->add_option("--strategy", sample_strategy, "entropy|random|density|fps");
    sample_cmd->add_option("-k,--k", sample_k, "token budget");
    sample_cmd->add_option("--seed", sample_seed, "rng seed");
    sample_cmd->add_option("--density-radius", sample_radius, "density strategy radius");

    // export-tokens
    auto* export_cmd = app.add_subcommand("export-tokens", "decode and write a .tok file");
    std::string export_out, export_field, export_ckpt, export_indices,
                export_strategy = "entropy";
    std::size_t export_k = 100;
    std::uint64_t export_seed = 0;
    double export_radius = 0.5;
    export_cmd->add_option("--out", export_out, "output directory")->required();
    export_cmd->add_option("--field", export_field, ".gsf field")->required();
    export_cmd->add_option("--checkpoint", export_ckpt, ".aec model")->required();
    export_cmd->add_option("--indices", export_indices, "text index list (overrides strategy)");
    export_cmd->add_option("--strategy", export_strategy, "entropy|random|density|fps");
    export_cmd->add_option("-k,--k", export_k, "token budget");
    export_cmd->add_option("--seed", export_seed, "rng seed");
    export_cmd->add_option("--density-radius", export_radius, "density strategy radius");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "compare a render against ground truth");
    std::string eval_out, eval_rendered, eval_gt_maps, eval_gt_rgb;
    eval_cmd->add_option("--rendered", eval_rendered, "render output directory")->required();
    eval_cmd->add_option("--gt-maps", eval_gt_maps, "gt feature maps")->required();
    eval_cmd->add_option("--gt-rgb", eval_gt_rgb, "optional gt rgb maps");
    eval_cmd->add_option("--out", eval_out, "optional output directory");

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "run the oracle suite");
    std::uint64_t verify_seed = 7;
    bool verify_quick = false;
    verify_cmd->add_option("--seed", verify_seed, "rng seed");
    verify_cmd->add_flag("--quick", verify_quick, "smaller fixture sizes");

    CLI11_PARSE(app, argc, argv);

    try {
        apply_threads(global.threads);
        parse_precision(global.precision);

        if (*synth) {
            return cmd_synth(global, synth_out, synth_n, synth_protos, synth_dim,
                             synth_views, synth_extent, synth_orbit_r, synth_orbit_h,
                             synth_w, synth_h, synth_seed);
        }
        if (*render_cmd) {
            return cmd_render(global, render_out, render_field, render_cams,
                              render_gt_maps, render_gt_rgb);
        }
        if (*lift_cmd) {
            return cmd_lift(global, lift_out, lift_field, lift_maps, lift_cams, lift_mode,
                            lift_iters, lift_lambda, lift_resp, lift_lr, lift_max_steps,
                            lift_grad_tol);
        }
        if (*train_cmd) {
            return cmd_train_ae(global, train_out, train_data, train_config);
        }
        if (*sample_cmd) {
            return cmd_sample(global, sample_out, sample_field, sample_strategy, sample_k,
                              sample_seed, sample_radius);
        }
        if (*export_cmd) {
            return cmd_export_tokens(global, export_out, export_field, export_ckpt,
                                     export_indices, export_strategy, export_k,
                                     export_seed, export_radius);
        }
        if (*eval_cmd) {
            return cmd_eval(global, eval_out, eval_rendered, eval_gt_maps, eval_gt_rgb);
        }
        if (*verify_cmd) {
            return cmd_verify(global, verify_seed, verify_quick);
        }
    } catch (const fsplat::validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const fsplat::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
