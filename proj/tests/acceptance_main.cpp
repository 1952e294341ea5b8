// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criterion 10 drives the CLI binary (path via --cli).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "featsplat/autoenc.hpp"
#include "featsplat/errors.hpp"
#include "featsplat/io.hpp"
#include "featsplat/lift.hpp"
#include "featsplat/raster.hpp"
#include "featsplat/rng.hpp"
#include "featsplat/sample.hpp"
#include "featsplat/scene.hpp"
#include "test_helpers.hpp"

using namespace fsplat;
using namespace fsplat::test;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void fail(const std::string& why) {
        ok = false;
        if (!detail.empty()) detail += "; ";
        detail += why;
    }
};

double seconds_since(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

LiftProblem scene_problem(const SceneBundle& bundle) {
    LiftProblem problem;
    problem.field = bundle.field;
    for (std::size_t t = 0; t < bundle.cameras.size(); ++t) {
        problem.views.push_back({bundle.cameras[t], bundle.gt_feature_maps[t]});
    }
    return problem;
}

SceneBundle lift_fixture(std::uint64_t seed) {
    SceneSpec spec;
    spec.n_gaussians = 24;
    spec.n_prototypes = 4;
    spec.feature_dim = 8;
    spec.n_views = 6;
    spec.image_width = spec.image_height = 24;
    spec.seed = seed;
    return synth_scene(spec);
}

// --- criterion 1: tiled renderer matches the brute-force oracle -------------

Outcome criterion_render_equivalence() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    double max_diff = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const std::size_t n = 60 + (seed * 7) % 141;  // <= 200
        const GaussianField field = random_field(n, 16, seed);
        const Camera cam = looking_at_origin(0.31 * static_cast<double>(seed), 3.5,
                                             1.0, 32, 32, 40.0);
        const RenderOutput tiled = render(field, cam);
        const RenderOutput brute = render_brute_force(field, cam);
        for (std::size_t k = 0; k < tiled.rgb.size(); ++k) {
            max_diff = std::max(max_diff, std::abs(tiled.rgb[k] - brute.rgb[k]));
        }
        for (std::size_t k = 0; k < tiled.features.data.size(); ++k) {
            max_diff = std::max(max_diff,
                                std::abs(tiled.features.data[k] - brute.features.data[k]));
        }
    }
    const double elapsed = seconds_since(start);
    if (!(max_diff < 1e-5)) out.fail("max-abs diff " + std::to_string(max_diff));
    if (!(elapsed < 30.0)) out.fail("runtime " + std::to_string(elapsed) + " s");
    std::ostringstream d;
    d << "max diff " << max_diff << ", " << elapsed << " s";
    out.detail = out.ok ? d.str() : out.detail + "; " + d.str();
    return out;
}

// --- criterion 2: responsibilities normalize on every covered pixel ---------

Outcome criterion_responsibility_normalization() {
    Outcome out;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const GaussianField field = random_field(80, 8, seed + 300);
        for (RespMode mode : {RespMode::compositing, RespMode::mixture}) {
            RenderOptions opts;
            opts.responsibility_mode = mode;
            const Camera cam = looking_at_origin(0.77 * static_cast<double>(seed), 3.5,
                                                 1.2, 32, 32, 40.0);
            const ResponsibilityMap resp = responsibilities(field, cam, opts);
            const std::size_t n_pixels =
                static_cast<std::size_t>(resp.width) * resp.height;
            for (std::size_t p = 0; p < n_pixels; ++p) {
                if (resp.coverage[p] <= kCoverageEps) {
                    if (resp.offsets[p + 1] != resp.offsets[p]) {
                        out.fail("uncovered pixel carries entries");
                    }
                    continue;
                }
                double sum = 0.0;
                for (std::uint32_t e = resp.offsets[p]; e < resp.offsets[p + 1]; ++e) {
                    sum += resp.weights[e];
                }
                worst = std::max(worst, std::abs(sum - 1.0));
            }
        }
    }
    if (!(worst < 1e-6)) out.fail("worst |sum - 1| = " + std::to_string(worst));
    if (out.ok) {
        std::ostringstream d;
        d << "worst |sum - 1| = " << worst;
        out.detail = d.str();
    }
    return out;
}

// --- criterion 3: em fixed point --------------------------------------------

Outcome criterion_em_fixed_point() {
    Outcome out;
    double worst_grad = 0.0, worst_change = 0.0;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const SceneBundle bundle = lift_fixture(seed);
        LiftProblem problem = scene_problem(bundle);
        const LiftResult once = em_lift(problem);
        worst_grad = std::max(worst_grad, lift_gradient_maxnorm(problem, once.features));

        problem.options.iters = 2;
        const LiftResult twice = em_lift(problem);
        for (std::size_t k = 0; k < once.features.size(); ++k) {
            worst_change = std::max(worst_change,
                                    std::abs(once.features[k] - twice.features[k]));
        }
    }
    if (!(worst_grad < 1e-6)) out.fail("gradient max-norm " + std::to_string(worst_grad));
    if (!(worst_change < 1e-10)) out.fail("second-cycle change " + std::to_string(worst_change));
    if (out.ok) {
        std::ostringstream d;
        d << "grad " << worst_grad << ", second-cycle change " << worst_change;
        out.detail = d.str();
    }
    return out;
}

// --- criterion 4: em equals the gd oracle ------------------------------------

Outcome criterion_em_equals_gd() {
    Outcome out;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const SceneBundle bundle = lift_fixture(seed + 50);
        LiftProblem problem = scene_problem(bundle);
        const LiftResult em = em_lift(problem);
        double max_mass = 0.0;
        for (double m : em.mass) max_mass = std::max(max_mass, m);
        const double lr = 0.45 / (max_mass + problem.options.lambda_reg);
        const LiftResult gd = gd_lift(problem, lr, 200000, 1e-8);
        const int dim = problem.field.feature_dim;
        for (std::size_t i = 0; i < problem.field.size(); ++i) {
            if (em.mass[i] <= 1e-3) continue;
            for (int d = 0; d < dim; ++d) {
                worst = std::max(worst, std::abs(em.features[i * dim + d] -
                                                 gd.features[i * dim + d]));
            }
        }
    }
    if (!(worst < 1e-4)) out.fail("max |em - gd| = " + std::to_string(worst));
    if (out.ok) {
        std::ostringstream d;
        d << "max |em - gd| = " << worst;
        out.detail = d.str();
    }
    return out;
}

// --- criterion 5: planted recovery -------------------------------------------

Outcome criterion_planted_recovery() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    SceneSpec spec;
    spec.n_gaussians = 20;
    spec.n_prototypes = 4;
    spec.feature_dim = 16;
    spec.n_views = 8;
    spec.image_width = spec.image_height = 64;
    spec.seed = 1;
    const SceneBundle bundle = synth_scene(spec);
    LiftProblem problem = scene_problem(bundle);
    const LiftResult result = em_lift(problem);

    double worst_cos = 1.0;
    const int dim = spec.feature_dim;
    for (std::size_t i = 0; i < problem.field.size(); ++i) {
        if (result.mass[i] <= 1e-3) continue;
        const double* proto = bundle.prototype_table.data() +
                              bundle.assignment[i] * static_cast<std::size_t>(dim);
        double dot = 0.0, norm_sq = 0.0;
        for (int d = 0; d < dim; ++d) {
            dot += result.features[i * dim + d] * proto[d];
            norm_sq += result.features[i * dim + d] * result.features[i * dim + d];
        }
        worst_cos = std::min(worst_cos, dot / std::sqrt(norm_sq));
    }
    const double elapsed = seconds_since(start);
    if (!(worst_cos > 0.99)) out.fail("worst cosine " + std::to_string(worst_cos));
    if (!(elapsed < 10.0)) out.fail("runtime " + std::to_string(elapsed) + " s");
    if (out.ok) {
        std::ostringstream d;
        d << "worst cosine " << worst_cos << ", " << elapsed << " s";
        out.detail = d.str();
    }
    return out;
}

// --- criterion 6: autoencoder -------------------------------------------------

Outcome criterion_autoencoder() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();

    // (a) unit-norm bottleneck across random models, inputs and modes.
    double worst_norm_dev = 0.0;
    {
        Rng rng(600);
        for (int trial = 0; trial < 20; ++trial) {
            AEConfig config;
            config.encoder_dims = {12, 8, 5};
            config.decoder_dims = {5, 8, 12};
            config.seed = rng.next_u64();
            AEModel model = build_model(config);
            model.mode = trial % 2 == 0 ? AEMode::inference : AEMode::training;
            Batch x(6, 12);
            for (double& v : x.data) v = 4.0 * rng.normal();
            const Batch z = encode(model, x);
            for (int b = 0; b < z.rows; ++b) {
                double norm_sq = 0.0;
                for (int c = 0; c < z.cols; ++c) norm_sq += z.row(b)[c] * z.row(b)[c];
                worst_norm_dev = std::max(worst_norm_dev,
                                          std::abs(std::sqrt(norm_sq) - 1.0));
            }
        }
        if (!(worst_norm_dev < 1e-6)) {
            out.fail("bottleneck norm deviation " + std::to_string(worst_norm_dev));
        }
    }

    // (b) finite-difference gradient oracle, 100 random tiny models.
    double worst_grad = 0.0;
    {
        Rng rng(601);
        for (int trial = 0; trial < 100; ++trial) {
            AEConfig config;
            config.encoder_dims = {6, 5, 3};
            config.decoder_dims = {3, 5, 6};
            config.seed = rng.next_u64();
            const AEModel model = build_model(config);
            Batch x(4, 6);
            for (double& v : x.data) v = rng.normal();
            worst_grad = std::max(worst_grad, grad_check(model, x, 1e-5));
        }
        if (!(worst_grad < 1e-4)) out.fail("grad_check max rel err " + std::to_string(worst_grad));
    }

    // (c) overfit fixture: 256 samples of dim 64 through a 16-wide bottleneck,
    // 2000 AdamW steps at the paper-anchored lr 1e-4.
    double final_loss = 0.0;
    {
        AEConfig config;
        config.encoder_dims = {64, 32, 16};
        config.decoder_dims = {16, 32, 64};
        config.lr = 1e-4;
        config.weight_decay = 0.0;
        config.batch_size = 256;
        config.epochs = 2000;
        config.seed = 7;

        Rng rng(4321);
        Batch basis(8, 64);
        for (double& v : basis.data) v = rng.normal() / 8.0;
        Batch data(256, 64);
        for (int r = 0; r < 256; ++r) {
            for (int k = 0; k < 8; ++k) {
                const double c = rng.normal();
                for (int d = 0; d < 64; ++d) data.row(r)[d] += c * basis.row(k)[d];
            }
        }
        const TrainResult result = train(config, data);
        final_loss = result.loss_history.back();
        if (!(final_loss < 1e-3)) out.fail("overfit loss " + std::to_string(final_loss));
    }

    const double elapsed = seconds_since(start);
    if (!(elapsed < 60.0)) out.fail("runtime " + std::to_string(elapsed) + " s");
    if (out.ok) {
        std::ostringstream d;
        d << "norm dev " << worst_norm_dev << ", grad err " << worst_grad
          << ", overfit loss " << final_loss << ", " << elapsed << " s";
        out.detail = d.str();
    }
    return out;
}

// --- criterion 7: sampling ----------------------------------------------------

Outcome criterion_sampling() {
    Outcome out;

    // (a) exact entropy of constant vectors.
    for (int d : {2, 16, 256}) {
        const std::vector<double> f(static_cast<std::size_t>(d), 1.25);
        if (feature_entropy(f) != std::log(static_cast<double>(d))) {
            out.fail("constant-vector entropy not exactly ln " + std::to_string(d));
        }
    }

    // (b) fps greedy property, brute force, 20 seeds, N up to 200.
    for (std::uint64_t seed = 1; seed <= 20 && out.ok; ++seed) {
        const std::size_t n = 50 + (seed * 13) % 151;  // <= 200
        const GaussianField field = random_field(n, 4, seed + 700);
        SampleRequest req;
        req.strategy = Strategy::fps;
        req.k = std::min<std::size_t>(12, n);
        req.seed = seed;
        const auto picked = sample_fps(field, req);
        const auto dist_sq = [&](std::size_t a, std::size_t b) {
            const Vec3 d = field.gaussians[a].mean - field.gaussians[b].mean;
            return d.dot(d);
        };
        for (std::size_t step = 1; step < picked.size(); ++step) {
            const auto min_to_prefix = [&](std::size_t j) {
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t s = 0; s < step; ++s) {
                    best = std::min(best, dist_sq(j, picked[s]));
                }
                return best;
            };
            const double chosen = min_to_prefix(picked[step]);
            for (std::size_t j = 0; j < field.size() && out.ok; ++j) {
                const bool selected =
                    std::find(picked.begin(), picked.begin() + static_cast<std::ptrdiff_t>(step + 1),
                              j) != picked.begin() + static_cast<std::ptrdiff_t>(step + 1);
                if (!selected && chosen < min_to_prefix(j)) {
                    out.fail("fps greedy property violated, seed " + std::to_string(seed));
                }
            }
        }
    }

    // (c) determinism, duplicate-freedom, size for every strategy.
    const GaussianField field = random_field(40, 8, 701);
    for (Strategy s : {Strategy::entropy, Strategy::random, Strategy::density,
                       Strategy::fps}) {
        SampleRequest req;
        req.strategy = s;
        req.k = 15;
        req.seed = 3;
        req.density_radius = 0.4;
        const auto a = sample_indices(field, req);
        const auto b = sample_indices(field, req);
        if (a != b) out.fail("strategy not deterministic per seed");
        if (a.size() != 15) out.fail("wrong sample size");
        const std::set<std::size_t> unique(a.begin(), a.end());
        if (unique.size() != a.size()) out.fail("duplicate indices");
    }
    if (out.ok) out.detail = "entropy exact, fps greedy verified, strategies deterministic";
    return out;
}

// --- criterion 8: token budget arithmetic --------------------------------------

Outcome criterion_token_budget() {
    Outcome out;
    if (token_budget(44, 729) != 32076) out.fail("budget(44, 729) != 32076");
    if (token_budget(1, 729) != 729) out.fail("budget(1, 729) != 729");
    if (out.ok) out.detail = "budget(44,729) = 32076, budget(1,729) = 729";
    return out;
}

// --- criterion 9: file round-trips and malformed inputs -------------------------

Outcome criterion_io_round_trips(const fs::path& dir) {
    Outcome out;
    fs::create_directories(dir);

    // .gsf bit-exact
    {
        const GaussianField field = random_field(64, 16, 900);
        save_field(dir / "a.gsf", field);
        const GaussianField back = load_field(dir / "a.gsf");
        save_field(dir / "b.gsf", back);
        if (read_bytes(dir / "a.gsf") != read_bytes(dir / "b.gsf")) {
            out.fail(".gsf round-trip not bit-exact");
        }
    }
    // .fmt bit-exact
    {
        Rng rng(901);
        std::vector<FeatureMap> maps;
        for (int t = 0; t < 3; ++t) {
            FeatureMap m(8, 6, 4, t);
            for (double& v : m.data) v = rng.normal();
            maps.push_back(std::move(m));
        }
        save_maps(dir / "a.fmt", maps);
        save_maps(dir / "b.fmt", load_maps(dir / "a.fmt"));
        if (read_bytes(dir / "a.fmt") != read_bytes(dir / "b.fmt")) {
            out.fail(".fmt round-trip not bit-exact");
        }
    }
    // .tok bit-exact
    {
        GaussianField field = random_field(10, 4, 902);
        AEConfig config;
        config.encoder_dims = {8, 4};
        config.decoder_dims = {4, 8};
        config.seed = 9;
        const AEModel model = build_model(config);
        const TokenSet tokens =
            export_tokens(field, model, {0, 3, 7}, Strategy::explicit_list, 0);
        save_tokens(dir / "a.tok", tokens);
        save_tokens(dir / "b.tok", load_tokens(dir / "a.tok"));
        if (read_bytes(dir / "a.tok") != read_bytes(dir / "b.tok")) {
            out.fail(".tok round-trip not bit-exact");
        }
    }
    // .cam value-exact
    {
        std::vector<Camera> cams;
        for (int i = 0; i < 3; ++i) {
            cams.push_back(looking_at_origin(0.9 * i + 0.2, 4.1, 1.3, 32, 24, 47.5));
        }
        save_cameras(dir / "a.cam", cams);
        const std::vector<Camera> back = load_cameras(dir / "a.cam");
        for (std::size_t i = 0; i < cams.size(); ++i) {
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    if (back[i].rotation.at(r, c) != cams[i].rotation.at(r, c)) {
                        out.fail(".cam rotation not value-exact");
                    }
                }
            }
            if (back[i].fx != cams[i].fx || back[i].translation.z != cams[i].translation.z) {
                out.fail(".cam values not exact");
            }
        }
    }
    // malformed inputs produce structured errors, never crashes
    {
        const auto expect_io_error = [&](const fs::path& p, const char* what) {
            try {
                (void)load_field(p);
                out.fail(std::string(what) + ": no error raised");
            } catch (const io_error&) {
            } catch (...) {
                out.fail(std::string(what) + ": wrong exception type");
            }
        };
        std::ofstream(dir / "garbage.gsf", std::ios::binary) << "not a field";
        expect_io_error(dir / "garbage.gsf", "garbage magic");

        std::string bytes = read_bytes(dir / "a.gsf");
        bytes.resize(bytes.size() / 3);
        std::ofstream(dir / "trunc.gsf", std::ios::binary)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        expect_io_error(dir / "trunc.gsf", "truncated payload");

        bytes = read_bytes(dir / "a.gsf");
        bytes[4] = 42;
        std::ofstream(dir / "vers.gsf", std::ios::binary)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        expect_io_error(dir / "vers.gsf", "version bump");

        try {
            (void)load_tokens(dir / "a.gsf");
            out.fail("token loader accepted a field file");
        } catch (const io_error&) {
        }
        try {
            (void)load_cameras(dir / "a.fmt");
            out.fail("camera loader accepted a tensor file");
        } catch (const io_error&) {
        }
    }
    if (out.ok) out.detail = "gsf/fmt/tok bit-exact, cam value-exact, malformed rejected";
    return out;
}

// --- criterion 10: end-to-end pipeline through the cli ---------------------------

int run_cli(const std::string& cli, const std::string& args, const fs::path& log) {
    const std::string cmd = "\"" + cli + "\" " + args + " >> \"" + log.string() +
                            "\" 2>&1";
    return std::system(cmd.c_str());
}

Outcome criterion_pipeline(const std::string& cli, const fs::path& dir) {
    Outcome out;
    if (cli.empty()) {
        out.fail("no --cli path given");
        return out;
    }
    const auto start = std::chrono::steady_clock::now();
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path log = dir / "pipeline.log";

    // Shared training data + config for the autoencoder stage.
    {
        Rng rng(1000);
        Tensor data;
        data.dims = {256, 64};
        data.data.resize(data.element_count());
        std::vector<double> basis(8 * 64);
        for (double& v : basis) v = rng.normal() / 8.0;
        for (int r = 0; r < 256; ++r) {
            for (int k = 0; k < 8; ++k) {
                const double c = rng.normal();
                for (int d = 0; d < 64; ++d) {
                    data.data[static_cast<std::size_t>(r) * 64 + d] +=
                        c * basis[static_cast<std::size_t>(k) * 64 + d];
                }
            }
        }
        save_tensor(dir / "ae_data.fmt", data);
        std::ofstream cfg(dir / "ae.cfg");
        cfg << "encoder_dims = 64,32,16\ndecoder_dims = 16,32,64\nlr = 0.001\n"
            << "weight_decay = 0\nbatch_size = 256\nepochs = 300\nseed = 7\n";
    }

    const auto pipeline = [&](const fs::path& root) -> bool {
        const std::string r = root.string();
        if (run_cli(cli, "--threads 1 synth --out " + r + "/scene --n 200 --prototypes 8"
                         " --dim 16 --views 8 --width 48 --height 48 --seed 11",
                    log) != 0) return false;
        if (run_cli(cli, "--threads 1 lift --out " + r + "/lift --field " + r +
                         "/scene/field.gsf --maps " + r + "/scene/feature_maps.fmt"
                         " --cameras " + r + "/scene/cameras.cam --mode em",
                    log) != 0) return false;
        if (run_cli(cli, "--threads 1 train-ae --out " + r + "/ae --data " +
                         (dir / "ae_data.fmt").string() + " --config " +
                         (dir / "ae.cfg").string(),
                    log) != 0) return false;
        if (run_cli(cli, "--threads 1 sample --out " + r + "/sample --field " + r +
                         "/lift/lifted.gsf --strategy entropy -k 100 --seed 3",
                    log) != 0) return false;
        if (run_cli(cli, "--threads 1 export-tokens --out " + r + "/tokens --field " + r +
                         "/lift/lifted.gsf --checkpoint " + r + "/ae/checkpoint.aec"
                         " --indices " + r + "/sample/indices.txt",
                    log) != 0) return false;
        return true;
    };

    if (!pipeline(dir / "run1")) {
        out.fail("pipeline run 1 failed (see " + log.string() + ")");
        return out;
    }
    if (run_cli(cli, "--threads 1 verify --seed 7", log) != 0) {
        out.fail("cmd_verify failed (see " + log.string() + ")");
        return out;
    }
    if (!pipeline(dir / "run2")) {
        out.fail("pipeline run 2 failed (see " + log.string() + ")");
        return out;
    }

    // Bit-identical rerun in f64 single-thread mode.
    const char* artifacts[] = {"scene/field.gsf",      "scene/feature_maps.fmt",
                               "scene/cameras.cam",    "lift/lifted.gsf",
                               "ae/checkpoint.aec",    "sample/indices.txt",
                               "tokens/tokens.tok"};
    for (const char* rel : artifacts) {
        if (read_bytes(dir / "run1" / rel) != read_bytes(dir / "run2" / rel)) {
            out.fail(std::string("rerun differs: ") + rel);
        }
    }
    const double elapsed = seconds_since(start);
    if (!(elapsed < 120.0)) out.fail("runtime " + std::to_string(elapsed) + " s");
    if (out.ok) {
        std::ostringstream d;
        d << "pipeline + verify green, rerun bit-identical, " << elapsed << " s";
        out.detail = d.str();
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli;
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--cli") cli = argv[i + 1];
    }

    const fs::path scratch = fs::temp_directory_path() / "featsplat_acceptance";
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    struct Entry {
        const char* name;
        Outcome outcome;
    };
    std::vector<Entry> entries;
    entries.push_back({"1 oracle render equivalence", criterion_render_equivalence()});
    entries.push_back(
        {"2 responsibility normalization", criterion_responsibility_normalization()});
    entries.push_back({"3 em fixed point", criterion_em_fixed_point()});
    entries.push_back({"4 em == gd oracle", criterion_em_equals_gd()});
    entries.push_back({"5 planted recovery", criterion_planted_recovery()});
    entries.push_back({"6 autoencoder", criterion_autoencoder()});
    entries.push_back({"7 sampling", criterion_sampling()});
    entries.push_back({"8 token budget arithmetic", criterion_token_budget()});
    entries.push_back({"9 io round-trips", criterion_io_round_trips(scratch / "io")});
    entries.push_back({"10 end-to-end pipeline", criterion_pipeline(cli, scratch / "e2e")});

    bool all_ok = true;
    for (const Entry& e : entries) {
        std::cout << (e.outcome.ok ? "PASS" : "FAIL") << "  criterion " << e.name;
        if (!e.outcome.detail.empty()) std::cout << "  (" << e.outcome.detail << ")";
        std::cout << "\n";
        all_ok = all_ok && e.outcome.ok;
    }
    std::cout << (all_ok ? "acceptance: all criteria passed\n"
                         : "acceptance: FAILURES detected\n");
    return all_ok ? 0 : 3;
}
