// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "featsplat/sample.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "featsplat/errors.hpp"
#include "featsplat/io.hpp"
#include "featsplat/rng.hpp"

namespace fsplat {
namespace {

constexpr char kTokenMagic[4] = {'F', 'S', 'T', 'K'};
constexpr std::uint32_t kTokenVersion = 1;

void check_sampleable(const GaussianField& field, const SampleRequest& req) {
    require_valid(field);
    if (field.size() == 0) {
        throw validation_error("sample: field must contain at least one gaussian");
    }
    if (req.k < 1) throw validation_error("sample: k must be at least 1");
}

}  // namespace

double feature_entropy(std::span<const double> f) {
    if (f.size() < 2) throw validation_error("feature_entropy: need at least 2 dims");
    double max_val = f[0];
    for (double v : f) {
        if (!std::isfinite(v)) {
            throw validation_error("feature_entropy: non-finite component");
        }
        max_val = std::max(max_val, v);
    }
    // H = ln(sum e^z) - (sum z e^z) / (sum e^z), z = f - max. The arrangement
    // keeps H == ln D exact for constant vectors and shift-invariant.
    double sum = 0.0, weighted = 0.0;
    for (double v : f) {
        const double z = v - max_val;
        const double e = std::exp(z);
        sum += e;
        weighted += z * e;
    }
    return std::log(sum) - weighted / sum;
}

std::vector<std::size_t> sample_entropy(const GaussianField& field,
                                        const SampleRequest& req) {
    check_sampleable(field, req);
    const std::size_t n = field.size();
    std::vector<double> entropy(n);

#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        entropy[i] = feature_entropy(field.gaussians[i].feature);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t k = std::min(req.k, n);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                      order.end(), [&](std::size_t a, std::size_t b) {
                          if (entropy[a] != entropy[b]) return entropy[a] > entropy[b];
                          return a < b;
                      });
    order.resize(k);
    return order;
}

std::vector<std::size_t> sample_random(const GaussianField& field,
                                       const SampleRequest& req) {
    check_sampleable(field, req);
    const std::size_t n = field.size();
    const std::size_t k = std::min(req.k, n);
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    Rng rng(req.seed);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.bounded(n - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

std::vector<std::size_t> sample_density(const GaussianField& field,
                                        const SampleRequest& req) {
    check_sampleable(field, req);
    if (!(req.density_radius > 0.0)) {
        throw validation_error("sample_density: radius must be positive");
    }
    const std::size_t n = field.size();
    const std::size_t k = std::min(req.k, n);
    const double radius_sq = req.density_radius * req.density_radius;

    std::vector<double> density(n, 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        const Vec3& p = field.gaussians[static_cast<std::size_t>(i)].mean;
        std::size_t count = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const Vec3 d = field.gaussians[j].mean - p;
            if (d.dot(d) <= radius_sq) ++count;
        }
        density[static_cast<std::size_t>(i)] = static_cast<double>(count);
    }

    // Successive weighted draws without replacement.
    std::vector<std::size_t> alive(n);
    std::iota(alive.begin(), alive.end(), std::size_t{0});
    std::vector<std::size_t> out;
    out.reserve(k);
    Rng rng(req.seed);
    double total = std::accumulate(density.begin(), density.end(), 0.0);
    for (std::size_t draw = 0; draw < k; ++draw) {
        const double u = rng.uniform01() * total;
        double acc = 0.0;
        std::size_t pick = alive.size() - 1;
        for (std::size_t a = 0; a < alive.size(); ++a) {
            acc += density[alive[a]];
            if (u < acc) {
                pick = a;
                break;
            }
        }
        out.push_back(alive[pick]);
        total -= density[alive[pick]];
        alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return out;
}

std::vector<std::size_t> sample_fps(const GaussianField& field,
                                    const SampleRequest& req) {
    check_sampleable(field, req);
    const std::size_t n = field.size();
    const std::size_t k = std::min(req.k, n);

    Rng rng(req.seed);
    std::vector<std::size_t> out;
    out.reserve(k);
    std::size_t current = rng.bounded(n);
    out.push_back(current);

    std::vector<double> min_dist_sq(n, std::numeric_limits<double>::infinity());
    std::vector<char> taken(n, 0);
    taken[current] = 1;
    while (out.size() < k) {
        const Vec3& last = field.gaussians[current].mean;
        for (std::size_t j = 0; j < n; ++j) {
            if (taken[j]) continue;
            const Vec3 d = field.gaussians[j].mean - last;
            min_dist_sq[j] = std::min(min_dist_sq[j], d.dot(d));
        }
        std::size_t best = n;
        double best_dist = -1.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (taken[j]) continue;
            if (min_dist_sq[j] > best_dist) {
                best_dist = min_dist_sq[j];
                best = j;
            }
        }
        current = best;
        taken[current] = 1;
        out.push_back(current);
    }
    return out;
}

std::vector<std::size_t> sample_indices(const GaussianField& field,
                                        const SampleRequest& req) {
    switch (req.strategy) {
        case Strategy::entropy: return sample_entropy(field, req);
        case Strategy::random: return sample_random(field, req);
        case Strategy::density: return sample_density(field, req);
        case Strategy::fps: return sample_fps(field, req);
        case Strategy::explicit_list:
            throw validation_error("sample: explicit_list needs caller-supplied indices");
    }
    throw validation_error("sample: unknown strategy");
}

std::size_t token_budget(std::size_t images_equiv, std::size_t patches_per_image) {
    return images_equiv * patches_per_image;
}

TokenSet export_tokens(const GaussianField& field, const AEModel& decoder,
                       const std::vector<std::size_t>& indices, Strategy strategy,
                       std::uint64_t seed) {
    require_valid(field);
    if (decoder.latent_dim() != field.feature_dim) {
        throw validation_error("export_tokens: decoder input dim " +
                               std::to_string(decoder.latent_dim()) +
                               " does not match field feature dim " +
                               std::to_string(field.feature_dim));
    }
    for (std::size_t i : indices) {
        if (i >= field.size()) {
            throw validation_error("export_tokens: index " + std::to_string(i) +
                                   " out of range");
        }
    }

    Batch latents(static_cast<int>(indices.size()), field.feature_dim);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::vector<double>& f = field.gaussians[indices[r]].feature;
        std::copy(f.begin(), f.end(), latents.row(static_cast<int>(r)));
    }
    const Batch decoded = decode(decoder, latents);

    TokenSet out;
    out.d_hi = static_cast<std::uint32_t>(decoded.cols);
    out.strategy = strategy;
    out.seed = seed;
    out.source_indices = indices;
    out.positions.reserve(indices.size());
    for (std::size_t i : indices) out.positions.push_back(field.gaussians[i].mean);
    out.tokens = decoded.data;
    return out;
}

void save_tokens(const std::filesystem::path& path, const TokenSet& tokens) {
    AtomicWriter atomic(path);
    std::ofstream out(atomic.temp_path(), std::ios::binary);
    if (!out) throw io_error(path.string() + ": cannot open for writing");
    const auto put = [&](const void* p, std::size_t bytes) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(bytes));
    };

    put(kTokenMagic, 4);
    const std::uint32_t version = kTokenVersion;
    put(&version, 4);
    const std::uint64_t k = tokens.size();
    put(&k, 8);
    put(&tokens.d_hi, 4);
    const std::uint32_t strategy = static_cast<std::uint32_t>(tokens.strategy);
    put(&strategy, 4);
    put(&tokens.seed, 8);

    for (std::size_t r = 0; r < tokens.size(); ++r) {
        const std::uint64_t src = tokens.source_indices[r];
        put(&src, 8);
        const float pos[3] = {static_cast<float>(tokens.positions[r].x),
                              static_cast<float>(tokens.positions[r].y),
                              static_cast<float>(tokens.positions[r].z)};
        put(pos, 12);
        std::vector<float> row(tokens.d_hi);
        const double* src_row = tokens.tokens.data() + r * tokens.d_hi;
        for (std::uint32_t d = 0; d < tokens.d_hi; ++d) {
            row[d] = static_cast<float>(src_row[d]);
        }
        put(row.data(), row.size() * sizeof(float));
    }
    out.flush();
    if (!out) throw io_error(path.string() + ": write failed");
    out.close();
    atomic.commit();
}

TokenSet load_tokens(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(path.string() + ": cannot open for reading");
    const auto get = [&](void* p, std::size_t bytes, const char* what) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(bytes));
        if (static_cast<std::size_t>(in.gcount()) != bytes) {
            throw io_error(path.string() + ": truncated payload reading " +
                           std::string(what));
        }
    };

    char magic[4];
    get(magic, 4, "magic");
    if (std::memcmp(magic, kTokenMagic, 4) != 0) {
        throw io_error(path.string() + ": wrong magic, not a token set file");
    }
    std::uint32_t version;
    get(&version, 4, "version");
    if (version != kTokenVersion) {
        throw io_error(path.string() + ": unsupported version " + std::to_string(version) +
                       " (supported: " + std::to_string(kTokenVersion) + ")");
    }

    TokenSet tokens;
    std::uint64_t k;
    get(&k, 8, "token count");
    get(&tokens.d_hi, 4, "token dim");
    std::uint32_t strategy;
    get(&strategy, 4, "strategy");
    if (strategy > 4) throw io_error(path.string() + ": unknown strategy code");
    tokens.strategy = static_cast<Strategy>(strategy);
    get(&tokens.seed, 8, "seed");
    if (k > (1ull << 32) || tokens.d_hi > (1u << 20)) {
        throw io_error(path.string() + ": implausible token header");
    }

    tokens.source_indices.resize(k);
    tokens.positions.resize(k);
    tokens.tokens.resize(k * tokens.d_hi);
    std::vector<float> row(tokens.d_hi);
    for (std::uint64_t r = 0; r < k; ++r) {
        std::uint64_t src;
        get(&src, 8, "source index");
        tokens.source_indices[r] = src;
        float pos[3];
        get(pos, 12, "position");
        tokens.positions[r] = {pos[0], pos[1], pos[2]};
        get(row.data(), row.size() * sizeof(float), "token payload");
        for (std::uint32_t d = 0; d < tokens.d_hi; ++d) {
            tokens.tokens[r * tokens.d_hi + d] = row[d];
        }
    }
    char extra;
    in.read(&extra, 1);
    if (!in.eof()) throw io_error(path.string() + ": trailing bytes after payload");
    return tokens;
}

}  // namespace fsplat
