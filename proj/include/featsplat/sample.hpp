// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "featsplat/autoenc.hpp"
#include "featsplat/types.hpp"

namespace fsplat {

enum class Strategy : std::uint32_t {
    entropy = 0,
    random = 1,
    density = 2,
    fps = 3,
    explicit_list = 4,  // indices supplied by the caller
};

struct SampleRequest {
    std::size_t k = 1;
    Strategy strategy = Strategy::entropy;
    std::uint64_t seed = 0;
    double density_radius = 1.0;  // density strategy only, world units
};

// Shannon entropy of softmax(f), in [0, ln D]. Shift-invariant; a constant
// vector yields exactly ln D.
double feature_entropy(std::span<const double> f);

// Top-k by feature entropy, ties broken by ascending index. Deterministic
// and seed-independent.
std::vector<std::size_t> sample_entropy(const GaussianField& field,
                                        const SampleRequest& req);

// Uniform without replacement, seeded.
std::vector<std::size_t> sample_random(const GaussianField& field,
                                       const SampleRequest& req);

// Without replacement, probability proportional to the count of gaussian
// means within density_radius (including the point itself).
std::vector<std::size_t> sample_density(const GaussianField& field,
                                        const SampleRequest& req);

// Greedy farthest-point sampling on gaussian means; the first point is
// seed-chosen, ties broken by ascending index.
std::vector<std::size_t> sample_fps(const GaussianField& field,
                                    const SampleRequest& req);

std::vector<std::size_t> sample_indices(const GaussianField& field,
                                        const SampleRequest& req);

// LLM-facing token budget: images_equiv * patches_per_image.
std::size_t token_budget(std::size_t images_equiv, std::size_t patches_per_image);

// Unordered set of decoded high-dimensional tokens with provenance. Positions
// are kept for debugging only and are not part of the token payload.
struct TokenSet {
    std::uint32_t d_hi = 0;
    Strategy strategy = Strategy::explicit_list;
    std::uint64_t seed = 0;
    std::vector<std::size_t> source_indices;
    std::vector<Vec3> positions;
    std::vector<double> tokens;  // k * d_hi row-major

    std::size_t size() const { return source_indices.size(); }
};

// Decodes the selected gaussians' features through the model's decoder.
TokenSet export_tokens(const GaussianField& field, const AEModel& decoder,
                       const std::vector<std::size_t>& indices, Strategy strategy,
                       std::uint64_t seed);

// Token file, magic "FSTK": header (version, k, d_hi, strategy, seed), then
// per token: source index (u64), position (3 x f32), token (d_hi x f32).
void save_tokens(const std::filesystem::path& path, const TokenSet& tokens);
TokenSet load_tokens(const std::filesystem::path& path);

}  // namespace fsplat
