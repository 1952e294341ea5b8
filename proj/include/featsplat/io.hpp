// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "featsplat/raster.hpp"
#include "featsplat/types.hpp"

namespace fsplat {

enum class Dtype : std::uint32_t { f32 = 0, f64 = 1 };

// Dense row-major tensor. Values are held as doubles in memory; dtype names
// the on-disk payload width and is preserved across a round-trip.
struct Tensor {
    std::vector<std::uint32_t> dims;
    Dtype dtype = Dtype::f64;
    std::vector<double> data;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (std::uint32_t d : dims) n *= d;
        return dims.empty() ? 0 : n;
    }
};

// Tensor container, magic "FSPT": version, rank, dims, dtype, payload.
// All integers little-endian, floats IEEE-754.
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// Gaussian field container, magic "FSGF": all attributes including features,
// stored as float64 blocks for bit-exact round-trips.
void save_field(const std::filesystem::path& path, const GaussianField& field);
GaussianField load_field(const std::filesystem::path& path);

// Feature-map stack as a rank-4 tensor [T, H, W, D]. All maps must share
// their resolution and dimension; frame ids are the stack positions.
void save_maps(const std::filesystem::path& path, const std::vector<FeatureMap>& maps,
               Dtype dtype = Dtype::f64);
std::vector<FeatureMap> load_maps(const std::filesystem::path& path);

// Camera list as hand-editable structured text. Values are printed with
// enough digits to round-trip doubles exactly; loading validates poses.
void save_cameras(const std::filesystem::path& path, const std::vector<Camera>& cams);
std::vector<Camera> load_cameras(const std::filesystem::path& path);

// Writes via a temp file in the same directory, then renames into place.
class AtomicWriter {
public:
    explicit AtomicWriter(const std::filesystem::path& path);
    ~AtomicWriter();
    AtomicWriter(const AtomicWriter&) = delete;
    AtomicWriter& operator=(const AtomicWriter&) = delete;

    const std::filesystem::path& temp_path() const { return temp_; }
    void commit();

private:
    std::filesystem::path target_;
    std::filesystem::path temp_;
    bool committed_ = false;
};

}  // namespace fsplat
