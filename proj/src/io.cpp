// Copyright Contributors to the FeatSplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "featsplat/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "featsplat/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace fsplat {
namespace {

constexpr std::uint32_t kTensorVersion = 1;
constexpr std::uint32_t kFieldVersion = 1;
constexpr char kTensorMagic[4] = {'F', 'S', 'P', 'T'};
constexpr char kFieldMagic[4] = {'F', 'S', 'G', 'F'};

class Reader {
public:
    Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw io_error(path.string() + ": cannot open for reading");
    }

    void raw(void* dst, std::size_t bytes, const char* what) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
        if (static_cast<std::size_t>(in_.gcount()) != bytes) {
            std::ostringstream msg;
            msg << path_.string() << ": truncated payload reading " << what
                << " (wanted " << bytes << " bytes, got " << in_.gcount() << ")";
            throw io_error(msg.str());
        }
    }

    template <typename T>
    T scalar(const char* what) {
        T v;
        raw(&v, sizeof(T), what);
        return v;
    }

    void expect_magic(const char (&magic)[4], const char* format_name) {
        char got[4];
        raw(got, 4, "magic");
        if (std::memcmp(got, magic, 4) != 0) {
            throw io_error(path_.string() + ": wrong magic, not a " + format_name + " file");
        }
    }

    void expect_version(std::uint32_t supported) {
        const std::uint32_t v = scalar<std::uint32_t>("version");
        if (v != supported) {
            std::ostringstream msg;
            msg << path_.string() << ": unsupported version " << v << " (supported: "
                << supported << ")";
            throw io_error(msg.str());
        }
    }

    void expect_eof() {
        char extra;
        in_.read(&extra, 1);
        if (!in_.eof()) {
            throw io_error(path_.string() + ": trailing bytes after payload");
        }
    }

private:
    std::filesystem::path path_;
    std::ifstream in_;
};

class Writer {
public:
    explicit Writer(const std::filesystem::path& path)
        : atomic_(path), out_(atomic_.temp_path(), std::ios::binary) {
        if (!out_) throw io_error(path.string() + ": cannot open for writing");
    }

    void raw(const void* src, std::size_t bytes) {
        out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(bytes));
    }

    template <typename T>
    void scalar(T v) {
        raw(&v, sizeof(T));
    }

    void finish() {
        out_.flush();
        if (!out_) throw io_error(atomic_.temp_path().string() + ": write failed");
        out_.close();
        atomic_.commit();
    }

private:
    AtomicWriter atomic_;
    std::ofstream out_;
};

void write_f64_block(Writer& w, const double* data, std::size_t count) {
    w.raw(data, count * sizeof(double));
}

void read_f64_block(Reader& r, double* data, std::size_t count, const char* what) {
    r.raw(data, count * sizeof(double), what);
}

}  // namespace

AtomicWriter::AtomicWriter(const std::filesystem::path& path) : target_(path) {
    temp_ = path;
    temp_ += ".tmp";
}

AtomicWriter::~AtomicWriter() {
    if (!committed_) {
        std::error_code ec;
        std::filesystem::remove(temp_, ec);
    }
}

void AtomicWriter::commit() {
    std::error_code ec;
    std::filesystem::rename(temp_, target_, ec);
    if (ec) {
        throw io_error(target_.string() + ": rename from temp failed: " + ec.message());
    }
    committed_ = true;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    if (t.data.size() != t.element_count()) {
        throw validation_error(path.string() + ": tensor data size does not match dims");
    }
    Writer w(path);
    w.raw(kTensorMagic, 4);
    w.scalar(kTensorVersion);
    w.scalar(static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint32_t d : t.dims) w.scalar(d);
    w.scalar(static_cast<std::uint32_t>(t.dtype));
    if (t.dtype == Dtype::f64) {
        write_f64_block(w, t.data.data(), t.data.size());
    } else {
        std::vector<float> buf(t.data.begin(), t.data.end());
        w.raw(buf.data(), buf.size() * sizeof(float));
    }
    w.finish();
}

Tensor load_tensor(const std::filesystem::path& path) {
    Reader r(path);
    r.expect_magic(kTensorMagic, "tensor");
    r.expect_version(kTensorVersion);
    Tensor t;
    const std::uint32_t rank = r.scalar<std::uint32_t>("rank");
    if (rank > 8) throw io_error(path.string() + ": implausible tensor rank");
    t.dims.resize(rank);
    for (std::uint32_t& d : t.dims) d = r.scalar<std::uint32_t>("dims");
    const std::uint32_t dtype = r.scalar<std::uint32_t>("dtype");
    if (dtype > 1) throw io_error(path.string() + ": unknown dtype code");
    t.dtype = static_cast<Dtype>(dtype);
    const std::size_t count = t.element_count();
    t.data.resize(count);
    if (t.dtype == Dtype::f64) {
        read_f64_block(r, t.data.data(), count, "payload");
    } else {
        std::vector<float> buf(count);
        r.raw(buf.data(), count * sizeof(float), "payload");
        for (std::size_t i = 0; i < count; ++i) t.data[i] = buf[i];
    }
    r.expect_eof();
    return t;
}

void save_field(const std::filesystem::path& path, const GaussianField& field) {
    require_valid(field);
    Writer w(path);
    w.raw(kFieldMagic, 4);
    w.scalar(kFieldVersion);
    w.scalar(static_cast<std::uint64_t>(field.size()));
    w.scalar(static_cast<std::uint32_t>(field.feature_dim));
    for (const Gaussian& g : field.gaussians) {
        const double rec[14] = {g.mean.x,     g.mean.y,     g.mean.z,
                                g.scale.x,    g.scale.y,    g.scale.z,
                                g.rotation.w, g.rotation.x, g.rotation.y, g.rotation.z,
                                g.opacity,    g.color.x,    g.color.y,    g.color.z};
        write_f64_block(w, rec, 14);
        write_f64_block(w, g.feature.data(), g.feature.size());
    }
    w.finish();
}

GaussianField load_field(const std::filesystem::path& path) {
    Reader r(path);
    r.expect_magic(kFieldMagic, "gaussian field");
    r.expect_version(kFieldVersion);
    GaussianField field;
    const std::uint64_t n = r.scalar<std::uint64_t>("count");
    const std::uint32_t dim = r.scalar<std::uint32_t>("feature_dim");
    if (n > (1ull << 32)) throw io_error(path.string() + ": implausible gaussian count");
    field.feature_dim = static_cast<int>(dim);
    field.gaussians.resize(n);
    for (Gaussian& g : field.gaussians) {
        double rec[14];
        read_f64_block(r, rec, 14, "gaussian record");
        g.mean = {rec[0], rec[1], rec[2]};
        g.scale = {rec[3], rec[4], rec[5]};
        g.rotation = {rec[6], rec[7], rec[8], rec[9]};
        g.opacity = rec[10];
        g.color = {rec[11], rec[12], rec[13]};
        g.feature.resize(dim);
        read_f64_block(r, g.feature.data(), dim, "gaussian features");
    }
    r.expect_eof();
    const std::vector<Violation> violations = validate_field(field);
    if (!violations.empty()) {
        throw io_error(path.string() + ": loaded field is invalid: [" +
                       std::to_string(violations.front().index) + "] " +
                       violations.front().rule);
    }
    return field;
}

void save_maps(const std::filesystem::path& path, const std::vector<FeatureMap>& maps,
               Dtype dtype) {
    Tensor t;
    t.dtype = dtype;
    if (maps.empty()) {
        t.dims = {0, 0, 0, 0};
        save_tensor(path, t);
        return;
    }
    const int w = maps.front().width, h = maps.front().height, d = maps.front().dim;
    for (const FeatureMap& m : maps) {
        if (m.width != w || m.height != h || m.dim != d) {
            throw validation_error(path.string() +
                                   ": feature maps in a stack must share their shape");
        }
    }
    t.dims = {static_cast<std::uint32_t>(maps.size()), static_cast<std::uint32_t>(h),
              static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(d)};
    t.data.reserve(t.element_count());
    for (const FeatureMap& m : maps) {
        t.data.insert(t.data.end(), m.data.begin(), m.data.end());
    }
    save_tensor(path, t);
}

std::vector<FeatureMap> load_maps(const std::filesystem::path& path) {
    const Tensor t = load_tensor(path);
    if (t.dims.size() != 4) {
        throw io_error(path.string() + ": feature-map stack must be a rank-4 tensor");
    }
    const std::uint32_t count = t.dims[0], h = t.dims[1], w = t.dims[2], d = t.dims[3];
    std::vector<FeatureMap> maps;
    maps.reserve(count);
    const std::size_t per_map = static_cast<std::size_t>(h) * w * d;
    for (std::uint32_t i = 0; i < count; ++i) {
        FeatureMap m(static_cast<int>(w), static_cast<int>(h), static_cast<int>(d),
                     static_cast<int>(i));
        std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>(i * per_map), per_map,
                    m.data.begin());
        maps.push_back(std::move(m));
    }
    return maps;
}

void save_cameras(const std::filesystem::path& path, const std::vector<Camera>& cams) {
    AtomicWriter atomic(path);
    std::ofstream out(atomic.temp_path());
    if (!out) throw io_error(path.string() + ": cannot open for writing");
    out.precision(17);
    out << "FSCAM 1\n";
    out << "count " << cams.size() << "\n";
    for (std::size_t i = 0; i < cams.size(); ++i) {
        const Camera& c = cams[i];
        out << "camera " << i << "\n";
        out << "  size " << c.width << " " << c.height << "\n";
        out << "  intrinsics " << c.fx << " " << c.fy << " " << c.cx << " " << c.cy << "\n";
        out << "  clip " << c.near_clip << " " << c.far_clip << "\n";
        for (int r = 0; r < 3; ++r) {
            out << "  r" << r << " " << c.rotation.at(r, 0) << " " << c.rotation.at(r, 1)
                << " " << c.rotation.at(r, 2) << "\n";
        }
        out << "  t " << c.translation.x << " " << c.translation.y << " "
            << c.translation.z << "\n";
    }
    out.flush();
    if (!out) throw io_error(path.string() + ": write failed");
    out.close();
    atomic.commit();
}

namespace {

std::istringstream expect_line(std::ifstream& in, const std::filesystem::path& path,
                               const std::string& keyword) {
    std::string line;
    if (!std::getline(in, line)) {
        throw io_error(path.string() + ": unexpected end of file, wanted '" + keyword + "'");
    }
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head != keyword) {
        throw io_error(path.string() + ": expected '" + keyword + "', got '" + head + "'");
    }
    return ls;
}

template <typename T>
T parse_value(std::istringstream& ls, const std::filesystem::path& path,
              const std::string& what) {
    T v;
    if (!(ls >> v)) throw io_error(path.string() + ": malformed value for " + what);
    return v;
}

}  // namespace

std::vector<Camera> load_cameras(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path.string() + ": cannot open for reading");

    {
        std::string line;
        if (!std::getline(in, line)) throw io_error(path.string() + ": empty file");
        std::istringstream ls(line);
        std::string magic;
        std::uint32_t version = 0;
        ls >> magic >> version;
        if (magic != "FSCAM") throw io_error(path.string() + ": not a camera list file");
        if (version != 1) {
            throw io_error(path.string() + ": unsupported version " +
                           std::to_string(version) + " (supported: 1)");
        }
    }

    std::istringstream count_ls = expect_line(in, path, "count");
    const std::size_t count = parse_value<std::size_t>(count_ls, path, "count");
    std::vector<Camera> cams(count);
    for (std::size_t i = 0; i < count; ++i) {
        expect_line(in, path, "camera");
        Camera& c = cams[i];
        {
            std::istringstream ls = expect_line(in, path, "size");
            c.width = parse_value<int>(ls, path, "width");
            c.height = parse_value<int>(ls, path, "height");
        }
        {
            std::istringstream ls = expect_line(in, path, "intrinsics");
            c.fx = parse_value<double>(ls, path, "fx");
            c.fy = parse_value<double>(ls, path, "fy");
            c.cx = parse_value<double>(ls, path, "cx");
            c.cy = parse_value<double>(ls, path, "cy");
        }
        {
            std::istringstream ls = expect_line(in, path, "clip");
            c.near_clip = parse_value<double>(ls, path, "near");
            c.far_clip = parse_value<double>(ls, path, "far");
        }
        for (int r = 0; r < 3; ++r) {
            std::istringstream ls = expect_line(in, path, "r" + std::to_string(r));
            for (int col = 0; col < 3; ++col) {
                c.rotation.at(r, col) = parse_value<double>(ls, path, "rotation row");
            }
        }
        {
            std::istringstream ls = expect_line(in, path, "t");
            c.translation.x = parse_value<double>(ls, path, "tx");
            c.translation.y = parse_value<double>(ls, path, "ty");
            c.translation.z = parse_value<double>(ls, path, "tz");
        }
        const std::vector<std::string> problems = c.validate();
        if (!problems.empty()) {
            throw io_error(path.string() + ": camera " + std::to_string(i) +
                           " is invalid: " + problems.front());
        }
    }
    return cams;
}

}  // namespace fsplat
