#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "errors.hpp"

namespace fieldcov {

// Paired-sample dump. 16-byte header: 4-byte magic, then three uint32
// little-endian words. "RFL1" is a lattice layout (d, q, n) followed by
// n * 2 * q^d values; "RFR1" is a point layout (d, N_p, n) followed by
// the N_p * d point coordinates and then n * 2 * N_p values. All payload
// numbers are little-endian IEEE f64; per replication the x block
// precedes the y block.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k)
        out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

inline void put_f64(std::string& out, double d) {
    const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
    for (int k = 0; k < 8; ++k)
        out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

class ByteReader {
public:
    ByteReader(std::string data, std::string path)
        : data_(std::move(data)), path_(std::move(path)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k)
            v |= static_cast<std::uint32_t>(
                     static_cast<unsigned char>(data_[pos_ + k]))
                 << (8 * k);
        pos_ += 4;
        return v;
    }

    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k)
            v |= static_cast<std::uint64_t>(
                     static_cast<unsigned char>(data_[pos_ + k]))
                 << (8 * k);
        pos_ += 8;
        return std::bit_cast<double>(v);
    }

    std::string magic() {
        need(4);
        std::string m = data_.substr(pos_, 4);
        pos_ += 4;
        return m;
    }

    bool exhausted() const { return pos_ == data_.size(); }

private:
    void need(std::size_t k) const {
        if (pos_ + k > data_.size())
            throw data_error("truncated dump: " + path_);
    }

    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return data;
}

inline void spill(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw data_error("write failed: " + path);
}

inline void append_sample(std::string& bytes, const PairedSample& sample,
                          std::size_t len) {
    for (std::size_t i = 0; i < sample.n(); ++i) {
        if (sample.x[i].size() != len || sample.y[i].size() != len)
            throw config_error("replication " + std::to_string(i) +
                               " does not match the field length");
        for (double v : sample.x[i].values) put_f64(bytes, v);
        for (double v : sample.y[i].values) put_f64(bytes, v);
    }
}

}  // namespace detail

struct PairedDump {
    bool lattice = false;
    LatticeSpec lat;
    LocationSet locations;
    PairedSample sample;
};

inline void write_paired_lattice(const std::string& path,
                                 const LatticeSpec& lat,
                                 const PairedSample& sample) {
    lat.validate();
    sample.validate();
    std::string bytes = "RFL1";
    detail::put_u32(bytes, static_cast<std::uint32_t>(lat.d));
    detail::put_u32(bytes, static_cast<std::uint32_t>(lat.q));
    detail::put_u32(bytes, static_cast<std::uint32_t>(sample.n()));
    detail::append_sample(bytes, sample, lat.site_count());
    detail::spill(path, bytes);
}

inline void write_paired_points(const std::string& path,
                                const LocationSet& locations,
                                const PairedSample& sample) {
    locations.validate();
    sample.validate();
    std::string bytes = "RFR1";
    detail::put_u32(bytes, static_cast<std::uint32_t>(locations.dim()));
    detail::put_u32(bytes, static_cast<std::uint32_t>(locations.count()));
    detail::put_u32(bytes, static_cast<std::uint32_t>(sample.n()));
    for (const auto& pt : locations.points)
        for (double c : pt) detail::put_f64(bytes, c);
    detail::append_sample(bytes, sample, locations.count());
    detail::spill(path, bytes);
}

inline PairedDump read_paired(const std::string& path) {
    detail::ByteReader r(detail::slurp(path), path);
    const std::string magic = r.magic();
    PairedDump out;
    if (magic == "RFL1") {
        out.lattice = true;
        out.lat.d = static_cast<int>(r.u32());
        out.lat.q = static_cast<int>(r.u32());
        out.lat.validate();
        const std::uint32_t n = r.u32();
        const std::size_t p = out.lat.site_count();
        out.sample.x.resize(n);
        out.sample.y.resize(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            out.sample.x[i].values.resize(p);
            out.sample.y[i].values.resize(p);
            for (std::size_t k = 0; k < p; ++k)
                out.sample.x[i].values[k] = r.f64();
            for (std::size_t k = 0; k < p; ++k)
                out.sample.y[i].values[k] = r.f64();
        }
    } else if (magic == "RFR1") {
        out.lattice = false;
        const std::uint32_t d = r.u32();
        const std::uint32_t np = r.u32();
        const std::uint32_t n = r.u32();
        out.locations.points.assign(np, std::vector<double>(d));
        for (auto& pt : out.locations.points)
            for (auto& c : pt) c = r.f64();
        out.locations.intensity = static_cast<double>(np);
        out.sample.x.resize(n);
        out.sample.y.resize(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            out.sample.x[i].values.resize(np);
            out.sample.y[i].values.resize(np);
            for (std::size_t k = 0; k < np; ++k)
                out.sample.x[i].values[k] = r.f64();
            for (std::size_t k = 0; k < np; ++k)
                out.sample.y[i].values[k] = r.f64();
        }
    } else {
        throw data_error("unrecognized dump magic in " + path);
    }
    if (!r.exhausted()) throw data_error("trailing bytes in " + path);
    return out;
}

}  // namespace fieldcov
