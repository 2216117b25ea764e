#ifndef NSLET_FIELD_IO_HPP
#define NSLET_FIELD_IO_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "field.hpp"
#include "flux.hpp"

// Field files are a CSV body (header x1,x2,x3,u1,u2,u3, rows in x3-fastest
// node order, 17 significant digits) plus a <path>.meta.json sidecar with the
// grid geometry. %.17g round-trips doubles exactly, so write-then-read is
// bit-identical. The divergence label is not stored; the loader re-measures
// it from the data.

namespace nslet {

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using json = nlohmann::ordered_json;

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw io_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw io_error("read failed: " + path);
    return ss.str();
}

inline void emit_field(const SampledField& f, const std::string& path) {
    std::ostringstream body;
    body << "x1,x2,x3,u1,u2,u3\n";
    for (int i = 0; i < f.dims[0]; ++i)
        for (int j = 0; j < f.dims[1]; ++j)
            for (int k = 0; k < f.dims[2]; ++k) {
                const Vec3 x = f.node(i, j, k);
                const Vec3& u = f.values[f.index(i, j, k)];
                body << format_g17(x[0]) << ',' << format_g17(x[1]) << ',' << format_g17(x[2])
                     << ',' << format_g17(u[0]) << ',' << format_g17(u[1]) << ','
                     << format_g17(u[2]) << '\n';
            }
    write_text_file(path, body.str());

    json meta;
    meta["origin"] = {f.origin[0], f.origin[1], f.origin[2]};
    meta["spacing"] = f.spacing;
    meta["dims"] = {f.dims[0], f.dims[1], f.dims[2]};
    meta["time"] = f.time;
    meta["nu"] = f.nu;
    meta["kernel_order"] = f.kernel_order;
    write_text_file(path + ".meta.json", meta.dump(2) + "\n");
}

inline SampledField load_field(const std::string& path) {
    json meta;
    try {
        meta = json::parse(read_text_file(path + ".meta.json"));
    } catch (const json::exception& e) {
        throw validation_error(path + ".meta.json: " + e.what());
    }
    const std::array<std::string, 6> keys = {"origin", "spacing", "dims",
                                             "time",   "nu",      "kernel_order"};
    for (const auto& k : keys)
        if (!meta.contains(k)) throw validation_error(path + ".meta.json: missing key " + k);
    for (const auto& [key, value] : meta.items())
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw validation_error(path + ".meta.json: unknown key " + key);
    Vec3 origin;
    std::array<int, 3> dims{};
    try {
        for (int d = 0; d < 3; ++d) {
            origin[d] = meta["origin"].at(d).get<double>();
            dims[d] = meta["dims"].at(d).get<int>();
        }
    } catch (const json::exception& e) {
        throw validation_error(path + ".meta.json: " + e.what());
    }
    const double spacing = meta["spacing"].get<double>();

    SampledField f = make_grid(origin, spacing, dims); // validates spacing and dims
    f.time = meta["time"].get<double>();
    f.nu = meta["nu"].get<double>();
    f.kernel_order = meta["kernel_order"].get<int>();

    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line)) throw validation_error(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x1,x2,x3,u1,u2,u3")
        throw validation_error(path + ": bad header, want x1,x2,x3,u1,u2,u3");
    std::size_t row = 0;
    const std::size_t want = f.size();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (row >= want) throw validation_error(path + ": more rows than dims allow");
        double v[6];
        const char* s = line.c_str();
        for (int c = 0; c < 6; ++c) {
            char* end = nullptr;
            v[c] = std::strtod(s, &end);
            if (end == s) throw validation_error(path + ": bad number in data row");
            s = end;
            if (c < 5) {
                if (*s != ',') throw validation_error(path + ": expected 6 comma-separated columns");
                ++s;
            }
        }
        if (*s != '\0' && *s != '\r')
            throw validation_error(path + ": trailing characters in data row");
        // x3-fastest order: recover (i,j,k) from the row index and cross-check
        const int k = static_cast<int>(row % f.dims[2]);
        const int j = static_cast<int>((row / f.dims[2]) % f.dims[1]);
        const int i = static_cast<int>(row / (static_cast<std::size_t>(f.dims[1]) * f.dims[2]));
        const Vec3 node = f.node(i, j, k);
        for (int d = 0; d < 3; ++d)
            if (std::abs(v[d] - node[d]) > 1e-9 * f.spacing)
                throw validation_error(path + ": row coordinates do not match the grid");
        f.values[row] = {v[3], v[4], v[5]};
        ++row;
    }
    if (row != want) throw validation_error(path + ": row count does not match dims");
    f.divergence_free = max_discrete_divergence(f) <= 1e-6 * max_abs(f) / f.spacing;
    return f;
}

inline json mat3_json(const Mat3& m) {
    json rows = json::array();
    for (int k = 0; k < 3; ++k) rows.push_back({m[k][0], m[k][1], m[k][2]});
    return rows;
}

inline json flux_report_json(const FluxReport& r) {
    json j;
    j["matrix"] = mat3_json(r.matrix);
    j["atom_part"] = mat3_json(r.atom_part);
    j["smooth_part"] = mat3_json(r.smooth_part);
    j["orders"] = {{"spatial", r.orders.spatial}, {"time", r.orders.time}, {"pole", r.orders.pole}};
    j["estimated_error"] = r.estimated_error;
    return j;
}

} // namespace nslet

#endif
