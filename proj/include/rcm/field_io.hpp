// Field serialization: small fixed header (dim, side, boundary, law, seed)
// followed by the edge table in index order. Doubles travel as raw IEEE-754
// bit patterns, so a dump/load round trip reproduces the field exactly.
// Little-endian layout, matching every platform this project targets.

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcm/field.hpp"

namespace rcm {

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(os, bits);
}
inline std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline double get_f64(std::istream& is) {
    std::uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

} // namespace detail

inline constexpr char field_magic[4] = {'R', 'C', 'M', 'F'};
inline constexpr std::uint32_t field_format_version = 1;

inline void write_field(const ConductanceField& f, std::ostream& os) {
    const BoxLattice& lat = f.lattice();
    os.write(field_magic, 4);
    detail::put_u32(os, field_format_version);
    detail::put_u32(os, static_cast<std::uint32_t>(lat.dim()));
    detail::put_u32(os, static_cast<std::uint32_t>(lat.side()));
    detail::put_u32(os, lat.boundary() == Boundary::periodic ? 0u : 1u);
    const auto& prov = f.provenance();
    detail::put_u32(os, prov.sampled ? 1u : 0u);
    detail::put_u32(os, static_cast<std::uint32_t>(prov.law.kind));
    detail::put_f64(os, prov.law.a);
    detail::put_f64(os, prov.law.b);
    detail::put_f64(os, prov.law.alpha);
    detail::put_u64(os, prov.seed);
    detail::put_u64(os, static_cast<std::uint64_t>(lat.n_edges()));
    for (std::int64_t e = 0; e < lat.n_edges(); ++e) detail::put_f64(os, f.omega_at(e));
    if (!os) throw std::runtime_error("write_field: stream failure");
}

inline void write_field(const ConductanceField& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_field: cannot open " + path);
    write_field(f, os);
}

inline ConductanceField read_field(std::istream& is) {
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, field_magic, 4) != 0)
        throw std::runtime_error("read_field: bad magic, not a field dump");
    std::uint32_t version = detail::get_u32(is);
    if (version != field_format_version)
        throw std::runtime_error("read_field: unsupported format version " +
                                 std::to_string(version));
    int dim = static_cast<int>(detail::get_u32(is));
    int side = static_cast<int>(detail::get_u32(is));
    Boundary boundary = detail::get_u32(is) == 0 ? Boundary::periodic : Boundary::free_box;
    ConductanceField::Provenance prov;
    prov.sampled = detail::get_u32(is) != 0;
    prov.law.kind = static_cast<ConductanceLaw::Kind>(detail::get_u32(is));
    prov.law.a = detail::get_f64(is);
    prov.law.b = detail::get_f64(is);
    prov.law.alpha = detail::get_f64(is);
    prov.seed = detail::get_u64(is);
    BoxLattice lat(dim, side, boundary);
    std::uint64_t n_edges = detail::get_u64(is);
    if (n_edges != static_cast<std::uint64_t>(lat.n_edges()))
        throw std::runtime_error("read_field: edge count mismatch");
    std::vector<double> omega(n_edges);
    for (std::uint64_t e = 0; e < n_edges; ++e) omega[e] = detail::get_f64(is);
    if (!is) throw std::runtime_error("read_field: truncated stream");
    return ConductanceField(lat, std::move(omega), prov);
}

inline ConductanceField read_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_field: cannot open " + path);
    return read_field(is);
}

} // namespace rcm
