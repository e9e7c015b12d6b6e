#pragma once

// Binary PGM (P5) and PPM (P6) images as per-cell densities.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "uomt/error.hpp"
#include "uomt/grid.hpp"

namespace uomt::netpbm {

/// One time slice with one channel per image plane (grayscale: 1, colour: R, G, B).
/// Cells are row-major from the top-left pixel.
struct DensityImage {
    std::size_t width = 0;
    std::size_t height = 0;
    unsigned maxval = 255;
    CellField field;

    std::size_t channels() const { return field.sites; }
    double total(std::size_t channel) const { return channel_total(field, channel, 0); }
    double total() const { return total_mass(field, 0); }
};

namespace detail {

inline std::string next_token(std::istream& in, const std::string& what) {
    std::string tok;
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n' && ch != '\r') ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    while (ch != EOF && !std::isspace(ch) && ch != '#') {
        tok.push_back(static_cast<char>(ch));
        ch = in.get();
    }
    if (tok.empty()) throw InputError("netpbm: truncated header, missing " + what);
    if (ch == '#') in.unget();
    // The single whitespace after maxval has been consumed by the loop above.
    return tok;
}

inline std::size_t parse_header_number(const std::string& tok, const std::string& what) {
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); }))
        throw InputError("netpbm: malformed " + what + " '" + tok + "'");
    try {
        return static_cast<std::size_t>(std::stoull(tok));
    } catch (...) {
        throw InputError("netpbm: malformed " + what + " '" + tok + "'");
    }
}

} // namespace detail

inline DensityImage read_density_image(std::istream& in, const std::string& name = "<stream>") {
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (!in || magic[0] != 'P') throw InputError("netpbm: " + name + " is not a netpbm file");
    std::size_t planes = 0;
    if (magic[1] == '5')
        planes = 1;
    else if (magic[1] == '6')
        planes = 3;
    else
        throw InputError("netpbm: " + name + " has unsupported format P" + std::string(1, magic[1]) +
                         " (only binary P5 and P6 are read)");

    DensityImage img;
    img.width = detail::parse_header_number(detail::next_token(in, "width"), "width");
    img.height = detail::parse_header_number(detail::next_token(in, "height"), "height");
    const std::size_t maxval = detail::parse_header_number(detail::next_token(in, "maxval"), "maxval");
    if (img.width == 0 || img.height == 0) throw InputError("netpbm: " + name + " has zero size");
    if (maxval != 255 && maxval != 65535)
        throw InputError("netpbm: " + name + " has maxval " + std::to_string(maxval) + " (expected 255 or 65535)");
    img.maxval = static_cast<unsigned>(maxval);

    const std::size_t bytes_per = maxval == 255 ? 1 : 2;
    const std::size_t cells = img.width * img.height;
    std::vector<unsigned char> raw(cells * planes * bytes_per);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw InputError("netpbm: " + name + " pixel data is truncated");

    img.field = CellField(1, cells, planes);
    const double scale = static_cast<double>(maxval);
    for (std::size_t cell = 0; cell < cells; ++cell)
        for (std::size_t c = 0; c < planes; ++c) {
            const std::size_t at = (cell * planes + c) * bytes_per;
            const unsigned v = bytes_per == 1 ? raw[at] : (static_cast<unsigned>(raw[at]) << 8) | raw[at + 1];
            img.field(c, cell, 0) = static_cast<double>(v) / scale;
        }
    return img;
}

inline DensityImage read_density_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("netpbm: cannot open " + path.string());
    return read_density_image(in, path.string());
}

// ---------------------------------------------------------------------------

enum class Normalization { fixed_scale, per_frame };

inline Normalization parse_normalization(const std::string& s) {
    if (s == "fixed_scale") return Normalization::fixed_scale;
    if (s == "per_frame") return Normalization::per_frame;
    throw InputError("unknown normalization '" + s + "' (expected fixed_scale or per_frame)");
}

inline const char* to_string(Normalization n) { return n == Normalization::fixed_scale ? "fixed_scale" : "per_frame"; }

/// Maps value/scale in [0, 1] to an integer in [0, maxval]; zero scale maps everything to 0.
inline unsigned quantize(double value, double scale, unsigned maxval = 255) {
    if (!(scale > 0.0)) return 0;
    const double x = std::clamp(value / scale, 0.0, 1.0);
    return static_cast<unsigned>(std::lround(x * maxval));
}

inline void write_header(std::ostream& out, const char* magic, std::size_t w, std::size_t h, unsigned maxval) {
    out << magic << '\n' << w << ' ' << h << '\n' << maxval << '\n';
}

inline void put_sample(std::ostream& out, unsigned v, unsigned maxval) {
    if (maxval > 255) out.put(static_cast<char>((v >> 8) & 0xff));
    out.put(static_cast<char>(v & 0xff));
}

inline void open_for_writing(std::ofstream& out, const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    out.open(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("write: cannot open " + path.string() + " for writing");
}

/// Grayscale P5 of values / scale.
inline void write_pgm(const std::filesystem::path& path, std::span<const double> values, std::size_t width,
                      std::size_t height, double scale, unsigned maxval = 255) {
    if (values.size() != width * height) throw DimensionError("write: frame size does not match the image");
    std::ofstream out;
    open_for_writing(out, path);
    write_header(out, "P5", width, height, maxval);
    for (double v : values) put_sample(out, quantize(v, scale, maxval), maxval);
    if (!out) throw Error("write: failed writing " + path.string());
}

/// Colour P6 from up to three planes (missing planes are black).
inline void write_ppm(const std::filesystem::path& path, const std::vector<std::span<const double>>& planes,
                      std::size_t width, std::size_t height, double scale, unsigned maxval = 255) {
    for (const auto& p : planes)
        if (p.size() != width * height) throw DimensionError("write: frame size does not match the image");
    std::ofstream out;
    open_for_writing(out, path);
    write_header(out, "P6", width, height, maxval);
    for (std::size_t n = 0; n < width * height; ++n)
        for (std::size_t c = 0; c < 3; ++c)
            put_sample(out, c < planes.size() ? quantize(planes[c][n], scale, maxval) : 0u, maxval);
    if (!out) throw Error("write: failed writing " + path.string());
}

/// Writes one channel of a single-slice field. Negative values are an error.
inline void write_frame(const CellField& frame, std::size_t channel, std::size_t width, std::size_t height,
                        const std::filesystem::path& path, double scale) {
    if (frame.times != 1 || frame.cells != width * height || channel >= frame.sites)
        throw DimensionError("write_frame: field does not match the image");
    auto line = std::span<const double>(frame.values).subspan(channel * frame.cells, frame.cells);
    for (double v : line)
        if (v < 0.0) throw InputError("write_frame: negative density in " + path.string());
    write_pgm(path, line, width, height, scale);
}

/// Largest value of a set of frames over the given channels.
inline double max_over(const std::vector<CellField>& frames, std::size_t first_channel, std::size_t count) {
    double m = 0.0;
    for (const auto& f : frames)
        for (std::size_t c = first_channel; c < first_channel + count && c < f.sites; ++c)
            for (std::size_t cell = 0; cell < f.cells; ++cell) m = std::max(m, f(c, cell, 0));
    return m;
}

} // namespace uomt::netpbm
