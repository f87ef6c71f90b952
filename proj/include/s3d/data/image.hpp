#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "s3d/error.hpp"

namespace s3d {

/// Row-major interleaved image, values in [0,1]; c is 3 (PPM) or 1 (PGM).
struct Image {
    std::int64_t h = 0;
    std::int64_t w = 0;
    std::int64_t c = 0;
    std::vector<float> pix;

    Image() = default;
    Image(std::int64_t h_, std::int64_t w_, std::int64_t c_)
        : h(h_), w(w_), c(c_), pix(static_cast<std::size_t>(h_ * w_ * c_), 0.0f) {}

    float& at(std::int64_t y, std::int64_t x, std::int64_t ch) {
        return pix[static_cast<std::size_t>((y * w + x) * c + ch)];
    }
    float at(std::int64_t y, std::int64_t x, std::int64_t ch) const {
        return pix[static_cast<std::size_t>((y * w + x) * c + ch)];
    }
};

namespace detail {

// Reads the next header token, skipping whitespace and '#' comments.
inline std::string pnm_token(std::istream& in, const std::string& path) {
    std::string tok;
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    while (ch != EOF && !std::isspace(ch)) {
        tok.push_back(static_cast<char>(ch));
        ch = in.get();
    }
    if (tok.empty()) throw FormatError(path + ": truncated netpbm header");
    return tok;
}

inline std::int64_t pnm_int(std::istream& in, const std::string& path) {
    const std::string tok = pnm_token(in, path);
    try {
        std::size_t used = 0;
        const long long v = std::stoll(tok, &used);
        if (used != tok.size() || v <= 0) throw FormatError("");
        return v;
    } catch (...) {
        throw FormatError(path + ": bad netpbm header field '" + tok + "'");
    }
}

} // namespace detail

/// Decodes binary PPM (P6, 3 channels) or binary PGM (P5, 1 channel) with
/// maxval 255; pixel p maps to p/255.
inline Image decode_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open");
    const std::string magic = detail::pnm_token(in, path);
    std::int64_t channels = 0;
    if (magic == "P6") channels = 3;
    else if (magic == "P5") channels = 1;
    else throw FormatError(path + ": unsupported magic '" + magic + "' (want P6 or P5)");
    const std::int64_t w = detail::pnm_int(in, path);
    const std::int64_t h = detail::pnm_int(in, path);
    const std::int64_t maxval = detail::pnm_int(in, path);
    if (maxval != 255) throw FormatError(path + ": maxval must be 255, got " + std::to_string(maxval));
    // The header ends with exactly one whitespace byte before the payload;
    // pnm_int already consumed it as the token terminator.

    Image img(h, w, channels);
    const std::size_t bytes = static_cast<std::size_t>(h * w * channels);
    std::vector<unsigned char> raw(bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes)
        throw FormatError(path + ": truncated payload");
    for (std::size_t i = 0; i < bytes; ++i)
        img.pix[i] = static_cast<float>(raw[i]) / 255.0f;
    return img;
}

/// Writes a single-channel map as binary PGM (P5, maxval 255), rounding
/// clamp(v, 0, 1) * 255 to the nearest integer.
inline void encode_pgm(const Image& img, const std::string& path) {
    if (img.c != 1) throw ShapeError("encode_pgm: expected a single-channel map");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << "P5\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> raw(img.pix.size());
    for (std::size_t i = 0; i < img.pix.size(); ++i) {
        float v = img.pix[i];
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError(path + ": write failed");
}

/// Half-pixel-center bilinear resize, edge-clamped:
/// src = (dst + 0.5) * (in/out) - 0.5. Same-size resize is the identity.
inline Image resize_bilinear(const Image& img, std::int64_t out_h, std::int64_t out_w) {
    if (out_h < 1 || out_w < 1) throw ShapeError("resize_bilinear: output extents must be >= 1");
    if (out_h == img.h && out_w == img.w) return img;
    Image out(out_h, out_w, img.c);
    const double sy = static_cast<double>(img.h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(img.w) / static_cast<double>(out_w);
    for (std::int64_t y = 0; y < out_h; ++y) {
        double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        fy = std::min(std::max(fy, 0.0), static_cast<double>(img.h - 1));
        const std::int64_t y0 = static_cast<std::int64_t>(std::floor(fy));
        const std::int64_t y1 = std::min(y0 + 1, img.h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::int64_t x = 0; x < out_w; ++x) {
            double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            fx = std::min(std::max(fx, 0.0), static_cast<double>(img.w - 1));
            const std::int64_t x0 = static_cast<std::int64_t>(std::floor(fx));
            const std::int64_t x1 = std::min(x0 + 1, img.w - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::int64_t ch = 0; ch < img.c; ++ch) {
                const double top = (1.0 - wx) * img.at(y0, x0, ch) + wx * img.at(y0, x1, ch);
                const double bot = (1.0 - wx) * img.at(y1, x0, ch) + wx * img.at(y1, x1, ch);
                out.at(y, x, ch) = static_cast<float>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return out;
}

} // namespace s3d
