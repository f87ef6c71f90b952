#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "s3d/data/image.hpp"
#include "s3d/data/manifest.hpp"
#include "s3d/tensor.hpp"

namespace s3d {

/// One decoded training sample: frames (1,3,H,W,3) and the center frame's
/// ground truth (1,1,H,W,1), both in [0,1].
struct TripleSample {
    Tensor5f frames;
    Tensor5f gt;
    std::string seq;
    std::int64_t frame_index = 0;
};

/// Stacked batch of triples.
struct Batch {
    Tensor5f frames; // (k, 3, H, W, 3)
    Tensor5f gts;    // (k, 1, H, W, 1)
};

namespace detail {

inline Image load_frame(const std::string& path, const std::string& center,
                        bool clamp_boundaries) {
    if (clamp_boundaries && path != center && !std::filesystem::exists(path))
        return decode_ppm(center); // duplicated edge neighbor
    try {
        return decode_ppm(path);
    } catch (const FormatError&) {
        throw;
    } catch (const IoError& e) {
        throw IoError(std::string(e.what()) + " (frame referenced by manifest)");
    }
}

} // namespace detail

/// Decodes and resizes one manifest entry. Frames must be 3-channel PPM, the
/// ground truth a single-channel PGM. With clamp_boundaries, a missing
/// prev/next file falls back to the center frame. Prediction passes
/// need_gt=false and skips the ground-truth decode.
inline TripleSample load_triple(const ManifestEntry& entry, std::int64_t input_h,
                                std::int64_t input_w, bool clamp_boundaries,
                                bool need_gt = true) {
    TripleSample s;
    s.seq = entry.seq;
    s.frames = Tensor5f(Shape5{1, 3, input_h, input_w, 3});
    for (int f = 0; f < 3; ++f) {
        Image img = detail::load_frame(entry.frames[static_cast<std::size_t>(f)],
                                       entry.frames[1], clamp_boundaries);
        if (img.c != 3)
            throw FormatError(entry.frames[static_cast<std::size_t>(f)] +
                              ": frames must be 3-channel PPM (P6)");
        img = resize_bilinear(img, input_h, input_w);
        for (std::int64_t y = 0; y < input_h; ++y)
            for (std::int64_t x = 0; x < input_w; ++x)
                for (std::int64_t ch = 0; ch < 3; ++ch)
                    s.frames.at(0, f, y, x, ch) = img.at(y, x, ch);
    }
    if (need_gt) {
        Image gt = decode_ppm(entry.gt);
        if (gt.c != 1)
            throw FormatError(entry.gt + ": ground truth must be single-channel PGM (P5)");
        gt = resize_bilinear(gt, input_h, input_w);
        s.gt = Tensor5f(Shape5{1, 1, input_h, input_w, 1});
        for (std::int64_t y = 0; y < input_h; ++y)
            for (std::int64_t x = 0; x < input_w; ++x)
                s.gt.at(0, 0, y, x, 0) = gt.at(y, x, 0);
    }
    return s;
}

/// Decodes, resizes and stacks a list of entries along the batch axis.
inline Batch make_batch(const std::vector<ManifestEntry>& entries, std::int64_t input_h,
                        std::int64_t input_w, bool clamp_boundaries) {
    if (entries.empty()) throw ShapeError("make_batch: empty entry list");
    const std::int64_t k = static_cast<std::int64_t>(entries.size());
    Batch b{Tensor5f(Shape5{k, 3, input_h, input_w, 3}),
            Tensor5f(Shape5{k, 1, input_h, input_w, 1})};
    const std::int64_t frame_elems = 3 * input_h * input_w * 3;
    const std::int64_t gt_elems = input_h * input_w;
    for (std::int64_t i = 0; i < k; ++i) {
        const TripleSample s =
            load_triple(entries[static_cast<std::size_t>(i)], input_h, input_w, clamp_boundaries);
        std::copy(s.frames.data(), s.frames.data() + frame_elems,
                  b.frames.data() + i * frame_elems);
        std::copy(s.gt.data(), s.gt.data() + gt_elems, b.gts.data() + i * gt_elems);
    }
    return b;
}

} // namespace s3d
