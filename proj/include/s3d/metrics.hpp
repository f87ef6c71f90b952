#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "s3d/error.hpp"

namespace s3d {

/// Pearson linear correlation over flattened pixels, population statistics.
/// Undefined (nullopt) when either input is constant.
inline std::optional<double> plcc(std::span<const float> s, std::span<const float> g) {
    if (s.size() != g.size()) throw ShapeError("plcc: size mismatch");
    if (s.size() < 2) throw ShapeError("plcc: need at least 2 pixels");
    const double n = static_cast<double>(s.size());
    double ms = 0.0, mg = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        ms += s[i];
        mg += g[i];
    }
    ms /= n;
    mg /= n;
    double cov = 0.0, vs = 0.0, vg = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double ds = s[i] - ms;
        const double dg = g[i] - mg;
        cov += ds * dg;
        vs += ds * ds;
        vg += dg * dg;
    }
    if (vs == 0.0 || vg == 0.0) return std::nullopt;
    return (cov / n) / (std::sqrt(vs / n) * std::sqrt(vg / n));
}

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

/// (threshold, fpr, tpr) triples at t_i = i/256, i = 256..0, i.e. sorted by
/// descending threshold so fpr and tpr are non-decreasing down the list.
struct RocCurve {
    std::vector<RocPoint> points;
};

inline constexpr int kRocThresholds = 257;

/// Threshold sweep: M = [s >= t], FPR = |M and not-G| / |not-G|,
/// TPR = |M and G| / |G|. AUC integrates the FPR-sorted curve by trapezoid
/// with endpoints (0,0) and (1,1) appended. AUC is undefined unless G has at
/// least one positive and one negative pixel (the curve is still emitted).
inline std::pair<RocCurve, std::optional<double>> roc_and_auc(std::span<const float> s,
                                                              std::span<const std::uint8_t> g) {
    if (s.size() != g.size()) throw ShapeError("roc_and_auc: size mismatch");
    std::int64_t pos = 0;
    for (std::size_t i = 0; i < g.size(); ++i) pos += g[i] ? 1 : 0;
    const std::int64_t neg = static_cast<std::int64_t>(g.size()) - pos;

    // Cumulative histogram: bucket b counts pixels with b = floor(s*256)
    // clamped to [0,256]; then #(s >= i/256) = sum of buckets >= i, exact for
    // s in [0,1] because s >= i/256 <=> floor(s*256) >= i.
    std::vector<std::int64_t> pos_at(kRocThresholds, 0), neg_at(kRocThresholds, 0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double v = static_cast<double>(s[i]);
        std::int64_t b = static_cast<std::int64_t>(std::floor(v * 256.0));
        b = std::clamp<std::int64_t>(b, 0, 256);
        (g[i] ? pos_at : neg_at)[static_cast<std::size_t>(b)] += 1;
    }
    RocCurve curve;
    curve.points.reserve(kRocThresholds);
    std::int64_t tp = 0, fp = 0;
    std::vector<RocPoint> asc; // ascending threshold while accumulating
    asc.reserve(kRocThresholds);
    for (int i = 256; i >= 0; --i) {
        tp += pos_at[static_cast<std::size_t>(i)];
        fp += neg_at[static_cast<std::size_t>(i)];
        asc.push_back({static_cast<double>(i) / 256.0,
                       neg > 0 ? static_cast<double>(fp) / static_cast<double>(neg) : 0.0,
                       pos > 0 ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0});
    }
    curve.points.assign(asc.begin(), asc.end()); // already descending in threshold

    if (pos == 0 || neg == 0) return {std::move(curve), std::nullopt};

    std::vector<std::pair<double, double>> pts;
    pts.reserve(kRocThresholds + 2);
    pts.emplace_back(0.0, 0.0);
    pts.emplace_back(1.0, 1.0);
    for (const auto& p : curve.points) pts.emplace_back(p.fpr, p.tpr);
    std::sort(pts.begin(), pts.end());
    double auc = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        auc += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) * 0.5;
    return {std::move(curve), auc};
}

/// Mean response at ground-truth-positive locations of the saliency map
/// normalized to zero mean and unit (population) standard deviation.
/// Undefined when the map is constant or G has no positive pixel.
inline std::optional<double> nss(std::span<const float> s, std::span<const std::uint8_t> g) {
    if (s.size() != g.size()) throw ShapeError("nss: size mismatch");
    if (s.empty()) throw ShapeError("nss: empty input");
    const double n = static_cast<double>(s.size());
    double mu = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) mu += s[i];
    mu /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double d = s[i] - mu;
        var += d * d;
    }
    var /= n;
    if (var == 0.0) return std::nullopt;
    const double sigma = std::sqrt(var);
    double acc = 0.0;
    std::int64_t pos = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (g[i]) {
            acc += (s[i] - mu) / sigma;
            pos += 1;
        }
    }
    if (pos == 0) return std::nullopt;
    return acc / static_cast<double>(pos);
}

enum class DegenerateFlag : unsigned {
    constant_saliency = 1u << 0,
    constant_gt = 1u << 1,
    empty_gt = 1u << 2,
    full_gt = 1u << 3,
};

inline unsigned operator|(DegenerateFlag a, DegenerateFlag b) {
    return static_cast<unsigned>(a) | static_cast<unsigned>(b);
}

struct FrameScore {
    std::optional<double> plcc;
    std::optional<double> auc;
    std::optional<double> nss;
    unsigned flags = 0;

    bool has(DegenerateFlag f) const { return (flags & static_cast<unsigned>(f)) != 0; }
};

inline std::string flags_to_string(unsigned flags) {
    std::string out;
    auto append = [&](unsigned bit, const char* name) {
        if (flags & bit) {
            if (!out.empty()) out += '|';
            out += name;
        }
    };
    append(static_cast<unsigned>(DegenerateFlag::constant_saliency), "constant_saliency");
    append(static_cast<unsigned>(DegenerateFlag::constant_gt), "constant_gt");
    append(static_cast<unsigned>(DegenerateFlag::empty_gt), "empty_gt");
    append(static_cast<unsigned>(DegenerateFlag::full_gt), "full_gt");
    return out;
}

/// All three metrics for one frame. `mask` is the binarized ground truth;
/// PLCC correlates against the mask as a 0/1-valued map.
inline FrameScore score_frame(std::span<const float> s, std::span<const std::uint8_t> mask) {
    if (s.size() != mask.size()) throw ShapeError("score_frame: size mismatch");
    FrameScore fs;
    std::int64_t pos = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) pos += mask[i] ? 1 : 0;
    const std::int64_t neg = static_cast<std::int64_t>(mask.size()) - pos;
    bool const_s = true;
    for (std::size_t i = 1; i < s.size() && const_s; ++i) const_s = (s[i] == s[0]);

    if (const_s) fs.flags |= static_cast<unsigned>(DegenerateFlag::constant_saliency);
    if (pos == 0) fs.flags |= DegenerateFlag::empty_gt | DegenerateFlag::constant_gt;
    if (neg == 0) fs.flags |= DegenerateFlag::full_gt | DegenerateFlag::constant_gt;

    std::vector<float> g01(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) g01[i] = mask[i] ? 1.0f : 0.0f;
    fs.plcc = plcc(s, g01);
    fs.auc = roc_and_auc(s, mask).second;
    fs.nss = nss(s, mask);
    return fs;
}

struct FrameRecord {
    std::string sequence;
    std::string frame_id;
    FrameScore score;
};

struct LevelScore {
    std::string id;
    std::optional<double> plcc;
    std::optional<double> auc;
    std::optional<double> nss;
    std::int64_t frames = 0;           // frames contributing to this level
    std::int64_t undefined_plcc = 0;   // excluded per metric
    std::int64_t undefined_auc = 0;
    std::int64_t undefined_nss = 0;
};

/// Frame scores, per-sequence means over defined frames, and the
/// dataset-level unweighted mean of sequence means.
struct MetricReport {
    std::vector<FrameRecord> frames;
    std::vector<LevelScore> sequences;
    LevelScore dataset;
};

namespace detail {

inline std::optional<double> mean_defined(const std::vector<double>& xs) {
    if (xs.empty()) return std::nullopt;
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc / static_cast<double>(xs.size());
}

} // namespace detail

/// Sequence score = mean over its defined frames; dataset score = unweighted
/// mean over sequences with a defined score. Undefined frames are excluded
/// and counted, never folded in as zeros.
inline MetricReport aggregate(const std::vector<FrameRecord>& frames) {
    MetricReport rep;
    rep.frames = frames;

    std::vector<std::string> seq_order;
    for (const auto& f : frames)
        if (std::find(seq_order.begin(), seq_order.end(), f.sequence) == seq_order.end())
            seq_order.push_back(f.sequence);

    std::vector<double> ds_plcc, ds_auc, ds_nss;
    for (const auto& seq : seq_order) {
        LevelScore ls;
        ls.id = seq;
        std::vector<double> p, a, n;
        for (const auto& f : frames) {
            if (f.sequence != seq) continue;
            ls.frames += 1;
            if (f.score.plcc) p.push_back(*f.score.plcc); else ls.undefined_plcc += 1;
            if (f.score.auc) a.push_back(*f.score.auc); else ls.undefined_auc += 1;
            if (f.score.nss) n.push_back(*f.score.nss); else ls.undefined_nss += 1;
        }
        ls.plcc = detail::mean_defined(p);
        ls.auc = detail::mean_defined(a);
        ls.nss = detail::mean_defined(n);
        if (ls.plcc) ds_plcc.push_back(*ls.plcc);
        if (ls.auc) ds_auc.push_back(*ls.auc);
        if (ls.nss) ds_nss.push_back(*ls.nss);
        rep.sequences.push_back(std::move(ls));
    }
    rep.dataset.id = "dataset";
    rep.dataset.frames = static_cast<std::int64_t>(frames.size());
    rep.dataset.plcc = detail::mean_defined(ds_plcc);
    rep.dataset.auc = detail::mean_defined(ds_auc);
    rep.dataset.nss = detail::mean_defined(ds_nss);
    for (const auto& s : rep.sequences) {
        rep.dataset.undefined_plcc += s.undefined_plcc;
        rep.dataset.undefined_auc += s.undefined_auc;
        rep.dataset.undefined_nss += s.undefined_nss;
    }
    return rep;
}

/// Pointwise mean of several curves sharing the standard threshold grid.
inline RocCurve mean_roc(const std::vector<RocCurve>& curves) {
    if (curves.empty()) throw ShapeError("mean_roc: no curves");
    RocCurve out;
    out.points.resize(curves[0].points.size());
    for (std::size_t i = 0; i < out.points.size(); ++i) {
        double fpr = 0.0, tpr = 0.0;
        for (const auto& c : curves) {
            if (c.points.size() != out.points.size())
                throw ShapeError("mean_roc: curves disagree in length");
            fpr += c.points[i].fpr;
            tpr += c.points[i].tpr;
        }
        out.points[i] = {curves[0].points[i].threshold,
                         fpr / static_cast<double>(curves.size()),
                         tpr / static_cast<double>(curves.size())};
    }
    return out;
}

/// CSV with header `threshold,fpr,tpr`, one row per threshold, 6 decimal
/// places, descending threshold.
inline void write_roc_csv(std::ostream& os, const RocCurve& curve) {
    os << "threshold,fpr,tpr\n";
    os << std::fixed << std::setprecision(6);
    for (const auto& p : curve.points)
        os << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
    os.unsetf(std::ios_base::floatfield);
}

} // namespace s3d
