#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "s3d/config.hpp"
#include "s3d/data/batch.hpp"
#include "s3d/data/synth.hpp"
#include "s3d/gradcheck.hpp"
#include "s3d/metrics.hpp"
#include "s3d/net.hpp"
#include "s3d/optim.hpp"
#include "s3d/persist.hpp"

namespace s3d {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1; // gradcheck failure / internal error
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitCheckpoint = 4;

namespace detail {

template <typename Fn>
int run_guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CheckpointError& e) {
        err << "checkpoint error: " << e.what() << "\n";
        return kExitCheckpoint;
    } catch (const FormatError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const IoError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

inline std::string frame_stem(const std::string& seq, std::int64_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%04lld", static_cast<long long>(index));
    return seq + buf;
}

// Per-sequence frame index in manifest order, one per entry.
inline std::vector<std::int64_t> frame_indices(const std::vector<ManifestEntry>& entries) {
    std::map<std::string, std::int64_t> counters;
    std::vector<std::int64_t> idx;
    idx.reserve(entries.size());
    for (const auto& e : entries) idx.push_back(counters[e.seq]++);
    return idx;
}

} // namespace detail

/// Seeded mini-batch training: forward (train), squared-error loss, backward,
/// Adam. Emits one `step,loss` CSV row per step on `log`; checkpoints every
/// checkpoint_every steps and at exit.
inline int cmd_train(const RunConfig& cfg, std::ostream& log = std::cout,
                     std::ostream& err = std::cerr) {
    return detail::run_guarded(err, [&]() -> int {
        if (cfg.manifest.empty()) throw ConfigError("train requires a manifest path");
        const std::vector<ManifestEntry> entries = load_manifest(cfg.manifest);
        if (entries.empty()) throw FormatError(cfg.manifest + ": manifest has no entries");

        const ArchPreset preset = preset_by_name(cfg.preset);
        ModelParams<float> params = init_params<float>(preset, cfg.seed);
        auto views = flat_param_views(params);
        AdamState<float> adam = make_adam_state<float>(
            views, static_cast<float>(cfg.learning_rate), static_cast<float>(cfg.beta1),
            static_cast<float>(cfg.beta2), static_cast<float>(cfg.epsilon));

        std::error_code ec;
        std::filesystem::create_directories(cfg.checkpoint_dir, ec);
        if (ec) throw IoError(cfg.checkpoint_dir + ": cannot create checkpoint directory");

        auto save_at = [&](const std::string& tag) {
            save_model(cfg.checkpoint_dir + "/ckpt_" + tag + ".s3dn", params, &adam);
        };

        std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        std::vector<std::size_t> order(entries.size());
        std::iota(order.begin(), order.end(), 0);

        std::int64_t step = 0;
        while (step < cfg.max_steps) {
            if (cfg.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);
            for (std::size_t pos = 0; pos < order.size() && step < cfg.max_steps;
                 pos += static_cast<std::size_t>(cfg.batch_size)) {
                std::vector<ManifestEntry> chunk;
                for (std::size_t i = pos;
                     i < order.size() && i < pos + static_cast<std::size_t>(cfg.batch_size); ++i)
                    chunk.push_back(entries[order[i]]);
                Batch batch = make_batch(chunk, cfg.input_h, cfg.input_w, true);

                ForwardResult<float> fr = forward(params, batch.frames, Mode::train);
                LossValue<float> lv = mse_loss(fr.saliency, batch.gts);
                ParamGrads<float> grads = backward(params, fr.trace, lv.grad_s);
                adam_step(params, grads, adam);

                ++step;
                char row[64];
                std::snprintf(row, sizeof row, "%lld,%.9g\n", static_cast<long long>(step),
                              static_cast<double>(lv.loss));
                log << row;
                if (step % cfg.checkpoint_every == 0) {
                    char tag[16];
                    std::snprintf(tag, sizeof tag, "%06lld", static_cast<long long>(step));
                    save_at(tag);
                }
            }
        }
        save_at("final");
        return kExitOk;
    });
}

/// Infer-mode forward per manifest entry; writes `<seq>_<index>.pgm` maps of
/// size input_h x input_w into out_dir.
inline int cmd_predict(const RunConfig& cfg, const std::string& checkpoint,
                       const std::string& manifest, const std::string& out_dir,
                       std::ostream& err = std::cerr) {
    return detail::run_guarded(err, [&]() -> int {
        const ArchPreset preset = preset_by_name(cfg.preset);
        RestoredModel rm = load_model(checkpoint, preset);
        const std::vector<ManifestEntry> entries = load_manifest(manifest);
        const std::vector<std::int64_t> idx = detail::frame_indices(entries);

        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec) throw IoError(out_dir + ": cannot create output directory");

        for (std::size_t i = 0; i < entries.size(); ++i) {
            TripleSample s = load_triple(entries[i], cfg.input_h, cfg.input_w, true, false);
            ForwardResult<float> fr = forward(rm.params, s.frames, Mode::infer);
            Image out(cfg.input_h, cfg.input_w, 1);
            std::copy(fr.saliency.data(), fr.saliency.data() + fr.saliency.size(),
                      out.pix.begin());
            encode_pgm(out, out_dir + "/" + detail::frame_stem(entries[i].seq, idx[i]) + ".pgm");
        }
        return kExitOk;
    });
}

/// Scores one saliency PGM per manifest entry against the (resized,
/// binarized) ground truth and writes the report CSV plus the dataset-mean
/// ROC curve CSV.
inline int cmd_eval(const std::string& saliency_dir, const std::string& manifest,
                    const std::string& report_path, const std::string& roc_path,
                    std::ostream& err = std::cerr) {
    return detail::run_guarded(err, [&]() -> int {
        const std::vector<ManifestEntry> entries = load_manifest(manifest);
        if (entries.empty()) throw FormatError(manifest + ": manifest has no entries");
        const std::vector<std::int64_t> idx = detail::frame_indices(entries);

        std::vector<FrameRecord> records;
        std::vector<RocCurve> curves;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const std::string stem = detail::frame_stem(entries[i].seq, idx[i]);
            const std::string spath = saliency_dir + "/" + stem + ".pgm";
            if (!std::filesystem::exists(spath))
                throw IoError(spath + ": missing saliency map for manifest entry " +
                              std::to_string(i + 1));
            Image sal = decode_ppm(spath);
            if (sal.c != 1) throw FormatError(spath + ": saliency map must be P5");

            Image gt = decode_ppm(entries[i].gt);
            if (gt.c != 1) throw FormatError(entries[i].gt + ": ground truth must be P5");
            gt = resize_bilinear(gt, sal.h, sal.w);
            std::vector<std::uint8_t> mask(gt.pix.size());
            for (std::size_t p = 0; p < gt.pix.size(); ++p) mask[p] = gt.pix[p] >= 0.5f ? 1 : 0;

            auto [curve, auc] = roc_and_auc(sal.pix, mask);
            FrameScore fs = score_frame(sal.pix, mask);
            if (auc) curves.push_back(std::move(curve));
            records.push_back({entries[i].seq, stem, fs});
        }

        const MetricReport report = aggregate(records);

        std::ofstream rep(report_path);
        if (!rep) throw IoError(report_path + ": cannot open for writing");
        rep << "level,id,plcc,auc,nss,flags\n";
        auto cell = [](const std::optional<double>& v) {
            if (!v) return std::string();
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6f", *v);
            return std::string(buf);
        };
        for (const auto& f : report.frames)
            rep << "frame," << f.frame_id << ',' << cell(f.score.plcc) << ','
                << cell(f.score.auc) << ',' << cell(f.score.nss) << ','
                << flags_to_string(f.score.flags) << "\n";
        for (const auto& s : report.sequences)
            rep << "sequence," << s.id << ',' << cell(s.plcc) << ',' << cell(s.auc) << ','
                << cell(s.nss) << ",\n";
        rep << "dataset,dataset," << cell(report.dataset.plcc) << ',' << cell(report.dataset.auc)
            << ',' << cell(report.dataset.nss) << ",\n";
        if (!rep) throw IoError(report_path + ": write failed");

        std::ofstream roc(roc_path);
        if (!roc) throw IoError(roc_path + ": cannot open for writing");
        if (curves.empty()) {
            roc << "threshold,fpr,tpr\n";
        } else {
            write_roc_csv(roc, mean_roc(curves));
        }
        if (!roc) throw IoError(roc_path + ": write failed");
        return kExitOk;
    });
}

/// Runs the finite-difference suite; prints one line per op and fails (exit
/// 1) if any op exceeds the tolerance.
inline int cmd_gradcheck(std::uint64_t seed, std::ostream& out = std::cout,
                         std::ostream& err = std::cerr, const GradCheckOptions& opts = {}) {
    return detail::run_guarded(err, [&]() -> int {
        const std::vector<GradCheckResult> results = run_gradcheck_suite(seed, opts);
        bool all_ok = true;
        for (const auto& r : results) {
            char row[96];
            std::snprintf(row, sizeof row, "%-10s max_rel_err=%.3e %s\n", r.op.c_str(),
                          r.max_rel_err, r.ok() ? "ok" : "FAIL");
            out << row;
            all_ok = all_ok && r.ok();
        }
        if (!all_ok) {
            for (const auto& r : results)
                if (!r.ok()) err << "gradcheck failed: " << r.op << "\n";
            return kExitFailure;
        }
        return kExitOk;
    });
}

/// Thin wrapper over synth_generate; prints the manifest path.
inline int cmd_synth(const RunConfig& cfg, const std::string& out_dir,
                     std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return detail::run_guarded(err, [&]() -> int {
        const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
        const std::string manifest =
            synth_generate(dir, cfg.synth_sequences, cfg.synth_frames_per_seq, cfg.input_h,
                           cfg.input_w, cfg.seed);
        out << manifest << "\n";
        return kExitOk;
    });
}

} // namespace s3d
