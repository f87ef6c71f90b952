#pragma once

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "s3d/error.hpp"

namespace s3d {

/// One training/eval unit: three consecutive frame paths plus the ground
/// truth of the middle frame.
struct ManifestEntry {
    std::string seq;
    std::array<std::string, 3> frames;
    std::string gt;
};

/// Parses a JSONL manifest: one {"seq": ..., "frames": [p0,p1,p2], "gt": ...}
/// object per non-empty line, order preserved. Errors name the line number.
inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open manifest");
    std::vector<ManifestEntry> entries;
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(where + ": malformed JSON: " + e.what());
        }
        if (!j.is_object() || !j.contains("seq") || !j.contains("frames") || !j.contains("gt"))
            throw FormatError(where + ": entry needs keys seq, frames, gt");
        if (!j["frames"].is_array() || j["frames"].size() != 3)
            throw FormatError(where + ": frames must be an array of exactly 3 paths");
        ManifestEntry e;
        try {
            e.seq = j["seq"].get<std::string>();
            for (int i = 0; i < 3; ++i) e.frames[static_cast<std::size_t>(i)] = j["frames"][static_cast<std::size_t>(i)].get<std::string>();
            e.gt = j["gt"].get<std::string>();
        } catch (const nlohmann::json::exception& e2) {
            throw FormatError(where + ": bad field type: " + e2.what());
        }
        if (e.seq.empty() || e.gt.empty() || e.frames[0].empty() || e.frames[1].empty() ||
            e.frames[2].empty())
            throw FormatError(where + ": paths and sequence id must be non-empty");
        entries.push_back(std::move(e));
    }
    return entries;
}

} // namespace s3d
