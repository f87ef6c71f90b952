#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "s3d/error.hpp"
#include "s3d/net.hpp"
#include "s3d/optim.hpp"

namespace s3d {

/// One serialized tensor. The file layout is, all integers little-endian:
///   magic "S3DN" | version u32 = 1 | tensor count u32 |
///   per tensor: name length u32, UTF-8 name, rank u32, dims u64[rank],
///               payload as 32-bit floats, row-major.
struct NamedTensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<float> values;

    std::uint64_t elem_count() const {
        std::uint64_t n = 1;
        for (std::uint64_t d : dims) n *= d;
        return n;
    }
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

inline std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() != 4) throw CheckpointError(path + ": truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (is.gcount() != 8) throw CheckpointError(path + ": truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

} // namespace detail

inline void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
    {
        std::map<std::string, int> seen;
        for (const auto& t : tensors) {
            if (++seen[t.name] > 1)
                throw CheckpointError(path + ": duplicate tensor name '" + t.name + "'");
            if (t.elem_count() != t.values.size())
                throw CheckpointError(path + ": tensor '" + t.name +
                                      "' dims do not match payload length");
        }
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(path + ": cannot open for writing");
    os.write("S3DN", 4);
    detail::put_u32(os, 1);
    detail::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        detail::put_u32(os, static_cast<std::uint32_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        detail::put_u32(os, static_cast<std::uint32_t>(t.dims.size()));
        for (std::uint64_t d : t.dims) detail::put_u64(os, d);
        for (float v : t.values) detail::put_f32(os, v);
    }
    if (!os) throw IoError(path + ": write failed");
}

inline std::vector<NamedTensor> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError(path + ": cannot open checkpoint");
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::string(magic, 4) != "S3DN")
        throw CheckpointError(path + ": bad magic (not an S3DN checkpoint)");
    const std::uint32_t version = detail::get_u32(is, path);
    if (version != 1)
        throw CheckpointError(path + ": unsupported version " + std::to_string(version));
    const std::uint32_t count = detail::get_u32(is, path);
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    std::map<std::string, int> seen;
    for (std::uint32_t ti = 0; ti < count; ++ti) {
        NamedTensor t;
        const std::uint32_t name_len = detail::get_u32(is, path);
        t.name.resize(name_len);
        is.read(t.name.data(), name_len);
        if (is.gcount() != static_cast<std::streamsize>(name_len))
            throw CheckpointError(path + ": truncated checkpoint");
        if (++seen[t.name] > 1)
            throw CheckpointError(path + ": duplicate tensor name '" + t.name + "'");
        const std::uint32_t rank = detail::get_u32(is, path);
        if (rank > 32) throw CheckpointError(path + ": implausible tensor rank");
        t.dims.resize(rank);
        for (std::uint32_t i = 0; i < rank; ++i) t.dims[i] = detail::get_u64(is, path);
        std::uint64_t n = 1;
        for (std::uint64_t d : t.dims) {
            if (d != 0 && n > (std::uint64_t(1) << 33) / d)
                throw CheckpointError(path + ": implausible tensor size for '" + t.name + "'");
            n *= d;
        }
        t.values.resize(n);
        for (std::uint64_t i = 0; i < n; ++i)
            t.values[i] = std::bit_cast<float>(detail::get_u32(is, path));
        tensors.push_back(std::move(t));
    }
    // Reject trailing garbage rather than silently ignoring it.
    char extra;
    if (is.read(&extra, 1) && is.gcount() == 1)
        throw CheckpointError(path + ": trailing bytes after declared tensors");
    return tensors;
}

// -- model <-> tensor list glue ---------------------------------------------

namespace detail {

inline NamedTensor vec_tensor(const std::string& name, const std::vector<float>& v) {
    return NamedTensor{name, {static_cast<std::uint64_t>(v.size())}, v};
}

} // namespace detail

/// Flattens model parameters (and optionally Adam state, under the reserved
/// `adam/` prefix) into the checkpoint tensor list. Deterministic order.
inline std::vector<NamedTensor> checkpoint_tensors(const ModelParams<float>& params,
                                                   const AdamState<float>* adam = nullptr) {
    std::vector<NamedTensor> out;
    auto add_kernel = [&](const std::string& name, const Kernel3D<float>& k) {
        const Shape5& s = k.weights.shape();
        out.push_back(NamedTensor{
            name + ".weight",
            {static_cast<std::uint64_t>(s.n), static_cast<std::uint64_t>(s.d),
             static_cast<std::uint64_t>(s.h), static_cast<std::uint64_t>(s.w),
             static_cast<std::uint64_t>(s.c)},
            std::vector<float>(k.weights.data(), k.weights.data() + k.weights.size())});
        out.push_back(detail::vec_tensor(name + ".bias", k.bias));
    };
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const auto& lp = params.layers[i];
        const std::string& ln = params.layer_names[i];
        add_kernel(ln, lp.kernel);
        out.push_back(detail::vec_tensor(ln + ".bn_gamma", lp.bn.gamma));
        out.push_back(detail::vec_tensor(ln + ".bn_beta", lp.bn.beta));
        out.push_back(detail::vec_tensor(ln + ".bn_running_mean", lp.bn.running_mean));
        out.push_back(detail::vec_tensor(ln + ".bn_running_var", lp.bn.running_var));
    }
    add_kernel("head", params.head);
    if (adam) {
        out.push_back(NamedTensor{"adam/t", {1}, {static_cast<float>(adam->t)}});
        auto& p = const_cast<ModelParams<float>&>(params);
        const auto views = flat_param_views(p);
        if (views.size() != adam->slots.size())
            throw CheckpointError("checkpoint_tensors: Adam state misaligned with params");
        for (std::size_t i = 0; i < views.size(); ++i) {
            out.push_back(detail::vec_tensor("adam/" + views[i].name + "/m", adam->slots[i].m));
            out.push_back(detail::vec_tensor("adam/" + views[i].name + "/v", adam->slots[i].v));
        }
    }
    return out;
}

/// Model (plus optional Adam moments) restored from checkpoint tensors.
struct RestoredModel {
    ModelParams<float> params;
    std::optional<AdamState<float>> adam;
};

inline RestoredModel model_from_tensors(const ArchPreset& preset,
                                        const std::vector<NamedTensor>& tensors) {
    RestoredModel rm{params_skeleton<float>(preset), std::nullopt};
    std::map<std::string, const NamedTensor*> by_name;
    for (const auto& t : tensors) by_name[t.name] = &t;

    auto take_vec = [&](const std::string& name, std::vector<float>& dst) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw CheckpointError("checkpoint is missing tensor '" + name + "'");
        if (it->second->dims.size() != 1 || it->second->values.size() != dst.size())
            throw CheckpointError("checkpoint tensor '" + name + "' has wrong shape");
        dst = it->second->values;
        by_name.erase(it);
    };
    auto take_kernel = [&](const std::string& name, Kernel3D<float>& k) {
        auto it = by_name.find(name + ".weight");
        if (it == by_name.end())
            throw CheckpointError("checkpoint is missing tensor '" + name + ".weight'");
        const NamedTensor& t = *it->second;
        const Shape5& s = k.weights.shape();
        const std::vector<std::uint64_t> want = {
            static_cast<std::uint64_t>(s.n), static_cast<std::uint64_t>(s.d),
            static_cast<std::uint64_t>(s.h), static_cast<std::uint64_t>(s.w),
            static_cast<std::uint64_t>(s.c)};
        if (t.dims != want || t.values.size() != static_cast<std::size_t>(k.weights.size()))
            throw CheckpointError("checkpoint tensor '" + name + ".weight' has wrong shape");
        std::copy(t.values.begin(), t.values.end(), k.weights.data());
        by_name.erase(it);
        take_vec(name + ".bias", k.bias);
    };

    for (std::size_t i = 0; i < rm.params.layers.size(); ++i) {
        auto& lp = rm.params.layers[i];
        const std::string& ln = rm.params.layer_names[i];
        take_kernel(ln, lp.kernel);
        take_vec(ln + ".bn_gamma", lp.bn.gamma);
        take_vec(ln + ".bn_beta", lp.bn.beta);
        take_vec(ln + ".bn_running_mean", lp.bn.running_mean);
        take_vec(ln + ".bn_running_var", lp.bn.running_var);
    }
    take_kernel("head", rm.params.head);

    if (by_name.count("adam/t")) {
        AdamState<float> st;
        auto it = by_name.find("adam/t");
        if (it->second->values.size() != 1)
            throw CheckpointError("checkpoint tensor 'adam/t' has wrong shape");
        st.t = static_cast<std::int64_t>(it->second->values[0]);
        by_name.erase(it);
        const auto views = flat_param_views(rm.params);
        st.slots.resize(views.size());
        for (std::size_t i = 0; i < views.size(); ++i) {
            st.slots[i].m.resize(static_cast<std::size_t>(views[i].size));
            st.slots[i].v.resize(static_cast<std::size_t>(views[i].size));
            take_vec("adam/" + views[i].name + "/m", st.slots[i].m);
            take_vec("adam/" + views[i].name + "/v", st.slots[i].v);
        }
        rm.adam = std::move(st);
    }
    if (!by_name.empty())
        throw CheckpointError("checkpoint has unexpected tensor '" + by_name.begin()->first + "'");
    return rm;
}

/// save(params [, adam]) / load round trip for a whole model.
inline void save_model(const std::string& path, const ModelParams<float>& params,
                       const AdamState<float>* adam = nullptr) {
    save_checkpoint(path, checkpoint_tensors(params, adam));
}

inline RestoredModel load_model(const std::string& path, const ArchPreset& preset) {
    return model_from_tensors(preset, load_checkpoint(path));
}

} // namespace s3d
