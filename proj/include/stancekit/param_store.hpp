#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "stancekit/error.hpp"
#include "stancekit/rng.hpp"
#include "stancekit/tensor.hpp"

namespace stancekit {

/// Named parameter table with per-entry trainable flags, gradient buffers and
/// Adam moment state. Entries keep registration order so that every walk over
/// the store is deterministic.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor value;
        bool trainable = true;
    };

    Tensor& add(const std::string& name, Tensor value, bool trainable = true) {
        if (index_.count(name)) fail("numerics", "parameter already registered: " + name);
        index_.emplace(name, entries_.size());
        entries_.push_back(Entry{name, std::move(value), trainable});
        return entries_.back().value;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Tensor& tensor(const std::string& name) { return entry(name).value; }
    const Tensor& tensor(const std::string& name) const { return entry(name).value; }

    bool trainable(const std::string& name) const { return entry(name).trainable; }
    void set_trainable(const std::string& name, bool flag) { entry(name).trainable = flag; }

    void freeze_all() {
        for (auto& e : entries_) e.trainable = false;
    }

    /// Names in registration order.
    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.name);
        return out;
    }

    std::vector<std::string> trainable_names() const {
        std::vector<std::string> out;
        for (const auto& e : entries_)
            if (e.trainable) out.push_back(e.name);
        return out;
    }

    std::size_t size() const { return entries_.size(); }

    // -- gradients ---------------------------------------------------------

    bool has_grad(const std::string& name) const { return grads_.count(name) != 0; }

    /// Adds g into the (lazily created) gradient buffer for `name`.
    void accumulate_grad(const std::string& name, const Tensor& g) {
        const Entry& e = entry(name);
        if (!e.value.same_shape(g)) fail("numerics", "gradient shape mismatch for " + name);
        auto it = grads_.find(name);
        if (it == grads_.end()) it = grads_.emplace(name, Tensor(e.value.shape())).first;
        auto dst = it->second.data();
        auto src = g.data();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
    }

    const Tensor& grad(const std::string& name) const {
        auto it = grads_.find(name);
        if (it == grads_.end()) fail("numerics", "no gradient populated for " + name);
        return it->second;
    }

    void zero_grads() { grads_.clear(); }

    /// Gives every trainable entry that the last backward pass never reached
    /// an explicit zero gradient, so a full optimizer step is well defined
    /// even when an epoch's loss happens not to touch some head.
    void fill_missing_grads() {
        for (const auto& e : entries_)
            if (e.trainable && grads_.find(e.name) == grads_.end())
                grads_.emplace(e.name, Tensor(e.value.shape()));
    }

    // -- optimizer moments -------------------------------------------------

    struct Moments {
        Tensor m, v;
    };

    Moments& moments(const std::string& name) {
        auto it = moments_.find(name);
        if (it == moments_.end()) {
            const Entry& e = entry(name);
            it = moments_.emplace(name, Moments{Tensor(e.value.shape()), Tensor(e.value.shape())}).first;
        }
        return it->second;
    }

    bool has_moments(const std::string& name) const { return moments_.count(name) != 0; }

    // -- checkpoint archive --------------------------------------------------
    // Layout: 8-byte magic, little-endian u64 manifest length, JSON manifest,
    // then the concatenated raw little-endian float64 buffers. The manifest
    // records name/shape/trainable/offset/count per tensor plus free-form meta.

    void save(const std::string& path, const nlohmann::json& meta = nlohmann::json::object(),
              bool include_moments = false) const {
        nlohmann::json manifest;
        manifest["format"] = "stancekit-tensor-archive";
        manifest["version"] = 1;
        manifest["meta"] = meta;
        nlohmann::json tensors = nlohmann::json::array();
        std::uint64_t offset = 0;
        auto describe = [&](const std::string& name, const Tensor& t, bool trainable, const char* kind) {
            nlohmann::json item;
            item["name"] = name;
            item["shape"] = t.shape();
            item["trainable"] = trainable;
            item["kind"] = kind;
            item["offset"] = offset;
            item["count"] = t.size();
            offset += t.size();
            tensors.push_back(std::move(item));
        };
        for (const auto& e : entries_) describe(e.name, e.value, e.trainable, "param");
        if (include_moments) {
            for (const auto& e : entries_) {
                auto it = moments_.find(e.name);
                if (it == moments_.end()) continue;
                describe(e.name, it->second.m, e.trainable, "adam_m");
                describe(e.name, it->second.v, e.trainable, "adam_v");
            }
        }
        manifest["tensors"] = std::move(tensors);
        const std::string manifest_bytes = manifest.dump();

        std::ofstream out(path, std::ios::binary);
        if (!out) fail("numerics", "cannot open checkpoint for writing: " + path);
        out.write(kMagic, 8);
        write_u64(out, manifest_bytes.size());
        out.write(manifest_bytes.data(), static_cast<std::streamsize>(manifest_bytes.size()));
        for (const auto& e : entries_) write_buffer(out, e.value);
        if (include_moments) {
            for (const auto& e : entries_) {
                auto it = moments_.find(e.name);
                if (it == moments_.end()) continue;
                write_buffer(out, it->second.m);
                write_buffer(out, it->second.v);
            }
        }
        if (!out) fail("numerics", "write failed for checkpoint: " + path);
    }

    static ParamStore load(const std::string& path, nlohmann::json* meta_out = nullptr) {
        std::ifstream in(path, std::ios::binary);
        if (!in) fail("numerics", "cannot open checkpoint: " + path);
        char magic[8];
        in.read(magic, 8);
        if (!in || std::memcmp(magic, kMagic, 8) != 0)
            fail("numerics", "not a stancekit tensor archive: " + path);
        const std::uint64_t manifest_len = read_u64(in, path);
        std::string manifest_bytes(manifest_len, '\0');
        in.read(manifest_bytes.data(), static_cast<std::streamsize>(manifest_len));
        if (!in) fail("numerics", "truncated manifest in " + path);
        nlohmann::json manifest;
        try {
            manifest = nlohmann::json::parse(manifest_bytes);
        } catch (const nlohmann::json::exception& e) {
            fail("numerics", "bad manifest in " + path + ": " + e.what());
        }
        if (meta_out) *meta_out = manifest.value("meta", nlohmann::json::object());

        ParamStore store;
        for (const auto& item : manifest.at("tensors")) {
            const std::string name = item.at("name").get<std::string>();
            const auto shape = item.at("shape").get<std::vector<std::size_t>>();
            const std::string kind = item.value("kind", "param");
            Tensor t(shape);
            if (t.size() != item.at("count").get<std::uint64_t>())
                fail("numerics", "manifest count mismatch for " + name);
            read_buffer(in, t, path);
            if (kind == "param") {
                store.add(name, std::move(t), item.value("trainable", true));
            } else if (kind == "adam_m") {
                store.moments(name).m = std::move(t);
            } else if (kind == "adam_v") {
                store.moments(name).v = std::move(t);
            } else {
                fail("numerics", "unknown tensor kind '" + kind + "' in " + path);
            }
        }
        return store;
    }

    /// Copies entries whose name starts with `prefix` into `dst` (same names,
    /// chosen trainable flag). Returns the number of entries copied.
    std::size_t copy_prefix_into(const std::string& prefix, ParamStore& dst, bool trainable) const {
        std::size_t n = 0;
        for (const auto& e : entries_) {
            if (e.name.rfind(prefix, 0) == 0) {
                dst.add(e.name, e.value, trainable);
                ++n;
            }
        }
        return n;
    }

private:
    static constexpr const char kMagic[9] = "SKNTAR01";

    Entry& entry(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) fail("numerics", "unknown parameter: " + name);
        return entries_[it->second];
    }
    const Entry& entry(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) fail("numerics", "unknown parameter: " + name);
        return entries_[it->second];
    }

    static void write_u64(std::ofstream& out, std::uint64_t v) {
        unsigned char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }

    static std::uint64_t read_u64(std::ifstream& in, const std::string& path) {
        unsigned char bytes[8];
        in.read(reinterpret_cast<char*>(bytes), 8);
        if (!in) fail("numerics", "truncated archive: " + path);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
        return v;
    }

    // Buffers are always float64 on disk regardless of the in-memory Real.
    static void write_buffer(std::ofstream& out, const Tensor& t) {
        for (Real v : t.data()) {
            const double d = static_cast<double>(v);
            std::uint64_t bits;
            std::memcpy(&bits, &d, 8);
            write_u64_raw(out, bits);
        }
    }

    static void write_u64_raw(std::ofstream& out, std::uint64_t v) {
        unsigned char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }

    static void read_buffer(std::ifstream& in, Tensor& t, const std::string& path) {
        for (Real& v : t.data()) {
            unsigned char bytes[8];
            in.read(reinterpret_cast<char*>(bytes), 8);
            if (!in) fail("numerics", "truncated tensor data in " + path);
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
            double d;
            std::memcpy(&d, &bits, 8);
            v = static_cast<Real>(d);
        }
    }

    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    std::unordered_map<std::string, Tensor> grads_;
    std::unordered_map<std::string, Moments> moments_;
};

// Initialization helpers shared by every trainable module.

/// Uniform in +/- sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out,
                             std::vector<std::size_t> shape, RngStream& rng) {
    Tensor t(std::move(shape));
    const Real bound = static_cast<Real>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
    for (Real& v : t.data()) v = static_cast<Real>(rng.uniform(-bound, bound));
    return t;
}

/// Standard normal scaled by 1/sqrt(d); used for concept feature rows.
inline Tensor scaled_normal(std::vector<std::size_t> shape, std::size_t d, RngStream& rng) {
    Tensor t(std::move(shape));
    const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(d)));
    for (Real& v : t.data()) v = static_cast<Real>(rng.normal()) * scale;
    return t;
}

} // namespace stancekit
